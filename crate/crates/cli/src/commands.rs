use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use advmanifold::analysis::{attack_direction_profile, eigen_ratio, spectra_compare};
use advmanifold::attack::{attack, AttackSurface, Budget};
use advmanifold::io::{cell, opt_cell, read_matrix, read_model, write_matrix, write_model, CsvTable};
use advmanifold::ppca::{self, ml_noise_variance};
use advmanifold::risk::{excess_risk_eig_exact, excess_risk_gen_closed, excess_risk_mc, AttackSpec};
use advmanifold::shift::{eat_spectrum_closed, gat_spectrum_closed, simulate_minmax, MinmaxConfig};
use advmanifold::spectral::{covariance, eigh_sym, sample_mean, top_bottom_basis};
use advmanifold::{mc, verify};
use advmanifold::{ExcessRiskReport, GaussianModel, Label, Matrix, PpcaModel, ShiftMode, Strategy, SubspaceBasis, Vector};
use thiserror::Error;

use crate::args::{AttackArgs, Demo2dArgs, ExcessRiskArgs, FitPpcaArgs, Mode, ShiftArgs, SpectraArgs, VerifyArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid parameter `{name}`: {reason}")]
    Invalid { name: &'static str, reason: String },
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: advmanifold::Error },
    #[error(transparent)]
    Core(#[from] advmanifold::Error),
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        CliError::Invalid { name, reason: reason.into() }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) | CliError::File { source: e, .. } if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read_data(path: &Path) -> Result<Matrix> {
    read_matrix(path).map_err(|source| CliError::File { path: path.to_owned(), source })
}

fn write_table(table: &CsvTable, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => table.write(path)?,
        None => {
            let stdout = io::stdout();
            table.write_to(stdout.lock())?;
        }
    }
    Ok(())
}

/// Gaussian with the sample mean and (biased) sample covariance of `data`.
fn fit_gaussian(data: &Matrix) -> Result<GaussianModel> {
    let mean = sample_mean(data)?;
    let cov = covariance(data, Some(&mean))?;
    Ok(GaussianModel::new(mean, cov)?)
}

fn diagonal_model(lambdas: &[f64]) -> Result<GaussianModel> {
    let d = lambdas.len();
    Ok(GaussianModel::new(
        Vector::zeros(d),
        Matrix::from_diagonal(&Vector::from_column_slice(lambdas)),
    )?)
}

fn check_spectrum(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(CliError::invalid("lambdas", "need at least one eigenvalue"));
    }
    if lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(CliError::invalid("lambdas", "must be finite and non-negative"));
    }
    if lambdas.windows(2).any(|w| w[0] < w[1]) {
        return Err(CliError::invalid("lambdas", "must be sorted in descending order"));
    }
    Ok(())
}

fn check_q(q: usize, d: usize) -> Result<()> {
    if q == 0 || q > d {
        return Err(CliError::invalid("q", format!("{q} outside 1..={d}")));
    }
    Ok(())
}

pub fn fit_ppca(args: &FitPpcaArgs) -> Result<()> {
    let data = read_data(&args.data)?;
    let d = data.ncols();
    if args.q == 0 || args.q >= d {
        return Err(CliError::invalid("q", format!("{} outside 1..{d}", args.q)));
    }
    let theta = fit_gaussian(&data)?;
    let model = ppca::fit(theta.decomposition(), theta.mu(), args.q)?;
    write_model(&args.out, &model)?;
    Ok(())
}

/// What the attack of one class needs.
enum Surface {
    Generative(PpcaModel),
    Eigenspace(SubspaceBasis),
}

struct ClassAttack {
    theta: GaussianModel,
    surface: Surface,
}

impl ClassAttack {
    fn build(data: &Matrix, args: &AttackArgs, model: Option<&PpcaModel>) -> Result<Self> {
        let theta = fit_gaussian(data)?;
        let d = theta.dim();
        let surface = match args.mode {
            Mode::Generative => match model {
                Some(m) => {
                    if m.dim() != d {
                        return Err(CliError::invalid("model", format!("dimension {} does not match data dimension {d}", m.dim())));
                    }
                    Surface::Generative(m.clone())
                }
                None => {
                    let q = args.q.ok_or_else(|| CliError::invalid("q", "required when no --model is given"))?;
                    if q == 0 || q >= d {
                        return Err(CliError::invalid("q", format!("{q} outside 1..{d}")));
                    }
                    Surface::Generative(ppca::fit(theta.decomposition(), theta.mu(), q)?)
                }
            },
            Mode::Eigenspace => {
                let q = args.q.ok_or_else(|| CliError::invalid("q", "required for eigenspace attacks"))?;
                check_q(q, d)?;
                Surface::Eigenspace(top_bottom_basis(theta.decomposition(), q, args.which.into())?)
            }
        };
        Ok(Self { theta, surface })
    }

    /// Attacks row `x`; generative attacks start from the strategy's sample `x'`.
    fn run(&self, index: usize, x: &Vector, budget: Budget, args: &AttackArgs) -> Result<advmanifold::AttackResult> {
        match &self.surface {
            Surface::Generative(model) => {
                let mut rng = mc::rng(args.seed.unwrap_or(0), index as u64);
                let sampler = model.sampler(args.strategy)?;
                let source = (args.strategy != Strategy::Three).then_some(x);
                let (x_prime, _) = sampler.draw(source, &Vector::zeros(model.q()), &mut rng)?;
                Ok(attack(&self.theta, AttackSurface::Generative(model), &x_prime, budget)?)
            }
            Surface::Eigenspace(basis) => Ok(attack(&self.theta, AttackSurface::Eigenspace(basis), x, budget)?),
        }
    }
}

pub fn attack_dataset(args: &AttackArgs) -> Result<()> {
    let budget = match (args.epsilon, args.multiplier) {
        (Some(e), None) => Budget::Radius(e),
        (None, Some(l)) => Budget::Multiplier(l),
        _ => return Err(CliError::invalid("epsilon", "give exactly one of --epsilon and --L")),
    };
    if args.strategy != Strategy::One && args.seed.is_none() {
        return Err(CliError::invalid("seed", format!("required for sampling strategy {}", args.strategy)));
    }
    if args.mode == Mode::Eigenspace && args.model.is_some() {
        return Err(CliError::invalid("model", "only used by generative attacks"));
    }
    let table = read_data(&args.data)?;
    let (points, labels) = if args.labeled {
        if table.ncols() < 2 {
            return Err(CliError::invalid("labeled", "need at least one feature column besides the label"));
        }
        let d = table.ncols() - 1;
        let labels = table
            .column(d)
            .iter()
            .map(|&y| Label::try_from(y))
            .collect::<advmanifold::Result<Vec<_>>>()?;
        (table.columns(0, d).into_owned(), Some(labels))
    } else {
        (table, None)
    };
    let model = match &args.model {
        Some(path) => Some(read_model(path).map_err(|source| CliError::File { path: path.clone(), source })?),
        None => None,
    };
    if labels.is_some() && model.is_some() {
        return Err(CliError::invalid("model", "per-class models are fitted from the data; drop --model with --labeled"));
    }

    // one class holding every row when the data is unlabeled
    let classes: Vec<Vec<usize>> = match &labels {
        None => vec![(0..points.nrows()).collect()],
        Some(labels) => [Label::Positive, Label::Negative]
            .iter()
            .map(|c| (0..labels.len()).filter(|&i| labels[i] == *c).collect())
            .collect(),
    };

    let d = points.ncols();
    let mut adv = Matrix::zeros(points.nrows(), d);
    let mut report = CsvTable::new(["index", "multiplier", "delta_norm", "loss_clean", "loss_adv"]);
    let mut rows: Vec<Option<Vec<String>>> = vec![None; points.nrows()];
    for members in classes.iter().filter(|m| !m.is_empty()) {
        let subset = points.select_rows(members.iter());
        let class = ClassAttack::build(&subset, args, model.as_ref())?;
        for &i in members {
            let x = points.row(i).transpose();
            let res = class.run(i, &x, budget, args)?;
            adv.set_row(i, &res.x_adv.transpose());
            rows[i] = Some(vec![
                (i + 1).to_string(),
                cell(res.multiplier),
                cell(res.delta.norm()),
                cell(res.loss_clean),
                cell(res.loss_adv),
            ]);
        }
    }
    match &labels {
        None => write_matrix(&args.out, &adv)?,
        Some(labels) => {
            let mut out = CsvTable::new((1..=d).map(|j| format!("x{j}")).chain(["y".to_string()]));
            for (i, row) in adv.row_iter().enumerate() {
                let mut cells: Vec<String> = row.iter().map(|&v| cell(v)).collect();
                cells.push(cell(labels[i].sign()));
                out.push(cells)?;
            }
            out.write(&args.out)?;
        }
    }
    if let Some(path) = &args.report {
        for row in rows.into_iter().flatten() {
            report.push(row)?;
        }
        report.write(path)?;
    }
    Ok(())
}

const EXCESS_RISK_HEADER: [&str; 11] = [
    "mode",
    "q",
    "d",
    "L",
    "closed_form",
    "perturbation_term",
    "distribution_term",
    "mc_estimate",
    "mc_stderr",
    "n",
    "seed",
];

pub fn excess_risk(args: &ExcessRiskArgs) -> Result<()> {
    let q = args.q;
    let lambdas: Vec<f64> = if args.rankq {
        let d = args.d.unwrap_or(q + 1);
        check_q(q, d)?;
        (0..d).map(|i| if i < q { (q - i) as f64 } else { 0.0 }).collect()
    } else {
        args.lambdas.clone()
    };
    check_spectrum(&lambdas)?;
    let d = lambdas.len();
    check_q(q, d)?;
    if args.multipliers.iter().any(|l| !l.is_finite()) {
        return Err(CliError::invalid("L", "every multiplier must be finite"));
    }
    if args.mc.is_some_and(|n| n < 2) {
        return Err(CliError::invalid("mc", "need at least 2 samples"));
    }
    let theta = diagonal_model(&lambdas)?;
    let basis = top_bottom_basis(theta.decomposition(), q, args.which.into())?;
    // eigenvalues of the attacked subspace, as quadratic forms of its basis
    let subspace: Vec<f64> = basis
        .columns()
        .column_iter()
        .map(|b| b.dot(&(theta.sigma() * b)).max(0.0))
        .collect();

    let mut table = CsvTable::new(EXCESS_RISK_HEADER);
    for &multiplier in &args.multipliers {
        let (report, spec) = match args.mode {
            Mode::Generative => {
                let sigma2 = if q < d { ml_noise_variance(&lambdas, q) } else { 0.0 };
                let report = excess_risk_gen_closed(&lambdas, sigma2, q, multiplier, args.strategy, args.variant.into())?;
                (report, AttackSpec::Generative { q, strategy: args.strategy, multiplier })
            }
            Mode::Eigenspace => {
                let closed = excess_risk_eig_exact(&subspace, multiplier)?;
                let report = ExcessRiskReport {
                    closed_form: closed,
                    perturbation_term: closed,
                    distribution_term: 0.0,
                    mc_estimate: None,
                    mc_stderr: None,
                };
                (report, AttackSpec::Eigenspace { basis: &basis, multiplier })
            }
        };
        let report = match (args.mc, args.seed) {
            (Some(n), Some(seed)) => report.with_mc(excess_risk_mc(&theta, spec, n, seed)?),
            _ => report,
        };
        table.push(vec![
            args.mode.name().to_string(),
            q.to_string(),
            d.to_string(),
            cell(multiplier),
            cell(report.closed_form),
            cell(report.perturbation_term),
            cell(report.distribution_term),
            opt_cell(report.mc_estimate),
            opt_cell(report.mc_stderr),
            args.mc.map(|n| n.to_string()).unwrap_or_default(),
            args.mc.and(args.seed).map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    write_table(&table, args.out.as_deref())
}

const SHIFT_HEADER: [&str; 7] = [
    "index",
    "lambda_source",
    "lambda_closed",
    "lambda_simulated",
    "ratio",
    "iterations",
    "converged",
];

pub fn shift(args: &ShiftArgs) -> Result<()> {
    let theta = match &args.data {
        Some(path) => fit_gaussian(&read_data(path)?)?,
        None => {
            check_spectrum(&args.lambdas)?;
            diagonal_model(&args.lambdas)?
        }
    };
    let lambdas = theta.decomposition().eigenvalues().to_vec();
    let d = lambdas.len();
    check_q(args.q, d)?;
    let budget = match (args.multiplier, args.epsilon) {
        (Some(l), None) => Budget::Multiplier(l),
        (None, Some(e)) => Budget::Radius(e),
        _ => return Err(CliError::invalid("L", "give exactly one of --L and --epsilon")),
    };
    if args.tol.is_nan() || args.tol <= 0.0 {
        return Err(CliError::invalid("tol", "must be positive"));
    }
    let mode = match args.mode {
        Mode::Generative => ShiftMode::Generative(args.strategy),
        Mode::Eigenspace => ShiftMode::Eigenspace,
    };
    let trace = simulate_minmax(
        &theta,
        &MinmaxConfig {
            mode,
            q: args.q,
            budget,
            tol: args.tol,
            max_iter: args.max_iter,
        },
    )?;
    let multiplier = *trace.multipliers.last().expect("at least one attacker step");
    let closed = match args.mode {
        Mode::Generative => {
            let sigma2 = if args.q < d { ml_noise_variance(&lambdas, args.q) } else { 0.0 };
            gat_spectrum_closed(&lambdas, sigma2, args.q, multiplier, args.strategy)?
        }
        Mode::Eigenspace => eat_spectrum_closed(&lambdas, args.q, multiplier)?,
    };
    let mut table = CsvTable::new(SHIFT_HEADER);
    for (i, ((&source, &out), &sim)) in lambdas
        .iter()
        .zip(&closed.lambdas_out)
        .zip(trace.final_spectrum())
        .enumerate()
    {
        table.push(vec![
            (i + 1).to_string(),
            cell(source),
            cell(out),
            cell(sim),
            cell(eigen_ratio(source, out)),
            trace.iterations.to_string(),
            trace.converged.to_string(),
        ])?;
    }
    write_table(&table, args.out.as_deref())
}

pub fn demo2d(args: &Demo2dArgs) -> Result<()> {
    if args.lambdas.len() != 2 {
        return Err(CliError::invalid("lambdas", format!("need exactly two eigenvalues, got {}", args.lambdas.len())));
    }
    check_spectrum(&args.lambdas)?;
    if args.lambdas[1] <= 0.0 {
        return Err(CliError::invalid("lambdas", "both eigenvalues must be positive"));
    }
    if args.n == 0 {
        return Err(CliError::invalid("n", "must be at least 1"));
    }
    if !args.epsilon.is_finite() || args.epsilon <= 0.0 {
        return Err(CliError::invalid("epsilon", "must be positive and finite"));
    }
    fs::create_dir_all(&args.out_dir).map_err(advmanifold::Error::from)?;
    let source = diagonal_model(&args.lambdas)?;
    let simulate = |mode| {
        simulate_minmax(
            &source,
            &MinmaxConfig {
                mode,
                q: 2,
                budget: Budget::Multiplier(args.multiplier),
                tol: 1e-12,
                max_iter: 10_000,
            },
        )
    };
    let eat = GaussianModel::new(Vector::zeros(2), simulate(ShiftMode::Eigenspace)?.final_covariance().clone())?;
    let gat = GaussianModel::new(
        Vector::zeros(2),
        simulate(ShiftMode::Generative(Strategy::One))?.final_covariance().clone(),
    )?;

    // every panel reuses the same seed, so points correspond across panels
    let a = source.sample(args.n, args.seed)?;
    let b = eat.sample(args.n, args.seed)?;
    let loadings = Matrix::from_diagonal(&Vector::from_iterator(2, args.lambdas.iter().map(|l| l.sqrt())));
    // panel c: each source point moved to a uniform point of its latent ε-circle
    let isotropic = diagonal_model(&[1.0, 1.0])?;
    let c = mc::sample_rows(args.n, 2, args.seed, |rng| {
        let centre = source.draw(rng);
        let g = isotropic.draw(rng);
        let scale = args.epsilon / g.norm();
        Ok(centre + &loadings * (g * scale))
    })?;
    let d = gat.sample(args.n, args.seed)?;

    for (name, points) in [("a", &a), ("b", &b), ("c", &c), ("d", &d)] {
        let mut table = CsvTable::new(["x1", "x2", "panel"]);
        for row in points.row_iter() {
            table.push(vec![cell(row[0]), cell(row[1]), name.to_string()])?;
        }
        table.write(&args.out_dir.join(format!("panel_{name}.csv")))?;
    }
    Ok(())
}

pub fn spectra(args: &SpectraArgs) -> Result<()> {
    let clean = read_data(&args.clean)?;
    let adv = read_data(&args.adv)?;
    let cmp = spectra_compare(&clean, &adv)?;
    let mut table = CsvTable::new(["index", "lambda_clean", "lambda_adv", "ratio"]);
    for i in 0..cmp.indices.len() {
        table.push(vec![
            cmp.indices[i].to_string(),
            cell(cmp.lambda_clean[i]),
            cell(cmp.lambda_adv[i]),
            cell(cmp.ratio[i]),
        ])?;
    }
    write_table(&table, args.out.as_deref())?;
    if let Some(path) = &args.profile {
        let basis = eigh_sym(&covariance(&clean, None)?)?;
        let profile = attack_direction_profile(&clean, &adv, &basis)?;
        let mut table = CsvTable::new(["index", "lambda_clean", "mean_abs_projection"]);
        for (i, &coord) in profile.coords.iter().enumerate() {
            table.push(vec![
                coord.to_string(),
                cell(basis.eigenvalues()[i]),
                cell(profile.mean_abs_projection[i]),
            ])?;
        }
        table.write(path)?;
    }
    Ok(())
}

pub fn run_verify(args: &VerifyArgs) -> Result<()> {
    for name in &args.only {
        if !verify::CRITERIA.iter().any(|c| c.name == name) {
            let known: Vec<&str> = verify::CRITERIA.iter().map(|c| c.name).collect();
            return Err(CliError::invalid("only", format!("unknown check `{name}`; known: {}", known.join(", "))));
        }
    }
    let selected = verify::CRITERIA
        .iter()
        .filter(|c| args.only.is_empty() || args.only.iter().any(|n| n == c.name));
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let (mut total, mut failed) = (0, 0);
    for criterion in selected {
        let check = (criterion.run)(args.seed);
        writeln!(out, "{check}").map_err(advmanifold::Error::from)?;
        out.flush().map_err(advmanifold::Error::from)?;
        total += 1;
        failed += usize::from(!check.passed);
    }
    if failed > 0 {
        return Err(CliError::ChecksFailed { failed, total });
    }
    Ok(())
}
