//! Oracle suite behind the `verify` command.
//!
//! Every check compares a closed form against an independent computation
//! (Monte-Carlo, brute-force search, iteration or direct evaluation) at a pinned
//! tolerance and reports a single [`Check`]. Details are printed with fixed
//! precision so that two runs with the same seed produce identical text.

use std::fmt;

use nalgebra::QR;
use rand::Rng;

use crate::analysis::{attack_direction_profile, spectra_compare};
use crate::attack::{brute_force_oracle, penalized_gradient, OracleMode, PenalizedAttack};
use crate::error::{Error, Result};
use crate::gmm::{standard_normal, GaussianModel};
use crate::mc::{self, McRng};
use crate::ppca::{self, strategy_lambdas, Strategy};
use crate::risk::{excess_risk_eig_bounds, excess_risk_eig_exact, excess_risk_gen_closed, excess_risk_mc, AttackSpec, Variant};
use crate::shift::{eat_spectrum_closed, fixed_point_solve, gat_spectrum_closed, simulate_minmax, MinmaxConfig, ShiftMode};
use crate::spectral::{covariance, top_bottom_basis, SpectralDecomposition, SubspaceBasis, Which};
use crate::attack::Budget;
use crate::{Matrix, Vector};

pub const MC_SAMPLES: usize = 1_000_000;
pub const MC_SIGMAS: f64 = 3.0;
pub const SCALING_TOL: f64 = 0.01;
pub const SANDWICH_CASES: usize = 1000;
pub const ORACLE_CASES: usize = 500;
pub const ORACLE_LOSS_TOL: f64 = 1e-6;
pub const GRADIENT_TOL: f64 = 1e-8;
pub const FIXED_POINT_REL_TOL: f64 = 1e-6;
pub const SIMULATION_ABS_TOL: f64 = 1e-3;
pub const SIMULATION_RATIO_TOL: f64 = 1e-6;
pub const COVARIANCE_REL_TOL: f64 = 0.05;
pub const STRATEGY_SAMPLES: usize = 100_000;
pub const IDENTITY_TOL: f64 = 1e-12;
pub const SPECTRA_SAMPLES: usize = 100_000;
pub const SPECTRA_REL_TOL: f64 = 0.05;
pub const OFF_MANIFOLD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    fn from_result(name: &'static str, result: Result<(bool, String)>) -> Self {
        match result {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

/// One entry of the suite.
pub struct Criterion {
    pub name: &'static str,
    pub run: fn(u64) -> Check,
}

pub const CRITERIA: [Criterion; 10] = [
    Criterion { name: "excess-risk-mc", run: excess_risk_agreement },
    Criterion { name: "excess-risk-scaling", run: scaling_law },
    Criterion { name: "eigenspace-sandwich", run: eigenspace_sandwich },
    Criterion { name: "perturbation-optimality", run: perturbation_optimality },
    Criterion { name: "robust-spectrum-fixed-point", run: robust_spectrum_fixed_point },
    Criterion { name: "minmax-simulation", run: minmax_simulation },
    Criterion { name: "sampling-strategies", run: sampling_strategies },
    Criterion { name: "spectral-analysis", run: spectral_analysis },
    Criterion { name: "infinity-semantics", run: infinity_semantics },
    Criterion { name: "seeded-determinism", run: seeded_determinism },
];

/// Runs every check in order.
pub fn run_all(seed: u64) -> Vec<Check> {
    CRITERIA.iter().map(|c| (c.run)(seed)).collect()
}

fn rank_q_spectrum(q: usize) -> Vec<f64> {
    (0..=q).map(|i| if i < q { (q - i) as f64 } else { 0.0 }).collect()
}

fn diagonal_model(lambdas: &[f64]) -> Result<GaussianModel> {
    let d = lambdas.len();
    GaussianModel::new(Vector::zeros(d), Matrix::from_diagonal(&Vector::from_column_slice(lambdas)))
}

fn random_rotation(d: usize, rng: &mut McRng) -> Matrix {
    let g = Matrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    QR::new(g).q()
}

fn descending(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Monte-Carlo excess risk of the generative attack on rank-q data against
/// `(q/2)[(1 + 1/(L-1))² - 1]` for `q ∈ {1,2,5}`, `L ∈ {2,3,5,10}`.
pub fn excess_risk_agreement(seed: u64) -> Check {
    excess_risk_agreement_with(seed, MC_SAMPLES)
}

pub fn excess_risk_agreement_with(seed: u64, n: usize) -> Check {
    let run = || -> Result<(bool, String)> {
        let mut worst: f64 = 0.0;
        let mut failures = Vec::new();
        for q in [1usize, 2, 5] {
            let lambdas = rank_q_spectrum(q);
            let theta = diagonal_model(&lambdas)?;
            for l in [2.0, 3.0, 5.0, 10.0] {
                let closed = excess_risk_gen_closed(&lambdas, 0.0, q, l, Strategy::One, Variant::Literal)?.closed_form;
                let formula = 0.5 * q as f64 * ((1.0 + 1.0 / (l - 1.0)).powi(2) - 1.0);
                let spec = AttackSpec::Generative {
                    q,
                    strategy: Strategy::One,
                    multiplier: l,
                };
                let est = excess_risk_mc(&theta, spec, n, seed)?;
                let z = (est.mean - closed).abs() / est.stderr;
                worst = worst.max(z);
                if !(z <= MC_SIGMAS) || (closed - formula).abs() > 1e-12 * formula {
                    failures.push(format!("q={q} L={l}: closed {closed:.6} mc {:.6} ± {:.6}", est.mean, est.stderr));
                }
            }
        }
        let detail = if failures.is_empty() {
            format!("12 configurations, n={n}, max |closed-mc|/stderr = {worst:.3} (limit {MC_SIGMAS})")
        } else {
            failures.join("; ")
        };
        Ok((failures.is_empty(), detail))
    };
    Check::from_result("excess-risk-mc", run())
}

/// `closed · L²/q → 2` at `L = 1000`.
///
/// The rank-q closed form equals `(q/2)(2L-1)/(L-1)²`, which decays like `q/L`,
/// so this check fails by construction. The detail line reports both scalings.
pub fn scaling_law(_seed: u64) -> Check {
    let run = || -> Result<(bool, String)> {
        let l = 1e3;
        let mut worst: f64 = 0.0;
        let mut worst_linear: f64 = 0.0;
        for q in [1usize, 2, 5, 10] {
            let lambdas = rank_q_spectrum(q);
            let closed = excess_risk_gen_closed(&lambdas, 0.0, q, l, Strategy::One, Variant::Literal)?.closed_form;
            let scaled = closed * l * l / q as f64;
            worst = worst.max((scaled - 2.0).abs() / 2.0);
            worst_linear = worst_linear.max((closed * l / q as f64 - 1.0).abs());
        }
        Ok((
            worst <= SCALING_TOL,
            format!(
                "max relative deviation of closed·L²/q from 2 at L=1000: {worst:.6}; closed·L/q deviates from 1 by at most {worst_linear:.6}"
            ),
        ))
    };
    Check::from_result("excess-risk-scaling", run())
}

/// Exact eigenspace excess risk lies in `[t(λ_q), q·t(λ_q)]`.
pub fn eigenspace_sandwich(seed: u64) -> Check {
    let run = || -> Result<(bool, String)> {
        let mut rng = mc::rng(seed, 3);
        let mut violations = 0;
        for _ in 0..SANDWICH_CASES {
            let d = rng.random_range(1..=8);
            let lambdas = descending((0..d).map(|_| 10f64.powf(rng.random_range(-1.0..1.0))).collect());
            let q = rng.random_range(1..=d);
            let lambda_q = lambdas[q - 1];
            let l2 = rng.random_range(1.01..20.0) / lambda_q;
            let exact = excess_risk_eig_exact(&lambdas[..q], l2)?;
            let (lo, hi) = excess_risk_eig_bounds(lambda_q, q, l2)?;
            // summation order can cost a few ulps when eigenvalues coincide
            let slack = 1e-14 * hi;
            if exact < lo - slack || exact > hi + slack {
                violations += 1;
            }
        }
        Ok((violations == 0, format!("{SANDWICH_CASES} random configurations, {violations} violations")))
    };
    Check::from_result("eigenspace-sandwich", run())
}

fn random_pd(d: usize, rng: &mut McRng) -> Matrix {
    let a = Matrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    &a * a.transpose() + Matrix::identity(d, d) * 0.05
}

struct OracleCase {
    theta: GaussianModel,
    map: Matrix,
    x: Vector,
    epsilon: f64,
}

fn oracle_case(rng: &mut McRng, generative: bool) -> Result<OracleCase> {
    let d = rng.random_range(1..=3usize);
    let mu = standard_normal(d, rng);
    let theta = GaussianModel::new(mu.clone(), random_pd(d, rng))?;
    let map = if generative && d > 1 {
        let q = rng.random_range(1..d);
        ppca::fit(theta.decomposition(), &mu, q)?.w().clone()
    } else {
        let q = rng.random_range(1..=d);
        let which = if rng.random::<bool>() { Which::Top } else { Which::Bottom };
        top_bottom_basis(theta.decomposition(), q, which)?.columns().clone()
    };
    let x = &mu + theta.decomposition().sqrt() * standard_normal(d, rng) * 1.5;
    let epsilon = rng.random_range(0.1..2.0);
    Ok(OracleCase { theta, map, x, epsilon })
}

/// Closed-form ε-constrained perturbation against the brute-force oracle, and the
/// stationarity of the penalized objective.
pub fn perturbation_optimality(seed: u64) -> Check {
    let run = || -> Result<(bool, String)> {
        let mut rng = mc::rng(seed, 4);
        let mut worst_loss: f64 = 0.0;
        let mut worst_grad: f64 = 0.0;
        let mut failures = 0;
        for i in 0..ORACLE_CASES {
            let case = oracle_case(&mut rng, i % 2 == 0)?;
            let problem = PenalizedAttack::new(&case.theta, &case.map)?;
            let sup = problem.radius_supremum(&case.x)?;
            let epsilon = case.epsilon.min(0.5 * sup);
            let l = problem.solve_multiplier(&case.x, epsilon)?;
            let delta = problem.delta(&case.x, l)?;
            let loss = |d: &Vector| case.theta.nll(&(&case.x + &case.map * d));
            let closed = loss(&delta)?;
            let found = brute_force_oracle(&case.theta, &case.map, &case.x, epsilon, OracleMode::default())?;
            let best = loss(&found)?;
            let gap = (closed - best).abs();
            let grad = penalized_gradient(&case.theta, &case.map, &case.x, l, &delta).norm();
            worst_loss = worst_loss.max(gap);
            worst_grad = worst_grad.max(grad);
            if gap > ORACLE_LOSS_TOL || grad > GRADIENT_TOL || delta.norm() > epsilon * (1.0 + 1e-8) {
                failures += 1;
            }
        }
        Ok((
            failures == 0,
            format!(
                "{ORACLE_CASES} instances (d<=3), {failures} failures, max |loss gap| {worst_loss:.3e}, max gradient {worst_grad:.3e}"
            ),
        ))
    };
    Check::from_result("perturbation-optimality", run())
}

/// Closed-form robust spectra against the scalar fixed-point iteration.
pub fn robust_spectrum_fixed_point(_seed: u64) -> Check {
    let run = || -> Result<(bool, String)> {
        let mut worst: f64 = 0.0;
        let mut cases = 0;
        let ls = [1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0];
        let lambdas = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];
        for &l in &ls {
            for &lambda in &lambdas {
                let eat = eat_spectrum_closed(&[lambda], 1, l)?.lambdas_out[0];
                let fp = fixed_point_solve(lambda, 1.0, l, 1e-14, 100_000, None)?.value;
                worst = worst.max((eat - fp).abs() / eat);
                cases += 1;
                for sigma2 in [0.0, 0.1 * lambda] {
                    for strategy in Strategy::ALL {
                        let spectrum = [lambda, sigma2];
                        let gat = gat_spectrum_closed(&spectrum, sigma2, 1, l, strategy)?;
                        let fp = fixed_point_solve(gat.lambdas_source[0], lambda - sigma2, l, 1e-14, 100_000, None)?.value;
                        worst = worst.max((gat.lambdas_out[0] - fp).abs() / gat.lambdas_out[0]);
                        cases += 1;
                    }
                }
            }
        }
        let specific = eat_spectrum_closed(&[1.0], 1, 4.0)?.lambdas_out[0];
        let specific_ok = (specific - 1.4571068).abs() <= 5e-8;
        Ok((
            worst <= FIXED_POINT_REL_TOL && specific_ok,
            format!("{cases} cases, max relative error {worst:.3e}; (λ=1, L2=4) -> {specific:.7}"),
        ))
    };
    Check::from_result("robust-spectrum-fixed-point", run())
}

/// The two-dimensional demonstration: eigenspace and generative simulations.
pub fn minmax_simulation(_seed: u64) -> Check {
    let run = || -> Result<(bool, String)> {
        let theta = diagonal_model(&[4.0, 1.0])?;
        let config = MinmaxConfig {
            mode: ShiftMode::Eigenspace,
            q: 2,
            budget: Budget::Multiplier(4.0),
            tol: 1e-12,
            max_iter: 1000,
        };
        let eig = simulate_minmax(&theta, &config)?;
        let s = eig.final_spectrum();
        let eig_ok = (s[0] - 4.4860).abs() <= SIMULATION_ABS_TOL
            && (s[1] - 1.4571).abs() <= SIMULATION_ABS_TOL
            && s[1] / 1.0 > s[0] / 4.0;

        let theta = diagonal_model(&[4.0, 1.0, 0.0])?;
        let config = MinmaxConfig {
            mode: ShiftMode::Generative(Strategy::One),
            ..config
        };
        let gen = simulate_minmax(&theta, &config)?;
        let g = gen.final_spectrum();
        let (r1, r2) = (g[0] / 4.0, g[1] / 1.0);
        let off = gen.spectra.iter().map(|s| s[2].abs()).fold(0.0, f64::max);
        let gen_ok = (r1 - 1.4571068).abs() <= SIMULATION_RATIO_TOL
            && (r2 - 1.4571068).abs() <= SIMULATION_RATIO_TOL
            && off <= 1e-12;
        Ok((
            eig_ok && gen_ok && eig.converged && gen.converged,
            format!(
                "eigenspace -> ({:.4}, {:.4}) in {} iterations; generative ratios ({r1:.7}, {r2:.7}), off-manifold max {off:.1e}",
                s[0], s[1], eig.iterations
            ),
        ))
    };
    Check::from_result("minmax-simulation", run())
}

/// Monte-Carlo covariance of `x'` per strategy, the strategy 2/3 identity and the
/// rank-q invariance.
pub fn sampling_strategies(seed: u64) -> Check {
    let run = || -> Result<(bool, String)> {
        let mut rng = mc::rng(seed, 7);
        let u = random_rotation(3, &mut rng);
        let lambdas = [5.0, 2.0, 1.0];
        let decomp = SpectralDecomposition::from_parts(lambdas.to_vec(), u.clone())?;
        let mu = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let theta = GaussianModel::from_decomposition(mu.clone(), decomp.clone())?;
        let root = decomp.sqrt();
        let mut worst: f64 = 0.0;
        for q in [1usize, 2] {
            let model = ppca::fit(&decomp, &mu, q)?;
            let zero = Vector::zeros(q);
            for strategy in Strategy::ALL {
                let expected_l = strategy_lambdas(&lambdas, model.sigma2(), q, strategy)?;
                let expected = SpectralDecomposition::from_parts(expected_l, u.clone())?.reconstruct();
                let sampler = model.sampler(strategy)?;
                let stream = seed ^ (q as u64 * 16 + strategy.number() as u64);
                let samples = mc::sample_rows(STRATEGY_SAMPLES, 3, stream, |rng| {
                    let x = theta.draw_with_root(&root, rng);
                    let source = (strategy != Strategy::Three).then_some(&x);
                    Ok(sampler.draw(source, &zero, rng)?.0)
                })?;
                let cov = covariance(&samples, Some(&mu))?;
                let diag = expected.diagonal();
                for i in 0..3 {
                    for j in 0..3 {
                        let scale = (diag[i] * diag[j]).sqrt();
                        worst = worst.max((cov[(i, j)] - expected[(i, j)]).abs() / scale);
                    }
                }
            }
        }

        let mut identity: f64 = 0.0;
        let mut exact_rank_q = true;
        for _ in 0..100 {
            let d = rng.random_range(2..=8);
            let q = rng.random_range(1..d);
            let l = descending((0..d).map(|_| rng.random_range(0.1..10.0)).collect());
            let sigma2 = ppca::ml_noise_variance(&l, q);
            let two = strategy_lambdas(&l, sigma2, q, Strategy::Two)?;
            let three = strategy_lambdas(&l, sigma2, q, Strategy::Three)?;
            for (a, b) in two.iter().zip(&three) {
                identity = identity.max((a - b).abs() / b.max(1.0));
            }
            let mut rq = l.clone();
            rq[q..].iter_mut().for_each(|v| *v = 0.0);
            for s in Strategy::ALL {
                exact_rank_q &= strategy_lambdas(&rq, 0.0, q, s)? == rq;
            }
        }
        Ok((
            worst <= COVARIANCE_REL_TOL && identity <= IDENTITY_TOL && exact_rank_q,
            format!(
                "max covariance error {worst:.4} (limit {COVARIANCE_REL_TOL}), strategy 2/3 identity {identity:.1e}, rank-q invariance {}",
                if exact_rank_q { "exact" } else { "broken" }
            ),
        ))
    };
    Check::from_result("sampling-strategies", run())
}

/// Spectrum comparison on data drawn from robust spectra and the on-manifold
/// profile of generative attacks.
pub fn spectral_analysis(seed: u64) -> Check {
    let run = || -> Result<(bool, String)> {
        let sample_diag = |l: &[f64], s: u64| diagonal_model(l)?.sample(SPECTRA_SAMPLES, s);
        let mut worst: f64 = 0.0;

        let eat = eat_spectrum_closed(&[4.0, 1.0], 2, 4.0)?;
        let cmp = spectra_compare(&sample_diag(&[4.0, 1.0], seed)?, &sample_diag(&eat.lambdas_out, seed + 1)?)?;
        for (r, e) in cmp.ratio.iter().zip(eat.ratios()) {
            worst = worst.max((r - e).abs() / e);
        }
        let bottom_more = cmp.ratio[1] > cmp.ratio[0];

        let gat = gat_spectrum_closed(&[4.0, 1.0, 0.0], 0.0, 2, 4.0, Strategy::One)?;
        let cmp = spectra_compare(&sample_diag(&[4.0, 1.0, 0.0], seed + 2)?, &sample_diag(&gat.lambdas_out, seed + 3)?)?;
        for (r, e) in cmp.ratio.iter().zip(gat.ratios()) {
            worst = worst.max((r - e).abs() / e);
        }

        let mut rng = mc::rng(seed, 8);
        let u = random_rotation(4, &mut rng);
        let decomp = SpectralDecomposition::from_parts(vec![3.0, 2.0, 0.0, 0.0], u)?;
        let theta = GaussianModel::from_decomposition(Vector::zeros(4), decomp)?;
        let model = ppca::fit(theta.decomposition(), theta.mu(), 2)?;
        let problem = PenalizedAttack::new(&theta, model.w())?;
        let clean = theta.sample(2000, seed + 4)?;
        let mut adv = clean.clone();
        for (i, row) in clean.row_iter().enumerate() {
            let x = row.transpose();
            let (x_prime, _) = ppca::strategy_sample(&model, Strategy::One, Some(&x), &Vector::zeros(2), 0)?;
            let dz = problem.delta(&x_prime, 2.0)?;
            adv.set_row(i, &(x_prime + model.w() * dz).transpose());
        }
        let profile = attack_direction_profile(&clean, &adv, theta.decomposition())?;
        let off = profile.mean_abs_projection[2..].iter().copied().fold(0.0, f64::max);
        let on = profile.mean_abs_projection[..2].iter().copied().fold(f64::INFINITY, f64::min);
        Ok((
            worst <= SPECTRA_REL_TOL && bottom_more && off <= OFF_MANIFOLD_TOL && on > 0.0,
            format!("max ratio error {worst:.4} (limit {SPECTRA_REL_TOL}), off-manifold attack mass {off:.1e}"),
        ))
    };
    Check::from_result("spectral-analysis", run())
}

/// Infinite excess risk and infinite loss off the support.
pub fn infinity_semantics(seed: u64) -> Check {
    let run = || -> Result<(bool, String)> {
        let exact = excess_risk_eig_exact(&[4.0, 1.0, 0.0], 2.0)?;
        let theta = diagonal_model(&[4.0, 1.0, 0.0])?;
        let full = SubspaceBasis::new(Matrix::identity(3, 3))?;
        let mc_est = excess_risk_mc(&theta, AttackSpec::Eigenspace { basis: &full, multiplier: 2.0 }, 1000, seed)?;
        let off = theta.nll(&Vector::from_vec(vec![0.0, 0.0, 1.0]))?;
        let on = theta.nll(&Vector::from_vec(vec![1.0, 1.0, 0.0]))?;
        let unbounded = matches!(PenalizedAttack::new(&theta, full.columns()), Err(Error::UnboundedLoss));
        let ok = exact == f64::INFINITY && mc_est.mean == f64::INFINITY && off == f64::INFINITY && on.is_finite() && unbounded;
        Ok((
            ok,
            format!("full-space exact {exact}, full-space mc {}, off-support nll {off}, on-support nll {on:.6}", mc_est.mean),
        ))
    };
    Check::from_result("infinity-semantics", run())
}

/// Seeded estimates are reproducible and independent of the worker count.
pub fn seeded_determinism(seed: u64) -> Check {
    let run = || -> Result<(bool, String)> {
        let theta = diagonal_model(&[2.0, 1.0, 0.0])?;
        let spec = AttackSpec::Generative {
            q: 2,
            strategy: Strategy::Two,
            multiplier: 3.0,
        };
        let a = excess_risk_mc(&theta, spec, 50_000, seed)?;
        let b = excess_risk_mc(&theta, spec, 50_000, seed)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .map_err(|e| Error::invalid("threads", e.to_string()))?;
        let c = pool.install(|| excess_risk_mc(&theta, spec, 50_000, seed))?;
        let same = a.mean.to_bits() == b.mean.to_bits() && a.mean.to_bits() == c.mean.to_bits() && a.stderr.to_bits() == c.stderr.to_bits();
        Ok((same, format!("repeated and 3-worker estimates {}", if same { "bit-identical" } else { "differ" })))
    };
    Check::from_result("seeded-determinism", run())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_q_risk_decays_like_q_over_l() {
        for q in [1usize, 3, 10] {
            let lambdas = rank_q_spectrum(q);
            let risk = |l: f64| excess_risk_gen_closed(&lambdas, 0.0, q, l, Strategy::One, Variant::Literal).unwrap().closed_form;
            // independent algebra: (q/2)[(L/(L-1))² - 1] = (q/2)(2L-1)/(L-1)²
            let l = 1e3;
            assert!((risk(l) - 0.5 * q as f64 * (2.0 * l - 1.0) / ((l - 1.0) * (l - 1.0))).abs() < 1e-15);
            assert!((risk(1e6) * 1e6 / q as f64 - 1.0).abs() < 1e-5);
        }
        let check = scaling_law(0);
        assert!(!check.passed);
        assert!(check.detail.contains("closed·L/q"));
    }

    #[test]
    fn cheap_checks_pass() {
        for check in [eigenspace_sandwich(7), robust_spectrum_fixed_point(7), minmax_simulation(7), infinity_semantics(7)] {
            assert!(check.passed, "{check}");
        }
    }

    #[test]
    fn display_format() {
        let c = Check::new("x", false, "why".into());
        assert_eq!(c.to_string(), "FAIL x: why");
    }

    #[test]
    fn reduced_mc_agreement_passes() {
        let check = excess_risk_agreement_with(7, 50_000);
        assert!(check.passed, "{check}");
    }
}
