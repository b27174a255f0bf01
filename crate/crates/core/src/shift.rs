//! Spectra of adversarially trained Gaussian models.
//!
//! Training against the optimal attack refits the covariance to the perturbed
//! data. In the eigenbasis of the source covariance this acts coordinate-wise: an
//! eigen-direction with attack gain numerator `a` (`λ_i - σ²` generative, `1`
//! eigenspace) and source variance `λ'` settles at the positive root of
//!
//! ```text
//! λ̂ = (1 + a / (L λ̂ - a))² · λ'
//! ```
//!
//! which is `¼[2λ' + 4a/L + 2λ'√(1 + 4a/(λ'L))]`. The closed forms, a scalar
//! fixed-point iteration and a full matrix alternation all compute this value.

use crate::attack::{Budget, PenalizedAttack};
use crate::error::{Error, Result};
use crate::gmm::GaussianModel;
use crate::ppca::{self, strategy_lambdas, PpcaModel, Strategy};
use crate::spectral::{symmetrize, top_bottom_basis, SpectralDecomposition, Which};
use crate::{Matrix, Vector};

/// Fraction above `a/L` that fixed-point iterates must stay.
pub const REGION_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftMode {
    Generative(Strategy),
    Eigenspace,
}

impl ShiftMode {
    pub fn name(self) -> &'static str {
        match self {
            ShiftMode::Generative(_) => "generative",
            ShiftMode::Eigenspace => "eigenspace",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustSpectrum {
    pub mode: ShiftMode,
    pub q: usize,
    pub multiplier: f64,
    /// Eigenvalues of the clean data covariance.
    pub lambdas_in: Vec<f64>,
    /// Eigenvalues of the distribution the attack is applied to (`Λ^(j)` for
    /// generative attacks, the clean spectrum for eigenspace attacks).
    pub lambdas_source: Vec<f64>,
    pub lambdas_out: Vec<f64>,
}

impl RobustSpectrum {
    /// `lambdas_out / lambdas_source` with `0/0 = 1`.
    pub fn ratios(&self) -> Vec<f64> {
        self.lambdas_out
            .iter()
            .zip(&self.lambdas_source)
            .map(|(&o, &s)| if s == 0.0 && o == 0.0 { 1.0 } else { o / s })
            .collect()
    }
}

/// Positive root of `λ̂ = (1 + a/(Lλ̂ - a))² λ'`.
fn robust_root(shifted: f64, gain: f64, multiplier: f64) -> f64 {
    0.25 * (2.0 * shifted + 4.0 * gain / multiplier + 2.0 * shifted * (1.0 + 4.0 * gain / (shifted * multiplier)).sqrt())
}

fn check_multiplier(multiplier: f64) -> Result<()> {
    if !(multiplier > 0.0) {
        return Err(Error::invalid("L", format!("must be positive, got {multiplier}")));
    }
    Ok(())
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::Empty("eigenvalues"));
    }
    if lambdas.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::invalid("lambdas", "must be finite and non-negative"));
    }
    if lambdas.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid("lambdas", "must be sorted in descending order"));
    }
    Ok(())
}

/// Spectrum after generative adversarial training with sampling strategy `j`.
pub fn gat_spectrum_closed(
    lambdas: &[f64],
    sigma2: f64,
    q: usize,
    multiplier: f64,
    strategy: Strategy,
) -> Result<RobustSpectrum> {
    check_lambdas(lambdas)?;
    check_multiplier(multiplier)?;
    let shifted = strategy_lambdas(lambdas, sigma2, q, strategy)?;
    let mut out = shifted.clone();
    for i in 0..q {
        let gain = lambdas[i] - sigma2;
        if gain < 0.0 {
            return Err(Error::invalid("sigma2", format!("exceeds λ_{} = {}", i + 1, lambdas[i])));
        }
        out[i] = match (shifted[i] == 0.0, gain == 0.0) {
            (true, true) => 0.0,
            (true, false) => return Err(Error::SupportMismatch { index: i, value: gain }),
            _ => robust_root(shifted[i], gain, multiplier),
        };
    }
    Ok(RobustSpectrum {
        mode: ShiftMode::Generative(strategy),
        q,
        multiplier,
        lambdas_in: lambdas.to_vec(),
        lambdas_source: shifted,
        lambdas_out: out,
    })
}

/// Spectrum after eigenspace adversarial training on the top `q` eigenvectors;
/// `q = d` is regular ℓ₂ adversarial training.
pub fn eat_spectrum_closed(lambdas: &[f64], q: usize, multiplier: f64) -> Result<RobustSpectrum> {
    check_lambdas(lambdas)?;
    check_multiplier(multiplier)?;
    let d = lambdas.len();
    if q == 0 || q > d {
        return Err(Error::invalid("q", format!("{q} outside 1..={d}")));
    }
    let mut out = lambdas.to_vec();
    for i in 0..q {
        if lambdas[i] == 0.0 {
            return Err(Error::SupportMismatch { index: i, value: 0.0 });
        }
        out[i] = robust_root(lambdas[i], 1.0, multiplier);
    }
    Ok(RobustSpectrum {
        mode: ShiftMode::Eigenspace,
        q,
        multiplier,
        lambdas_in: lambdas.to_vec(),
        lambdas_source: lambdas.to_vec(),
        lambdas_out: out,
    })
}

/// `λ^eat/λ = ½ + 1/(L₂λ) + √(1/(L₂λ) + ¼)`.
pub fn amplification_ratio(lambda: f64, multiplier: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda", format!("must be positive, got {lambda}")));
    }
    check_multiplier(multiplier)?;
    let t = 1.0 / (multiplier * lambda);
    Ok(0.5 + t + (t + 0.25).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub value: f64,
    pub iterations: usize,
}

/// Iterates `λ̂ ← (1 + a/(Lλ̂ - a))² λ'` until successive iterates differ by at
/// most `tol`.
///
/// `shifted` is `λ'` and `gain` is `a`. The default start `λ' + a/L` lies below
/// the fixed point. The map is decreasing, so plain iteration alternates around
/// the root; whenever an increment flips sign without shrinking, the relaxation
/// factor is halved. Iterates must stay above `(1 + REGION_MARGIN)·a/L`.
pub fn fixed_point_solve(
    shifted: f64,
    gain: f64,
    multiplier: f64,
    tol: f64,
    max_iter: usize,
    start: Option<f64>,
) -> Result<FixedPoint> {
    const OP: &str = "fixed-point solve";
    check_multiplier(multiplier)?;
    if !(shifted >= 0.0) || !(gain >= 0.0) {
        return Err(Error::invalid("lambda", "source variance and gain must be non-negative"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if gain == 0.0 {
        return Ok(FixedPoint { value: shifted, iterations: 0 });
    }
    if shifted == 0.0 {
        return Err(Error::SupportMismatch { index: 0, value: gain });
    }
    let floor = (1.0 + REGION_MARGIN) * gain / multiplier;
    let update = |x: f64| {
        let g = 1.0 + gain / (multiplier * x - gain);
        g * g * shifted
    };
    let mut x = start.unwrap_or(shifted + gain / multiplier);
    if !(x > floor) {
        return Err(Error::InvalidRegion { op: OP, iteration: 0 });
    }
    let mut omega = 1.0;
    let mut last_step: Option<f64> = None;
    for it in 1..=max_iter {
        let raw = update(x) - x;
        if let Some(prev) = last_step {
            if prev * raw < 0.0 && (omega * raw).abs() >= prev.abs() {
                omega *= 0.5;
            }
        }
        let mut step = omega * raw;
        let mut tries = 0;
        while !(x + step > floor) {
            omega *= 0.5;
            step = omega * raw;
            tries += 1;
            if tries > 60 {
                return Err(Error::InvalidRegion { op: OP, iteration: it });
            }
        }
        x += step;
        if step.abs() <= tol {
            return Ok(FixedPoint { value: x, iterations: it });
        }
        last_step = Some(step);
    }
    Err(Error::NotConverged { op: OP, iterations: max_iter })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinmaxConfig {
    pub mode: ShiftMode,
    pub q: usize,
    /// A multiplier holds `L` fixed; a radius re-solves `L` every iterate so the
    /// attack moves source data by `ε` in root-mean-square norm.
    pub budget: Budget,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinmaxTrace {
    /// `diag(U*ᵀ Σ_t U*)` for every iterate, starting with the attacked source.
    pub spectra: Vec<Vec<f64>>,
    pub covariances: Vec<Matrix>,
    pub means: Vec<Vector>,
    /// Multiplier used at each attacker step.
    pub multipliers: Vec<f64>,
    /// `(iteration, factor)` whenever the relaxation factor was lowered.
    pub damping: Vec<(usize, f64)>,
    pub converged: bool,
    pub iterations: usize,
    /// Clean eigenbasis `U*` the spectra are expressed in.
    pub basis: Matrix,
}

impl MinmaxTrace {
    pub fn final_spectrum(&self) -> &[f64] {
        self.spectra.last().expect("trace holds the initial iterate")
    }

    pub fn final_covariance(&self) -> &Matrix {
        self.covariances.last().expect("trace holds the initial iterate")
    }
}

/// Loading map for the generative simulator: the P-PCA fit for `q < d`, and the
/// noiseless `W = UΛ^{1/2}` when `q = d`.
fn generative_model(theta: &GaussianModel, q: usize) -> Result<PpcaModel> {
    let decomp = theta.decomposition();
    if q < decomp.dim() {
        return ppca::fit(decomp, theta.mu(), q);
    }
    let mut w = decomp.eigenvectors().clone();
    for (j, &l) in decomp.eigenvalues().iter().enumerate() {
        w.column_mut(j).scale_mut(l.sqrt());
    }
    PpcaModel::new(w, 0.0, theta.mu().clone())
}

/// Alternates the attacker's best response and the defender's Gaussian refit.
///
/// At iterate `t` the attacker faces `N(μ_t, Σ_t)` and answers with the linear map
/// `M = (L I - AᵀΣ_t⁺A)⁻¹ AᵀΣ_t⁺`; the defender refits to `x + AM(x - μ_t)` with
/// `x` from the attacked source distribution, giving
/// `Σ_{t+1} = (I + AM) Σ_src (I + AM)ᵀ` and `μ_{t+1} = μ* + AM(μ* - μ_t)`.
pub fn simulate_minmax(theta_star: &GaussianModel, config: &MinmaxConfig) -> Result<MinmaxTrace> {
    const OP: &str = "min-max simulation";
    let d = theta_star.dim();
    let q = config.q;
    if q == 0 || q > d {
        return Err(Error::invalid("q", format!("{q} outside 1..={d}")));
    }
    if !(config.tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if config.max_iter == 0 {
        return Err(Error::invalid("max_iter", "must be at least 1"));
    }
    let decomp = theta_star.decomposition();
    let u = decomp.eigenvectors().clone();
    let mu_star = theta_star.mu().clone();

    let (map, source_cov) = match config.mode {
        ShiftMode::Generative(strategy) => {
            let model = generative_model(theta_star, q)?;
            let shifted = strategy_lambdas(decomp.eigenvalues(), model.sigma2(), q, strategy)?;
            let src = SpectralDecomposition::from_parts(shifted, u.clone())?.reconstruct();
            (model.w().clone(), src)
        }
        ShiftMode::Eigenspace => {
            let basis = top_bottom_basis(decomp, q, Which::Top)?;
            (basis.columns().clone(), theta_star.sigma().clone())
        }
    };

    let frame = |cov: &Matrix| -> Vec<f64> { (u.transpose() * cov * &u).diagonal().iter().copied().collect() };

    let mut trace = MinmaxTrace {
        spectra: vec![frame(&source_cov)],
        covariances: vec![source_cov.clone()],
        means: vec![mu_star.clone()],
        multipliers: Vec::new(),
        damping: Vec::new(),
        converged: false,
        iterations: 0,
        basis: u.clone(),
    };
    let mut cov = source_cov.clone();
    let mut mean = mu_star.clone();
    let mut omega = 1.0;
    let mut last_step: Option<Vec<f64>> = None;

    for it in 1..=config.max_iter {
        let model = GaussianModel::new(mean.clone(), cov.clone())?;
        let problem = PenalizedAttack::new(&model, &map)?;
        let multiplier = match config.budget {
            Budget::Multiplier(l) => l,
            Budget::Radius(eps) => problem.solve_rms_multiplier(&source_cov, eps)?,
        };
        let threshold = problem.threshold();
        if !(multiplier > threshold) {
            return Err(Error::ConcavityViolationAt {
                op: OP,
                iteration: it,
                multiplier,
                threshold,
            });
        }
        let step_map = &map * problem.response_matrix(multiplier)?;
        let transfer = Matrix::identity(d, d) + &step_map;
        let target = symmetrize(&(&transfer * &source_cov * transfer.transpose()));
        let next_mean = &mu_star + &step_map * (&mu_star - &mean);

        let current = frame(&cov);
        let raw: Vec<f64> = frame(&target).iter().zip(&current).map(|(t, c)| t - c).collect();
        if let Some(prev) = &last_step {
            let flipped = raw
                .iter()
                .zip(prev)
                .any(|(r, p)| r * p < 0.0 && (omega * r).abs() >= p.abs() && p.abs() > config.tol);
            if flipped {
                omega *= 0.5;
                trace.damping.push((it, omega));
            }
        }
        cov = if omega == 1.0 {
            target
        } else {
            symmetrize(&(&cov + (target - &cov) * omega))
        };
        mean = if omega == 1.0 { next_mean } else { &mean + (next_mean - &mean) * omega };

        let spectrum = frame(&cov);
        let change = spectrum
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        last_step = Some(spectrum.iter().zip(&current).map(|(a, b)| a - b).collect());
        trace.spectra.push(spectrum);
        trace.covariances.push(cov.clone());
        trace.means.push(mean.clone());
        trace.multipliers.push(multiplier);
        trace.iterations = it;
        if change <= config.tol {
            trace.converged = true;
            return Ok(trace);
        }
    }
    Err(Error::NotConverged {
        op: OP,
        iterations: config.max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn closed_form_examples() {
        let gat = gat_spectrum_closed(&[2.0, 0.0], 0.0, 1, 4.0, Strategy::One).unwrap();
        assert_abs_diff_eq!(gat.lambdas_out[0], 2.9142136, epsilon = 1e-7);
        assert_eq!(gat.lambdas_out[1], 0.0);
        assert_abs_diff_eq!(gat.ratios()[0], 0.5 + 0.25 + 0.5_f64.sqrt(), epsilon = 1e-14);

        let eat = eat_spectrum_closed(&[1.0], 1, 4.0).unwrap();
        assert_abs_diff_eq!(eat.lambdas_out[0], 1.4571068, epsilon = 1e-7);
        // root of s² - √λ s - 1/L₂ = 0 with s = √λ̂
        let s = eat.lambdas_out[0].sqrt();
        assert_abs_diff_eq!(s * s - s - 0.25, 0.0, epsilon = 1e-14);

        assert_abs_diff_eq!(amplification_ratio(0.5, 4.0).unwrap(), 1.8660254, epsilon = 1e-7);
        assert_abs_diff_eq!(amplification_ratio(2.0, 4.0).unwrap(), 1.2373724, epsilon = 1e-7);
        let e = eat_spectrum_closed(&[2.0, 0.5], 1, 4.0).unwrap();
        assert_eq!(e.lambdas_out[1], 0.5);
        assert!(amplification_ratio(1e12, 4.0).unwrap() - 1.0 < 1e-5);
        assert!(amplification_ratio(1.0, 1e12).unwrap() - 1.0 < 1e-5);
        assert!(amplification_ratio(0.0, 1.0).is_err());
        assert!(eat_spectrum_closed(&[1.0, 0.0], 2, 4.0).is_err());
    }

    #[test]
    fn gat_general_spectrum() {
        let r = gat_spectrum_closed(&[4.0, 1.0], 1.0, 1, 2.0, Strategy::One).unwrap();
        assert_eq!(r.lambdas_source, vec![2.25, 0.0]);
        assert_eq!(r.lambdas_out[1], 0.0);
        let fp = fixed_point_solve(2.25, 3.0, 2.0, 1e-13, 10_000, None).unwrap();
        assert_abs_diff_eq!(r.lambdas_out[0], fp.value, epsilon = 1e-11);
        let r3 = gat_spectrum_closed(&[4.0, 1.0], 1.0, 1, 2.0, Strategy::Three).unwrap();
        assert_eq!(r3.lambdas_out[1], 1.0);
        assert!(gat_spectrum_closed(&[4.0, 1.0], 5.0, 1, 2.0, Strategy::Three).is_err());
    }

    #[test]
    fn fixed_point_examples() {
        let fp = fixed_point_solve(2.0, 2.0, 4.0, 1e-10, 200, None).unwrap();
        assert_abs_diff_eq!(fp.value, 2.9142136, epsilon = 1e-7);
        let fp = fixed_point_solve(1.0, 1.0, 4.0, 1e-10, 200, None).unwrap();
        assert_abs_diff_eq!(fp.value, 1.4571068, epsilon = 1e-7);
        let closed = eat_spectrum_closed(&[1.0], 1, 4.0).unwrap().lambdas_out[0];
        let fp = fixed_point_solve(1.0, 1.0, 4.0, 1e-10, 200, Some(closed)).unwrap();
        assert_eq!(fp.iterations, 1);
        assert!(matches!(
            fixed_point_solve(1.0, 1.0, 4.0, 1e-10, 200, Some(0.1)),
            Err(Error::InvalidRegion { iteration: 0, .. })
        ));
    }

    #[test]
    fn fixed_point_handles_strongly_oscillating_maps() {
        // slope about -4 at the root: plain iteration diverges
        let closed = robust_root(0.1, 1.0, 1.5);
        let fp = fixed_point_solve(0.1, 1.0, 1.5, 1e-12, 10_000, None).unwrap();
        assert!((fp.value - closed).abs() <= 1e-6 * closed);
    }

    #[test]
    fn simulator_eigenspace_example() {
        let theta = GaussianModel::new(dvector![0.0, 0.0], dmatrix![4.0, 0.0; 0.0, 1.0]).unwrap();
        let config = MinmaxConfig {
            mode: ShiftMode::Eigenspace,
            q: 2,
            budget: Budget::Multiplier(4.0),
            tol: 1e-12,
            max_iter: 500,
        };
        let trace = simulate_minmax(&theta, &config).unwrap();
        assert!(trace.converged);
        let closed = eat_spectrum_closed(&[4.0, 1.0], 2, 4.0).unwrap();
        for (s, c) in trace.final_spectrum().iter().zip(&closed.lambdas_out) {
            assert!((s - c).abs() <= 1e-11);
        }
        assert_abs_diff_eq!(trace.final_spectrum()[0], 4.486068, epsilon = 1e-6);
        for m in &trace.means {
            assert_eq!(m, theta.mu());
        }
    }

    #[test]
    fn simulator_generative_rank_q() {
        let theta = GaussianModel::new(Vector::zeros(3), Matrix::from_diagonal(&dvector![4.0, 1.0, 0.0])).unwrap();
        let config = MinmaxConfig {
            mode: ShiftMode::Generative(Strategy::One),
            q: 2,
            budget: Budget::Multiplier(4.0),
            tol: 1e-12,
            max_iter: 500,
        };
        let trace = simulate_minmax(&theta, &config).unwrap();
        let s = trace.final_spectrum();
        assert_abs_diff_eq!(s[0] / 4.0, 1.4571068, epsilon = 1e-7);
        assert_abs_diff_eq!(s[1] / 1.0, 1.4571068, epsilon = 1e-7);
        for spec in &trace.spectra {
            assert!(spec[2].abs() <= 1e-12);
        }
    }

    #[test]
    fn simulator_large_multiplier_keeps_source() {
        let theta = GaussianModel::new(dvector![1.0, 2.0], dmatrix![2.0, 0.5; 0.5, 1.0]).unwrap();
        let config = MinmaxConfig {
            mode: ShiftMode::Eigenspace,
            q: 1,
            budget: Budget::Multiplier(1e9),
            tol: 1e-10,
            max_iter: 50,
        };
        let trace = simulate_minmax(&theta, &config).unwrap();
        for (a, b) in trace.final_spectrum().iter().zip(theta.decomposition().eigenvalues()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn simulator_rejects_concavity_violation() {
        let theta = GaussianModel::new(dvector![0.0, 0.0], dmatrix![4.0, 0.0; 0.0, 1.0]).unwrap();
        let config = MinmaxConfig {
            mode: ShiftMode::Eigenspace,
            q: 2,
            budget: Budget::Multiplier(0.5),
            tol: 1e-10,
            max_iter: 50,
        };
        assert!(matches!(
            simulate_minmax(&theta, &config),
            Err(Error::ConcavityViolationAt { iteration: 1, .. })
        ));
    }

    #[test]
    fn simulator_rms_budget() {
        let theta = GaussianModel::new(dvector![0.0, 0.0], dmatrix![4.0, 0.0; 0.0, 1.0]).unwrap();
        let config = MinmaxConfig {
            mode: ShiftMode::Eigenspace,
            q: 2,
            budget: Budget::Radius(0.5),
            tol: 1e-10,
            max_iter: 1000,
        };
        let trace = simulate_minmax(&theta, &config).unwrap();
        assert!(trace.converged);
        let last = *trace.multipliers.last().unwrap();
        let closed = eat_spectrum_closed(&[4.0, 1.0], 2, last).unwrap();
        for (s, c) in trace.final_spectrum().iter().zip(&closed.lambdas_out) {
            assert!((s - c).abs() <= 1e-6 * c);
        }
    }
}
