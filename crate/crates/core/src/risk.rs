//! Excess risk of optimally perturbed data under the Gaussian likelihood loss.
//!
//! The closed forms work in the eigenbasis of the source covariance, where every
//! attack acts coordinate-wise. The Monte-Carlo estimators draw data, apply the
//! closed-form optimal perturbation per sample and average the loss increase.

use std::fmt;
use std::str::FromStr;

use crate::attack::PenalizedAttack;
use crate::error::{Error, Result};
use crate::gmm::GaussianModel;
use crate::mc::{self, MeanEstimate};
use crate::ppca::{self, strategy_lambdas, Strategy};
use crate::spectral::SubspaceBasis;

/// Which reading of the distribution-shift term to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// `½ log(∏λ'_i / ∏λ_i) + ½(Σ λ'_i/λ_i - d)`.
    #[default]
    Literal,
    /// `½(Σ λ'_i/λ_i - d)`, the expected loss difference `E_{D'}ℓ - E_Dℓ` itself.
    Definitional,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Variant::Literal),
            "definitional" => Ok(Variant::Definitional),
            other => Err(Error::invalid("variant", format!("expected literal or definitional, got `{other}`"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Literal => "literal",
            Variant::Definitional => "definitional",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcessRiskReport {
    pub closed_form: f64,
    pub perturbation_term: f64,
    pub distribution_term: f64,
    pub mc_estimate: Option<f64>,
    pub mc_stderr: Option<f64>,
}

impl ExcessRiskReport {
    pub fn with_mc(mut self, est: MeanEstimate) -> Self {
        self.mc_estimate = Some(est.mean);
        self.mc_stderr = Some(est.stderr);
        self
    }
}

/// `λ'/λ` with `0/0 = 1`.
fn ratio(index: usize, shifted: f64, source: f64) -> Result<f64> {
    match (source == 0.0, shifted == 0.0) {
        (true, true) => Ok(1.0),
        (true, false) => Err(Error::SupportMismatch { index, value: shifted }),
        _ => Ok(shifted / source),
    }
}

/// Generative-attack excess risk for source eigenvalues `lambdas` (descending),
/// P-PCA noise `σ²`, latent dimension `q`, multiplier `L` and sampling strategy.
///
/// Perturbation term: `½ Σ_{i≤q} [(1 + (λ_i-σ²)/((L-1)λ_i+σ²))² - 1] · λ'_i/λ_i`.
/// For rank-q data both variants reduce to `(q/2)[(L/(L-1))² - 1]`.
pub fn excess_risk_gen_closed(
    lambdas: &[f64],
    sigma2: f64,
    q: usize,
    multiplier: f64,
    strategy: Strategy,
    variant: Variant,
) -> Result<ExcessRiskReport> {
    if lambdas.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid("lambdas", "must be sorted in descending order"));
    }
    if lambdas.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::invalid("lambdas", "must be finite and non-negative"));
    }
    let shifted = strategy_lambdas(lambdas, sigma2, q, strategy)?;
    let threshold = lambdas[..q]
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| (l - sigma2) / l)
        .fold(0.0, f64::max);
    if multiplier.is_nan() || multiplier <= threshold {
        return Err(Error::ConcavityViolation {
            op: "generative excess risk",
            multiplier,
            threshold,
        });
    }

    let ratios = shifted
        .iter()
        .zip(lambdas)
        .enumerate()
        .map(|(i, (&s, &l))| ratio(i, s, l))
        .collect::<Result<Vec<_>>>()?;

    let perturbation_term = 0.5
        * lambdas[..q]
            .iter()
            .zip(&ratios)
            .filter(|(&l, _)| l > 0.0)
            .map(|(&l, &r)| {
                let gain = 1.0 + (l - sigma2) / ((multiplier - 1.0) * l + sigma2);
                (gain * gain - 1.0) * r
            })
            .sum::<f64>();

    let trace = 0.5 * (ratios.iter().sum::<f64>() - lambdas.len() as f64);
    let log_det = 0.5 * ratios.iter().map(|r| r.ln()).sum::<f64>();
    let literal = log_det + trace;
    if variant == Variant::Literal && !(literal - trace).abs().le(&1e-9) {
        log::warn!(
            "literal and definitional distribution terms differ: {literal} vs {trace} (log-determinant part {log_det})"
        );
    }
    let distribution_term = match variant {
        Variant::Literal => literal,
        Variant::Definitional => trace,
    };
    Ok(ExcessRiskReport {
        closed_form: perturbation_term + distribution_term,
        perturbation_term,
        distribution_term,
        mc_estimate: None,
        mc_stderr: None,
    })
}

/// `½[(1 + 1/(L₂λ - 1))² - 1]`, the contribution of one eigen-direction.
fn eig_term(lambda: f64, multiplier: f64) -> f64 {
    let gain = 1.0 + 1.0 / (multiplier * lambda - 1.0);
    0.5 * (gain * gain - 1.0)
}

/// Eigenspace-attack excess risk `½ Σ_i [(1 + 1/(L₂λ_i - 1))² - 1]` over the
/// eigenvalues of the attacked subspace.
///
/// A zero eigenvalue in the subspace makes every nonzero step leave the support of
/// the data, so the risk is `+∞`.
pub fn excess_risk_eig_exact(lambdas: &[f64], multiplier: f64) -> Result<f64> {
    if lambdas.is_empty() {
        return Err(Error::Empty("subspace eigenvalues"));
    }
    if lambdas.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::invalid("lambdas", "must be non-negative"));
    }
    if lambdas.contains(&0.0) {
        return Ok(f64::INFINITY);
    }
    let threshold = 1.0 / lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    if multiplier.is_nan() || multiplier <= threshold {
        return Err(Error::ConcavityViolation {
            op: "eigenspace excess risk",
            multiplier,
            threshold,
        });
    }
    Ok(lambdas.iter().map(|&l| eig_term(l, multiplier)).sum())
}

/// `(lower, upper) = (t, q·t)` with `t = ½[(1 + 1/(L₂λ_q - 1))² - 1]`.
pub fn excess_risk_eig_bounds(lambda_q: f64, q: usize, multiplier: f64) -> Result<(f64, f64)> {
    if q == 0 {
        return Err(Error::invalid("q", "must be at least 1"));
    }
    if !(lambda_q > 0.0) || multiplier.is_nan() || multiplier * lambda_q <= 1.0 {
        return Err(Error::ConcavityViolation {
            op: "eigenspace excess-risk bounds",
            multiplier,
            threshold: 1.0 / lambda_q,
        });
    }
    let lower = eig_term(lambda_q, multiplier);
    Ok((lower, q as f64 * lower))
}

/// The attack a Monte-Carlo excess-risk estimate runs.
#[derive(Debug, Clone, Copy)]
pub enum AttackSpec<'a> {
    /// P-PCA with `q` latent dimensions fitted to the source model, sampled with
    /// `strategy`, attacked at multiplier `multiplier`.
    Generative { q: usize, strategy: Strategy, multiplier: f64 },
    Eigenspace { basis: &'a SubspaceBasis, multiplier: f64 },
}

/// Monte-Carlo estimate of `E[ℓ(x_adv)] - E_{x~D}[ℓ(x)]`.
///
/// Each draw pairs a clean source point with its attacked counterpart; for
/// strategy 3 the latent code is independent of the paired clean point. The
/// estimate targets the definitional variant.
pub fn excess_risk_mc(theta_star: &GaussianModel, spec: AttackSpec<'_>, n: usize, seed: u64) -> Result<MeanEstimate> {
    if n < 2 {
        return Err(Error::invalid("n", "need at least 2 samples for a standard error"));
    }
    let root = theta_star.decomposition().sqrt();
    let mu = theta_star.mu();
    let unbounded = || MeanEstimate {
        mean: f64::INFINITY,
        stderr: f64::INFINITY,
        n,
    };
    match spec {
        AttackSpec::Generative { q, strategy, multiplier } => {
            let model = ppca::fit(theta_star.decomposition(), mu, q)?;
            let problem = match PenalizedAttack::new(theta_star, model.w()) {
                Err(Error::UnboundedLoss) => return Ok(unbounded()),
                other => other?,
            };
            let response = problem.response_matrix(multiplier)?;
            let step = model.w() * response;
            let sampler = model.sampler(strategy)?;
            let zero = nalgebra::DVector::zeros(q);
            mc::estimate_mean(n, seed, |rng| {
                let x = theta_star.draw_with_root(&root, rng);
                let source = match strategy {
                    Strategy::Three => None,
                    _ => Some(&x),
                };
                let (x_prime, _) = sampler.draw(source, &zero, rng)?;
                let x_adv = &x_prime + &step * (&x_prime - mu);
                Ok(theta_star.nll_centred(&(x_adv - mu)) - theta_star.nll_centred(&(x - mu)))
            })
        }
        AttackSpec::Eigenspace { basis, multiplier } => {
            let problem = match PenalizedAttack::new(theta_star, basis.columns()) {
                Err(Error::UnboundedLoss) => return Ok(unbounded()),
                other => other?,
            };
            let step = basis.columns() * problem.response_matrix(multiplier)?;
            mc::estimate_mean(n, seed, |rng| {
                let v = theta_star.draw_with_root(&root, rng) - mu;
                let adv = &v + &step * &v;
                Ok(theta_star.nll_centred(&adv) - theta_star.nll_centred(&v))
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{top_bottom_basis, Which};
    use crate::{Matrix, Vector};
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    fn rank_q(q: usize) -> Vec<f64> {
        (0..=q).map(|i| if i < q { (q - i) as f64 } else { 0.0 }).collect()
    }

    #[test]
    fn generative_closed_examples() {
        for variant in [Variant::Literal, Variant::Definitional] {
            let r = excess_risk_gen_closed(&rank_q(2), 0.0, 2, 3.0, Strategy::One, variant).unwrap();
            assert_abs_diff_eq!(r.closed_form, 1.25, epsilon = 1e-14);
            assert_eq!(r.distribution_term, 0.0);
            let r = excess_risk_gen_closed(&rank_q(1), 0.0, 1, 2.0, Strategy::One, variant).unwrap();
            assert_abs_diff_eq!(r.closed_form, 1.5, epsilon = 1e-14);
        }
        let r = excess_risk_gen_closed(&[4.0, 1.0], 1.0, 1, 1e9, Strategy::Three, Variant::Literal).unwrap();
        assert!(r.perturbation_term.abs() < 1e-8);
        assert!(excess_risk_gen_closed(&[2.0, 1.0, 0.0], 0.0, 2, 1.0, Strategy::One, Variant::Literal).is_err());
    }

    #[test]
    fn generative_variants_differ_off_manifold() {
        // strategy 1 drops the noise tail: λ' = (2.25, 0) against λ = (4, 1)
        let lit = excess_risk_gen_closed(&[4.0, 1.0], 1.0, 1, 2.0, Strategy::One, Variant::Literal).unwrap();
        let def = excess_risk_gen_closed(&[4.0, 1.0], 1.0, 1, 2.0, Strategy::One, Variant::Definitional).unwrap();
        assert_eq!(lit.distribution_term, f64::NEG_INFINITY);
        assert_abs_diff_eq!(def.distribution_term, 0.5 * (2.25 / 4.0 - 2.0), epsilon = 1e-15);
        // strategy 3 leaves the spectrum unchanged
        let s3 = excess_risk_gen_closed(&[4.0, 1.0], 1.0, 1, 2.0, Strategy::Three, Variant::Literal).unwrap();
        assert_eq!(s3.distribution_term, 0.0);
        // gain 1 + 3/(4 + 1) = 1.6
        assert_abs_diff_eq!(s3.perturbation_term, 0.5 * (1.6f64.powi(2) - 1.0), epsilon = 1e-14);
    }

    #[test]
    fn support_mismatch() {
        // strategy 3 puts σ² on a direction with zero source variance
        let err = excess_risk_gen_closed(&[4.0, 2.0, 0.0], 1.0, 1, 2.0, Strategy::Three, Variant::Literal);
        assert!(matches!(err, Err(Error::SupportMismatch { index: 2, .. })));
    }

    #[test]
    fn eigenspace_examples() {
        assert_abs_diff_eq!(excess_risk_eig_exact(&[1.0], 2.0).unwrap(), 1.5, epsilon = 1e-15);
        assert!(matches!(
            excess_risk_eig_exact(&[4.0, 1.0], 1.0),
            Err(Error::ConcavityViolation { .. })
        ));
        assert_eq!(excess_risk_eig_exact(&[4.0, 0.0], 5.0).unwrap(), f64::INFINITY);

        assert_eq!(excess_risk_eig_bounds(1.0, 1, 2.0).unwrap(), (1.5, 1.5));
        let (lo, hi) = excess_risk_eig_bounds(1.0, 3, 2.0).unwrap();
        assert_abs_diff_eq!(lo, 1.5);
        assert_abs_diff_eq!(hi, 4.5);
        let (lo, hi) = excess_risk_eig_bounds(1.0, 3, 1e9).unwrap();
        assert!(lo < 1e-8 && hi < 1e-8);
        assert!(excess_risk_eig_bounds(1.0, 3, 1.0).is_err());
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let theta = GaussianModel::new(Vector::zeros(3), Matrix::from_diagonal(&dvector![2.0, 1.0, 0.0])).unwrap();
        let spec = AttackSpec::Generative {
            q: 2,
            strategy: Strategy::One,
            multiplier: 3.0,
        };
        let est = excess_risk_mc(&theta, spec, 200_000, 3).unwrap();
        assert!((est.mean - 1.25).abs() <= 3.0 * est.stderr, "{est:?}");
        assert_eq!(excess_risk_mc(&theta, spec, 200_000, 3).unwrap(), est);

        let big = AttackSpec::Generative {
            q: 2,
            strategy: Strategy::One,
            multiplier: 1e6,
        };
        // the rank-q excess risk decays like q/L, so at L = 10⁶ it is about 2e-6
        let closed = excess_risk_gen_closed(&[2.0, 1.0, 0.0], 0.0, 2, 1e6, Strategy::One, Variant::Literal).unwrap();
        let est = excess_risk_mc(&theta, big, 100_000, 3).unwrap();
        assert!(closed.closed_form < 3e-6);
        assert!((est.mean - closed.closed_form).abs() <= 3.0 * est.stderr);
    }

    #[test]
    fn monte_carlo_eigenspace_and_strategies() {
        let theta = GaussianModel::new(dvector![1.0, 0.0], dmatrix![4.0, 0.0; 0.0, 1.0]).unwrap();
        let basis = top_bottom_basis(theta.decomposition(), 1, Which::Top).unwrap();
        let est = excess_risk_mc(&theta, AttackSpec::Eigenspace { basis: &basis, multiplier: 1.0 }, 200_000, 9).unwrap();
        let exact = excess_risk_eig_exact(&[4.0], 1.0).unwrap();
        assert!((est.mean - exact).abs() <= 3.0 * est.stderr);

        for strategy in Strategy::ALL {
            let closed = excess_risk_gen_closed(&[4.0, 1.0], 1.0, 1, 2.0, strategy, Variant::Definitional).unwrap();
            let spec = AttackSpec::Generative { q: 1, strategy, multiplier: 2.0 };
            let est = excess_risk_mc(&theta, spec, 200_000, 21).unwrap();
            assert!((est.mean - closed.closed_form).abs() <= 4.0 * est.stderr, "strategy {strategy}: {est:?} vs {closed:?}");
        }
    }

    #[test]
    fn unbounded_attack_is_infinite() {
        let theta = GaussianModel::new(dvector![0.0, 0.0], dmatrix![1.0, 0.0; 0.0, 0.0]).unwrap();
        let basis = top_bottom_basis(theta.decomposition(), 2, Which::Top).unwrap();
        let est = excess_risk_mc(&theta, AttackSpec::Eigenspace { basis: &basis, multiplier: 2.0 }, 10, 0).unwrap();
        assert_eq!(est.mean, f64::INFINITY);
    }
}
