//! Spectral diagnostics comparing clean and adversarial datasets.

use rand::Rng;

use crate::attack::{Budget, PenalizedAttack};
use crate::error::{Error, Result};
use crate::gmm::GaussianModel;
use crate::mc;
use crate::ppca::PpcaModel;
use crate::spectral::{covariance, eigh_sym, SpectralDecomposition, SubspaceBasis};
use crate::{Matrix, Vector};

/// Eigenvalues below this count as zero when forming ratios.
pub const RATIO_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumComparison {
    pub indices: Vec<usize>,
    pub lambda_clean: Vec<f64>,
    pub lambda_adv: Vec<f64>,
    /// `adv / clean`; `1` when both are below [`RATIO_ZERO`], `+∞` when only the
    /// clean value is.
    pub ratio: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionProfile {
    pub coords: Vec<usize>,
    pub mean_abs_projection: Vec<f64>,
}

pub fn eigen_ratio(clean: f64, adv: f64) -> f64 {
    match (clean.abs() < RATIO_ZERO, adv.abs() < RATIO_ZERO) {
        (true, true) => 1.0,
        (true, false) => f64::INFINITY,
        _ => adv / clean,
    }
}

fn check_pair(clean: &Matrix, adv: &Matrix) -> Result<()> {
    if clean.nrows() == 0 || adv.nrows() == 0 {
        return Err(Error::Empty("dataset"));
    }
    if clean.ncols() != adv.ncols() {
        return Err(Error::DimensionMismatch {
            context: "dataset columns",
            expected: clean.ncols(),
            found: adv.ncols(),
        });
    }
    Ok(())
}

/// Descending covariance eigenvalues of both datasets, paired by index.
pub fn spectra_compare(clean: &Matrix, adv: &Matrix) -> Result<SpectrumComparison> {
    check_pair(clean, adv)?;
    let lc = eigh_sym(&covariance(clean, None)?)?.eigenvalues().to_vec();
    let la = eigh_sym(&covariance(adv, None)?)?.eigenvalues().to_vec();
    let ratio = lc.iter().zip(&la).map(|(&c, &a)| eigen_ratio(c, a)).collect();
    Ok(SpectrumComparison {
        indices: (1..=lc.len()).collect(),
        lambda_clean: lc,
        lambda_adv: la,
        ratio,
    })
}

/// Mean absolute coordinate of `adv[i] - clean[i]` in the eigenbasis `basis`.
pub fn attack_direction_profile(clean: &Matrix, adv: &Matrix, basis: &SpectralDecomposition) -> Result<DirectionProfile> {
    check_pair(clean, adv)?;
    if clean.nrows() != adv.nrows() {
        return Err(Error::DimensionMismatch {
            context: "dataset rows",
            expected: clean.nrows(),
            found: adv.nrows(),
        });
    }
    let d = clean.ncols();
    if basis.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "profile basis",
            expected: d,
            found: basis.dim(),
        });
    }
    let coords = (adv - clean) * basis.eigenvectors();
    let n = clean.nrows() as f64;
    let mean_abs_projection = coords.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>() / n).collect();
    Ok(DirectionProfile {
        coords: (1..=d).collect(),
        mean_abs_projection,
    })
}

/// What the attacker maximizes inside the ε-ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttackObjective {
    /// The optimal likelihood attack (maximizes the Gaussian loss).
    Likelihood,
    /// Steepest descent of the classifier margin `|μᵀΣ⁺x|` within the surface.
    #[default]
    Margin,
}

/// Surface and budget for [`attack_success_rate`].
#[derive(Debug, Clone, Copy)]
pub struct SuccessSpec<'a> {
    pub surface: SuccessSurface<'a>,
    pub epsilon: f64,
    pub objective: AttackObjective,
}

#[derive(Debug, Clone, Copy)]
pub enum SuccessSurface<'a> {
    /// Attacks the strategy-1 reconstruction `x'` through the loadings.
    Generative(&'a PpcaModel),
    Eigenspace(&'a SubspaceBasis),
}

/// Fraction of `n` two-class samples whose predicted class flips under attack.
///
/// Each sample is folded into the `+μ` class, attacked there and unfolded again.
/// For generative surfaces both the clean prediction and the attack use the
/// reconstruction `x'` of the sample.
pub fn attack_success_rate(model: &GaussianModel, spec: SuccessSpec<'_>, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if !(spec.epsilon >= 0.0) || !spec.epsilon.is_finite() {
        return Err(Error::invalid("epsilon", format!("must be finite and non-negative, got {}", spec.epsilon)));
    }
    let (map, reconstruct) = match spec.surface {
        SuccessSurface::Generative(p) => {
            let enc = p.encoder()?;
            (p.w().clone(), Some((p.w() * enc, p.mu().clone())))
        }
        SuccessSurface::Eigenspace(b) => (b.columns().clone(), None),
    };
    let problem = match spec.objective {
        AttackObjective::Likelihood if spec.epsilon > 0.0 => Some(PenalizedAttack::new(model, &map)?),
        _ => None,
    };
    let margin_dir = {
        let g = map.tr_mul(&(model.precision() * model.mu()));
        let norm = g.norm();
        (norm > 0.0).then(|| g / norm)
    };
    let root = model.decomposition().sqrt();
    let est = mc::estimate_mean(n, seed, |rng| {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let folded = model.draw_with_root(&root, rng);
        let reference = match &reconstruct {
            Some((proj, mu)) => proj * (&folded - mu) + mu,
            None => folded,
        };
        let clean_pred = model.classify(&(&reference * sign))?;
        let step: Vector = if spec.epsilon == 0.0 {
            Vector::zeros(map.nrows())
        } else {
            match spec.objective {
                AttackObjective::Likelihood => {
                    let problem = problem.as_ref().expect("prepared for positive radius");
                    match problem.run(&reference, Budget::Radius(spec.epsilon)) {
                        Ok((latent, _)) => &map * latent,
                        Err(Error::UnattainableRadius { .. }) => Vector::zeros(map.nrows()),
                        Err(e) => return Err(e),
                    }
                }
                AttackObjective::Margin => match &margin_dir {
                    // push the folded score toward zero from whichever side it is on
                    Some(dir) => {
                        let folded_pred = clean_pred.sign() * sign;
                        &map * dir * (-spec.epsilon * folded_pred)
                    }
                    None => Vector::zeros(map.nrows()),
                },
            }
        };
        let adv = (reference + step) * sign;
        Ok(if model.classify(&adv)? != clean_pred { 1.0 } else { 0.0 })
    })?;
    Ok(est.mean)
}
