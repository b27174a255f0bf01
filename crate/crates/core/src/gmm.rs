//! Folded two-class Gaussian data model, its negative log-likelihood and the
//! linear classifier.

use std::f64::consts::PI;
use std::sync::Once;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mc;
use crate::spectral::{eigh_sym, SpectralDecomposition};
use crate::{Matrix, Vector};

/// A point leaves the support of a rank-deficient covariance when its residual
/// outside the support exceeds this fraction of `max(1, ‖x - μ‖)`.
pub const SUPPORT_TOL: f64 = 1e-8;

/// Classifier parameters `Θ = (μ, Σ)`.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    mu: Vector,
    sigma: Matrix,
    decomp: SpectralDecomposition,
    precision: Matrix,
    log_pdet: f64,
    null: Matrix,
}

impl GaussianModel {
    pub fn new(mu: Vector, sigma: Matrix) -> Result<Self> {
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mean"));
        }
        let decomp = eigh_sym(&sigma)?;
        if mu.len() != decomp.dim() {
            return Err(Error::DimensionMismatch {
                context: "model mean vs covariance",
                expected: decomp.dim(),
                found: mu.len(),
            });
        }
        Ok(Self::assemble(mu, decomp))
    }

    /// Model whose covariance is `U diag(λ) Uᵀ` for the given decomposition.
    pub fn from_decomposition(mu: Vector, decomp: SpectralDecomposition) -> Result<Self> {
        if mu.len() != decomp.dim() {
            return Err(Error::DimensionMismatch {
                context: "model mean vs covariance",
                expected: decomp.dim(),
                found: mu.len(),
            });
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mean"));
        }
        Ok(Self::assemble(mu, decomp))
    }

    fn assemble(mu: Vector, decomp: SpectralDecomposition) -> Self {
        Self {
            sigma: decomp.reconstruct(),
            precision: decomp.pseudo_inverse(),
            log_pdet: decomp.pseudo_log_det(),
            null: decomp.null_basis(),
            mu,
            decomp,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &Vector {
        &self.mu
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomp
    }

    /// `Σ⁻¹`, or the pseudo-inverse when `Σ` is rank-deficient.
    pub fn precision(&self) -> &Matrix {
        &self.precision
    }

    /// Orthonormal basis of the directions the covariance does not reach.
    pub fn null_basis(&self) -> &Matrix {
        &self.null
    }

    /// Whether `v` (a displacement from the mean) stays inside the support.
    pub fn in_support(&self, v: &Vector) -> bool {
        if self.null.ncols() == 0 {
            return true;
        }
        let outside = self.null.tr_mul(v).norm();
        outside <= SUPPORT_TOL * v.norm().max(1.0)
    }

    /// Negative log-likelihood
    /// `(d/2) log 2π + (1/2) log|Σ| + (1/2)(x-μ)ᵀ Σ⁻¹ (x-μ)`.
    ///
    /// Rank-deficient covariances use the pseudo-determinant and pseudo-inverse;
    /// points off the support get `+∞`.
    pub fn nll(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x, "nll point")?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("nll point"));
        }
        let v = x - &self.mu;
        Ok(self.nll_centred(&v))
    }

    pub(crate) fn nll_centred(&self, v: &Vector) -> f64 {
        if !self.in_support(v) {
            return f64::INFINITY;
        }
        let d = self.dim() as f64;
        let quad = v.dot(&(&self.precision * v));
        0.5 * d * (2.0 * PI).ln() + 0.5 * self.log_pdet + 0.5 * quad
    }

    /// `n` draws from `N(μ, Σ)` using the spectral square root.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Matrix> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        let root = self.decomp.sqrt();
        mc::sample_rows(n, self.dim(), seed, |rng| Ok(self.draw_with_root(&root, rng)))
    }

    /// Single draw from `N(μ, Σ)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        self.draw_with_root(&self.decomp.sqrt(), rng)
    }

    pub(crate) fn draw_with_root<R: Rng + ?Sized>(&self, root: &Matrix, rng: &mut R) -> Vector {
        let z = standard_normal(self.dim(), rng);
        &self.mu + root * z
    }

    /// `sgn(μᵀ Σ⁻¹ x)`, with an exact zero classified as `+1`.
    pub fn classify(&self, x: &Vector) -> Result<Label> {
        self.check_dim(x, "classify point")?;
        if self.mu.iter().all(|&m| m == 0.0) {
            static WARN: Once = Once::new();
            WARN.call_once(|| log::warn!("degenerate classifier: μ = 0, every point is classified +1"));
            return Ok(Label::Positive);
        }
        let score = self.mu.dot(&(&self.precision * x));
        Ok(if score < 0.0 { Label::Negative } else { Label::Positive })
    }

    /// Two-class data `y ~ U{-1,+1}`, `x ~ N(yμ, Σ)`.
    pub fn sample_labeled(&self, n: usize, seed: u64) -> Result<LabeledDataset> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        let root = self.decomp.sqrt();
        let d = self.dim();
        let rows = mc::sample_rows(n, d + 1, seed, |rng| {
            let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let x = (&self.mu + &root * standard_normal(d, rng)) * y;
            Ok(Vector::from_iterator(d + 1, x.iter().copied().chain([y])))
        })?;
        let labels = rows
            .column(d)
            .iter()
            .map(|&y| if y > 0.0 { Label::Positive } else { Label::Negative })
            .collect();
        LabeledDataset::new(rows.columns(0, d).into_owned(), labels)
    }

    fn check_dim(&self, x: &Vector, context: &'static str) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vector {
    Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }
}

impl TryFrom<f64> for Label {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(Label::Positive)
        } else if v == -1.0 {
            Ok(Label::Negative)
        } else {
            Err(Error::invalid("label", format!("expected -1 or +1, got {v}")))
        }
    }
}

/// Points with ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    points: Matrix,
    labels: Vec<Label>,
}

impl LabeledDataset {
    pub fn new(points: Matrix, labels: Vec<Label>) -> Result<Self> {
        if points.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "labels vs points",
                expected: points.nrows(),
                found: labels.len(),
            });
        }
        Ok(Self { points, labels })
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Maps the two-class data onto one Gaussian by negating every `-1` row.
pub fn fold_labels(dataset: &LabeledDataset) -> Matrix {
    let mut out = dataset.points.clone();
    for (i, label) in dataset.labels.iter().enumerate() {
        if *label == Label::Negative {
            out.row_mut(i).neg_mut();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::covariance;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    fn diag41() -> GaussianModel {
        GaussianModel::new(dvector![0.0, 0.0], dmatrix![4.0, 0.0; 0.0, 1.0]).unwrap()
    }

    #[test]
    fn nll_examples() {
        let m = GaussianModel::new(dvector![0.0], dmatrix![1.0]).unwrap();
        assert_abs_diff_eq!(m.nll(&dvector![0.0]).unwrap(), 0.9189385, epsilon = 1e-7);
        assert_abs_diff_eq!(m.nll(&dvector![1.0]).unwrap(), 1.4189385, epsilon = 1e-7);
        // log 2π + ½ log 4
        assert_abs_diff_eq!(diag41().nll(&dvector![0.0, 0.0]).unwrap(), 2.5310242, epsilon = 1e-7);
    }

    #[test]
    fn nll_rank_deficient() {
        let m = GaussianModel::new(dvector![0.0, 0.0], dmatrix![4.0, 0.0; 0.0, 0.0]).unwrap();
        let on = m.nll(&dvector![2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(on, (2.0 * PI).ln() + 0.5 * 4.0_f64.ln() + 0.5, epsilon = 1e-12);
        assert_eq!(m.nll(&dvector![2.0, 1e-3]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn nll_errors() {
        let m = diag41();
        assert!(matches!(m.nll(&dvector![1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(m.nll(&dvector![1.0, f64::INFINITY]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn nll_minimised_at_mean() {
        let m = GaussianModel::new(dvector![1.0, -2.0], dmatrix![3.0, 1.0; 1.0, 2.0]).unwrap();
        let at_mean = m.nll(m.mu()).unwrap();
        let pts = m.sample(1000, 5).unwrap();
        for row in pts.row_iter() {
            assert!(at_mean <= m.nll(&row.transpose()).unwrap());
        }
    }

    #[test]
    fn expected_nll_matches_entropy() {
        let m = GaussianModel::new(dvector![0.5, 0.0, -1.0], dmatrix![2.0, 0.3, 0.0; 0.3, 1.0, 0.2; 0.0, 0.2, 0.5]).unwrap();
        let pts = m.sample(100_000, 21).unwrap();
        let mean: f64 = pts.row_iter().map(|r| m.nll(&r.transpose()).unwrap()).sum::<f64>() / 100_000.0;
        let d = 3.0;
        let det = m.sigma().determinant();
        let expected = 0.5 * d * (2.0 * PI).ln() + 0.5 * det.ln() + 0.5 * d;
        assert!((mean - expected).abs() / expected < 0.01, "{mean} vs {expected}");
    }

    #[test]
    fn sampling_concentrates() {
        let pts = diag41().sample(100_000, 7).unwrap();
        let cov = covariance(&pts, None).unwrap();
        assert!((cov[(0, 0)] - 4.0).abs() / 4.0 < 0.05);
        assert!((cov[(1, 1)] - 1.0).abs() < 0.05);
    }

    #[test]
    fn sampling_degenerate_and_deterministic() {
        let m = GaussianModel::new(dvector![1.0, 2.0], Matrix::zeros(2, 2)).unwrap();
        let pts = m.sample(10, 3).unwrap();
        for row in pts.row_iter() {
            assert_eq!(row.transpose(), dvector![1.0, 2.0]);
        }
        let m = diag41();
        assert_eq!(m.sample(5000, 11).unwrap(), m.sample(5000, 11).unwrap());
        assert_ne!(m.sample(50, 11).unwrap(), m.sample(50, 12).unwrap());
        assert!(m.sample(0, 1).is_err());
    }

    #[test]
    fn classify_examples() {
        let m = GaussianModel::new(dvector![1.0, 0.0], Matrix::identity(2, 2)).unwrap();
        assert_eq!(m.classify(&dvector![2.0, -1.0]).unwrap(), Label::Positive);
        assert_eq!(m.classify(&dvector![-0.1, 5.0]).unwrap(), Label::Negative);
        assert_eq!(m.classify(&dvector![0.0, 3.0]).unwrap(), Label::Positive);

        let zero = GaussianModel::new(dvector![0.0, 0.0], Matrix::identity(2, 2)).unwrap();
        assert_eq!(zero.classify(&dvector![-5.0, 1.0]).unwrap(), Label::Positive);
    }

    #[test]
    fn classify_invariant_under_covariance_scaling() {
        let sigma = dmatrix![2.0, 0.5; 0.5, 1.0];
        let a = GaussianModel::new(dvector![1.0, -0.5], sigma.clone()).unwrap();
        let b = GaussianModel::new(dvector![1.0, -0.5], sigma * 7.5).unwrap();
        let pts = diag41().sample(500, 2).unwrap();
        for row in pts.row_iter() {
            let x = row.transpose();
            assert_eq!(a.classify(&x).unwrap(), b.classify(&x).unwrap());
        }
    }

    #[test]
    fn folding() {
        let ds = LabeledDataset::new(dmatrix![1.0, 2.0; 1.0, 2.0], vec![Label::Positive, Label::Negative]).unwrap();
        assert_eq!(fold_labels(&ds), dmatrix![1.0, 2.0; -1.0, -2.0]);
        let empty = LabeledDataset::new(Matrix::zeros(0, 2), vec![]).unwrap();
        assert_eq!(fold_labels(&empty).nrows(), 0);
        assert!(Label::try_from(0.5).is_err());
    }

    #[test]
    fn labeled_sampling_folds_to_one_gaussian() {
        let m = GaussianModel::new(dvector![2.0, -1.0], dmatrix![1.0, 0.0; 0.0, 0.25]).unwrap();
        let ds = m.sample_labeled(50_000, 4).unwrap();
        let folded = fold_labels(&ds);
        let mean = crate::spectral::sample_mean(&folded).unwrap();
        assert!((mean[0] - 2.0).abs() < 0.03 && (mean[1] + 1.0).abs() < 0.03);
        let pos = ds.labels().iter().filter(|&&l| l == Label::Positive).count();
        assert!((pos as f64 / 50_000.0 - 0.5).abs() < 0.02);
    }
}
