//! Symmetric eigendecomposition, covariance estimation and subspace bases.
//!
//! Conventions shared by every other module:
//!
//! - eigenvalues are sorted in non-increasing order, ties kept in the solver's
//!   original index order;
//! - each eigenvector is signed so that its first largest-magnitude component is
//!   non-negative;
//! - eigenvalues in `[-1e-10, 0)` (scaled by `max(1, λ_max)`) are clamped to zero,
//!   anything more negative is rejected;
//! - covariances use the divisor `n`.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Largest tolerated `|M - Mᵀ|` entry before a matrix is rejected as asymmetric.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Negative eigenvalues down to `-NEGATIVE_CLAMP_TOL · max(1, λ_max)` are clamped to zero.
pub const NEGATIVE_CLAMP_TOL: f64 = 1e-10;
/// Eigenvalues at or below `ZERO_TOL · max(1, λ_max)` are treated as zero when
/// forming pseudo-inverses and supports.
pub const ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
}

impl SpectralDecomposition {
    /// Diagonal spectrum in the standard basis. The values must already be sorted
    /// descending and non-negative.
    pub fn diagonal(eigenvalues: &[f64]) -> Result<Self> {
        let d = eigenvalues.len();
        Self::from_parts(eigenvalues.to_vec(), Matrix::identity(d, d))
    }

    /// Assembles a decomposition from parts, validating every invariant.
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: Matrix) -> Result<Self> {
        let d = eigenvalues.len();
        if d == 0 {
            return Err(Error::Empty("eigenvalues"));
        }
        if eigenvectors.nrows() != d || eigenvectors.ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "eigenvector matrix",
                expected: d,
                found: eigenvectors.ncols(),
            });
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("eigenvalues"));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("eigenvalues", "must be sorted in non-increasing order"));
        }
        if let Some(&min) = eigenvalues.last() {
            if min < 0.0 {
                return Err(Error::NotPositiveSemidefinite(min));
            }
        }
        check_orthonormal(&eigenvectors, "eigenvectors")?;
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, i: usize) -> Vector {
        self.eigenvectors.column(i).into_owned()
    }

    /// `U · diag(λ) · Uᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        self.map_spectrum(|l| l)
    }

    /// `U · diag(f(λ)) · Uᵀ`, symmetrized exactly.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let s = f(l);
            scaled.column_mut(j).scale_mut(s);
        }
        symmetrize(&(scaled * u.transpose()))
    }

    /// Absolute threshold below which an eigenvalue counts as zero.
    pub fn zero_threshold(&self) -> f64 {
        ZERO_TOL * self.eigenvalues[0].max(1.0)
    }

    /// Number of eigenvalues above [`zero_threshold`](Self::zero_threshold).
    pub fn rank(&self) -> usize {
        let tol = self.zero_threshold();
        self.eigenvalues.iter().filter(|&&l| l > tol).count()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.dim()
    }

    /// Moore-Penrose pseudo-inverse.
    pub fn pseudo_inverse(&self) -> Matrix {
        let tol = self.zero_threshold();
        self.map_spectrum(|l| if l > tol { 1.0 / l } else { 0.0 })
    }

    /// Log of the product of the non-zero eigenvalues.
    pub fn pseudo_log_det(&self) -> f64 {
        let tol = self.zero_threshold();
        self.eigenvalues
            .iter()
            .filter(|&&l| l > tol)
            .map(|l| l.ln())
            .sum()
    }

    /// Symmetric square root `U · diag(√λ) · Uᵀ`.
    pub fn sqrt(&self) -> Matrix {
        self.map_spectrum(|l| l.max(0.0).sqrt())
    }

    /// Orthonormal basis of the null space (columns whose eigenvalue is zero).
    pub fn null_basis(&self) -> Matrix {
        let r = self.rank();
        self.eigenvectors.columns(r, self.dim() - r).into_owned()
    }

    /// Coordinates of `v` in the eigenbasis, `Uᵀ v`.
    pub fn to_eigen_coords(&self, v: &Vector) -> Vector {
        self.eigenvectors.tr_mul(v)
    }
}

/// Subspace spanned by orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    columns: Matrix,
}

impl SubspaceBasis {
    pub fn new(columns: Matrix) -> Result<Self> {
        let (d, q) = columns.shape();
        if q == 0 || q > d {
            return Err(Error::invalid("q", format!("subspace dimension {q} outside 1..={d}")));
        }
        check_orthonormal(&columns, "basis columns")?;
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &Matrix {
        &self.columns
    }

    pub fn q(&self) -> usize {
        self.columns.ncols()
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    /// Orthogonal projector `B Bᵀ`.
    pub fn projector(&self) -> Matrix {
        &self.columns * self.columns.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Top,
    Bottom,
}

impl std::str::FromStr for Which {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top" => Ok(Which::Top),
            "bottom" => Ok(Which::Bottom),
            other => Err(Error::invalid("which", format!("expected top|bottom, got `{other}`"))),
        }
    }
}

/// Eigendecomposition of a symmetric positive-semidefinite matrix.
///
/// The input is symmetrized as `(M + Mᵀ)/2` after checking that the asymmetry is
/// at most [`SYMMETRY_TOL`].
pub fn eigh_sym(matrix: &Matrix) -> Result<SpectralDecomposition> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(Error::Empty("matrix"));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let asym = max_asymmetry(matrix);
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = symmetrize(matrix);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..rows).collect();
    // sort_by is stable, so equal eigenvalues keep the solver's index order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let top = eig.eigenvalues[order[0]];
    let clamp = -NEGATIVE_CLAMP_TOL * top.max(1.0);
    let mut eigenvalues = Vec::with_capacity(rows);
    let mut eigenvectors = Matrix::zeros(rows, rows);
    for (j, &src) in order.iter().enumerate() {
        let l = eig.eigenvalues[src];
        if l < clamp {
            return Err(Error::NotPositiveSemidefinite(l));
        }
        eigenvalues.push(l.max(0.0));
        let mut col = eig.eigenvectors.column(src).into_owned();
        fix_sign(&mut col);
        eigenvectors.set_column(j, &col);
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Covariance of the rows of `data` (n×d) with divisor `n`.
///
/// Without an explicit mean the sample mean is used and at least two rows are
/// required.
pub fn covariance(data: &Matrix, mean: Option<&Vector>) -> Result<Matrix> {
    let (n, d) = data.shape();
    if n == 0 || d == 0 {
        return Err(Error::Empty("dataset"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dataset"));
    }
    let centre = match mean {
        Some(m) => {
            if m.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "covariance mean",
                    expected: d,
                    found: m.len(),
                });
            }
            m.clone()
        }
        None => {
            if n < 2 {
                return Err(Error::invalid("dataset", "sample mean needs at least two rows"));
            }
            sample_mean(data)?
        }
    };
    let mut centred = data.clone();
    for mut row in centred.row_iter_mut() {
        for (x, c) in row.iter_mut().zip(centre.iter()) {
            *x -= c;
        }
    }
    let cov = centred.tr_mul(&centred) / n as f64;
    Ok(symmetrize(&cov))
}

/// Column means of an n×d dataset.
pub fn sample_mean(data: &Matrix) -> Result<Vector> {
    if data.nrows() == 0 {
        return Err(Error::Empty("dataset"));
    }
    Ok(data.row_mean().transpose())
}

/// First (`Top`) or last (`Bottom`) `q` eigenvectors, order preserved.
pub fn top_bottom_basis(decomp: &SpectralDecomposition, q: usize, which: Which) -> Result<SubspaceBasis> {
    let d = decomp.dim();
    if q == 0 || q > d {
        return Err(Error::invalid("q", format!("{q} outside 1..={d}")));
    }
    let start = match which {
        Which::Top => 0,
        Which::Bottom => d - q,
    };
    Ok(SubspaceBasis {
        columns: decomp.eigenvectors.columns(start, q).into_owned(),
    })
}

pub(crate) fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

fn max_asymmetry(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn fix_sign(col: &mut Vector) {
    let mut best = 0;
    for i in 1..col.len() {
        if col[i].abs() > col[best].abs() {
            best = i;
        }
    }
    if col[best] < 0.0 {
        col.neg_mut();
    }
}

fn check_orthonormal(m: &Matrix, what: &'static str) -> Result<()> {
    let gram = m.tr_mul(m);
    let q = gram.nrows();
    for i in 0..q {
        for j in 0..q {
            let target = if i == j { 1.0 } else { 0.0 };
            if (gram[(i, j)] - target).abs() > 1e-8 {
                return Err(Error::invalid(what, "columns are not orthonormal"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn diagonal_input() {
        let dec = eigh_sym(&dmatrix![1.0, 0.0; 0.0, 4.0]).unwrap();
        assert_eq!(dec.eigenvalues(), &[4.0, 1.0]);
        assert_abs_diff_eq!(dec.eigenvectors().clone(), dmatrix![0.0, 1.0; 1.0, 0.0], epsilon = 1e-12);

        let dec = eigh_sym(&dmatrix![4.0, 0.0; 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(dec.eigenvectors().clone(), Matrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn two_by_two_hand_solved() {
        // characteristic polynomial (2-t)^2 - 1 = 0  =>  t = 3, 1
        let dec = eigh_sym(&dmatrix![2.0, 1.0; 1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(dec.eigenvalues()[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dec.eigenvalues()[1], 1.0, epsilon = 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(dec.eigenvector(0), dvector![h, h], epsilon = 1e-12);
        // (1,-1)/√2 and (-1,1)/√2 tie on magnitude; the first one wins and is made positive
        assert_abs_diff_eq!(dec.eigenvector(1), dvector![h, -h], epsilon = 1e-12);
    }

    #[test]
    fn identity_keeps_index_order() {
        let dec = eigh_sym(&Matrix::identity(3, 3)).unwrap();
        assert_eq!(dec.eigenvalues(), &[1.0, 1.0, 1.0]);
        assert_abs_diff_eq!(dec.eigenvectors().clone(), Matrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(eigh_sym(&Matrix::zeros(2, 3)), Err(Error::NotSquare { .. })));
        assert!(matches!(
            eigh_sym(&dmatrix![1.0, 0.5; 0.0, 1.0]),
            Err(Error::NotSymmetric(_))
        ));
        assert!(matches!(
            eigh_sym(&dmatrix![f64::NAN, 0.0; 0.0, 1.0]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            eigh_sym(&dmatrix![1.0, 0.0; 0.0, -1.0]),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn tiny_negative_is_clamped_and_small_asymmetry_accepted() {
        let dec = eigh_sym(&dmatrix![1.0, 1e-9; 0.0, -1e-11]).unwrap();
        assert!(dec.eigenvalues().iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn covariance_examples() {
        let data = dmatrix![1.0, 0.0; -1.0, 0.0];
        let cov = covariance(&data, Some(&dvector![0.0, 0.0])).unwrap();
        assert_eq!(cov, dmatrix![1.0, 0.0; 0.0, 0.0]);

        let single = dmatrix![3.0, -2.0];
        let cov = covariance(&single, Some(&dvector![3.0, -2.0])).unwrap();
        assert_eq!(cov, Matrix::zeros(2, 2));

        // sample-mean path divides by n
        let data = dmatrix![1.0; 3.0];
        assert_eq!(covariance(&data, None).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn covariance_errors() {
        assert!(matches!(covariance(&Matrix::zeros(0, 2), None), Err(Error::Empty(_))));
        assert!(covariance(&dmatrix![1.0, 2.0], None).is_err());
        assert!(matches!(
            covariance(&dmatrix![1.0, 2.0], Some(&dvector![0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn covariance_is_exactly_symmetric() {
        let data = dmatrix![0.3, 1.7, -2.2; 0.1, 0.4, 9.1; -5.0, 2.5, 0.01; 1.0, 1.0, 1.0];
        let cov = covariance(&data, None).unwrap();
        assert_eq!(cov, cov.transpose());
        let dec = eigh_sym(&cov).unwrap();
        assert!(dec.eigenvalues().iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn basis_selection() {
        let dec = eigh_sym(&dmatrix![4.0, 0.0; 0.0, 1.0]).unwrap();
        let top = top_bottom_basis(&dec, 1, Which::Top).unwrap();
        assert_abs_diff_eq!(top.columns().clone(), dmatrix![1.0; 0.0], epsilon = 1e-12);
        let bottom = top_bottom_basis(&dec, 1, Which::Bottom).unwrap();
        assert_abs_diff_eq!(bottom.columns().clone(), dmatrix![0.0; 1.0], epsilon = 1e-12);
        let all = top_bottom_basis(&dec, 2, Which::Top).unwrap();
        assert_eq!(all.columns(), dec.eigenvectors());
        assert!(top_bottom_basis(&dec, 0, Which::Top).is_err());
        assert!(top_bottom_basis(&dec, 3, Which::Bottom).is_err());
    }

    #[test]
    fn pseudo_quantities() {
        let dec = SpectralDecomposition::diagonal(&[4.0, 0.0]).unwrap();
        assert_eq!(dec.rank(), 1);
        assert_abs_diff_eq!(dec.pseudo_inverse(), dmatrix![0.25, 0.0; 0.0, 0.0], epsilon = 1e-15);
        assert_abs_diff_eq!(dec.pseudo_log_det(), 4.0_f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(dec.null_basis(), dmatrix![0.0; 1.0]);
        assert_abs_diff_eq!(dec.sqrt(), dmatrix![2.0, 0.0; 0.0, 0.0]);
    }
}
