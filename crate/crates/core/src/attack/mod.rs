//! Optimal ℓ₂ perturbations of the Gaussian negative log-likelihood.
//!
//! Both attack families move a point along the columns of a map `A`: the P-PCA
//! loading matrix `W` (generative, latent perturbation `δ`) or an orthonormal
//! eigenspace basis `B` (eigenspace, data perturbation `Bδ`). The penalized inner
//! problem
//!
//! ```text
//! max_δ  ℓ(x + Aδ) - (L/2)‖δ‖²
//! ```
//!
//! is concave iff `L > λ_max(AᵀΣ⁺A)` and then has the unique maximizer
//! `δ* = (L I - AᵀΣ⁺A)⁻¹ AᵀΣ⁺ (x - μ)`. With `A = W` this is the same vector as
//! `Wᵀ(LΣ - WWᵀ)⁻¹(x - μ)` by the Woodbury identity, but it stays well defined when
//! `Σ` is rank deficient. Radius budgets are turned into multipliers by bisection,
//! since `‖δ*(L)‖` decreases strictly in `L`.

mod oracle;

pub use oracle::{brute_force_oracle, OracleMode};

use crate::error::{Error, Result};
use crate::gmm::{GaussianModel, SUPPORT_TOL};
use crate::ppca::PpcaModel;
use crate::spectral::{eigh_sym, symmetrize, SpectralDecomposition, SubspaceBasis};
use crate::{Matrix, Vector};

/// Relative tolerance of [`solve_multiplier`] on `‖δ‖ - ε`.
pub const RADIUS_TOL: f64 = 1e-11;
const MAX_BISECTIONS: usize = 4000;

/// Perturbation size, as a norm radius or as the Lagrange multiplier itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Radius(f64),
    Multiplier(f64),
}

impl Budget {
    pub fn value(self) -> f64 {
        match self {
            Budget::Radius(v) | Budget::Multiplier(v) => v,
        }
    }

    fn validate(self) -> Result<Self> {
        let v = self.value();
        if !(v > 0.0) || v.is_nan() {
            let name = match self {
                Budget::Radius(_) => "epsilon",
                Budget::Multiplier(_) => "L",
            };
            return Err(Error::invalid(name, format!("must be positive, got {v}")));
        }
        if let Budget::Radius(r) = self {
            if !r.is_finite() {
                return Err(Error::invalid("epsilon", "must be finite"));
            }
        }
        Ok(self)
    }
}

/// Where the attacker is allowed to move.
#[derive(Debug, Clone, Copy)]
pub enum AttackSurface<'a> {
    /// Latent perturbation `Δz` decoded through the loading matrix.
    Generative(&'a PpcaModel),
    /// Data perturbation restricted to the span of an orthonormal basis.
    Eigenspace(&'a SubspaceBasis),
}

impl AttackSurface<'_> {
    pub fn map(&self) -> &Matrix {
        match self {
            AttackSurface::Generative(m) => m.w(),
            AttackSurface::Eigenspace(b) => b.columns(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackSurface::Generative(_) => "generative",
            AttackSurface::Eigenspace(_) => "eigenspace",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    /// Latent `Δz` for generative attacks, data-space `Δx` for eigenspace attacks.
    pub delta: Vector,
    pub x_adv: Vector,
    pub loss_clean: f64,
    pub loss_adv: f64,
    pub multiplier: f64,
}

/// The penalized problem for one model and one map, with `AᵀΣ⁺A` diagonalized.
///
/// Reusable across points and multipliers.
#[derive(Debug, Clone)]
pub struct PenalizedAttack<'a> {
    theta: &'a GaussianModel,
    map: Matrix,
    /// `Σ⁺A`
    pinv_map: Matrix,
    /// Eigendecomposition of `K = AᵀΣ⁺A`.
    curvature: SpectralDecomposition,
}

impl<'a> PenalizedAttack<'a> {
    /// Fails with [`Error::UnboundedLoss`] if the map leaves the support of `Σ`,
    /// where the likelihood loss is `+∞` for every nonzero step.
    pub fn new(theta: &'a GaussianModel, map: &Matrix) -> Result<Self> {
        if map.nrows() != theta.dim() {
            return Err(Error::DimensionMismatch {
                context: "attack map rows",
                expected: theta.dim(),
                found: map.nrows(),
            });
        }
        if map.ncols() == 0 {
            return Err(Error::Empty("attack map"));
        }
        let null = theta.null_basis();
        if null.ncols() > 0 && null.tr_mul(map).norm() > SUPPORT_TOL * map.norm().max(1.0) {
            return Err(Error::UnboundedLoss);
        }
        let pinv_map = theta.precision() * map;
        let curvature = eigh_sym(&symmetrize(&map.tr_mul(&pinv_map)))?;
        Ok(Self {
            theta,
            map: map.clone(),
            pinv_map,
            curvature,
        })
    }

    pub fn theta(&self) -> &GaussianModel {
        self.theta
    }

    pub fn map(&self) -> &Matrix {
        &self.map
    }

    /// Concavity threshold `λ_max(AᵀΣ⁺A)`.
    pub fn threshold(&self) -> f64 {
        self.curvature.eigenvalues()[0].max(0.0)
    }

    pub fn check_multiplier(&self, op: &'static str, multiplier: f64) -> Result<()> {
        let threshold = self.threshold();
        if multiplier.is_nan() || multiplier <= threshold {
            return Err(Error::ConcavityViolation {
                op,
                multiplier,
                threshold,
            });
        }
        Ok(())
    }

    /// `AᵀΣ⁺(x - μ)` in the eigenbasis of `K`.
    fn rhs_coords(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.theta.dim() {
            return Err(Error::DimensionMismatch {
                context: "attacked point",
                expected: self.theta.dim(),
                found: x.len(),
            });
        }
        let b = self.pinv_map.tr_mul(&(x - self.theta.mu()));
        Ok(self.curvature.eigenvectors().tr_mul(&b))
    }

    fn scaled(&self, coords: &Vector, multiplier: f64) -> Vector {
        let kappas = self.curvature.eigenvalues();
        let scaled = Vector::from_iterator(
            coords.len(),
            coords.iter().zip(kappas).map(|(c, k)| c / (multiplier - k)),
        );
        self.curvature.eigenvectors() * scaled
    }

    fn norm_at(&self, coords: &Vector, multiplier: f64) -> f64 {
        coords
            .iter()
            .zip(self.curvature.eigenvalues())
            .map(|(c, k)| (c / (multiplier - k)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Penalized maximizer `δ*(L)` (a vector in the map's column space).
    pub fn delta(&self, x: &Vector, multiplier: f64) -> Result<Vector> {
        self.check_multiplier("optimal perturbation", multiplier)?;
        let coords = self.rhs_coords(x)?;
        Ok(self.scaled(&coords, multiplier))
    }

    /// `(L I - K)⁻¹ AᵀΣ⁺`, the linear response `x - μ ↦ δ*`.
    pub fn response_matrix(&self, multiplier: f64) -> Result<Matrix> {
        self.check_multiplier("optimal perturbation", multiplier)?;
        let inv = self.curvature.map_spectrum(|k| 1.0 / (multiplier - k));
        Ok(inv * self.pinv_map.transpose())
    }

    /// `sup_L ‖δ*(L)‖` as `L` decreases to the threshold; `+∞` unless `x - μ` is
    /// orthogonal (in the `Σ⁺` metric) to the top curvature direction.
    pub fn radius_supremum(&self, x: &Vector) -> Result<f64> {
        let coords = self.rhs_coords(x)?;
        Ok(self.supremum_from(&coords))
    }

    fn supremum_from(&self, coords: &Vector) -> f64 {
        let kappas = self.curvature.eigenvalues();
        let top = self.threshold();
        let top_tol = 1e-12 * top.max(1.0);
        let c_tol = 1e-12 * coords.norm();
        let mut sum = 0.0;
        for (c, &k) in coords.iter().zip(kappas) {
            if top - k <= top_tol {
                if c.abs() > c_tol {
                    return f64::INFINITY;
                }
            } else {
                sum += (c / (top - k)).powi(2);
            }
        }
        sum.sqrt()
    }

    /// Multiplier `L` with `‖δ*(L)‖ = ε`.
    pub fn solve_multiplier(&self, x: &Vector, epsilon: f64) -> Result<f64> {
        Budget::Radius(epsilon).validate()?;
        let coords = self.rhs_coords(x)?;
        if coords.iter().all(|&c| c == 0.0) {
            return Err(Error::UnattainableRadius {
                epsilon,
                reason: "x is at the model mean, so every optimal perturbation is zero".into(),
            });
        }
        let sup = self.supremum_from(&coords);
        if epsilon >= sup {
            return Err(Error::UnattainableRadius {
                epsilon,
                reason: format!("optimal perturbations are bounded by {sup} above the concavity threshold"),
            });
        }
        invert_decreasing(|l| self.norm_at(&coords, l), self.threshold(), epsilon)
    }

    /// Multiplier at which the response matrix moves source data `N(·, Σ_src)` by
    /// `ε` in root-mean-square norm: `tr(M Σ_src Mᵀ) = ε²`.
    pub fn solve_rms_multiplier(&self, source_cov: &Matrix, epsilon: f64) -> Result<f64> {
        Budget::Radius(epsilon).validate()?;
        let d = self.theta.dim();
        if source_cov.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                context: "source covariance",
                expected: d,
                found: source_cov.nrows(),
            });
        }
        let b = self.curvature.eigenvectors().tr_mul(&self.pinv_map.transpose());
        let weights: Vec<f64> = (b.clone() * source_cov * b.transpose()).diagonal().iter().copied().collect();
        if weights.iter().all(|&w| w <= 0.0) {
            return Err(Error::UnattainableRadius {
                epsilon,
                reason: "the source distribution has no variance the attack can amplify".into(),
            });
        }
        let kappas = self.curvature.eigenvalues();
        let f = |l: f64| {
            weights
                .iter()
                .zip(kappas)
                .map(|(w, k)| w.max(0.0) / (l - k).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        invert_decreasing(f, self.threshold(), epsilon)
    }

    /// Resolves the budget, then applies the closed form.
    pub fn run(&self, x: &Vector, budget: Budget) -> Result<(Vector, f64)> {
        let multiplier = match budget.validate()? {
            Budget::Multiplier(l) => l,
            Budget::Radius(eps) => self.solve_multiplier(x, eps)?,
        };
        Ok((self.delta(x, multiplier)?, multiplier))
    }
}

/// Solves `f(L) = target` for `f` strictly decreasing on `(threshold, ∞)` with
/// `f(L) → sup ≥ target` as `L` decreases to the threshold and `f → 0` as `L → ∞`.
fn invert_decreasing(f: impl Fn(f64) -> f64, threshold: f64, target: f64) -> Result<f64> {
    let mut lo = threshold;
    let mut hi = if threshold > 0.0 { 2.0 * threshold } else { 1.0 };
    while f(hi) >= target {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NotConverged {
                op: "multiplier bracket",
                iterations: MAX_BISECTIONS,
            });
        }
    }
    let tol = RADIUS_TOL * target;
    let loose = 1e-10 * target.max(1.0);
    let mut best = (f64::INFINITY, hi);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let r = f(mid);
        let err = (r - target).abs();
        if err < best.0 {
            best = (err, mid);
        }
        if err <= tol {
            return Ok(mid);
        }
        if mid <= lo || mid >= hi {
            break;
        }
        if r > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // floating-point resolution of L exhausted
    if best.0 <= loose {
        return Ok(best.1);
    }
    Err(Error::NotConverged {
        op: "multiplier bisection",
        iterations: MAX_BISECTIONS,
    })
}

/// Generative optimum `Δz* = Wᵀ(LΣ - WWᵀ)⁻¹(x' - μ)`.
pub fn gen_perturb_opt(theta: &GaussianModel, ppca: &PpcaModel, x_prime: &Vector, multiplier: f64) -> Result<Vector> {
    PenalizedAttack::new(theta, ppca.w())?.delta(x_prime, multiplier)
}

/// Eigenspace optimum `Δx* = B (L I - BᵀΣ⁺B)⁻¹ BᵀΣ⁺(x - μ)`; for an eigenvector basis
/// this is `U_q (L Λ_q - I)⁻¹ U_qᵀ (x - μ)`.
pub fn eig_perturb_opt(theta: &GaussianModel, basis: &SubspaceBasis, x: &Vector, multiplier: f64) -> Result<Vector> {
    let delta = PenalizedAttack::new(theta, basis.columns())?.delta(x, multiplier)?;
    Ok(basis.columns() * delta)
}

/// Multiplier at which the optimal perturbation has norm `ε`.
pub fn solve_multiplier(theta: &GaussianModel, surface: AttackSurface<'_>, x: &Vector, epsilon: f64) -> Result<f64> {
    PenalizedAttack::new(theta, surface.map())?.solve_multiplier(x, epsilon)
}

/// Optimal attack of `x` (the reconstruction `x'` for generative surfaces).
pub fn attack(theta: &GaussianModel, surface: AttackSurface<'_>, x: &Vector, budget: Budget) -> Result<AttackResult> {
    let problem = PenalizedAttack::new(theta, surface.map())?;
    let (latent, multiplier) = problem.run(x, budget)?;
    let step = surface.map() * &latent;
    let x_adv = x + &step;
    let delta = match surface {
        AttackSurface::Generative(_) => latent,
        AttackSurface::Eigenspace(_) => step,
    };
    Ok(AttackResult {
        delta,
        loss_clean: theta.nll(x)?,
        loss_adv: theta.nll(&x_adv)?,
        x_adv,
        multiplier,
    })
}

/// Gradient of `ℓ(x + Aδ) - (L/2)‖δ‖²` with respect to `δ`.
pub fn penalized_gradient(theta: &GaussianModel, map: &Matrix, x: &Vector, multiplier: f64, delta: &Vector) -> Vector {
    let v = x + map * delta - theta.mu();
    map.tr_mul(&(theta.precision() * v)) - delta * multiplier
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{top_bottom_basis, Which};
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    fn setup() -> (GaussianModel, PpcaModel) {
        let theta = GaussianModel::new(dvector![0.0, 0.0], dmatrix![4.0, 0.0; 0.0, 1.0]).unwrap();
        let ppca = PpcaModel::new(dmatrix![3.0_f64.sqrt(); 0.0], 1.0, dvector![0.0, 0.0]).unwrap();
        (theta, ppca)
    }

    /// Plain gradient ascent on the penalized objective.
    fn ascend(theta: &GaussianModel, map: &Matrix, x: &Vector, l: f64) -> Vector {
        let mut d = Vector::zeros(map.ncols());
        for _ in 0..20_000 {
            let g = penalized_gradient(theta, map, x, l, &d);
            d += g * 0.05;
        }
        d
    }

    #[test]
    fn generative_examples() {
        let (theta, ppca) = setup();
        let x = dvector![2.0, 0.0];
        let dz = gen_perturb_opt(&theta, &ppca, &x, 1.0).unwrap();
        assert_abs_diff_eq!(dz[0], 2.0 * 3.0_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(ascend(&theta, ppca.w(), &x, 1.0), dz, epsilon = 1e-8);

        let woodbury = {
            let w = ppca.w();
            let m = theta.sigma() * 1.0 - w * w.transpose();
            w.transpose() * m.try_inverse().unwrap() * &x
        };
        assert_abs_diff_eq!(woodbury, dz, epsilon = 1e-12);

        assert_eq!(gen_perturb_opt(&theta, &ppca, &dvector![0.0, 0.0], 1.0).unwrap(), dvector![0.0]);
        assert!(gen_perturb_opt(&theta, &ppca, &x, 1e12).unwrap()[0].abs() < 1e-11);
        assert!(matches!(
            gen_perturb_opt(&theta, &ppca, &x, 0.7),
            Err(Error::ConcavityViolation { .. })
        ));
    }

    #[test]
    fn eigenspace_examples() {
        let theta = GaussianModel::new(dvector![0.0], dmatrix![2.0]).unwrap();
        let basis = SubspaceBasis::new(dmatrix![1.0]).unwrap();
        let dx = eig_perturb_opt(&theta, &basis, &dvector![0.5], 1.0).unwrap();
        assert_abs_diff_eq!(dx[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ascend(&theta, basis.columns(), &dvector![0.5], 1.0), dx, epsilon = 1e-8);

        let theta = GaussianModel::new(dvector![0.0, 0.0], dmatrix![4.0, 0.0; 0.0, 1.0]).unwrap();
        let basis = top_bottom_basis(theta.decomposition(), 1, Which::Top).unwrap();
        let dx = eig_perturb_opt(&theta, &basis, &dvector![3.0, 5.0], 1.0).unwrap();
        assert_abs_diff_eq!(dx[0], 1.0, epsilon = 1e-14);
        assert_eq!(dx[1], 0.0);
        assert_eq!(eig_perturb_opt(&theta, &basis, &dvector![0.0, 0.0], 1.0).unwrap(), dvector![0.0, 0.0]);
    }

    #[test]
    fn multiplier_inversion() {
        let (theta, ppca) = setup();
        let x = dvector![2.0, 0.0];
        let surface = AttackSurface::Generative(&ppca);
        let closed = |eps: f64| (3.0 + 2.0 * 3.0_f64.sqrt() / eps) / 4.0;
        let l = solve_multiplier(&theta, surface, &x, 2.0 * 3.0_f64.sqrt()).unwrap();
        assert_abs_diff_eq!(l, 1.0, epsilon = 1e-9);
        let l = solve_multiplier(&theta, surface, &x, 3.0_f64.sqrt()).unwrap();
        assert_abs_diff_eq!(l, 1.25, epsilon = 1e-9);
        for eps in [1e-3, 0.1, 1.0, 10.0, 1e3] {
            let l = solve_multiplier(&theta, surface, &x, eps).unwrap();
            assert!((l - closed(eps)).abs() <= 1e-8 * closed(eps), "eps {eps}");
            let dz = gen_perturb_opt(&theta, &ppca, &x, l).unwrap();
            assert!((dz.norm() - eps).abs() <= 1e-10 * eps);
        }
        assert!(matches!(
            solve_multiplier(&theta, surface, &dvector![0.0, 0.0], 1.0),
            Err(Error::UnattainableRadius { .. })
        ));
        assert!(solve_multiplier(&theta, surface, &x, 0.0).is_err());
    }

    #[test]
    fn bounded_supremum_is_reported() {
        // x - μ has no component along the top curvature direction
        let theta = GaussianModel::new(dvector![0.0, 0.0], dmatrix![1.0, 0.0; 0.0, 4.0]).unwrap();
        let basis = SubspaceBasis::new(Matrix::identity(2, 2)).unwrap();
        let problem = PenalizedAttack::new(&theta, basis.columns()).unwrap();
        let x = dvector![0.0, 3.0];
        // K = diag(1, 1/4), c = (0, 3/4): sup = (3/4) / (1 - 1/4) = 1
        assert_abs_diff_eq!(problem.radius_supremum(&x).unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(problem.solve_multiplier(&x, 1.5), Err(Error::UnattainableRadius { .. })));
        let l = problem.solve_multiplier(&x, 0.5).unwrap();
        assert_abs_diff_eq!(problem.delta(&x, l).unwrap().norm(), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn rank_deficient_covariance() {
        let theta = GaussianModel::new(dvector![0.0, 0.0], dmatrix![4.0, 0.0; 0.0, 0.0]).unwrap();
        let ppca = crate::ppca::fit(theta.decomposition(), theta.mu(), 1).unwrap();
        assert_eq!(ppca.sigma2(), 0.0);
        // K = wᵀΣ⁺w = 1, c = w·x/4 = 0.5 for x = (1, 0): δ = 0.5 / (L - 1)
        let dz = gen_perturb_opt(&theta, &ppca, &dvector![1.0, 0.0], 2.0).unwrap();
        assert_abs_diff_eq!(dz[0], 0.5, epsilon = 1e-14);

        let off = SubspaceBasis::new(dmatrix![0.0; 1.0]).unwrap();
        assert!(matches!(
            eig_perturb_opt(&theta, &off, &dvector![1.0, 0.0], 2.0),
            Err(Error::UnboundedLoss)
        ));
    }

    #[test]
    fn attack_result_fields() {
        let (theta, ppca) = setup();
        let x = dvector![2.0, 0.0];
        let res = attack(&theta, AttackSurface::Generative(&ppca), &x, Budget::Radius(1.0)).unwrap();
        assert_eq!(res.delta.len(), 1);
        assert!((res.delta.norm() - 1.0).abs() < 1e-10);
        assert!(res.loss_adv >= res.loss_clean);
        assert_abs_diff_eq!(res.x_adv.clone(), &x + ppca.w() * &res.delta, epsilon = 1e-15);

        let basis = top_bottom_basis(theta.decomposition(), 2, Which::Top).unwrap();
        let res = attack(&theta, AttackSurface::Eigenspace(&basis), &x, Budget::Multiplier(2.0)).unwrap();
        assert_eq!(res.delta.len(), 2);
        assert_eq!(res.multiplier, 2.0);
        assert!(attack(&theta, AttackSurface::Eigenspace(&basis), &x, Budget::Multiplier(-1.0)).is_err());
    }

    #[test]
    fn response_matrix_matches_delta() {
        let theta = GaussianModel::new(dvector![1.0, -1.0, 0.0], dmatrix![3.0, 1.0, 0.0; 1.0, 2.0, 0.5; 0.0, 0.5, 1.0]).unwrap();
        let map = dmatrix![1.0, 0.0; 0.5, 1.0; 0.0, -0.3];
        let problem = PenalizedAttack::new(&theta, &map).unwrap();
        let l = problem.threshold() * 1.3;
        let x = dvector![0.3, 2.0, -1.0];
        let m = problem.response_matrix(l).unwrap();
        assert_abs_diff_eq!(m * (&x - theta.mu()), problem.delta(&x, l).unwrap(), epsilon = 1e-12);
        assert!(penalized_gradient(&theta, &map, &x, l, &problem.delta(&x, l).unwrap()).norm() < 1e-10);
    }
}
