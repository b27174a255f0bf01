//! Numerical laboratory for on-manifold adversarial examples on Gaussian models.
//!
//! The crate is organised bottom-up:
//!
//! - [`spectral`]: symmetric eigendecomposition, covariance estimation, subspace bases.
//! - [`gmm`]: the folded Gaussian data model, its negative log-likelihood and the
//!   linear classifier `sgn(μᵀΣ⁻¹x)`.
//! - [`ppca`]: probabilistic PCA fit, encode/decode and the three latent sampling
//!   strategies.
//! - [`attack`]: closed-form optimal generative and eigenspace perturbations, the
//!   multiplier/radius conversion and brute-force oracles.
//! - [`risk`]: exact and Monte-Carlo excess risk.
//! - [`shift`]: closed-form adversarially trained spectra, scalar fixed points and the
//!   alternating min-max simulator.
//! - [`analysis`]: spectrum comparison, attack-direction profiles and attack success
//!   rates on synthetic data.
//! - [`verify`]: the oracle suite behind the `verify` command.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod attack;
pub mod error;
pub mod gmm;
pub mod io;
pub mod mc;
pub mod ppca;
pub mod risk;
pub mod shift;
pub mod spectral;
pub mod verify;

pub use analysis::{DirectionProfile, SpectrumComparison};
pub use attack::{AttackResult, AttackSurface, Budget};
pub use error::{Error, Result};
pub use gmm::{GaussianModel, Label, LabeledDataset};
pub use ppca::{PpcaModel, ShiftedSpectrum, Strategy};
pub use risk::{ExcessRiskReport, Variant};
pub use shift::{MinmaxTrace, RobustSpectrum, ShiftMode};
pub use spectral::{SpectralDecomposition, SubspaceBasis, Which};

/// Dense column-major matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense column vector.
pub type Vector = nalgebra::DVector<f64>;
