//! Probabilistic PCA: `x = Wz + μ + ε`, `z ~ N(0, I_q)`, `ε ~ N(0, σ² I_d)`.
//!
//! The model is fitted in closed form from a spectral decomposition of the data
//! covariance. Latent perturbations go through one of three encode/decode
//! strategies; all of them produce `x_adv = x' + WΔz` with `x'` Gaussian around
//! `μ` and covariance `U diag(Λ^(j)) Uᵀ`, see [`strategy_lambdas`].

use std::fmt;
use std::str::FromStr;

use nalgebra::Cholesky;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::standard_normal;
use crate::mc;
use crate::spectral::{eigh_sym, SpectralDecomposition};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct PpcaModel {
    w: Matrix,
    sigma2: f64,
    mu: Vector,
}

impl PpcaModel {
    /// Builds a model from explicit parameters (`1 ≤ q ≤ d`).
    pub fn new(w: Matrix, sigma2: f64, mu: Vector) -> Result<Self> {
        let (d, q) = w.shape();
        if q == 0 || q > d {
            return Err(Error::invalid("q", format!("latent dimension {q} outside 1..={d}")));
        }
        if mu.len() != d {
            return Err(Error::DimensionMismatch {
                context: "ppca mean vs loading rows",
                expected: d,
                found: mu.len(),
            });
        }
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::invalid("sigma2", format!("must be finite and non-negative, got {sigma2}")));
        }
        if w.iter().chain(mu.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ppca parameters"));
        }
        Ok(Self { w, sigma2, mu })
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn mu(&self) -> &Vector {
        &self.mu
    }

    pub fn q(&self) -> usize {
        self.w.ncols()
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    /// `P = WᵀW + σ² I`.
    pub fn p_matrix(&self) -> Matrix {
        let q = self.q();
        self.w.tr_mul(&self.w) + Matrix::identity(q, q) * self.sigma2
    }

    /// The posterior-mode map `P⁻¹Wᵀ` (q×d).
    pub fn encoder(&self) -> Result<Matrix> {
        let chol = Cholesky::new(self.p_matrix()).ok_or(Error::Singular("ppca encode (P = WᵀW + σ²I)"))?;
        Ok(chol.solve(&self.w.transpose()))
    }

    /// `z = P⁻¹Wᵀ(x - μ)`.
    pub fn encode(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        Ok(self.encoder()? * (x - &self.mu))
    }

    /// `x = Wz + μ`.
    pub fn decode(&self, z: &Vector) -> Result<Vector> {
        if z.len() != self.q() {
            return Err(Error::DimensionMismatch {
                context: "latent vector",
                expected: self.q(),
                found: z.len(),
            });
        }
        Ok(&self.w * z + &self.mu)
    }

    /// Prepared sampler for one strategy.
    pub fn sampler(&self, strategy: Strategy) -> Result<StrategySampler<'_>> {
        let encoder = self.encoder()?;
        let posterior_root = match strategy {
            Strategy::Two => {
                let chol = Cholesky::new(self.p_matrix()).ok_or(Error::Singular("ppca posterior covariance"))?;
                let cov = chol.inverse() * self.sigma2;
                Some(eigh_sym(&crate::spectral::symmetrize(&cov))?.sqrt())
            }
            _ => None,
        };
        Ok(StrategySampler {
            model: self,
            strategy,
            encoder,
            posterior_root,
            noise_sd: self.sigma2.sqrt(),
        })
    }

    pub fn to_json(&self) -> String {
        let doc = PpcaJson {
            mu: self.mu.iter().copied().collect(),
            w: self.w.column_iter().map(|c| c.iter().copied().collect()).collect(),
            sigma2: self.sigma2,
            q: self.q(),
        };
        serde_json::to_string_pretty(&doc).expect("plain numeric document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PpcaJson = serde_json::from_str(text)?;
        if doc.w.len() != doc.q {
            return Err(Error::Parse(format!("`q` is {} but `w` has {} columns", doc.q, doc.w.len())));
        }
        let d = doc.mu.len();
        if let Some(bad) = doc.w.iter().find(|c| c.len() != d) {
            return Err(Error::Parse(format!("`w` column has {} entries, `mu` has {d}", bad.len())));
        }
        let w = Matrix::from_iterator(d, doc.q, doc.w.into_iter().flatten());
        Self::new(w, doc.sigma2, Vector::from_vec(doc.mu))
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "ppca data point",
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// On-disk layout: `w` is a list of columns.
#[derive(Serialize, Deserialize)]
struct PpcaJson {
    mu: Vec<f64>,
    w: Vec<Vec<f64>>,
    sigma2: f64,
    q: usize,
}

/// Maximum-likelihood fit `W = U_q (Λ_q - σ² I)^{1/2}`, `σ² = mean(λ_{q+1..d})`.
pub fn fit(decomp: &SpectralDecomposition, mu: &Vector, q: usize) -> Result<PpcaModel> {
    let d = decomp.dim();
    if mu.len() != d {
        return Err(Error::DimensionMismatch {
            context: "ppca fit mean",
            expected: d,
            found: mu.len(),
        });
    }
    if q == 0 || q >= d {
        return Err(Error::invalid("q", format!("must satisfy 1 <= q < d = {d}, got {q}")));
    }
    let lambdas = decomp.eigenvalues();
    let sigma2 = ml_noise_variance(lambdas, q);
    if lambdas[q - 1] < sigma2 {
        return Err(Error::invalid(
            "q",
            format!("λ_q = {} is below the noise variance {sigma2}", lambdas[q - 1]),
        ));
    }
    let mut w = decomp.eigenvectors().columns(0, q).into_owned();
    for (j, mut col) in w.column_iter_mut().enumerate() {
        col.scale_mut((lambdas[j] - sigma2).sqrt());
    }
    PpcaModel::new(w, sigma2, mu.clone())
}

/// `σ²_ML`, the mean of the trailing `d - q` eigenvalues.
pub fn ml_noise_variance(lambdas: &[f64], q: usize) -> f64 {
    let tail = &lambdas[q..];
    if tail.iter().all(|&l| l == 0.0) {
        return 0.0;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Strategy {
    /// Encode to the posterior mode, decode to the likelihood mode.
    #[default]
    One,
    /// Sample the posterior, then sample the likelihood.
    Two,
    /// Sample the prior, then sample the likelihood.
    Three,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::One, Strategy::Two, Strategy::Three];

    pub fn number(self) -> u8 {
        match self {
            Strategy::One => 1,
            Strategy::Two => 2,
            Strategy::Three => 3,
        }
    }
}

impl TryFrom<u8> for Strategy {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Strategy::One),
            2 => Ok(Strategy::Two),
            3 => Ok(Strategy::Three),
            other => Err(Error::invalid("strategy", format!("expected 1, 2 or 3, got {other}"))),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n: u8 = s
            .parse()
            .map_err(|_| Error::invalid("strategy", format!("expected 1, 2 or 3, got `{s}`")))?;
        Strategy::try_from(n)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Eigenvalues of the covariance of `x'` under one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedSpectrum {
    pub strategy: Strategy,
    pub lambdas: Vec<f64>,
}

/// `Λ^(j)` for source eigenvalues `λ` (descending), noise variance `σ²` and
/// latent dimension `q`:
///
/// - strategy 1: `(λ_i - σ²)² / λ_i` for `i ≤ q`, `0` after;
/// - strategy 2: `(λ_i - σ²)²/λ_i + (λ_i - σ²)σ²/λ_i + σ²` for `i ≤ q`, `σ²` after;
/// - strategy 3: `λ_i` for `i ≤ q`, `σ²` after.
///
/// `q = d` is accepted for the noiseless case.
pub fn strategy_lambdas(lambdas: &[f64], sigma2: f64, q: usize, strategy: Strategy) -> Result<Vec<f64>> {
    let d = lambdas.len();
    if q == 0 || q > d {
        return Err(Error::invalid("q", format!("{q} outside 1..={d}")));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid("sigma2", format!("must be non-negative, got {sigma2}")));
    }
    if q == d && sigma2 != 0.0 {
        return Err(Error::invalid("q", "q = d requires zero noise variance"));
    }
    let mut out = Vec::with_capacity(d);
    for &l in &lambdas[..q] {
        if l == 0.0 {
            out.push(0.0);
            continue;
        }
        let a = l - sigma2;
        // a * (a / l) returns l exactly when σ² = 0
        let v = match strategy {
            Strategy::One => a * (a / l),
            Strategy::Two => a * (a / l) + a * (sigma2 / l) + sigma2,
            Strategy::Three => l,
        };
        out.push(v);
    }
    let tail = match strategy {
        Strategy::One => 0.0,
        Strategy::Two | Strategy::Three => sigma2,
    };
    out.extend(std::iter::repeat_n(tail, d - q));
    Ok(out)
}

/// `Λ^(j)` for a fitted model and the eigenvalues it was fitted from.
pub fn shifted_spectrum(model: &PpcaModel, source_lambdas: &[f64], strategy: Strategy) -> Result<ShiftedSpectrum> {
    let d = model.dim();
    if source_lambdas.len() != d {
        return Err(Error::DimensionMismatch {
            context: "source eigenvalues",
            expected: d,
            found: source_lambdas.len(),
        });
    }
    let q = model.q();
    if q < d {
        let implied = ml_noise_variance(source_lambdas, q);
        if (implied - model.sigma2()).abs() > 1e-9 * implied.max(1.0) {
            return Err(Error::invalid(
                "source_lambdas",
                format!("imply σ² = {implied}, model has {}", model.sigma2()),
            ));
        }
    }
    Ok(ShiftedSpectrum {
        strategy,
        lambdas: strategy_lambdas(source_lambdas, model.sigma2(), q, strategy)?,
    })
}

/// Encode/perturb/decode sampler for one strategy with its matrices prepared.
pub struct StrategySampler<'a> {
    model: &'a PpcaModel,
    strategy: Strategy,
    encoder: Matrix,
    posterior_root: Option<Matrix>,
    noise_sd: f64,
}

impl StrategySampler<'_> {
    /// Returns `(x', x_adv)` with `x_adv = x' + WΔz`.
    ///
    /// Strategies 1 and 2 need the clean point `x`; strategy 3 draws its own latent
    /// code and rejects one.
    pub fn draw<R: Rng + ?Sized>(&self, x: Option<&Vector>, delta_z: &Vector, rng: &mut R) -> Result<(Vector, Vector)> {
        let m = self.model;
        if delta_z.len() != m.q() {
            return Err(Error::DimensionMismatch {
                context: "latent perturbation",
                expected: m.q(),
                found: delta_z.len(),
            });
        }
        let x_prime = match (self.strategy, x) {
            (Strategy::One, Some(x)) => {
                m.check_dim(x)?;
                &m.w * (&self.encoder * (x - &m.mu)) + &m.mu
            }
            (Strategy::Two, Some(x)) => {
                m.check_dim(x)?;
                let root = self.posterior_root.as_ref().expect("strategy 2 sampler has a posterior root");
                let z = &self.encoder * (x - &m.mu) + root * standard_normal(m.q(), rng);
                &m.w * z + &m.mu + standard_normal(m.dim(), rng) * self.noise_sd
            }
            (Strategy::Three, None) => {
                let z = standard_normal(m.q(), rng);
                &m.w * z + &m.mu + standard_normal(m.dim(), rng) * self.noise_sd
            }
            (Strategy::Three, Some(_)) => {
                return Err(Error::invalid("x", "strategy 3 samples its own latent code; omit x"))
            }
            (_, None) => return Err(Error::invalid("x", format!("strategy {} requires x", self.strategy))),
        };
        let x_adv = &x_prime + &m.w * delta_z;
        Ok((x_prime, x_adv))
    }
}

/// One seeded draw of `(x', x_adv)`; see [`StrategySampler::draw`].
pub fn strategy_sample(
    model: &PpcaModel,
    strategy: Strategy,
    x: Option<&Vector>,
    delta_z: &Vector,
    seed: u64,
) -> Result<(Vector, Vector)> {
    let mut rng = mc::rng(seed, 0);
    model.sampler(strategy)?.draw(x, delta_z, &mut rng)
}
