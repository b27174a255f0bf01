//! Brute-force maximization of `ℓ(x + Aδ)` over the ball `‖δ‖ ≤ ε`.
//!
//! Used only to cross-check the closed forms, so it avoids them entirely: the
//! objective is evaluated directly as the quadratic `bᵀδ + ½δᵀKδ` with
//! `b = AᵀΣ⁺(x-μ)`, `K = AᵀΣ⁺A`, plus an infinite value for points that leave the
//! support of `Σ`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gmm::{standard_normal, GaussianModel, SUPPORT_TOL};
use crate::mc;
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleMode {
    /// Dense grid over `[-ε, ε]^k` followed by shrinking local grids (`k ≤ 3`).
    Grid { points_per_axis: usize },
    /// Projected normalized-gradient ascent with step `ε/100` and `10·steps`
    /// iterations per start; `restarts` extra starts are drawn from `seed`.
    Ascent { steps: usize, restarts: usize, seed: u64 },
}

impl Default for OracleMode {
    fn default() -> Self {
        OracleMode::Grid { points_per_axis: 201 }
    }
}

const REFINE_POINTS: usize = 21;
const REFINE_ROUNDS: usize = 40;

struct Objective {
    b: Vector,
    k: Matrix,
    /// `Nᵀ(x-μ)` and `NᵀA` for the null-space basis `N`.
    null_offset: Vector,
    null_map: Matrix,
    scale: f64,
}

impl Objective {
    fn new(theta: &GaussianModel, map: &Matrix, x: &Vector) -> Self {
        let v = x - theta.mu();
        let pa = theta.precision() * map;
        let null = theta.null_basis();
        Self {
            b: pa.tr_mul(&v),
            k: map.tr_mul(&pa),
            null_offset: null.tr_mul(&v),
            null_map: null.tr_mul(map),
            scale: v.norm(),
        }
    }

    /// Allocation-free evaluation; the grid calls this millions of times.
    fn value(&self, d: &[f64]) -> f64 {
        let k = d.len();
        if self.null_map.nrows() > 0 {
            let mut off = 0.0;
            for r in 0..self.null_map.nrows() {
                let mut v = self.null_offset[r];
                for (j, dj) in d.iter().enumerate() {
                    v += self.null_map[(r, j)] * dj;
                }
                off += v * v;
            }
            if off.sqrt() > SUPPORT_TOL * self.scale.max(1.0) {
                return f64::INFINITY;
            }
        }
        let mut total = 0.0;
        for i in 0..k {
            let kd: f64 = self.k.row(i).iter().zip(d).map(|(a, b)| a * b).sum();
            total += d[i] * (self.b[i] + 0.5 * kd);
        }
        total
    }

    fn gradient(&self, d: &Vector) -> Vector {
        &self.b + &self.k * d
    }
}

/// Best `δ` found for `max ℓ(x + map·δ)` subject to `‖δ‖₂ ≤ ε`.
pub fn brute_force_oracle(
    theta: &GaussianModel,
    map: &Matrix,
    x: &Vector,
    epsilon: f64,
    mode: OracleMode,
) -> Result<Vector> {
    if map.nrows() != theta.dim() || x.len() != theta.dim() {
        return Err(Error::DimensionMismatch {
            context: "oracle map/point",
            expected: theta.dim(),
            found: if x.len() != theta.dim() { x.len() } else { map.nrows() },
        });
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid("epsilon", format!("must be finite and non-negative, got {epsilon}")));
    }
    let k = map.ncols();
    if epsilon == 0.0 {
        return Ok(Vector::zeros(k));
    }
    let obj = Objective::new(theta, map, x);
    match mode {
        OracleMode::Grid { points_per_axis } => {
            if k == 0 || k > 3 {
                return Err(Error::invalid("map", format!("grid mode needs 1 to 3 columns, got {k}")));
            }
            if points_per_axis < 3 {
                return Err(Error::invalid("points_per_axis", "must be at least 3"));
            }
            Ok(grid_search(&obj, k, epsilon, points_per_axis))
        }
        OracleMode::Ascent { steps, restarts, seed } => {
            if steps == 0 {
                return Err(Error::invalid("steps", "must be at least 1"));
            }
            Ok(ascent(&obj, k, epsilon, steps, restarts, seed))
        }
    }
}

fn project(d: &mut Vector, epsilon: f64) {
    let n = d.norm();
    if n > epsilon {
        *d *= epsilon / n;
    }
}

/// Evaluates a regular grid of `points` per axis with spacing `step` around
/// `centre`, projecting every node onto the ball.
fn scan(obj: &Objective, centre: &Vector, step: f64, points: usize, epsilon: f64, best: &mut (f64, Vector)) {
    let k = centre.len();
    let half = (points / 2) as isize;
    let total = points.pow(k as u32);
    let mut d = Vector::zeros(k);
    for flat in 0..total {
        let mut rem = flat;
        for axis in 0..k {
            let i = (rem % points) as isize - half;
            rem /= points;
            d[axis] = centre[axis] + step * i as f64;
        }
        project(&mut d, epsilon);
        let v = obj.value(d.as_slice());
        if v > best.0 {
            *best = (v, d.clone());
        }
    }
}

fn grid_search(obj: &Objective, k: usize, epsilon: f64, points: usize) -> Vector {
    let points = points | 1;
    let mut best = (f64::NEG_INFINITY, Vector::zeros(k));
    // the coarse pass keeps only nodes inside the ball
    let step = 2.0 * epsilon / (points - 1) as f64;
    let half = (points / 2) as isize;
    let total = points.pow(k as u32);
    let mut d = Vector::zeros(k);
    for flat in 0..total {
        let mut rem = flat;
        for axis in 0..k {
            let i = (rem % points) as isize - half;
            rem /= points;
            d[axis] = step * i as f64;
        }
        if d.norm() > epsilon {
            continue;
        }
        let v = obj.value(d.as_slice());
        if v > best.0 {
            best = (v, d.clone());
        }
    }
    let mut local = step;
    for _ in 0..REFINE_ROUNDS {
        let centre = best.1.clone();
        scan(obj, &centre, local, REFINE_POINTS, epsilon, &mut best);
        local *= 0.35;
    }
    best.1
}

fn ascent(obj: &Objective, k: usize, epsilon: f64, steps: usize, restarts: usize, seed: u64) -> Vector {
    let mut rng = mc::rng(seed, 0);
    let mut starts = vec![Vector::zeros(k)];
    for _ in 0..restarts {
        let mut s = standard_normal(k, &mut rng);
        let n = s.norm();
        if n > 0.0 {
            s *= epsilon * rng.random::<f64>() / n;
        }
        starts.push(s);
    }
    let mut best = (f64::NEG_INFINITY, Vector::zeros(k));
    for start in starts {
        let mut d = start;
        let mut value = obj.value(d.as_slice());
        let mut step = epsilon / 100.0;
        for _ in 0..10 * steps {
            let mut g = obj.gradient(&d);
            let gn = g.norm();
            if gn == 0.0 {
                // stationary start, e.g. at the mean: nudge along the first axis
                g = Vector::zeros(k);
                g[0] = 1.0;
            } else {
                g /= gn;
            }
            let mut cand = &d + g * step;
            project(&mut cand, epsilon);
            let cv = obj.value(cand.as_slice());
            if cv > value {
                d = cand;
                value = cv;
            } else {
                step *= 0.5;
                if step < 1e-15 * epsilon {
                    break;
                }
            }
        }
        if value > best.0 {
            best = (value, d);
        }
    }
    best.1
}
