//! Seeded, partitioned Monte-Carlo.
//!
//! Sample `i` belongs to chunk `i / CHUNK`. Chunk `c` draws from a ChaCha20 stream
//! seeded with the user seed and stream id `c`, so results do not depend on how
//! many worker threads process the chunks. Per-chunk statistics are merged in
//! chunk order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::{Matrix, Vector};

pub const CHUNK: usize = 4096;

pub type McRng = ChaCha20Rng;

/// Random stream `stream` under `seed`.
pub fn rng(seed: u64, stream: u64) -> McRng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
    infinite: Option<f64>,
}

impl Welford {
    fn push(&mut self, x: f64) {
        if x.is_infinite() {
            self.infinite.get_or_insert(x);
            return;
        }
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Welford) -> Welford {
        let infinite = self.infinite.or(other.infinite);
        if other.n == 0 {
            return Welford { infinite, ..self };
        }
        if self.n == 0 {
            return Welford { infinite, ..other };
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Welford { n, mean, m2, infinite }
    }
}

fn chunks(n: usize) -> Vec<(u64, usize)> {
    (0..n.div_ceil(CHUNK))
        .map(|c| (c as u64, CHUNK.min(n - c * CHUNK)))
        .collect()
}

/// Mean and standard error of `f` over `n` draws.
///
/// An infinite draw makes the estimate that infinity (with infinite standard
/// error); finite draws are then ignored.
pub fn estimate_mean<F>(n: usize, seed: u64, f: F) -> Result<MeanEstimate>
where
    F: Fn(&mut McRng) -> Result<f64> + Sync,
{
    let parts: Vec<Welford> = chunks(n)
        .into_par_iter()
        .map(|(stream, len)| {
            let mut rng = rng(seed, stream);
            let mut acc = Welford::default();
            for _ in 0..len {
                acc.push(f(&mut rng)?);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let total = parts.into_iter().fold(Welford::default(), Welford::merge);
    if let Some(inf) = total.infinite {
        return Ok(MeanEstimate {
            mean: inf,
            stderr: f64::INFINITY,
            n,
        });
    }
    let stderr = if total.n > 1 {
        (total.m2 / (total.n - 1) as f64 / total.n as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(MeanEstimate {
        mean: total.mean,
        stderr,
        n,
    })
}

/// `n` rows drawn by `f`, stacked into an n×d matrix.
pub fn sample_rows<F>(n: usize, d: usize, seed: u64, f: F) -> Result<Matrix>
where
    F: Fn(&mut McRng) -> Result<Vector> + Sync,
{
    let blocks: Vec<Vec<Vector>> = chunks(n)
        .into_par_iter()
        .map(|(stream, len)| {
            let mut rng = rng(seed, stream);
            (0..len).map(|_| f(&mut rng)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = Matrix::zeros(n, d);
    for (i, row) in blocks.iter().flatten().enumerate() {
        out.set_row(i, &row.transpose());
    }
    Ok(out)
}
