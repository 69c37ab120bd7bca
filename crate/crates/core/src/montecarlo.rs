//! Deterministic simulation plumbing.
//!
//! Every random quantity is addressed by `(seed, stream_id, sample index)`.
//! The pair `(seed, stream_id)` keys a ChaCha8 generator and the sample
//! index selects one of its 2⁶⁴ independent streams, so a draw never depends
//! on which worker produced it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::{Scenario, SirSampler};

pub const DEFAULT_SEED: u64 = 0xC0FFEE;

/// Samples per deterministic reduction chunk. Partial sums are formed per
/// chunk and combined in index order, so the rounding pattern of a parallel
/// sum does not depend on the worker count.
const CHUNK: usize = 4096;

/// Substream tags, one per simulation purpose.
pub mod tag {
    pub const MAXIMA: u64 = 1;
    pub const OUTAGE: u64 = 2;
    pub const RATE: u64 = 3;
    pub const ORDER_STATS: u64 = 4;
    pub const FAS: u64 = 5;
    pub const FRECHET: u64 = 6;
    pub const SIR: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
    /// Offset added to every sample index.
    pub position: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream {
            seed,
            stream_id: 0,
            position: 0,
        }
    }

    /// Child stream; distinct `id`s give unrelated keys.
    pub fn substream(&self, id: u64) -> Self {
        RandomStream {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(id.wrapping_add(0x5851_F42D_4C95_7F2D))),
            position: 0,
        }
    }

    /// The same stream with its counter moved forward by `n` samples.
    pub fn advanced(&self, n: u64) -> Self {
        RandomStream {
            position: self.position + n,
            ..*self
        }
    }

    fn key(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream_id.to_le_bytes());
        key[16..24].copy_from_slice(&splitmix64(self.seed).to_le_bytes());
        key[24..].copy_from_slice(&splitmix64(self.stream_id ^ 0xA5A5_A5A5_A5A5_A5A5).to_le_bytes());
        key
    }

    /// Generator owned by sample `index`.
    pub fn rng_at(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(self.position.wrapping_add(index));
        rng
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

/// `f(0), …, f(n-1)` in index order, evaluated on `workers` threads.
pub fn par_map<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    Ok(pool(workers)?.install(|| (0..n as u64).into_par_iter().map(&f).collect()))
}

/// Sums of `f(i)` and `f(i)²` over `i < n`, bitwise independent of `workers`.
pub fn par_sum_sq<F>(n: usize, workers: usize, f: F) -> Result<(f64, f64)>
where
    F: Fn(u64) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partials = par_map(chunks, workers, |c| {
        let lo = c * CHUNK as u64;
        let hi = (lo + CHUNK as u64).min(n as u64);
        (lo..hi).map(&f).fold((0.0, 0.0), |(s, q), v| (s + v, q + v * v))
    })?;
    Ok(partials.into_iter().fold((0.0, 0.0), |(s, q), (a, b)| (s + a, q + b)))
}

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl McEstimate {
    pub(crate) fn from_sums(sum: f64, sum_sq: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 samples, got {n}")));
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        Ok(McEstimate {
            mean,
            std_err: (var / nf).sqrt(),
            n,
        })
    }

    /// Binomial proportion estimate.
    pub(crate) fn proportion(hits: usize, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 samples, got {n}")));
        }
        let p = hits as f64 / n as f64;
        Ok(McEstimate {
            mean: p,
            std_err: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        })
    }
}

pub fn estimate_with_se(values: &[f64]) -> Result<McEstimate> {
    if values.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {}", values.len())));
    }
    // Two-pass variance; the values are already in memory.
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McEstimate {
        mean,
        std_err: (var / n).sqrt(),
        n: values.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximaStudy {
    pub scenario: Scenario,
    #[serde(rename = "L")]
    pub l: usize,
    pub reps: usize,
    pub seed: u64,
}

impl MaximaStudy {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.l == 0 || self.reps == 0 {
            return Err(Error::invalid("maxima study needs L ≥ 1 and reps ≥ 1"));
        }
        Ok(())
    }
}

/// `reps` maxima of `L` SIR draws each; rep `r` consumes sample index `r`.
pub fn run_maxima_study(study: &MaximaStudy, workers: usize) -> Result<Vec<f64>> {
    study.validate()?;
    let sampler = SirSampler::new(&study.scenario)?;
    let stream = RandomStream::new(study.seed).substream(tag::MAXIMA);
    par_map(study.reps, workers, |r| sampler.sample_max(study.l, &mut stream.rng_at(r)))
}

/// `n` single SIR draws; draw `i` consumes sample index `i`.
pub fn sample_sir_batch(s: &Scenario, n: usize, seed: u64, workers: usize) -> Result<Vec<f64>> {
    let sampler = SirSampler::new(s)?;
    let stream = RandomStream::new(seed).substream(tag::SIR);
    par_map(n, workers, |i| sampler.sample(&mut stream.rng_at(i)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn stream_values_are_pure_functions_of_the_triple() {
        let s = RandomStream::new(42).substream(3);
        let a: u64 = s.rng_at(17).random();
        let b: u64 = s.rng_at(17).random();
        assert_eq!(a, b);
        assert_eq!(s.advanced(10).rng_at(7).random::<u64>(), s.rng_at(17).random::<u64>());
        assert_ne!(s.rng_at(18).random::<u64>(), a);
        assert_ne!(RandomStream::new(42).substream(4).rng_at(17).random::<u64>(), a);
        assert_ne!(RandomStream::new(43).substream(3).rng_at(17).random::<u64>(), a);
    }

    #[test]
    fn estimate_examples() {
        let c = estimate_with_se(&[3.0; 10]).unwrap();
        assert_eq!((c.mean, c.std_err), (3.0, 0.0));
        let e = estimate_with_se(&[0.0, 2.0]).unwrap();
        assert!((e.mean - 1.0).abs() < 1e-15 && (e.std_err - 1.0).abs() < 1e-15);
        let alt: Vec<f64> = (0..10_000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(estimate_with_se(&alt).unwrap().mean.abs() < 0.03);
        assert!(estimate_with_se(&[1.0]).is_err());
    }

    #[test]
    fn chunked_sums_ignore_worker_count() {
        let stream = RandomStream::new(DEFAULT_SEED);
        let f = |i: u64| stream.rng_at(i).random::<f64>();
        let one = par_sum_sq(20_000, 1, f).unwrap();
        let four = par_sum_sq(20_000, 4, f).unwrap();
        assert_eq!(one.0.to_bits(), four.0.to_bits());
        assert_eq!(one.1.to_bits(), four.1.to_bits());
    }
}
