//! Seeded Monte Carlo plumbing.
//!
//! Every replication (or block of draws) gets its own ChaCha8 stream derived
//! from `(seed, index)`, and partial results are combined in index order, so
//! an estimate depends on the seed alone and never on how many worker threads
//! produced it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};

pub type SimRng = ChaCha8Rng;

/// Draws handled by one substream in [`mc_mean`].
pub const BLOCK: usize = 2048;

/// Independent generator for replication `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A Monte Carlo average with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub draws: usize,
}

impl McEstimate {
    pub fn from_moments(sum: f64, sum_sq: f64, draws: usize) -> Self {
        let n = draws as f64;
        let mean = sum / n;
        let var = if draws > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        Self { value: mean, std_error: (var / n).sqrt(), draws }
    }

    /// Whether `target` lies within `k` standard errors of the estimate.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Run `f` on a pool of `workers` threads (`None` uses the global pool).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => invalid("worker count must be positive"),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| crate::Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Map `f` over replications `0..reps`, each with its own substream.
pub fn replicate<T, F>(seed: u64, reps: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> T + Sync + Send,
{
    with_workers(workers, || {
        (0..reps)
            .into_par_iter()
            .map(|r| f(r, &mut substream(seed, r as u64)))
            .collect()
    })
}

/// Monte Carlo mean of `f` over `draws` draws.
pub fn mc_mean<F>(seed: u64, draws: usize, workers: Option<usize>, f: F) -> Result<McEstimate>
where
    F: Fn(&mut SimRng) -> f64 + Sync + Send,
{
    if draws == 0 {
        return invalid("Monte Carlo needs at least one draw");
    }
    let blocks = draws.div_ceil(BLOCK);
    let parts = replicate(seed, blocks, workers, |b, rng| {
        let len = BLOCK.min(draws - b * BLOCK);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..len {
            let v = f(rng);
            s += v;
            s2 += v * v;
        }
        (s, s2)
    })?;
    let (s, s2) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    Ok(McEstimate::from_moments(s, s2, draws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn independent_of_worker_count() {
        let f = |rng: &mut SimRng| rng.random::<f64>();
        let a = mc_mean(7, 10_000, Some(1), f).unwrap();
        let b = mc_mean(7, 10_000, Some(4), f).unwrap();
        let c = mc_mean(7, 10_000, None, f).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(a.within(0.5, 4.0));
        assert_ne!(a, mc_mean(8, 10_000, Some(1), f).unwrap());
    }

    #[test]
    fn substreams_differ() {
        let x: u64 = substream(1, 0).random();
        let y: u64 = substream(1, 1).random();
        assert_ne!(x, y);
        assert_eq!(x, substream(1, 0).random::<u64>());
    }

    #[test]
    fn standard_error_of_bernoulli() {
        let e = McEstimate::from_moments(30.0, 30.0, 100);
        assert!((e.value - 0.3).abs() < 1e-15);
        assert!((e.std_error - (0.3f64 * 0.7 / 99.0).sqrt()).abs() < 1e-12);
    }
}
