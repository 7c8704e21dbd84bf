//! Deterministic Monte Carlo plumbing: per-replicate seed streams, parallel
//! replication and empirical distributions.
//!
//! Replicate `i` always draws from `seed_stream(master_seed, i)`, and results
//! are gathered in replicate order, so outputs do not depend on the number of
//! worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Environment variable consulted for the default worker count.
pub const THREADS_ENV: &str = "EXPFAM_CPD_THREADS";

/// Quantile levels reported in experiment summaries.
pub const SUMMARY_LEVELS: [f64; 9] = [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub replications: usize,
    pub master_seed: u64,
    /// Worker count hint; `None` uses the ambient rayon pool.
    #[serde(default)]
    pub parallelism: Option<usize>,
}

impl MonteCarloConfig {
    pub fn new(replications: usize, master_seed: u64) -> Self {
        Self {
            replications,
            master_seed,
            parallelism: None,
        }
    }

    pub fn with_parallelism(mut self, workers: usize) -> Self {
        self.parallelism = Some(workers);
        self
    }

    /// Worker count from [`THREADS_ENV`], if set to a positive integer.
    pub fn parallelism_from_env() -> Option<usize> {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .filter(|&w: &usize| w > 0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        if self.parallelism == Some(0) {
            return Err(invalid("parallelism must be at least 1"));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer; a bijection on `u64`.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replicate `replicate` of the stream rooted at `master_seed`.
///
/// Composition of bijections, hence injective in `replicate` for a fixed
/// master seed.
pub fn seed_stream(master_seed: u64, replicate: u64) -> u64 {
    mix64(mix64(replicate).wrapping_add(mix64(master_seed ^ 0x9e37_79b9_7f4a_7c15)))
}

/// Generator for one replicate.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed_stream(master_seed, replicate))
}

/// Runs `f` once per replicate, in parallel, and returns the results in
/// replicate order.
pub fn par_replicates<T, F>(mc: &MonteCarloConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync + Send,
{
    mc.validate()?;
    let run = || {
        (0..mc.replications)
            .into_par_iter()
            .map(|i| {
                let mut rng = replicate_rng(mc.master_seed, i as u64);
                f(i, &mut rng)
            })
            .collect::<Vec<T>>()
    };
    match mc.parallelism {
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| invalid(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

/// Sorted Monte Carlo sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDist {
    samples: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("empirical distribution needs at least one sample"));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(invalid("empirical distribution received NaN"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    pub fn min(&self) -> f64 {
        self.samples[0]
    }

    pub fn max(&self) -> f64 {
        self.samples[self.samples.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.count() as f64
    }

    /// Sample standard deviation (zero for a single sample).
    pub fn std_dev(&self) -> f64 {
        let m = self.count();
        if m < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let ss: f64 = self.samples.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (m - 1) as f64).sqrt()
    }

    /// Lower order statistic at rank `⌈p·m⌉` (rank 1 for `p = 0`).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("quantile level must be in [0, 1], got {p}")));
        }
        let m = self.count();
        let rank = ((p * m as f64).ceil() as usize).clamp(1, m);
        Ok(self.samples[rank - 1])
    }

    /// Right-continuous empirical CDF.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.samples.partition_point(|&v| v <= x) as f64 / self.count() as f64
    }

    /// Two-sample Kolmogorov–Smirnov distance.
    pub fn ks_distance(&self, other: &EmpiricalDist) -> f64 {
        let (a, b) = (&self.samples, &other.samples);
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let (mut i, mut j) = (0, 0);
        let mut best: f64 = 0.0;
        while i < a.len() || j < b.len() {
            let x = match (a.get(i), b.get(j)) {
                (Some(&u), Some(&v)) => u.min(v),
                (Some(&u), None) => u,
                (None, Some(&v)) => v,
                (None, None) => unreachable!(),
            };
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            best = best.max((i as f64 / na - j as f64 / nb).abs());
        }
        best
    }

    /// One-sample Kolmogorov–Smirnov distance against a CDF, checked on both
    /// sides of every jump of the empirical CDF.
    pub fn ks_distance_cdf(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let m = self.count() as f64;
        let mut best: f64 = 0.0;
        let mut i = 0;
        while i < self.samples.len() {
            let x = self.samples[i];
            let below = i as f64 / m;
            while i < self.samples.len() && self.samples[i] <= x {
                i += 1;
            }
            let f = cdf(x);
            best = best.max((i as f64 / m - f).abs()).max((below - f).abs());
        }
        best
    }

    /// Equal-width histogram over `[min, max]`; returns `(left_edge, width,
    /// count)` per bin.
    pub fn histogram(&self, bins: usize) -> Vec<(f64, f64, usize)> {
        let bins = bins.max(1);
        let (lo, hi) = (self.min(), self.max());
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for &v in &self.samples {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (lo + i as f64 * width, width, c))
            .collect()
    }

    /// Quantiles at [`SUMMARY_LEVELS`].
    pub fn summary_quantiles(&self) -> Vec<(f64, f64)> {
        SUMMARY_LEVELS
            .iter()
            .map(|&p| (p, self.quantile(p).expect("levels lie in [0, 1]")))
            .collect()
    }
}
