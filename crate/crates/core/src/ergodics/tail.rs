use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding::{stream_rng, BOOTSTRAP_STREAM};
use crate::stats::quantile;

pub const DEFAULT_TOP_FRACTION: f64 = 0.05;
pub const MIN_TAIL_SAMPLES: usize = 500;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Hill estimates above this are reported as a light tail.
pub const LIGHT_TAIL_INDEX: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailIndex {
    pub estimate: f64,
    /// 95% bootstrap percentile interval.
    pub ci: (f64, f64),
    /// Number of upper order statistics used.
    pub k: usize,
    pub light_tail: bool,
}

/// Hill estimator on the top `k` order statistics of `sorted` (descending).
fn hill_sorted(sorted: &[f64], k: usize) -> f64 {
    let threshold = sorted[k].ln();
    let s: f64 = sorted[..k].iter().map(|x| x.ln() - threshold).sum();
    k as f64 / s
}

fn hill(values: &mut [f64], k: usize) -> f64 {
    values.sort_by(|a, b| b.total_cmp(a));
    hill_sorted(values, k)
}

/// Hill estimate of the tail index of positive `samples` from the top
/// `top_fraction` of order statistics, with a bootstrap interval driven by
/// `seed`.
pub fn tail_index(samples: &[f64], top_fraction: f64, seed: u64) -> Result<TailIndex> {
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(Error::usage(format!(
            "tail index needs at least {MIN_TAIL_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if !(top_fraction > 0.0 && top_fraction <= 0.2) {
        return Err(Error::usage(format!(
            "top fraction must lie in (0, 0.2], got {top_fraction}"
        )));
    }
    if samples.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::domain("tail index samples must be positive and finite"));
    }
    let k = ((top_fraction * samples.len() as f64) as usize).max(2);
    let mut sorted = samples.to_vec();
    let estimate = hill(&mut sorted, k);
    if !estimate.is_finite() {
        return Err(Error::estimation(
            "degenerate sample: the top order statistics are all equal",
        ));
    }
    let mut rng = stream_rng(seed, 0, BOOTSTRAP_STREAM);
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut resample = vec![0.0; samples.len()];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for slot in resample.iter_mut() {
            *slot = samples[rng.random_range(0..samples.len())];
        }
        let h = hill(&mut resample, k);
        if h.is_finite() {
            boot.push(h);
        }
    }
    let ci = if boot.is_empty() {
        (estimate, f64::INFINITY)
    } else {
        (quantile(&boot, 0.025), quantile(&boot, 0.975))
    };
    Ok(TailIndex {
        estimate,
        ci,
        k,
        light_tail: estimate > LIGHT_TAIL_INDEX,
    })
}
