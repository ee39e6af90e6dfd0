//! Monte Carlo checks of the subordinator law.

use crate::error::{Error, Result};
use crate::noise::sample_stable_increment;
use crate::seeding::{stream_rng, SUBORDINATOR_STREAM};
use crate::stats::{mean, std_error};

/// `erfc(1/2)`, the value of the `ρ = 1/2` stable CDF `P(S₁ ≤ 1)`.
pub const ERFC_HALF: f64 = 0.479_500_122_186_953_5;

/// Outcome of comparing a sample mean with a closed-form value.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloCheck {
    pub name: String,
    pub estimate: f64,
    pub reference: f64,
    pub se: f64,
    /// Allowed deviation in units of `se`.
    pub sigmas: f64,
}

impl MonteCarloCheck {
    pub fn deviation(&self) -> f64 {
        (self.estimate - self.reference).abs()
    }

    pub fn passed(&self) -> bool {
        self.deviation() <= self.sigmas * self.se
    }
}

fn unit_draws(rho: f64, draws: usize, seed: u64) -> Result<Vec<f64>> {
    if draws < 2 {
        return Err(Error::usage("a Monte Carlo check needs at least two draws"));
    }
    let mut rng = stream_rng(seed, (rho * 1e6) as u64, SUBORDINATOR_STREAM);
    (0..draws)
        .map(|_| sample_stable_increment(1.0, rho, &mut rng))
        .collect()
}

/// `mean(e^{-S₁})` against the Laplace transform value `e^{-1}`.
pub fn laplace_check(rho: f64, draws: usize, seed: u64) -> Result<MonteCarloCheck> {
    let values: Vec<f64> = unit_draws(rho, draws, seed)?.into_iter().map(|s| (-s).exp()).collect();
    Ok(MonteCarloCheck {
        name: format!("laplace_rho_{rho}"),
        estimate: mean(&values),
        reference: (-1.0f64).exp(),
        se: std_error(&values),
        sigmas: 3.0,
    })
}

/// `P̂(S₁ ≤ 1)` at `ρ = 1/2` against `erfc(1/2)`.
pub fn levy_cdf_check(draws: usize, seed: u64) -> Result<MonteCarloCheck> {
    let hits: Vec<f64> = unit_draws(0.5, draws, seed)?
        .into_iter()
        .map(|s| if s <= 1.0 { 1.0 } else { 0.0 })
        .collect();
    let p = mean(&hits);
    Ok(MonteCarloCheck {
        name: "levy_cdf_rho_0.5".to_string(),
        estimate: p,
        reference: ERFC_HALF,
        se: (ERFC_HALF * (1.0 - ERFC_HALF) / draws as f64).sqrt(),
        sigmas: 3.0,
    })
}
