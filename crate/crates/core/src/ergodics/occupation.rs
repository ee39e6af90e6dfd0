use crate::ensemble::run_indexed;
use crate::error::{Error, Result};
use crate::integrator::{run_path, SimConfig, Trajectory};
use crate::noise::{step_count, NoiseModel};
use crate::observable::Observable;
use crate::spectral::Field;
use crate::stats::{pairwise_sum, Histogram, Summary};

/// Largest allowed gap between recorded instants, as a fraction of `T`.
pub const MAX_RECORD_GAP: f64 = 0.01;

/// Trapezoid time average of `values` sampled at `times`, written as
/// `v₀ + avg(v - v₀)` so that a constant path returns its value exactly.
fn trapezoid_average(times: &[f64], values: &[f64]) -> f64 {
    let v0 = values[0];
    let pieces: Vec<f64> = times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * ((v[0] - v0) + (v[1] - v0)) * (t[1] - t[0]))
        .collect();
    let span = times[times.len() - 1] - times[0];
    v0 + pairwise_sum(&pieces) / span
}

/// `L_T(f) = (1/T)∫₀ᵀ f(X_s) ds` by the trapezoid rule over the recorded
/// instants of `traj`.
pub fn occupation_average(traj: &Trajectory, f: &Observable) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::usage("occupation average needs at least two recorded instants"));
    }
    let times = &traj.times;
    let span = times[times.len() - 1] - times[0];
    let widest = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if widest > MAX_RECORD_GAP * span * (1.0 + 1e-9) {
        return Err(Error::usage(format!(
            "recording too sparse: gap {widest} exceeds {MAX_RECORD_GAP}·T = {}",
            MAX_RECORD_GAP * span
        )));
    }
    let values = traj.values_of(f)?;
    Ok(trapezoid_average(times, &values))
}

/// Ensemble of occupation averages of one observable.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationStats {
    pub horizon: f64,
    pub burn_in: f64,
    pub observable: Observable,
    /// `L_T(f)` per trajectory, in trajectory-index order.
    pub samples: Vec<f64>,
    pub summary: Summary,
    pub histogram: Histogram,
}

impl OccupationStats {
    pub fn from_samples(horizon: f64, burn_in: f64, observable: Observable, samples: Vec<f64>) -> Self {
        OccupationStats {
            horizon,
            burn_in,
            observable,
            summary: Summary::of(&samples),
            histogram: Histogram::new(&samples, 20),
            samples,
        }
    }

    pub fn mean(&self) -> f64 {
        self.summary.mean
    }

    pub fn std_error(&self) -> f64 {
        self.summary.std_error
    }
}

/// `|m₁ - m₂| / √(SE₁² + SE₂²)` for two ensembles.
pub fn twin_discrepancy(a: &OccupationStats, b: &OccupationStats) -> f64 {
    let se = a.std_error().hypot(b.std_error());
    let diff = (a.mean() - b.mean()).abs();
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / se
    }
}

/// Runs `ensemble` trajectories over `[0, burn_in + T]` (with `T =
/// config.horizon`) and averages each observable over `[burn_in, burn_in + T]`
/// at every step. Member `i` starts from `initial(i)` and uses noise stream
/// `config.trajectory_index + i`.
///
/// With `burn_in = 0` this is `L_T(f)` started at `initial(i)`; a positive
/// burn-in starts the average from the law of `X_{burn_in}` instead.
pub fn occupation_ensemble<I>(
    config: &SimConfig,
    model: &NoiseModel,
    initial: I,
    observables: &[Observable],
    ensemble: usize,
    burn_in: f64,
) -> Result<Vec<OccupationStats>>
where
    I: Fn(u64) -> Field + Sync + Send,
{
    if ensemble == 0 {
        return Err(Error::usage("ensemble size must be at least 1"));
    }
    if !(burn_in >= 0.0) || !burn_in.is_finite() {
        return Err(Error::domain(format!("burn-in must be nonnegative, got {burn_in}")));
    }
    for obs in observables {
        obs.validate()?;
    }
    let start = step_count(burn_in, config.dt);
    let start = if burn_in == 0.0 { 0 } else { start };
    let horizon = config.horizon;
    let run = SimConfig {
        horizon: start as f64 * config.dt + horizon,
        ..config.clone()
    };
    run.validate()?;
    let per_member = run_indexed(ensemble, |i| {
        let member = run.for_trajectory(config.trajectory_index + i);
        let nobs = observables.len();
        let mut first = vec![0.0; nobs];
        let mut prev = vec![0.0; nobs];
        let mut acc = vec![Vec::new(); nobs];
        let dt = config.dt;
        run_path(&member, model, &initial(i), |step, _, x| {
            if step < start {
                return true;
            }
            for (j, obs) in observables.iter().enumerate() {
                let v = obs.evaluate(x);
                if step == start {
                    first[j] = v;
                } else {
                    acc[j].push(0.5 * ((prev[j] - first[j]) + (v - first[j])) * dt);
                }
                prev[j] = v;
            }
            true
        })?;
        let span = (run.steps() - start) as f64 * dt;
        Ok((0..nobs)
            .map(|j| first[j] + pairwise_sum(&acc[j]) / span)
            .collect::<Vec<f64>>())
    })?;
    Ok(observables
        .iter()
        .enumerate()
        .map(|(j, obs)| {
            let samples = per_member.iter().map(|v| v[j]).collect();
            OccupationStats::from_samples(horizon, start as f64 * config.dt, *obs, samples)
        })
        .collect())
}
