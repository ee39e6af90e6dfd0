use crate::ensemble::run_indexed;
use crate::error::{Error, Result};
use crate::integrator::{run_path, SimConfig};
use crate::noise::{step_count, NoiseModel};
use crate::spectral::{Field, SobolevOrder};
use crate::stats::{mean, pairwise_sum, std_error};

/// Knobs of a moment study of `E^x‖X_T‖^p_δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentStudy {
    pub p: f64,
    pub delta: f64,
    /// Each at least 1 and a multiple of the step.
    pub horizons: Vec<f64>,
    pub ensemble: usize,
    /// Permit `p ≥ α/4`; the results are then marked unvalidated.
    pub allow_unvalidated: bool,
}

impl Default for MomentStudy {
    fn default() -> Self {
        MomentStudy {
            p: 0.3,
            delta: 0.5,
            horizons: vec![1.0, 2.0, 4.0],
            ensemble: 1000,
            allow_unvalidated: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub label: String,
    pub horizon: f64,
    pub p: f64,
    pub estimate: f64,
    pub se: f64,
    /// `‖X_T‖^p_δ` per trajectory.
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub estimates: Vec<MomentEstimate>,
    /// True when `p` lies outside the range the moment bound covers.
    pub unvalidated: bool,
}

impl MomentReport {
    pub fn find(&self, label: &str, horizon: f64) -> Option<&MomentEstimate> {
        self.estimates.iter().find(|e| e.label == label && e.horizon == horizon)
    }

    /// `max / min` of the estimates across initial conditions at `horizon`.
    pub fn uniformity_ratio(&self, horizon: f64) -> f64 {
        let vals: Vec<f64> = self
            .estimates
            .iter()
            .filter(|e| e.horizon == horizon)
            .map(|e| e.estimate)
            .collect();
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if hi == lo {
            1.0
        } else {
            hi / lo
        }
    }

    /// `estimate(to) / estimate(from)` for one initial condition together with
    /// the relative standard error of that ratio. The two horizons come from
    /// the same trajectories, so the covariance enters.
    pub fn growth(&self, label: &str, from: f64, to: f64) -> Option<(f64, f64)> {
        let a = self.find(label, from)?;
        let b = self.find(label, to)?;
        Some(ratio_with_se(&a.samples, &b.samples))
    }
}

/// `mean(b) / mean(a)` and its delta-method relative standard error for
/// paired samples.
pub fn ratio_with_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let ratio = mb / ma;
    if n < 2.0 {
        return (ratio, 0.0);
    }
    let cov: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let cov = pairwise_sum(&cov) / (n - 1.0);
    let va = std_error(a).powi(2) * n;
    let vb = std_error(b).powi(2) * n;
    let rel_var = (va / (ma * ma) + vb / (mb * mb) - 2.0 * cov / (ma * mb)) / n;
    (ratio, rel_var.max(0.0).sqrt())
}

/// Monte Carlo estimate of `E^x‖X_T‖^p_δ` for every labelled initial field and
/// every horizon. All initial fields share trajectory `i`'s noise (common
/// random numbers) and every horizon is read off the same paths.
pub fn moment_estimate(
    config: &SimConfig,
    model: &NoiseModel,
    initial: &[(String, Field)],
    study: &MomentStudy,
) -> Result<MomentReport> {
    let bound = model.alpha() / 4.0;
    if !(study.p > 0.0) {
        return Err(Error::usage(format!("moment order must be positive, got {}", study.p)));
    }
    let unvalidated = study.p >= bound;
    if unvalidated && !study.allow_unvalidated {
        return Err(Error::usage(format!(
            "moment order p = {} is outside (0, α/4) = (0, {bound}); enable unvalidated estimates to proceed",
            study.p
        )));
    }
    if !(study.delta > 0.0 && study.delta < 1.0) {
        return Err(Error::usage(format!("δ must lie in (0,1), got {}", study.delta)));
    }
    if study.horizons.is_empty() || study.horizons.iter().any(|t| !(*t >= 1.0)) {
        return Err(Error::usage("moment horizons must all be at least 1"));
    }
    if study.ensemble == 0 || initial.is_empty() {
        return Err(Error::usage("moment study needs a nonempty ensemble and initial set"));
    }
    let t_max = study.horizons.iter().copied().fold(0.0, f64::max);
    let run = SimConfig {
        horizon: t_max,
        ..config.clone()
    };
    run.validate()?;
    let marks: Vec<usize> = study.horizons.iter().map(|t| step_count(*t, config.dt)).collect();
    let order = SobolevOrder(study.delta);

    // per member: [initial][horizon]
    let per_member = run_indexed(study.ensemble, |i| {
        let member = run.for_trajectory(config.trajectory_index + i);
        initial
            .iter()
            .map(|(_, x0)| {
                let mut got = vec![0.0; marks.len()];
                run_path(&member, model, x0, |step, _, x| {
                    for (slot, &m) in got.iter_mut().zip(&marks) {
                        if step == m {
                            *slot = x.sobolev_norm(order).powf(study.p);
                        }
                    }
                    true
                })?;
                Ok(got)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut estimates = Vec::new();
    for (a, (label, _)) in initial.iter().enumerate() {
        for (h, &horizon) in study.horizons.iter().enumerate() {
            let samples: Vec<f64> = per_member.iter().map(|m| m[a][h]).collect();
            estimates.push(MomentEstimate {
                label: label.clone(),
                horizon,
                p: study.p,
                estimate: mean(&samples),
                se: std_error(&samples),
                samples,
            });
        }
    }
    Ok(MomentReport { estimates, unvalidated })
}

/// The default initial set `{0, 10·e₁, 100·e₁}` with `e₁` the unit-norm first
/// mode.
pub fn default_initial_set(modes: usize) -> Vec<(String, Field)> {
    vec![
        ("zero".to_string(), Field::zeros(modes)),
        ("10e1".to_string(), Field::unit_mode(modes, 1).scaled(10.0)),
        ("100e1".to_string(), Field::unit_mode(modes, 1).scaled(100.0)),
    ]
}
