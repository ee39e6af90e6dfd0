//! Time integration of the mild-solution dynamics.
//!
//! All stochastic runs are driven by two streams per trajectory (see
//! [`crate::seeding`]): the subordinator increments are drawn first for the
//! whole horizon, then each step consumes `2K` normals for the mode
//! increments. The same `(seed, trajectory_index)` therefore reproduces the
//! same noise for [`simulate`], [`convolution_path`] and
//! [`simulate_pair_synchronous`].

mod stepper;

pub use stepper::{Stepper, STIFFNESS_LIMIT};

use crate::error::{Error, Result};
use crate::noise::{decay_factors, fill_noise_increment, step_count, ConvolutionState, NoiseModel, SubordinatorPath};
use crate::observable::Observable;
use crate::seeding::{stream_rng, GAUSSIAN_STREAM, SUBORDINATOR_STREAM};
use crate::spectral::{Field, SobolevOrder, SpectralGrid};

/// Which dynamics [`simulate`] integrates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// `X ← e^{-A dt}X + φ₁ dt N(X) + ΔZ`
    Full,
    /// Integrate `Y = X - Z` with `N(Y + Z)` and report `X = Y + Z`.
    YSplit,
    /// Full scheme with the cutoff nonlinearity `N(x)χ(‖x‖_V/ρ)`.
    Truncated(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub alpha: f64,
    pub theta: f64,
    /// `δ` of the admissible band for `β_k`.
    pub delta_bound: f64,
    pub modes: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Which noise streams under `seed` drive this run.
    pub trajectory_index: u64,
    pub record_stride: usize,
    pub scheme: Scheme,
    /// Order `δ` of the recorded `‖X‖_δ`.
    pub sobolev_delta: f64,
    pub observables: Vec<Observable>,
    pub store_states: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            alpha: 1.5,
            theta: 1.8,
            delta_bound: 1.0,
            modes: 64,
            dt: 1e-3,
            horizon: 10.0,
            seed: 0,
            trajectory_index: 0,
            record_stride: 10,
            scheme: Scheme::Full,
            sobolev_delta: 0.5,
            observables: Vec::new(),
            store_states: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= self.dt) || !self.horizon.is_finite() {
            return Err(Error::domain(format!(
                "horizon {} must be at least dt {}",
                self.horizon, self.dt
            )));
        }
        if self.modes == 0 {
            return Err(Error::domain("mode cutoff must be at least 1"));
        }
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(Error::domain(format!("α must lie in (1,2), got {}", self.alpha)));
        }
        if self.record_stride == 0 {
            return Err(Error::domain("record stride must be at least 1"));
        }
        if let Scheme::Truncated(rho) = self.scheme {
            if !(rho > 0.0) {
                return Err(Error::domain(format!("truncation radius must be positive, got {rho}")));
            }
        }
        if !self.sobolev_delta.is_finite() {
            return Err(Error::domain("Sobolev order δ must be finite"));
        }
        self.observables.iter().try_for_each(|o| o.validate())
    }

    pub fn steps(&self) -> usize {
        step_count(self.horizon, self.dt)
    }

    pub fn grid(&self) -> Result<SpectralGrid> {
        SpectralGrid::new(self.modes)
    }

    /// Default-intensity noise model for these parameters.
    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.alpha, self.theta, self.delta_bound, self.modes)
    }

    /// Copy of the configuration bound to another noise stream.
    pub fn for_trajectory(&self, index: u64) -> SimConfig {
        SimConfig {
            trajectory_index: index,
            ..self.clone()
        }
    }
}

/// Recorded path of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Empty unless the configuration asked for stored states.
    pub states: Vec<Field>,
    pub h_norm: Vec<f64>,
    pub v_norm: Vec<f64>,
    /// `‖X‖_δ` for the configured `δ`.
    pub sobolev: Vec<f64>,
    pub sobolev_order: f64,
    pub observables: Vec<Observable>,
    /// `functionals[j][i]` is observable `j` at `times[i]`.
    pub functionals: Vec<Vec<f64>>,
    /// Extra drift sub-steps taken because of stiffness.
    pub substeps: usize,
}

impl Trajectory {
    fn new(config: &SimConfig) -> Self {
        Trajectory {
            sobolev_order: config.sobolev_delta,
            observables: config.observables.clone(),
            functionals: vec![Vec::new(); config.observables.len()],
            ..Default::default()
        }
    }

    fn record(&mut self, t: f64, x: &Field, store: bool) {
        self.times.push(t);
        self.h_norm.push(x.h_norm());
        self.v_norm.push(x.v_norm());
        self.sobolev.push(x.sobolev_norm(SobolevOrder(self.sobolev_order)));
        for (obs, col) in self.observables.iter().zip(self.functionals.iter_mut()) {
            col.push(obs.evaluate(x));
        }
        if store {
            self.states.push(x.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Recorded values of `obs`, computed from stored states when it was not
    /// one of the configured observables.
    pub fn values_of(&self, obs: &Observable) -> Result<Vec<f64>> {
        if let Some(j) = self.observables.iter().position(|o| o == obs) {
            return Ok(self.functionals[j].clone());
        }
        match obs {
            Observable::HNorm => return Ok(self.h_norm.clone()),
            Observable::VNorm => return Ok(self.v_norm.clone()),
            Observable::Sobolev(d) if *d == self.sobolev_order => return Ok(self.sobolev.clone()),
            _ => {}
        }
        if self.states.len() != self.times.len() {
            return Err(Error::usage(format!(
                "observable {obs} was not recorded and states were not stored"
            )));
        }
        Ok(self.states.iter().map(|x| obs.evaluate(x)).collect())
    }
}

/// Single mild step `X ← e^{-A dt}X + φ₁(dt)dt N(X) + z_inc`.
pub fn step_mild(grid: &SpectralGrid, x: &Field, dt: f64, z_inc: &Field) -> Result<Field> {
    let mut stepper = Stepper::new(grid, dt)?;
    let mut out = x.clone();
    stepper.step(&mut out, z_inc)?;
    Ok(out)
}

/// Drives the noise for `config` step by step. `visit(step, t, z, increment)`
/// sees the convolution after each step; returning `false` stops early.
fn drive_noise<F>(config: &SimConfig, model: &NoiseModel, mut visit: F) -> Result<()>
where
    F: FnMut(usize, &ConvolutionState, &Field) -> Result<bool>,
{
    if model.modes() != config.modes {
        return Err(Error::domain(format!(
            "noise model has {} modes, configuration {}",
            model.modes(),
            config.modes
        )));
    }
    let mut sub_rng = stream_rng(config.seed, config.trajectory_index, SUBORDINATOR_STREAM);
    let mut gauss_rng = stream_rng(config.seed, config.trajectory_index, GAUSSIAN_STREAM);
    let path = SubordinatorPath::sample(config.horizon, config.dt, model.rho(), &mut sub_rng)?;
    let decay = decay_factors(config.modes, config.dt);
    let mut conv = ConvolutionState::new(config.modes);
    let mut inc = Field::zeros(config.modes);
    for (i, &ds) in path.increments().iter().enumerate() {
        fill_noise_increment(model, ds, &mut gauss_rng, &mut inc)?;
        conv.advance_in_place(&decay, &inc, config.dt);
        conv.t = (i + 1) as f64 * config.dt;
        if !visit(i + 1, &conv, &inc)? {
            break;
        }
    }
    Ok(())
}

/// Runs the configured dynamics from `x0`, calling `observe(step, t, x)` at
/// step 0 and after every step. Returning `false` stops the run.
pub fn run_path<F>(config: &SimConfig, model: &NoiseModel, x0: &Field, mut observe: F) -> Result<usize>
where
    F: FnMut(usize, f64, &Field) -> bool,
{
    config.validate()?;
    if x0.modes() != config.modes {
        return Err(Error::domain(format!(
            "initial field has {} modes, configuration {}",
            x0.modes(),
            config.modes
        )));
    }
    let grid = config.grid()?;
    let mut stepper = Stepper::new(&grid, config.dt)?;
    if let Scheme::Truncated(rho) = config.scheme {
        stepper = stepper.with_truncation(rho)?;
    }
    if !observe(0, 0.0, x0) {
        return Ok(0);
    }
    let mut x = x0.clone();
    // Y-split state: y = x - z, with z the left-endpoint convolution
    let mut y = x0.clone();
    let mut z_prev = Field::zeros(config.modes);
    let mut xs = Field::zeros(config.modes);
    drive_noise(config, model, |step, conv, inc| {
        let t = conv.t;
        let current = match config.scheme {
            Scheme::Full | Scheme::Truncated(_) => {
                stepper.step(&mut x, inc).map_err(|e| e.at_step(step))?;
                &x
            }
            Scheme::YSplit => {
                stepper
                    .step_drift(&mut y, Some(&z_prev), None)
                    .map_err(|e| e.at_step(step))?;
                z_prev.assign(&conv.z);
                xs.assign(&y);
                xs.axpy(1.0, &conv.z);
                &xs
            }
        };
        Ok(observe(step, t, current))
    })?;
    Ok(stepper.substeps_taken())
}

/// One trajectory of the SPDE with the default noise model.
pub fn simulate(config: &SimConfig, x0: &Field) -> Result<Trajectory> {
    let model = config.noise_model()?;
    simulate_with_model(config, &model, x0)
}

pub fn simulate_with_model(config: &SimConfig, model: &NoiseModel, x0: &Field) -> Result<Trajectory> {
    let mut traj = Trajectory::new(config);
    let steps = config.steps();
    let stride = config.record_stride;
    let store = config.store_states;
    traj.substeps = run_path(config, model, x0, |step, t, x| {
        if step % stride == 0 || step == steps {
            traj.record(t, x, store);
        }
        true
    })?;
    Ok(traj)
}

/// Two trajectories from different initial fields driven by one noise
/// realization.
pub fn simulate_pair_synchronous(config: &SimConfig, x0: &Field, y0: &Field) -> Result<(Trajectory, Trajectory)> {
    let model = config.noise_model()?;
    Ok((
        simulate_with_model(config, &model, x0)?,
        simulate_with_model(config, &model, y0)?,
    ))
}

/// `Z_{t_n}` for every step `n = 0..=steps`, from the same streams that
/// [`simulate`] uses.
pub fn convolution_path(config: &SimConfig, model: &NoiseModel) -> Result<Vec<Field>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.steps() + 1);
    out.push(Field::zeros(config.modes));
    drive_noise(config, model, |_, conv, _| {
        out.push(conv.z.clone());
        Ok(true)
    })?;
    Ok(out)
}

/// Calls `visit(step, z)` for the convolution alone (no nonlinear solve).
pub fn visit_convolution<F>(config: &SimConfig, model: &NoiseModel, mut visit: F) -> Result<()>
where
    F: FnMut(usize, &Field),
{
    config.validate()?;
    drive_noise(config, model, |step, conv, _| {
        visit(step, &conv.z);
        Ok(true)
    })
}

/// Integrates `dY + AY dt = N(Y + Z) dt` for a frozen convolution path
/// recorded on the step grid (`z_path[n] = Z_{n dt}`, `n = 0..=steps`).
pub fn solve_y(config: &SimConfig, x0: &Field, z_path: &[Field]) -> Result<Trajectory> {
    config.validate()?;
    let steps = z_path.len().saturating_sub(1);
    if steps == 0 {
        return Err(Error::usage("convolution path needs at least two instants"));
    }
    let grid = config.grid()?;
    let mut stepper = Stepper::new(&grid, config.dt)?;
    let mut traj = Trajectory::new(config);
    let mut y = x0.clone();
    traj.record(0.0, &y, config.store_states);
    for (n, z) in z_path.iter().take(steps).enumerate() {
        stepper
            .step_drift(&mut y, Some(z), None)
            .map_err(|e| e.at_step(n + 1))?;
        if (n + 1) % config.record_stride == 0 || n + 1 == steps {
            traj.record((n + 1) as f64 * config.dt, &y, config.store_states);
        }
    }
    traj.substeps = stepper.substeps_taken();
    Ok(traj)
}

/// Mild-form integration of `ẋ + Ax = N(x) + u` with a piecewise-constant
/// control, one field per step. Every step is recorded.
pub fn solve_deterministic(grid: &SpectralGrid, x0: &Field, controls: &[Field], dt: f64) -> Result<Trajectory> {
    let mut stepper = Stepper::new(grid, dt)?;
    let mut traj = Trajectory {
        sobolev_order: 0.5,
        ..Default::default()
    };
    let mut x = x0.clone();
    traj.record(0.0, &x, true);
    for (n, u) in controls.iter().enumerate() {
        stepper
            .step_drift(&mut x, None, Some(u))
            .map_err(|e| e.at_step(n + 1))?;
        traj.record((n + 1) as f64 * dt, &x, true);
    }
    traj.substeps = stepper.substeps_taken();
    Ok(traj)
}

/// Closed-form solution of `g' = -g² + K²`, `g(0) = g0`:
///
/// ```text
/// g(t) = K + 2K ( (g0 + K)/(g0 - K) · e^{2Kt} - 1 )^{-1}
/// ```
///
/// with `g ≡ K` when `g0 = K`.
pub fn comparison_ode(g0: f64, k: f64, times: &[f64]) -> Result<Vec<f64>> {
    if !(g0 >= 0.0) || !g0.is_finite() {
        return Err(Error::domain(format!("g(0) must be nonnegative, got {g0}")));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::domain(format!("K must be positive, got {k}")));
    }
    if g0 == k {
        return Ok(vec![k; times.len()]);
    }
    let ratio = (g0 + k) / (g0 - k);
    Ok(times
        .iter()
        .map(|&t| {
            // 2K / (r e^{2Kt} - 1) = 2K e^{-2Kt} / (r - e^{-2Kt})
            let e = (-2.0 * k * t).exp();
            k + 2.0 * k * e / (ratio - e)
        })
        .collect())
}

/// `K (1 + 2/(e^T - 1))`, the bound on `g` over `[T/2, T]` valid for `K ≥ 1`
/// and any `g(0)`.
pub fn comparison_plateau(k: f64, horizon: f64) -> f64 {
    k * (1.0 + 2.0 / horizon.exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{lambda, SPECTRAL_GAP};
    use num_complex::Complex64;

    fn quiet(config: &SimConfig) -> NoiseModel {
        NoiseModel::silent(config.alpha, config.modes).unwrap()
    }

    #[test]
    fn pure_decay_without_drift() {
        let grid = SpectralGrid::new(8).unwrap();
        let mut stepper = Stepper::new(&grid, 1e-3).unwrap();
        // tiny amplitude: N(x) ≈ x, so compare against the linear update instead
        let x0 = Field::unit_mode(8, 3).scaled(1e-9);
        let mut x = x0.clone();
        stepper.step(&mut x, &grid.zeros()).unwrap();
        let l = lambda(3);
        let dt = 1e-3;
        let expect = x0.amplitude(3).re * ((-l * dt).exp() + (1.0 - (-l * dt).exp()) / l);
        assert!((x.amplitude(3).re - expect).abs() <= 1e-12 * expect.abs());
    }

    #[test]
    fn linearized_mode_matches_scalar_exponential_euler() {
        // a' = (1 - λ₁) a - 3a³ for a real mode-1 amplitude; for small a one
        // exponential-Euler step is a·e^{-λ dt} + (1-e^{-λ dt})/λ · (a - 3a³).
        let grid = SpectralGrid::new(4).unwrap();
        for &a in &[1e-6, 1e-3, 0.1] {
            let x = Field::single_mode(4, 1, Complex64::new(a, 0.0));
            let out = step_mild(&grid, &x, 1e-3, &grid.zeros()).unwrap();
            let l = SPECTRAL_GAP;
            let e = (-l * 1e-3f64).exp();
            let oracle = a * e + (1.0 - e) / l * (a - 3.0 * a * a * a);
            assert!((out.amplitude(1).re - oracle).abs() <= 1e-14 * a.max(1e-300) + 1e-18);
        }
    }

    #[test]
    fn zero_is_fixed() {
        let grid = SpectralGrid::new(16).unwrap();
        let out = step_mild(&grid, &grid.zeros(), 1e-3, &grid.zeros()).unwrap();
        assert_eq!(out, grid.zeros());
    }

    #[test]
    fn stiff_initial_data_is_substepped_not_blown_up() {
        let config = SimConfig {
            modes: 16,
            horizon: 0.05,
            ..SimConfig::default()
        };
        let x0 = Field::unit_mode(16, 1).scaled(100.0);
        let traj = simulate_with_model(&config, &quiet(&config), &x0).unwrap();
        assert!(traj.substeps > 0);
        let h = traj.h_norm.last().copied().unwrap();
        assert!(h < 1.0, "decayed to {h}");
    }

    #[test]
    fn silent_zero_run_is_zero() {
        let config = SimConfig {
            modes: 8,
            horizon: 0.1,
            ..SimConfig::default()
        };
        let traj = simulate_with_model(&config, &quiet(&config), &Field::zeros(8)).unwrap();
        assert!(traj.states.iter().all(|s| *s == Field::zeros(8)));
        assert_eq!(traj.times.len(), 11);
        assert!((traj.times.last().unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn same_seed_is_bit_identical_and_stride_independent() {
        let base = SimConfig {
            modes: 16,
            horizon: 0.2,
            seed: 99,
            ..SimConfig::default()
        };
        let x0 = Field::unit_mode(16, 2);
        let a = simulate(&base, &x0).unwrap();
        let b = simulate(&base, &x0).unwrap();
        assert_eq!(a, b);
        let fine = simulate(
            &SimConfig {
                record_stride: 1,
                ..base.clone()
            },
            &x0,
        )
        .unwrap();
        assert_eq!(fine.states.last(), a.states.last());
        assert_eq!(fine.states[10], a.states[1]);
        let other = simulate(&SimConfig { seed: 100, ..base }, &x0).unwrap();
        assert_ne!(other.states.last(), a.states.last());
    }

    #[test]
    fn y_split_reproduces_full_scheme() {
        let config = SimConfig {
            modes: 16,
            horizon: 0.3,
            seed: 5,
            record_stride: 1,
            ..SimConfig::default()
        };
        let x0 = Field::unit_mode(16, 1).scaled(0.5);
        let full = simulate(&config, &x0).unwrap();
        let split = simulate(
            &SimConfig {
                scheme: Scheme::YSplit,
                ..config.clone()
            },
            &x0,
        )
        .unwrap();
        let model = config.noise_model().unwrap();
        let z = convolution_path(&config, &model).unwrap();
        let y = solve_y(&config, &x0, &z).unwrap();
        for (i, x) in full.states.iter().enumerate() {
            let scale = 1.0 + x.h_norm();
            assert!((x - &split.states[i]).h_norm() <= 1e-12 * scale);
            let rebuilt = &y.states[i] + &z[i];
            assert!((x - &rebuilt).h_norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn truncated_scheme_with_huge_radius_is_full() {
        let config = SimConfig {
            modes: 8,
            horizon: 0.05,
            seed: 2,
            ..SimConfig::default()
        };
        let x0 = Field::unit_mode(8, 1);
        let full = simulate(&config, &x0).unwrap();
        let trunc = simulate(
            &SimConfig {
                scheme: Scheme::Truncated(1e9),
                ..config.clone()
            },
            &x0,
        )
        .unwrap();
        assert_eq!(full, trunc);
        // with a tiny radius the nonlinearity is switched off and the drift is linear
        let off = simulate_with_model(
            &SimConfig {
                scheme: Scheme::Truncated(1e-9),
                ..config.clone()
            },
            &quiet(&config),
            &x0,
        )
        .unwrap();
        let expect = std::f64::consts::FRAC_1_SQRT_2 * (-SPECTRAL_GAP * 0.05).exp();
        assert!((off.states.last().unwrap().amplitude(1).re - expect).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let ok = SimConfig::default();
        assert!(ok.validate().is_ok());
        assert!(SimConfig { dt: 0.0, ..ok.clone() }.validate().is_err());
        assert!(SimConfig {
            horizon: 1e-4,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SimConfig { modes: 0, ..ok.clone() }.validate().is_err());
        assert!(SimConfig {
            alpha: 2.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            alpha: 0.9,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            record_stride: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(SimConfig {
            scheme: Scheme::Truncated(0.0),
            ..ok.clone()
        }
        .validate()
        .is_err());
        let err = simulate(&SimConfig { modes: 8, ..ok }, &Field::zeros(4)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn comparison_ode_closed_form() {
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        assert!(comparison_ode(2.0, 2.0, &times).unwrap().iter().all(|g| *g == 2.0));
        let g = comparison_ode(0.0, 1.0, &times).unwrap();
        let dev = g
            .iter()
            .zip(&times)
            .map(|(g, t)| (g - t.tanh()).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12, "{dev}");
        assert!(comparison_ode(-1.0, 1.0, &times).is_err());
        assert!(comparison_ode(1.0, 0.0, &times).is_err());
    }

    #[test]
    fn comparison_plateau_holds_for_any_start() {
        let horizon = 1.0;
        let times: Vec<f64> = (0..=100).map(|i| 0.5 + i as f64 * 0.005).collect();
        for &k in &[1.0, 1.5, 4.0, 30.0] {
            let bound = comparison_plateau(k, horizon);
            for &g0 in &[0.0, 0.5, k, 2.0 * k, 1e3, 1e8] {
                let g = comparison_ode(g0, k, &times).unwrap();
                assert!(g.iter().all(|v| *v <= bound * (1.0 + 1e-14)), "K={k} g0={g0}");
            }
        }
    }
}
