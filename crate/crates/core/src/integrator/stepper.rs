use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{cutoff, lambda, Field, Scratch, SpectralGrid};

/// Largest admissible `h · 3 max|u|²` for one explicit evaluation of the cubic.
/// Above it the drift is integrated over deterministic sub-steps.
pub const STIFFNESS_LIMIT: f64 = 0.5;

const MAX_SUBSTEPS: usize = 1 << 20;

/// `φ₁(h)·h = (1 - e^{-λh}) / λ`.
fn phi_weight(lambda: f64, h: f64) -> f64 {
    -(-lambda * h).exp_m1() / lambda
}

/// Exponential-Euler drift integrator for `dx + Ax dt = (N(x + s) + u) dt`.
///
/// With the nonlinearity frozen at the left endpoint the update is
///
/// ```text
/// x ← e^{-A dt} x + φ₁(dt)·dt · (N(x + s) + u)
/// ```
///
/// which integrates a constant forcing exactly against the semigroup. When
/// the cubic is locally too stiff for `dt` (see [`STIFFNESS_LIMIT`]) the step
/// is split into shorter explicit sub-steps instead of clamping.
pub struct Stepper {
    grid: SpectralGrid,
    dt: f64,
    decay: Vec<f64>,
    weight: Vec<f64>,
    scratch: Scratch,
    work: Field,
    forcing: Field,
    truncation: Option<f64>,
    substeps: usize,
}

impl Stepper {
    pub fn new(grid: &SpectralGrid, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain(format!("step must be positive, got {dt}")));
        }
        let modes = grid.modes();
        Ok(Stepper {
            grid: grid.clone(),
            dt,
            decay: (1..=modes).map(|k| (-lambda(k) * dt).exp()).collect(),
            weight: (1..=modes).map(|k| phi_weight(lambda(k), dt)).collect(),
            scratch: grid.scratch(),
            work: grid.zeros(),
            forcing: grid.zeros(),
            truncation: None,
            substeps: 0,
        })
    }

    /// Replaces `N` by `N(x)·χ(‖x‖_V / ρ)`.
    pub fn with_truncation(mut self, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::domain(format!("truncation radius must be positive, got {rho}")));
        }
        self.truncation = Some(rho);
        Ok(self)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    /// Number of extra sub-steps taken so far because of stiffness.
    pub fn substeps_taken(&self) -> usize {
        self.substeps
    }

    /// Evaluates the (possibly truncated) nonlinearity at `x + shift` into
    /// `self.forcing`; returns the stiffness `3 max|x + shift|²`.
    fn eval(&mut self, x: &Field, shift: Option<&Field>) -> Result<f64> {
        self.work.assign(x);
        if let Some(s) = shift {
            self.work.axpy(1.0, s);
        }
        let (_, peak) = self
            .grid
            .nonlinearity_into(&self.work, &mut self.scratch, &mut self.forcing)?;
        let mut stiffness = 3.0 * peak * peak;
        if let Some(rho) = self.truncation {
            let w = cutoff(self.work.v_norm() / rho);
            self.forcing.scale_mut(w);
            stiffness *= w;
        }
        Ok(stiffness)
    }

    fn apply(x: &mut Field, decay: &[f64], weight: &[f64], forcing: &Field, control: Option<&Field>) {
        let zero = Complex64::new(0.0, 0.0);
        let amps = x.amps_mut();
        for k in 0..amps.len() {
            let u = control.map_or(zero, |c| c.amplitudes()[k]);
            amps[k] = amps[k] * decay[k] + (forcing.amplitudes()[k] + u) * weight[k];
        }
    }

    /// Advances `x` by one step of the drift with `N` evaluated at
    /// `x + shift` and an additive `control`, both frozen over the step.
    pub fn step_drift(&mut self, x: &mut Field, shift: Option<&Field>, control: Option<&Field>) -> Result<()> {
        let stiffness = self.eval(x, shift)?;
        if stiffness * self.dt <= STIFFNESS_LIMIT {
            Self::apply(x, &self.decay, &self.weight, &self.forcing, control);
            return self.finite(x);
        }

        let mut remaining = self.dt;
        let mut stiffness = stiffness;
        let mut count = 0usize;
        let mut decay = vec![0.0; self.decay.len()];
        let mut weight = vec![0.0; self.decay.len()];
        loop {
            let h_max = STIFFNESS_LIMIT / stiffness;
            let h = if h_max >= remaining { remaining } else { h_max };
            for (k, (d, w)) in decay.iter_mut().zip(weight.iter_mut()).enumerate() {
                let l = lambda(k + 1);
                *d = (-l * h).exp();
                *w = phi_weight(l, h);
            }
            Self::apply(x, &decay, &weight, &self.forcing, control);
            self.finite(x)?;
            count += 1;
            if h == remaining {
                break;
            }
            remaining -= h;
            if count > MAX_SUBSTEPS {
                return Err(Error::numerical("step-size failure: cubic too stiff to resolve"));
            }
            stiffness = self.eval(x, shift)?;
        }
        self.substeps += count - 1;
        Ok(())
    }

    /// Full mild step `x ← e^{-A dt}x + φ₁(dt)dt N(x) + z_inc`.
    pub fn step(&mut self, x: &mut Field, z_inc: &Field) -> Result<()> {
        self.step_drift(x, None, None)?;
        x.axpy(1.0, z_inc);
        self.finite(x)
    }

    fn finite(&self, x: &Field) -> Result<()> {
        if x.is_finite() {
            Ok(())
        } else {
            Err(Error::numerical("state left the finite range"))
        }
    }
}
