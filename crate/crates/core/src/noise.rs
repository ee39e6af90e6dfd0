//! Subordinated cylindrical Brownian noise.
//!
//! The driving process is `L_t = W_{S_t}` where `W` is a cylindrical Brownian
//! motion and `S` an independent `α/2`-stable subordinator with
//! `E[e^{-ηS_t}] = e^{-tη^{α/2}}`. Conditional on the subordinator, each mode
//! receives independent Gaussian increments with variance `ΔS`, scaled by the
//! noise intensity `β_k`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::spectral::{lambda, Field, SPECTRAL_GAP};

/// One increment of the `ρ`-stable subordinator over a step `dt`, drawn with
/// Kanter's representation:
///
/// ```text
/// S = sin(ρπU) · sin((1-ρ)πU)^{(1-ρ)/ρ} / sin(πU)^{1/ρ} / E^{(1-ρ)/ρ}
/// ```
///
/// with `U ~ Uniform(0,1)` and `E ~ Exp(1)`, then scaled by `dt^{1/ρ}`. The
/// result has Laplace transform `e^{-dt·η^ρ}`.
pub fn sample_stable_increment<R: Rng + ?Sized>(dt: f64, rho: f64, rng: &mut R) -> Result<f64> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::domain(format!("step must be positive, got {dt}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain(format!("stable index must lie in (0,1), got {rho}")));
    }
    let u = rng.random::<f64>().clamp(f64::EPSILON, 1.0 - f64::EPSILON);
    let e: f64 = Exp1.sample(rng);
    let e = e.max(f64::EPSILON);
    let q = (1.0 - rho) / rho;
    // log-space keeps the intermediate powers in range
    let log_s =
        (rho * PI * u).sin().ln() + q * ((1.0 - rho) * PI * u).sin().ln() - (PI * u).sin().ln() / rho - q * e.ln()
            + dt.ln() / rho;
    let s = log_s.exp();
    if !s.is_finite() {
        return Err(Error::numerical(format!("stable increment overflowed (ρ = {rho})")));
    }
    Ok(s)
}

/// Sampled trajectory of the subordinator on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorPath {
    dt: f64,
    increments: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SubordinatorPath {
    /// `⌈horizon / dt⌉` independent increments; `cumulative[0] = 0`.
    pub fn sample<R: Rng + ?Sized>(horizon: f64, dt: f64, rho: f64, rng: &mut R) -> Result<Self> {
        if !(dt > 0.0) || !(horizon >= dt) {
            return Err(Error::domain(format!(
                "need horizon ≥ dt > 0, got horizon {horizon}, dt {dt}"
            )));
        }
        let steps = step_count(horizon, dt);
        let increments = (0..steps)
            .map(|_| sample_stable_increment(dt, rho, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_increments(dt, increments))
    }

    fn from_increments(dt: f64, increments: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(increments.len() + 1);
        cumulative.push(0.0);
        let mut s = 0.0;
        for ds in &increments {
            s += ds;
            cumulative.push(s);
        }
        SubordinatorPath {
            dt,
            increments,
            cumulative,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `S_{t_i}` for `i = 0..=steps`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn terminal(&self) -> f64 {
        *self.cumulative.last().expect("cumulative starts with S_0")
    }
}

/// Number of steps of size `dt` covering `horizon`, tolerant to the rounding
/// in `horizon / dt`.
pub fn step_count(horizon: f64, dt: f64) -> usize {
    let ratio = horizon / dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        rounded as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Stability index and intensity coefficients `β_k` of `Q_β`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    alpha: f64,
    theta: f64,
    theta_lower: f64,
    delta: f64,
    betas: Vec<f64>,
    banded: bool,
}

impl NoiseModel {
    /// Default intensity `β_k = λ_k^{-θ/2}` on modes `1..=modes`.
    pub fn new(alpha: f64, theta: f64, delta: f64, modes: usize) -> Result<Self> {
        let betas = (1..=modes).map(|k| lambda(k).powf(-theta / 2.0)).collect();
        Self::with_coefficients(alpha, theta, theta, delta, betas)
    }

    /// Arbitrary coefficients, validated against the admissible band
    /// `δ λ_k^{-θ/2} ≤ |β_k| ≤ δ^{-1} λ_k^{-θ'/2}` with `3/2 < θ' ≤ θ < 2`.
    pub fn with_coefficients(alpha: f64, theta: f64, theta_lower: f64, delta: f64, betas: Vec<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        if !(1.5 < theta_lower && theta_lower <= theta && theta < 2.0) {
            return Err(Error::domain(format!(
                "need 3/2 < θ' ≤ θ < 2, got θ' = {theta_lower}, θ = {theta}"
            )));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::domain(format!("δ must be positive, got {delta}")));
        }
        if betas.is_empty() {
            return Err(Error::domain("noise model needs at least one mode"));
        }
        for (i, b) in betas.iter().enumerate() {
            let l = lambda(i + 1);
            let lo = delta * l.powf(-theta / 2.0);
            let hi = l.powf(-theta_lower / 2.0) / delta;
            let b = b.abs();
            // relative slack absorbs the rounding in λ^{-θ/2}
            if !(b >= lo * (1.0 - 1e-12) && b <= hi * (1.0 + 1e-12)) {
                return Err(Error::domain(format!(
                    "β_{} = {b} outside admissible band [{lo}, {hi}]",
                    i + 1
                )));
            }
        }
        Ok(NoiseModel {
            alpha,
            theta,
            theta_lower,
            delta,
            betas,
            banded: true,
        })
    }

    /// `β ≡ 0`. Outside the admissible band; used for deterministic runs.
    pub fn silent(alpha: f64, modes: usize) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(NoiseModel {
            alpha,
            theta: f64::NAN,
            theta_lower: f64::NAN,
            delta: f64::NAN,
            betas: vec![0.0; modes],
            banded: false,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Index `ρ = α/2` of the subordinator.
    pub fn rho(&self) -> f64 {
        self.alpha / 2.0
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn modes(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn is_silent(&self) -> bool {
        !self.banded && self.betas.iter().all(|b| *b == 0.0)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("α must lie in (1,2), got {alpha}")))
    }
}

/// `Q_β ΔW` for a subordinated time increment `ds`: mode `k` receives
/// `β_k (ξ + iη) √(ds/2)` with independent standard normals `ξ, η`.
pub fn noise_increment<R: Rng + ?Sized>(model: &NoiseModel, ds: f64, rng: &mut R) -> Result<Field> {
    let mut out = Field::zeros(model.modes());
    fill_noise_increment(model, ds, rng, &mut out)?;
    Ok(out)
}

/// In-place variant of [`noise_increment`]. Draws `2K` normals in mode order
/// (real part first) regardless of `β`, so streams stay aligned across models.
pub fn fill_noise_increment<R: Rng + ?Sized>(model: &NoiseModel, ds: f64, rng: &mut R, out: &mut Field) -> Result<()> {
    if !(ds > 0.0) || !ds.is_finite() {
        return Err(Error::domain(format!(
            "subordinated increment must be positive, got {ds}"
        )));
    }
    let sd = (ds / 2.0).sqrt();
    for (a, b) in out.amps_mut().iter_mut().zip(&model.betas) {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *a = Complex64::new(re, im) * (b * sd);
    }
    Ok(())
}

/// Value of the stochastic convolution `Z_t` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionState {
    pub z: Field,
    pub t: f64,
}

impl ConvolutionState {
    pub fn new(modes: usize) -> Self {
        ConvolutionState {
            z: Field::zeros(modes),
            t: 0.0,
        }
    }

    /// Exponential-Euler step `z_k ← e^{-λ_k dt} z_k + β_k ΔW_k`.
    pub fn advance<R: Rng + ?Sized>(
        &self,
        dt: f64,
        ds: f64,
        model: &NoiseModel,
        rng: &mut R,
    ) -> Result<ConvolutionState> {
        if !(dt > 0.0) {
            return Err(Error::domain(format!("step must be positive, got {dt}")));
        }
        let inc = noise_increment(model, ds, rng)?;
        let mut z = self.z.apply_semigroup(dt)?;
        z.axpy(1.0, &inc);
        Ok(ConvolutionState { z, t: self.t + dt })
    }

    /// Allocation-free step given precomputed decay factors `e^{-λ_k dt}` and
    /// the noise increment.
    pub fn advance_in_place(&mut self, decay: &[f64], increment: &Field, dt: f64) {
        for ((z, d), w) in self.z.amps_mut().iter_mut().zip(decay).zip(increment.amplitudes()) {
            *z = *z * *d + w;
        }
        self.t += dt;
    }
}

/// `e^{-λ_k dt}` for `k = 1..=modes`.
pub fn decay_factors(modes: usize, dt: f64) -> Vec<f64> {
    (1..=modes).map(|k| (-lambda(k) * dt).exp()).collect()
}

/// `K_γ = Σ_{k≠0} λ_k^γ β_k²` split into the retained partial sum and the
/// tail beyond the mode cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KGamma {
    /// `2 Σ_{k=1..K} λ_k^γ β_k²`.
    pub partial: f64,
    /// Euler-Maclaurin estimate of the tail of the band-limiting series
    /// `δ^{-2} λ_k^{γ-θ'}`, doubled for `±k`. Infinite when divergent.
    pub tail_estimate: f64,
    /// Integral-comparison upper bound on the same tail.
    pub tail_bound: f64,
    /// Set when `2(γ - θ') ≥ -1`, i.e. the full series diverges.
    pub diverges: bool,
}

impl KGamma {
    pub fn value(&self) -> f64 {
        self.partial + self.tail_estimate
    }

    pub fn upper(&self) -> f64 {
        self.partial + self.tail_bound
    }
}

pub fn k_gamma(model: &NoiseModel, gamma: f64) -> KGamma {
    let partial = 2.0
        * model
            .betas
            .iter()
            .enumerate()
            .rev()
            .map(|(i, b)| lambda(i + 1).powf(gamma) * b * b)
            .sum::<f64>();
    if !model.banded {
        return KGamma {
            partial,
            tail_estimate: 0.0,
            tail_bound: 0.0,
            diverges: false,
        };
    }
    let s = 2.0 * (gamma - model.theta_lower);
    if s >= -1.0 {
        return KGamma {
            partial,
            tail_estimate: f64::INFINITY,
            tail_bound: f64::INFINITY,
            diverges: true,
        };
    }
    let c = 2.0 * SPECTRAL_GAP.powf(gamma - model.theta_lower) / (model.delta * model.delta);
    let k = model.modes() as f64;
    let integral = k.powf(s + 1.0) / (-s - 1.0);
    let correction =
        -0.5 * k.powf(s) - s * k.powf(s - 1.0) / 12.0 + s * (s - 1.0) * (s - 2.0) * k.powf(s - 3.0) / 720.0;
    KGamma {
        partial,
        tail_estimate: c * (integral + correction),
        tail_bound: c * integral,
        diverges: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn increment_parameter_checks() {
        let mut r = rng(0);
        assert!(sample_stable_increment(0.0, 0.5, &mut r).is_err());
        assert!(sample_stable_increment(1.0, 0.0, &mut r).is_err());
        assert!(sample_stable_increment(1.0, 1.0, &mut r).is_err());
        assert!(sample_stable_increment(1.0, 0.3, &mut r).unwrap() > 0.0);
    }

    #[test]
    fn laplace_transform_monte_carlo() {
        let mut r = rng(1);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| (-sample_stable_increment(1.0, 0.75, &mut r).unwrap()).exp())
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - (-1.0f64).exp()).abs() <= 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn path_structure() {
        let mut r = rng(2);
        let one = SubordinatorPath::sample(0.01, 0.01, 0.75, &mut r).unwrap();
        assert_eq!(one.increments().len(), 1);
        assert_eq!(one.cumulative().len(), 2);
        let p = SubordinatorPath::sample(1.0, 1e-3, 0.6, &mut r).unwrap();
        assert_eq!(p.increments().len(), 1000);
        assert_eq!(p.cumulative()[0], 0.0);
        assert!(p.cumulative().windows(2).all(|w| w[1] > w[0]));
        assert!(SubordinatorPath::sample(0.5, 1.0, 0.6, &mut r).is_err());
        assert_eq!(step_count(1.0, 1e-4), 10_000);
        assert_eq!(step_count(0.1, 1e-4), 1000);
        assert_eq!(step_count(1.05, 0.1), 11);
    }

    #[test]
    fn default_model_sits_on_band_edge() {
        let m = NoiseModel::new(1.5, 1.8, 1.0, 16).unwrap();
        assert!((m.betas()[0] - SPECTRAL_GAP.powf(-0.9)).abs() < 1e-15);
        assert_eq!(m.rho(), 0.75);
        assert!(NoiseModel::new(1.0, 1.8, 1.0, 4).is_err());
        assert!(NoiseModel::new(2.0, 1.8, 1.0, 4).is_err());
        assert!(NoiseModel::new(1.5, 1.4, 1.0, 4).is_err());
        assert!(NoiseModel::new(1.5, 2.0, 1.0, 4).is_err());
        // δ > 1 empties the band when θ' = θ
        assert!(NoiseModel::new(1.5, 1.8, 2.0, 4).is_err());
        assert!(NoiseModel::new(1.5, 1.8, 0.5, 4).is_ok());
        let bad = vec![1.0; 4];
        assert!(NoiseModel::with_coefficients(1.5, 1.8, 1.6, 1.0, bad).is_err());
    }

    #[test]
    fn increment_variance_is_linear_in_ds() {
        let m = NoiseModel::new(1.5, 1.8, 1.0, 8).unwrap();
        let target: f64 = 2.0 * m.betas().iter().map(|b| b * b).sum::<f64>();
        for &ds in &[1e-3, 0.5] {
            let mut r = rng(4);
            let n = 10_000;
            let sq: Vec<f64> = (0..n)
                .map(|_| noise_increment(&m, ds, &mut r).unwrap().h_norm().powi(2))
                .collect();
            let mean = sq.iter().sum::<f64>() / n as f64;
            let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - ds * target).abs() <= 3.0 * se,
                "ds={ds}: {mean} vs {}",
                ds * target
            );
        }
    }

    #[test]
    fn mode_increments_uncorrelated() {
        let m = NoiseModel::new(1.5, 1.8, 1.0, 3).unwrap();
        let mut r = rng(5);
        let n = 20_000;
        let samples: Vec<Field> = (0..n).map(|_| noise_increment(&m, 1.0, &mut r).unwrap()).collect();
        let pairs = [(1usize, 2usize), (1, 3), (2, 3)];
        for (i, j) in pairs {
            let prods: Vec<f64> = samples
                .iter()
                .map(|f| f.amplitude(i).re * f.amplitude(j).re / (m.betas()[i - 1] * m.betas()[j - 1]))
                .collect();
            let mean = prods.iter().sum::<f64>() / n as f64;
            let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() <= 3.0 * (var / n as f64).sqrt(), "modes {i},{j}: {mean}");
        }
        // real and imaginary parts of the same mode
        let prods: Vec<f64> = samples
            .iter()
            .map(|f| f.amplitude(1).re * f.amplitude(1).im / m.betas()[0].powi(2))
            .collect();
        let mean = prods.iter().sum::<f64>() / n as f64;
        let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn silent_convolution_decays_deterministically() {
        let m = NoiseModel::silent(1.5, 4).unwrap();
        let mut r = rng(6);
        let mut state = ConvolutionState {
            z: Field::unit_mode(4, 2),
            t: 0.0,
        };
        for _ in 0..10 {
            state = state.advance(1e-3, 0.37, &m, &mut r).unwrap();
        }
        let expect = std::f64::consts::FRAC_1_SQRT_2 * (-lambda(2) * 0.01).exp();
        assert!((state.z.amplitude(2).re - expect).abs() <= 1e-14 * expect);
        assert!((state.t - 0.01).abs() < 1e-15);
    }

    #[test]
    fn stationary_second_moment_against_scalar_recursion() {
        // Conditional on a fixed increment sequence ΔS_i, E|z_k|² follows the
        // scalar recursion v ← e^{-2λdt} v + β²ΔS. Check one mode against it.
        let m = NoiseModel::new(1.5, 1.8, 1.0, 2).unwrap();
        let dt = 1e-3;
        let mut r = rng(7);
        let path = SubordinatorPath::sample(0.2, dt, m.rho(), &mut r).unwrap();
        let decay = (-lambda(1) * dt).exp();
        let mut v = 0.0f64;
        for ds in path.increments() {
            v = decay * decay * v + m.betas()[0].powi(2) * ds;
        }
        let reps = 20_000;
        let mut acc = Vec::with_capacity(reps);
        for _ in 0..reps {
            let mut s = ConvolutionState::new(2);
            for &ds in path.increments() {
                s = s.advance(dt, ds, &m, &mut r).unwrap();
            }
            acc.push(s.z.amplitude(1).norm_sqr());
        }
        let mean = acc.iter().sum::<f64>() / reps as f64;
        let var = acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!((mean - v).abs() <= 3.0 * (var / reps as f64).sqrt(), "{mean} vs {v}");
    }

    #[test]
    fn k_gamma_cases() {
        let m = NoiseModel::new(1.5, 1.8, 1.0, 64).unwrap();
        let div = k_gamma(&m, 1.8);
        assert!(div.diverges && div.value().is_infinite());
        assert!(k_gamma(&m, 1.3).diverges);
        assert_eq!(k_gamma(&NoiseModel::silent(1.5, 64).unwrap(), 1.0).value(), 0.0);

        // brute-force oracle: partial sum to 10⁶ plus its integral remainder
        let s = 2.0 * (1.0 - 1.8);
        let n = 1_000_000u64;
        let mut sum = 0.0f64;
        for k in (1..=n).rev() {
            sum += (k as f64).powf(s);
        }
        sum += (n as f64).powf(s + 1.0) / (-s - 1.0);
        let oracle = 2.0 * SPECTRAL_GAP.powf(1.0 - 1.8) * sum;
        let kg = k_gamma(&m, 1.0);
        assert!(!kg.diverges);
        assert!(
            (kg.value() - oracle).abs() <= 1e-6 * oracle,
            "{} vs {oracle}",
            kg.value()
        );
        assert!(kg.upper() >= oracle);
    }
}
