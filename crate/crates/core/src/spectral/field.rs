use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::{Add, Sub};

use num_complex::Complex64;

use super::{lambda, SobolevOrder};
use crate::error::{Error, Result};

/// Real mean-zero function on the torus, stored as amplitudes of modes `1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    amps: Vec<Complex64>,
}

impl Field {
    pub fn zeros(modes: usize) -> Self {
        Field {
            amps: vec![Complex64::new(0.0, 0.0); modes],
        }
    }

    /// Wraps amplitudes `a_1..a_K`; rejects NaN and infinities.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::numerical("field amplitudes must be finite"));
        }
        Ok(Field { amps })
    }

    /// Field with a single nonzero amplitude `a_k = amp`.
    ///
    /// # Panics
    /// If `k` is not in `1..=modes`.
    pub fn single_mode(modes: usize, k: usize, amp: Complex64) -> Self {
        let mut f = Field::zeros(modes);
        f.set_amplitude(k, amp);
        f
    }

    /// The real mode `√2 cos(2πkξ)`, which has unit `H` norm.
    pub fn unit_mode(modes: usize, k: usize) -> Self {
        Field::single_mode(modes, k, Complex64::new(FRAC_1_SQRT_2, 0.0))
    }

    pub fn modes(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    /// Amplitude of wavenumber `k` (1-based).
    pub fn amplitude(&self, k: usize) -> Complex64 {
        self.amps[k - 1]
    }

    pub fn set_amplitude(&mut self, k: usize, amp: Complex64) {
        assert!(k >= 1 && k <= self.amps.len(), "mode {k} out of range");
        self.amps[k - 1] = amp;
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// `⟨x, y⟩_H = Σ_{k≠0} ⟨x,e_k⟩ conj⟨y,e_k⟩ = 2 Re Σ_{k≥1} a_k conj(b_k)`.
    pub fn inner(&self, other: &Field) -> f64 {
        2.0 * self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum::<f64>()
    }

    pub fn h_norm(&self) -> f64 {
        self.sobolev_norm(SobolevOrder::H)
    }

    pub fn v_norm(&self) -> f64 {
        self.sobolev_norm(SobolevOrder::V)
    }

    /// `‖x‖_θ = (2 Σ λ_k^θ |a_k|²)^{1/2}`.
    pub fn sobolev_norm(&self, order: SobolevOrder) -> f64 {
        let theta = order.0;
        let sum: f64 = if theta == 0.0 {
            self.amps.iter().map(|a| a.norm_sqr()).sum()
        } else if theta == 1.0 {
            self.amps
                .iter()
                .enumerate()
                .map(|(i, a)| lambda(i + 1) * a.norm_sqr())
                .sum()
        } else {
            self.amps
                .iter()
                .enumerate()
                .map(|(i, a)| lambda(i + 1).powf(theta) * a.norm_sqr())
                .sum()
        };
        (2.0 * sum).sqrt()
    }

    /// `e^{-At} x`.
    pub fn apply_semigroup(&self, t: f64) -> Result<Field> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("semigroup time must be nonnegative, got {t}")));
        }
        if t == 0.0 {
            return Ok(self.clone());
        }
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| a * (-lambda(i + 1) * t).exp())
            .collect();
        Ok(Field { amps })
    }

    fn check_cut(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.amps.len() {
            return Err(Error::domain(format!(
                "projection level {n} outside 1..={}",
                self.amps.len()
            )));
        }
        Ok(())
    }

    /// Orthogonal projection onto modes `1..=n`.
    pub fn project_low(&self, n: usize) -> Result<Field> {
        self.check_cut(n)?;
        let mut out = self.clone();
        out.amps[n..].iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        Ok(out)
    }

    /// Orthogonal projection onto modes `n+1..=K`.
    pub fn project_high(&self, n: usize) -> Result<Field> {
        self.check_cut(n)?;
        let mut out = self.clone();
        out.amps[..n].iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        Ok(out)
    }

    /// Overwrites `self` with `other` without reallocating.
    pub fn assign(&mut self, other: &Field) {
        self.amps.copy_from_slice(&other.amps);
    }

    pub fn scale_mut(&mut self, c: f64) {
        self.amps.iter_mut().for_each(|a| *a *= c);
    }

    pub fn scaled(&self, c: f64) -> Field {
        let mut out = self.clone();
        out.scale_mut(c);
        out
    }

    /// `self += c · other`.
    pub fn axpy(&mut self, c: f64, other: &Field) {
        debug_assert_eq!(self.modes(), other.modes());
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += b * c;
        }
    }
}

impl Add for &Field {
    type Output = Field;

    fn add(self, rhs: &Field) -> Field {
        assert_eq!(self.modes(), rhs.modes(), "mode count mismatch");
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &Field {
    type Output = Field;

    fn sub(self, rhs: &Field) -> Field {
        assert_eq!(self.modes(), rhs.modes(), "mode count mismatch");
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}
