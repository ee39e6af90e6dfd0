//! Mean-zero real fields on the unit torus in a truncated Fourier basis.
//!
//! A [`Field`] stores the complex amplitudes `a_1, ..., a_K` of
//!
//! ```text
//! x(ξ) = Σ_{k=1..K} ( a_k e^{i2πkξ} + conj(a_k) e^{-i2πkξ} )
//! ```
//!
//! so `a_k = ⟨x, e_k⟩` and the function is real and mean-zero by
//! construction. The operator `A = -∂²` is diagonal with eigenvalues
//! `λ_k = 4π²k²`.
//!
//! Products such as the cubic in `N(u) = u - u³` are evaluated on a padded
//! physical grid owned by [`SpectralGrid`]. With at least `6K + 1` samples the
//! retained modes of `u³` are free of aliasing.

mod field;
pub mod inequalities;
pub mod random;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};

pub use field::Field;

/// `λ_1 = 4π²`, the spectral gap of `A` on mean-zero functions.
pub const SPECTRAL_GAP: f64 = 4.0 * PI * PI;

/// Eigenvalue `4π²k²` of `A` for a nonzero wavenumber.
pub fn eigenvalue(k: i64) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("wavenumber 0 is excluded from the mean-zero space"));
    }
    let k = k.unsigned_abs() as f64;
    Ok(SPECTRAL_GAP * k * k)
}

#[inline]
pub(crate) fn lambda(k: usize) -> f64 {
    let k = k as f64;
    SPECTRAL_GAP * k * k
}

/// Smooth cutoff used by the truncated nonlinearity: `1` on `|z| ≤ 1`, `0` on
/// `|z| ≥ 2`, and the smoothstep `1 - w²(3 - 2w)` with `w = |z| - 1` between.
pub fn cutoff(z: f64) -> f64 {
    let z = z.abs();
    if z <= 1.0 {
        1.0
    } else if z >= 2.0 {
        0.0
    } else {
        let w = z - 1.0;
        1.0 - w * w * (3.0 - 2.0 * w)
    }
}

/// Sobolev order `θ` of `H_θ = D(A^{θ/2})`. `0` is `H`, `1` is `V`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SobolevOrder(pub f64);

impl SobolevOrder {
    pub const H: SobolevOrder = SobolevOrder(0.0);
    pub const V: SobolevOrder = SobolevOrder(1.0);

    pub fn new(theta: f64) -> Result<Self> {
        if theta.is_finite() {
            Ok(SobolevOrder(theta))
        } else {
            Err(Error::domain(format!("Sobolev order must be finite, got {theta}")))
        }
    }
}

struct Transforms {
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

/// Mode cutoff plus the padded physical grid used for nonlinear products.
///
/// Cloning is cheap; the FFT plans are shared.
#[derive(Clone)]
pub struct SpectralGrid {
    modes: usize,
    padded: usize,
    transforms: Arc<Transforms>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("modes", &self.modes)
            .field("padded", &self.padded)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.modes == other.modes && self.padded == other.padded
    }
}

impl SpectralGrid {
    /// Grid retaining wavenumbers `1..=modes`, padded to the next power of two
    /// above `6·modes + 1`.
    pub fn new(modes: usize) -> Result<Self> {
        let padded = (6 * modes + 1).next_power_of_two().max(8);
        Self::with_padding(modes, padded)
    }

    pub fn with_padding(modes: usize, padded: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::domain("mode cutoff must be at least 1"));
        }
        if padded < 6 * modes + 1 || !padded.is_multiple_of(2) {
            return Err(Error::domain(format!(
                "padded size {padded} must be even and at least 6K+1 = {}",
                6 * modes + 1
            )));
        }
        let mut planner = RealFftPlanner::<f64>::new();
        let transforms = Transforms {
            forward: planner.plan_fft_forward(padded),
            inverse: planner.plan_fft_inverse(padded),
        };
        Ok(SpectralGrid {
            modes,
            padded,
            transforms: Arc::new(transforms),
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn padded_size(&self) -> usize {
        self.padded
    }

    pub fn zeros(&self) -> Field {
        Field::zeros(self.modes)
    }

    /// Reusable buffers for the transform-heavy operations.
    pub fn scratch(&self) -> Scratch {
        let half = self.padded / 2 + 1;
        Scratch {
            physical: vec![0.0; self.padded],
            spectrum: vec![Complex64::new(0.0, 0.0); half],
            fwd: self.transforms.forward.make_scratch_vec(),
            inv: self.transforms.inverse.make_scratch_vec(),
        }
    }

    fn check(&self, x: &Field) -> Result<()> {
        if x.modes() != self.modes {
            return Err(Error::domain(format!(
                "field has {} modes, grid has {}",
                x.modes(),
                self.modes
            )));
        }
        Ok(())
    }

    /// Samples `x` at the `padded_size` equispaced points `ξ_j = j / n` into
    /// `scratch.physical`.
    fn synthesize(&self, x: &Field, scratch: &mut Scratch) {
        let Scratch {
            physical,
            spectrum,
            inv,
            ..
        } = scratch;
        spectrum.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        spectrum[1..=self.modes].copy_from_slice(x.amplitudes());
        self.transforms
            .inverse
            .process_with_scratch(spectrum, physical, inv)
            .expect("buffer sizes fixed by the grid");
    }

    /// Forward transform of `scratch.physical`. Returns the mean; the
    /// amplitudes of modes `1..=K` are left in `scratch.spectrum[1..=K]`,
    /// already normalized.
    fn analyze(&self, scratch: &mut Scratch) -> f64 {
        let Scratch {
            physical,
            spectrum,
            fwd,
            ..
        } = scratch;
        self.transforms
            .forward
            .process_with_scratch(physical, spectrum, fwd)
            .expect("buffer sizes fixed by the grid");
        let norm = 1.0 / self.padded as f64;
        spectrum[..=self.modes].iter_mut().for_each(|c| *c *= norm);
        spectrum[0].re
    }

    /// Point values `x(j / n)` for `j = 0..n`.
    pub fn to_physical(&self, x: &Field) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut scratch = self.scratch();
        self.synthesize(x, &mut scratch);
        Ok(scratch.physical)
    }

    /// Projects grid values onto modes `1..=K`, returning `(mean, field)`.
    pub fn from_physical(&self, values: &[f64]) -> Result<(f64, Field)> {
        if values.len() != self.padded {
            return Err(Error::domain(format!(
                "expected {} samples, got {}",
                self.padded,
                values.len()
            )));
        }
        let mut scratch = self.scratch();
        scratch.physical.copy_from_slice(values);
        let mean = self.analyze(&mut scratch);
        Field::from_amplitudes(scratch.spectrum[1..=self.modes].to_vec()).map(|f| (mean, f))
    }

    /// `N(x) = x - x³` with the mean of `x³` discarded.
    pub fn nonlinearity(&self, x: &Field) -> Result<Field> {
        self.nonlinearity_with_mean(x).map(|(_, n)| n)
    }

    /// `N(x)` together with the mean of `x³` that the projection onto the
    /// mean-zero space discards. The full-space nonlinearity has constant
    /// mode `-mean`.
    pub fn nonlinearity_with_mean(&self, x: &Field) -> Result<(f64, Field)> {
        self.check(x)?;
        let mut scratch = self.scratch();
        let mut out = self.zeros();
        let (mean, _) = self.nonlinearity_into(x, &mut scratch, &mut out)?;
        Ok((mean, out))
    }

    /// Allocation-free `N(x)` for time loops. Returns the discarded mean of
    /// `x³` and `max_j |x(ξ_j)|`, the latter used for stiffness control.
    pub fn nonlinearity_into(&self, x: &Field, scratch: &mut Scratch, out: &mut Field) -> Result<(f64, f64)> {
        debug_assert_eq!(x.modes(), self.modes);
        self.synthesize(x, scratch);
        let mut peak = 0.0f64;
        for u in scratch.physical.iter_mut() {
            peak = peak.max(u.abs());
            *u = *u * *u * *u;
        }
        if !peak.is_finite() || scratch.physical.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("cubic overflow on the physical grid"));
        }
        let mean = self.analyze(scratch);
        for ((o, a), c) in out
            .amps_mut()
            .iter_mut()
            .zip(x.amplitudes())
            .zip(&scratch.spectrum[1..=self.modes])
        {
            *o = a - c;
        }
        Ok((mean, peak))
    }

    /// Mean-zero projection of `x³`.
    pub fn cube(&self, x: &Field) -> Result<Field> {
        let n = self.nonlinearity(x)?;
        Ok(x - &n)
    }

    /// `N(x)·χ(‖x‖_V / ρ)`.
    pub fn truncated_nonlinearity(&self, x: &Field, rho: f64) -> Result<Field> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::domain(format!("truncation radius must be positive, got {rho}")));
        }
        let weight = cutoff(x.v_norm() / rho);
        if weight == 0.0 {
            self.check(x)?;
            return Ok(self.zeros());
        }
        let mut n = self.nonlinearity(x)?;
        if weight != 1.0 {
            n.scale_mut(weight);
        }
        Ok(n)
    }

    /// `‖x‖⁴_{L⁴}` by quadrature on the padded grid, exact for the retained
    /// modes since `x⁴` has degree `4K < n`.
    pub fn l4_norm_pow4(&self, x: &Field) -> Result<f64> {
        let u = self.to_physical(x)?;
        Ok(u.iter().map(|v| v * v * v * v).sum::<f64>() / u.len() as f64)
    }

    /// `⟨x, y⟩_H` by quadrature, for comparison with the spectral pairing.
    pub fn inner_quadrature(&self, x: &Field, y: &Field) -> Result<f64> {
        let u = self.to_physical(x)?;
        let v = self.to_physical(y)?;
        Ok(u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / u.len() as f64)
    }

    /// `⟨x - y, x³ - y³⟩_H` by quadrature.
    pub fn cubic_monotonicity(&self, x: &Field, y: &Field) -> Result<f64> {
        let u = self.to_physical(x)?;
        let v = self.to_physical(y)?;
        let sum: f64 = u.iter().zip(&v).map(|(a, b)| (a - b) * (a * a * a - b * b * b)).sum();
        Ok(sum / u.len() as f64)
    }
}

/// Buffers for [`SpectralGrid::nonlinearity_into`].
pub struct Scratch {
    physical: Vec<f64>,
    spectrum: Vec<Complex64>,
    fwd: Vec<Complex64>,
    inv: Vec<Complex64>,
}
