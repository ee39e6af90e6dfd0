//! Random test fields with light- and heavy-tailed spectra.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};

use super::Field;

fn gaussian_pair<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Gaussian amplitudes with a random algebraic decay `k^{-p}`, `p ∈ [0.75, 3]`,
/// rescaled to `H` norm `scale`.
pub fn light_field<R: Rng + ?Sized>(modes: usize, scale: f64, rng: &mut R) -> Field {
    let p = rng.random_range(0.75..3.0);
    let amps = (1..=modes).map(|k| gaussian_pair(rng) * (k as f64).powf(-p)).collect();
    normalize(amps, scale)
}

/// Like [`light_field`] but every amplitude carries a Cauchy multiplier, so a
/// few modes dominate.
pub fn heavy_field<R: Rng + ?Sized>(modes: usize, scale: f64, rng: &mut R) -> Field {
    let p = rng.random_range(0.5..2.5);
    let cauchy = Cauchy::new(0.0, 1.0).expect("valid Cauchy parameters");
    let amps = (1..=modes)
        .map(|k| {
            let m: f64 = cauchy.sample(rng);
            gaussian_pair(rng) * m.clamp(-1e6, 1e6) * (k as f64).powf(-p)
        })
        .collect();
    normalize(amps, scale)
}

/// Light or heavy spectrum with equal probability and a log-uniform `H` norm
/// in `[10^-2, 10^1.5]`.
pub fn mixed_field<R: Rng + ?Sized>(modes: usize, rng: &mut R) -> Field {
    let scale = 10f64.powf(rng.random_range(-2.0..1.5));
    if rng.random_bool(0.5) {
        light_field(modes, scale, rng)
    } else {
        heavy_field(modes, scale, rng)
    }
}

fn normalize(amps: Vec<Complex64>, scale: f64) -> Field {
    let mut f = Field::from_amplitudes(amps).expect("finite random amplitudes");
    let norm = f.h_norm();
    if norm > 0.0 {
        f.scale_mut(scale / norm);
    }
    f
}
