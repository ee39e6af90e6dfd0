use crate::error::{Error, Result};
use crate::stats::pairwise_sum;

/// A single sample carrying more than this share of the tilted sum triggers
/// the effective-sample-size warning.
pub const ESS_SHARE_LIMIT: f64 = 0.5;

pub const DEFAULT_GRID_POINTS: usize = 21;

/// Tolerance on discrete second differences of a convex curve.
pub const CONVEXITY_TOLERANCE: f64 = 1e-10;

/// Empirical scaled cumulant generating function on a `λ` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScgfCurve {
    pub horizon: f64,
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest single-sample share of `Σ e^{λ T L}` at each `λ`.
    pub max_share: Vec<f64>,
}

impl ScgfCurve {
    pub fn ess_warnings(&self) -> Vec<bool> {
        self.max_share.iter().map(|s| *s > ESS_SHARE_LIMIT).collect()
    }

    /// `(s_i - s_{i-1})·(λ_{i+1} - λ_{i-1})/2` with `s_i` the chord slopes;
    /// the usual second difference on a uniform grid.
    pub fn second_differences(&self) -> Vec<f64> {
        let l = &self.lambdas;
        let v = &self.values;
        (1..l.len().saturating_sub(1))
            .map(|i| {
                let left = (v[i] - v[i - 1]) / (l[i] - l[i - 1]);
                let right = (v[i + 1] - v[i]) / (l[i + 1] - l[i]);
                (right - left) * 0.5 * (l[i + 1] - l[i - 1])
            })
            .collect()
    }

    /// Central difference at `λ = 0` from its two grid neighbours.
    pub fn slope_at_zero(&self) -> Option<f64> {
        let i = self.lambdas.iter().position(|l| *l == 0.0)?;
        if i == 0 || i + 1 == self.lambdas.len() {
            return None;
        }
        Some((self.values[i + 1] - self.values[i - 1]) / (self.lambdas[i + 1] - self.lambdas[i - 1]))
    }
}

/// `(1/T) log((1/M) Σ e^{a L_m})` with `a = λT`, and the largest single share.
fn tilted(samples: &[f64], a: f64, horizon: f64) -> (f64, f64) {
    let top = samples.iter().map(|s| a * s).fold(f64::NEG_INFINITY, f64::max);
    let terms: Vec<f64> = samples.iter().map(|s| (a * s - top).exp()).collect();
    let sum = pairwise_sum(&terms);
    let value = (top + sum.ln() - (samples.len() as f64).ln()) / horizon;
    (value, 1.0 / sum)
}

/// `Λ_T(λ) = (1/T) log((1/M) Σ_m e^{λ T L_T^{(m)}(f)})` on `lambdas`.
pub fn scgf(samples: &[f64], lambdas: &[f64], horizon: f64) -> Result<ScgfCurve> {
    if samples.is_empty() {
        return Err(Error::usage("SCGF needs at least one sample"));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::domain("SCGF samples must be finite"));
    }
    if !(horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::usage("λ grid must be strictly increasing"));
    }
    let (values, max_share) = lambdas
        .iter()
        .map(|&l| {
            if l == 0.0 {
                (0.0, 1.0 / samples.len() as f64)
            } else {
                tilted(samples, l * horizon, horizon)
            }
        })
        .unzip();
    Ok(ScgfCurve {
        horizon,
        lambdas: lambdas.to_vec(),
        values,
        max_share,
    })
}

/// Symmetric grid of `points` (odd) values whose half-width is the largest
/// `|λ|` at which no single sample carries more than half the tilted sum on
/// either side.
pub fn default_lambda_grid(samples: &[f64], horizon: f64, points: usize) -> Result<Vec<f64>> {
    if points < 3 || points.is_multiple_of(2) {
        return Err(Error::usage(format!(
            "λ grid needs an odd number ≥ 3 of points, got {points}"
        )));
    }
    if samples.len() < 2 {
        return Err(Error::usage("λ grid needs at least two samples"));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    if !(spread > 0.0) || !spread.is_finite() {
        return Err(Error::estimation(
            "λ grid needs samples that are finite and not all equal",
        ));
    }
    let half = [1.0, -1.0]
        .iter()
        .map(|&sign| half_width(samples, horizon, spread, sign))
        .fold(f64::INFINITY, f64::min);
    let mid = (points / 2) as f64;
    Ok((0..points).map(|i| half * (i as f64 - mid) / mid).collect())
}

fn half_width(samples: &[f64], horizon: f64, spread: f64, sign: f64) -> f64 {
    let share = |w: f64| tilted(samples, sign * w * horizon, horizon).1;
    let extreme = if sign > 0.0 {
        samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        samples.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let ties = samples.iter().filter(|s| **s == extreme).count();
    // ties at the extreme cap the attainable share at 1/ties
    let target = ESS_SHARE_LIMIT.min(0.9 / ties as f64);
    let mut lo = 0.0;
    let mut hi = 1.0 / (horizon * spread);
    let mut tries = 0;
    while share(hi) < target && tries < 200 {
        lo = hi;
        hi *= 2.0;
        tries += 1;
    }
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if share(m) < target {
            lo = m;
        } else {
            hi = m;
        }
    }
    lo
}

/// Grid-restricted Legendre transform of an SCGF curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub r: Vec<f64>,
    /// `sup_λ (λ r - Λ(λ))` over the grid.
    pub rate: Vec<f64>,
    /// False when the supremum sits on the edge of the grid, so the true
    /// value may be larger (and `+∞` when `Λ` stays flat).
    pub interior: Vec<bool>,
    /// Interval of `r` on which the grid transform vanishes.
    pub zero_set: (f64, f64),
    /// Midpoint of `zero_set`.
    pub minimizer: f64,
    pub min_value: f64,
}

fn transform(curve: &ScgfCurve, r: f64) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, (l, v)) in curve.lambdas.iter().zip(&curve.values).enumerate() {
        let val = l * r - v;
        if val > best {
            best = val;
            arg = i;
        }
    }
    (best, arg)
}

/// `J(r) = sup_λ (λ r - Λ(λ))` over the curve's grid at each `r`.
pub fn legendre(curve: &ScgfCurve, r_grid: &[f64]) -> Result<RateCurve> {
    let worst = curve.second_differences().into_iter().fold(f64::INFINITY, f64::min);
    if worst < -CONVEXITY_TOLERANCE {
        return Err(Error::estimation(format!(
            "SCGF is not convex on its grid (second difference {worst:e})"
        )));
    }
    let zero = curve
        .lambdas
        .iter()
        .position(|l| *l == 0.0)
        .ok_or_else(|| Error::usage("λ grid must contain 0"))?;
    if zero == 0 || zero + 1 == curve.lambdas.len() {
        return Err(Error::usage("λ grid must contain values on both sides of 0"));
    }
    let chord = |i: usize| curve.values[i] / curve.lambdas[i];
    let lo = (0..zero).map(chord).fold(f64::NEG_INFINITY, f64::max);
    let hi = (zero + 1..curve.lambdas.len()).map(chord).fold(f64::INFINITY, f64::min);
    let minimizer = 0.5 * (lo + hi);
    let last = curve.lambdas.len() - 1;
    let (rate, interior) = r_grid
        .iter()
        .map(|&r| {
            let (v, arg) = transform(curve, r);
            (v, arg != 0 && arg != last)
        })
        .unzip();
    Ok(RateCurve {
        r: r_grid.to_vec(),
        rate,
        interior,
        zero_set: (lo, hi),
        minimizer,
        min_value: transform(curve, minimizer).0,
    })
}

/// `points` equally spaced values of `r` between the outermost chord slopes
/// of the curve, where the grid supremum is interior.
pub fn default_rate_grid(curve: &ScgfCurve, points: usize) -> Vec<f64> {
    let l = &curve.lambdas;
    let v = &curve.values;
    let n = l.len();
    if n < 2 || points < 2 {
        return Vec::new();
    }
    let a = (v[1] - v[0]) / (l[1] - l[0]);
    let b = (v[n - 1] - v[n - 2]) / (l[n - 1] - l[n - 2]);
    (0..points)
        .map(|i| a + (b - a) * i as f64 / (points - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, std_error};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    fn gamma_samples(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Gamma::new(4.0, 0.25).unwrap();
        (0..n).map(|_| g.sample(&mut rng)).collect()
    }

    #[test]
    fn zero_lambda_is_exactly_zero() {
        let s = gamma_samples(1000, 1);
        let c = scgf(&s, &[-1.0, 0.0, 1.0], 10.0).unwrap();
        assert_eq!(c.values[1], 0.0);
        assert!(scgf(&[], &[0.0], 1.0).is_err());
    }

    #[test]
    fn slope_at_zero_is_the_mean() {
        let s = gamma_samples(5000, 2);
        let grid = default_lambda_grid(&s, 10.0, DEFAULT_GRID_POINTS).unwrap();
        let c = scgf(&s, &grid, 10.0).unwrap();
        let d = c.slope_at_zero().unwrap();
        assert!((d - mean(&s)).abs() <= 3.0 * std_error(&s), "{d} vs {}", mean(&s));
        assert!(c.ess_warnings().iter().all(|w| !w));
        // the edge of the grid sits at the warning threshold
        assert!((c.max_share[0].max(c.max_share[20]) - ESS_SHARE_LIMIT).abs() < 1e-6);
        let beyond = scgf(&s, &[grid[20] * 1.5], 10.0).unwrap();
        assert!(beyond.ess_warnings()[0]);
    }

    #[test]
    fn gaussian_legendre_pair() {
        let sigma2: f64 = 0.7;
        let lambdas: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.1).collect();
        let curve = ScgfCurve {
            horizon: 1.0,
            values: lambdas.iter().map(|l| sigma2 * l * l / 2.0).collect(),
            max_share: vec![0.0; lambdas.len()],
            lambdas: lambdas.clone(),
        };
        let r: Vec<f64> = lambdas[1..40].iter().map(|l| sigma2 * l).collect();
        let j = legendre(&curve, &r).unwrap();
        for (ri, (ji, inner)) in r.iter().zip(j.rate.iter().zip(&j.interior)) {
            assert!(*inner);
            assert!((ji - ri * ri / (2.0 * sigma2)).abs() < 1e-8);
        }
        assert_eq!(j.minimizer, 0.0);
        assert_eq!(j.min_value, 0.0);
    }

    #[test]
    fn flat_scgf_flags_off_grid() {
        let lambdas = vec![-1.0, -0.5, 0.0, 0.5, 1.0];
        let curve = ScgfCurve {
            horizon: 1.0,
            values: vec![0.0; 5],
            max_share: vec![0.0; 5],
            lambdas,
        };
        let j = legendre(&curve, &[-0.5, 0.0, 0.5]).unwrap();
        assert_eq!(j.rate[1], 0.0);
        assert!(!j.interior[0] && !j.interior[2]);
        assert_eq!(j.zero_set, (0.0, 0.0));
    }

    #[test]
    fn concave_input_is_rejected() {
        let curve = ScgfCurve {
            horizon: 1.0,
            lambdas: vec![-1.0, 0.0, 1.0],
            values: vec![-0.5, 0.0, -0.5],
            max_share: vec![0.0; 3],
        };
        assert!(matches!(legendre(&curve, &[0.0]), Err(Error::Estimation(_))));
    }

    proptest! {
        #[test]
        fn scgf_is_convex_and_rate_nonnegative(seed in 0u64..200, n in 20usize..400, t in 0.5f64..20.0) {
            let s = gamma_samples(n, seed);
            let grid = default_lambda_grid(&s, t, DEFAULT_GRID_POINTS).unwrap();
            let c = scgf(&s, &grid, t).unwrap();
            prop_assert_eq!(c.values[10], 0.0);
            for d in c.second_differences() {
                prop_assert!(d >= -CONVEXITY_TOLERANCE, "{}", d);
            }
            let r = default_rate_grid(&c, 41);
            let j = legendre(&c, &r).unwrap();
            prop_assert!(j.rate.iter().all(|v| *v >= 0.0));
            prop_assert!(j.min_value >= 0.0 && j.min_value <= 1e-12);
            let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(j.minimizer >= lo && j.minimizer <= hi);
        }
    }
}
