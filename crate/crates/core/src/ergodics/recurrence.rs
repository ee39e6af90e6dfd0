use crate::ensemble::run_indexed;
use crate::error::{Error, Result};
use crate::integrator::{run_path, SimConfig};
use crate::noise::{step_count, NoiseModel};
use crate::spectral::{Field, SobolevOrder};

/// Two-sided normal quantile used for every confidence band here.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Default censoring horizon in integer time units.
pub const DEFAULT_N_MAX: usize = 50;

/// First integer times `τ_M = inf{k ≥ 1 : ‖X_k‖_δ ≤ M}` of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingRecord {
    pub level: f64,
    pub delta: f64,
    pub n_max: usize,
    /// `None` when the level was not reached by `n_max` (censored).
    pub taus: Vec<Option<usize>>,
}

impl HittingRecord {
    /// Builds the record from `norms[m][k - 1] = ‖X_k‖_δ` of trajectory `m`.
    pub fn from_norms(level: f64, delta: f64, n_max: usize, norms: &[Vec<f64>]) -> Self {
        let taus = norms
            .iter()
            .map(|path| path.iter().take(n_max).position(|v| *v <= level).map(|i| i + 1))
            .collect();
        HittingRecord {
            level,
            delta,
            n_max,
            taus,
        }
    }

    pub fn size(&self) -> usize {
        self.taus.len()
    }

    pub fn hits(&self) -> usize {
        self.taus.iter().filter(|t| t.is_some()).count()
    }

    pub fn censored(&self) -> usize {
        self.taus.iter().filter(|t| t.is_none()).count()
    }

    /// `#{τ > n}`, counting censored paths as exceeding every `n ≤ n_max`.
    pub fn survivors(&self, n: usize) -> usize {
        self.taus
            .iter()
            .filter(|t| match t {
                Some(k) => *k > n,
                None => true,
            })
            .count()
    }
}

fn steps_per_unit(dt: f64) -> Result<usize> {
    let n = step_count(1.0, dt);
    if (n as f64 * dt - 1.0).abs() > 1e-9 {
        return Err(Error::usage(format!(
            "step {dt} does not divide the unit time used for hitting times"
        )));
    }
    Ok(n)
}

fn validate_level(level: f64, delta: f64) -> Result<()> {
    if level.is_nan() || level < 0.0 {
        return Err(Error::usage(format!("hitting level must be nonnegative, got {level}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::usage(format!("δ must lie in (0,1), got {delta}")));
    }
    Ok(())
}

/// `‖X_k‖_δ` at `k = 1..=n` for every member of an ensemble.
pub fn integer_time_norms<I>(
    config: &SimConfig,
    model: &NoiseModel,
    initial: I,
    delta: f64,
    n: usize,
    ensemble: usize,
) -> Result<Vec<Vec<f64>>>
where
    I: Fn(u64) -> Field + Sync + Send,
{
    let unit = steps_per_unit(config.dt)?;
    let run = SimConfig {
        horizon: n as f64,
        ..config.clone()
    };
    run.validate()?;
    run_indexed(ensemble, |i| {
        let member = run.for_trajectory(config.trajectory_index + i);
        let mut out = Vec::with_capacity(n);
        run_path(&member, model, &initial(i), |step, _, x| {
            if step > 0 && step % unit == 0 {
                out.push(x.sobolev_norm(SobolevOrder(delta)));
            }
            true
        })?;
        Ok(out)
    })
}

/// Simulates each member only until it first satisfies `‖X_k‖_δ ≤ level` at
/// an integer time `k ≥ 1`, or until `n_max`.
pub fn hitting_times<I>(
    config: &SimConfig,
    model: &NoiseModel,
    initial: I,
    level: f64,
    delta: f64,
    n_max: usize,
    ensemble: usize,
) -> Result<HittingRecord>
where
    I: Fn(u64) -> Field + Sync + Send,
{
    validate_level(level, delta)?;
    if n_max == 0 || ensemble == 0 {
        return Err(Error::usage("hitting study needs n_max ≥ 1 and a nonempty ensemble"));
    }
    let unit = steps_per_unit(config.dt)?;
    let run = SimConfig {
        horizon: n_max as f64,
        ..config.clone()
    };
    run.validate()?;
    let taus = run_indexed(ensemble, |i| {
        let member = run.for_trajectory(config.trajectory_index + i);
        let mut tau = None;
        run_path(&member, model, &initial(i), |step, _, x| {
            if step > 0 && step % unit == 0 && x.sobolev_norm(SobolevOrder(delta)) <= level {
                tau = Some(step / unit);
                return false;
            }
            true
        })?;
        Ok(tau)
    })?;
    Ok(HittingRecord {
        level,
        delta,
        n_max,
        taus,
    })
}

/// Wilson score interval for `successes / trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

/// Least-squares line through `(n, log P(τ > n))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricFit {
    pub slope: f64,
    pub intercept: f64,
    /// NaN when the line passes through only two points, where linearity
    /// cannot be judged.
    pub r_squared: f64,
    pub points: usize,
}

impl GeometricFit {
    /// Per-unit-time survival factor `q = e^{slope}`.
    pub fn rate(&self) -> f64 {
        self.slope.exp()
    }
}

/// Empirical survival curve of a hitting record.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCurve {
    pub n: Vec<usize>,
    pub p_tail: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    /// `None` when fewer than two values of the tail are positive.
    pub fit: Option<GeometricFit>,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> GeometricFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r_squared = if xs.len() < 3 {
        f64::NAN
    } else if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    GeometricFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: xs.len(),
    }
}

/// `P(τ > n)` for `n = 1..=n_max` with Wilson bands, and a geometric fit on
/// the positive part of the tail.
pub fn recurrence_tail(record: &HittingRecord) -> Result<TailCurve> {
    let m = record.size();
    if m == 0 {
        return Err(Error::estimation("empty hitting record"));
    }
    if record.hits() == 0 {
        return Err(Error::estimation(format!(
            "all {m} trajectories censored at n_max = {}; level {} never reached",
            record.n_max, record.level
        )));
    }
    let mut curve = TailCurve {
        n: Vec::new(),
        p_tail: Vec::new(),
        ci_lo: Vec::new(),
        ci_hi: Vec::new(),
        fit: None,
    };
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for n in 1..=record.n_max {
        let c = record.survivors(n);
        let p = c as f64 / m as f64;
        let (lo, hi) = wilson_interval(c, m, Z_95);
        curve.n.push(n);
        curve.p_tail.push(p);
        curve.ci_lo.push(lo);
        curve.ci_hi.push(hi);
        if c > 0 {
            xs.push(n as f64);
            ys.push(p.ln());
        }
    }
    if xs.len() >= 2 {
        curve.fit = Some(least_squares(&xs, &ys));
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentVerdict {
    Finite,
    /// Censored paths carry most of the estimate, so its size is unknown.
    NotConclusive,
    /// The fitted survival factor violates `e^λ q < 1`.
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpMoment {
    pub lambda: f64,
    /// Censoring-aware lower bound on `E[e^{λτ}]`: censored paths enter with
    /// `τ = n_max`.
    pub estimate: f64,
    /// Share of the estimate contributed by censored paths.
    pub censored_share: f64,
    /// `e^λ q` for the fitted `q`, when a fit exists.
    pub geometric_factor: Option<f64>,
    pub verdict: MomentVerdict,
}

/// Estimate of `E[e^{λ τ_M}]` with a finiteness verdict.
///
/// A fitted survival factor `q` with `e^λ q ≥ 1` makes the series diverge.
/// Otherwise the verdict is not conclusive when censored paths supply more
/// than half of the estimate, and finite when they do not.
pub fn exp_moment_tau(record: &HittingRecord, tail: &TailCurve, lambda: f64) -> Result<ExpMoment> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::usage(format!("λ must be positive, got {lambda}")));
    }
    let m = record.size();
    if m == 0 {
        return Err(Error::estimation("empty hitting record"));
    }
    let logs: Vec<f64> = record
        .taus
        .iter()
        .map(|t| lambda * t.unwrap_or(record.n_max) as f64)
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    let log_total = top + sum.ln();
    let censored = record.censored();
    let censored_share = if censored == 0 {
        0.0
    } else {
        ((censored as f64).ln() + lambda * record.n_max as f64 - log_total).exp()
    };
    let geometric_factor = tail.fit.map(|f| lambda.exp() * f.rate());
    let verdict = match geometric_factor {
        Some(g) if g >= 1.0 => MomentVerdict::Divergent,
        _ if censored_share > 0.5 => MomentVerdict::NotConclusive,
        _ => MomentVerdict::Finite,
    };
    Ok(ExpMoment {
        lambda,
        estimate: (log_total - (m as f64).ln()).exp(),
        censored_share,
        geometric_factor,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geometric_record(q: f64, m: usize, n_max: usize, seed: u64) -> HittingRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let norms: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..n_max)
                    .map(|_| if rng.random::<f64>() < q { 2.0 } else { 0.5 })
                    .collect()
            })
            .collect();
        HittingRecord::from_norms(1.0, 0.5, n_max, &norms)
    }

    #[test]
    fn infinite_and_zero_levels() {
        let norms = vec![vec![3.0, 1.0, 0.2]; 5];
        let all = HittingRecord::from_norms(f64::INFINITY, 0.5, 3, &norms);
        assert!(all.taus.iter().all(|t| *t == Some(1)));
        let none = HittingRecord::from_norms(0.0, 0.5, 3, &norms);
        assert_eq!(none.censored(), 5);
        assert!(matches!(recurrence_tail(&none), Err(Error::Estimation(_))));
    }

    #[test]
    fn degenerate_tail_skips_fit() {
        let norms = vec![vec![0.1; 4]; 10];
        let rec = HittingRecord::from_norms(1.0, 0.5, 4, &norms);
        let tail = recurrence_tail(&rec).unwrap();
        assert!(tail.p_tail.iter().all(|p| *p == 0.0));
        assert!(tail.fit.is_none());
        let em = exp_moment_tau(&rec, &tail, 0.3).unwrap();
        assert_eq!(em.verdict, MomentVerdict::Finite);
        assert!((em.estimate - 0.3f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn geometric_record_is_fitted() {
        let rec = geometric_record(0.3, 20_000, 30, 1);
        let tail = recurrence_tail(&rec).unwrap();
        let fit = tail.fit.unwrap();
        assert!(fit.r_squared > 0.99);
        assert!((fit.rate() - 0.3).abs() < 0.02, "{}", fit.rate());
        let q = fit.rate();
        let finite = exp_moment_tau(&rec, &tail, -0.5 * q.ln()).unwrap();
        assert_eq!(finite.verdict, MomentVerdict::Finite);
        let div = exp_moment_tau(&rec, &tail, -2.0 * q.ln()).unwrap();
        assert_eq!(div.verdict, MomentVerdict::Divergent);
    }

    #[test]
    fn two_point_fit_has_no_r_squared() {
        let mut norms = vec![vec![0.5, 0.5, 0.5]; 90];
        norms.extend(vec![vec![2.0, 0.5, 0.5]; 9]);
        norms.push(vec![2.0, 2.0, 0.5]);
        let rec = HittingRecord::from_norms(1.0, 0.5, 3, &norms);
        let fit = recurrence_tail(&rec).unwrap().fit.unwrap();
        assert_eq!(fit.points, 2);
        assert!(fit.r_squared.is_nan());
        assert!((fit.rate() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn small_lambda_tends_to_one() {
        let rec = geometric_record(0.4, 500, 20, 2);
        let tail = recurrence_tail(&rec).unwrap();
        let em = exp_moment_tau(&rec, &tail, 1e-9).unwrap();
        assert!((em.estimate - 1.0).abs() < 1e-7);
    }

    #[test]
    fn wilson_band_contains_estimate() {
        for (c, n) in [(0, 10), (3, 10), (10, 10), (500, 1000)] {
            let (lo, hi) = wilson_interval(c, n, Z_95);
            let p = c as f64 / n as f64;
            assert!(lo <= p && p <= hi);
        }
        let (lo, hi) = wilson_interval(0, 1000, Z_95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.00382).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn censoring_accounts_for_everyone(
            norms in prop::collection::vec(prop::collection::vec(0.0f64..3.0, 8), 1..40),
            level in 0.0f64..3.0,
        ) {
            let rec = HittingRecord::from_norms(level, 0.5, 8, &norms);
            prop_assert_eq!(rec.hits() + rec.censored(), rec.size());
            prop_assert!(rec.taus.iter().flatten().all(|t| *t >= 1 && *t <= 8));
            // raising the level can only shorten hitting times
            let higher = HittingRecord::from_norms(level * 2.0 + 0.1, 0.5, 8, &norms);
            for n in 1..=8 {
                prop_assert!(higher.survivors(n) <= rec.survivors(n));
            }
        }

        #[test]
        fn fit_and_verdict_never_contradict(q in 0.05f64..0.7, lam in 0.01f64..3.0, seed in 0u64..50) {
            let rec = geometric_record(q, 2000, 40, seed);
            let tail = recurrence_tail(&rec).unwrap();
            if let Some(fit) = tail.fit {
                let em = exp_moment_tau(&rec, &tail, lam).unwrap();
                if lam.exp() * fit.rate() < 1.0 && rec.censored() == 0 {
                    prop_assert_eq!(em.verdict, MomentVerdict::Finite);
                }
                if lam.exp() * fit.rate() >= 1.0 {
                    prop_assert_eq!(em.verdict, MomentVerdict::Divergent);
                }
            }
        }
    }
}
