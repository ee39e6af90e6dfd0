//! The study subcommands. Each returns its tables; nothing is written here.

use subac::control::verify_reachability;
use subac::diagnostics::{laplace_check, levy_cdf_check};
use subac::ergodics::{
    convolution_sup_norms, default_initial_set, default_lambda_grid, default_rate_grid, exp_moment_tau, hitting_times,
    integer_time_norms, legendre, moment_estimate, moment_stability, occupation_ensemble, recurrence_tail, scgf,
    tail_index, twin_discrepancy, wilson_interval, HittingRecord, MomentStudy, MomentVerdict, TailCurve, Z_95,
};
use subac::integrator::simulate;
use subac::spectral::{Field, SpectralGrid};
use subac::stats::quantile;
use subac::Error;

use crate::config::{scaled_mode, Auto, RunConfig};
use crate::output::{Cell, Table};

/// Trajectory-index offset of the second occupation ensemble, so that the
/// two ensembles never share noise whatever their sizes.
pub const TWIN_OFFSET: u64 = 1 << 32;
/// Trajectory-index offset of the paths that estimate the stationary
/// percentile for the recurrence level.
pub const STATIONARY_OFFSET: u64 = 1 << 33;
/// Integer times pooled per path for the stationary percentile.
pub const STATIONARY_TIMES: usize = 5;
/// Relative change on sample-size doubling below which a moment is stable.
pub const STABILITY_TOLERANCE: f64 = 0.1;
/// Moment orders whose stability `noise-check` reports.
pub const STABILITY_ORDERS: [f64; 2] = [1.0, 2.5];
/// Admissible distance of the Hill estimate from `α`.
pub const HILL_TOLERANCE: f64 = 0.3;

#[derive(Debug)]
pub enum RunError {
    Config(crate::config::ConfigError),
    Core(Error),
    Io(std::io::Error),
}

impl RunError {
    /// 2 for configuration and precondition errors, 3 for numerical
    /// failures, 4 for invariant violations, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Core(Error::Usage(_) | Error::Domain(_)) => 2,
            RunError::Core(Error::Numerical { .. }) => 3,
            RunError::Core(Error::InvariantViolation(_)) => 4,
            RunError::Core(Error::Estimation(_)) => 1,
            RunError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<crate::config::ConfigError> for RunError {
    fn from(e: crate::config::ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Core(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

/// Tables to write plus an optional invariant failure that still lets the
/// tables be written before the process exits nonzero.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub violation: Option<String>,
}

impl From<Vec<Table>> for Outcome {
    fn from(tables: Vec<Table>) -> Self {
        Outcome {
            tables,
            violation: None,
        }
    }
}

fn verdict_name(v: MomentVerdict) -> &'static str {
    match v {
        MomentVerdict::Finite => "finite",
        MomentVerdict::NotConclusive => "not_conclusive",
        MomentVerdict::Divergent => "divergent",
    }
}

pub fn simulate_cmd(cfg: &RunConfig) -> RunResult<Outcome> {
    let sim = cfg.sim_config();
    let traj = simulate(&sim, &cfg.initial_field()?)?;
    let mut columns = vec![
        "t".to_string(),
        "h_norm".into(),
        "v_norm".into(),
        "sobolev_delta".into(),
    ];
    columns.extend((1..=traj.observables.len()).map(|j| format!("f{j}")));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = Table::new("trajectory", &cols);
    for (j, obs) in traj.observables.iter().enumerate() {
        table.note(format!("f{}: {obs}", j + 1));
    }
    table.note(format!("drift substeps: {}", traj.substeps));
    for i in 0..traj.len() {
        let mut row: Vec<Cell> = vec![
            traj.times[i].into(),
            traj.h_norm[i].into(),
            traj.v_norm[i].into(),
            traj.sobolev[i].into(),
        ];
        row.extend(traj.functionals.iter().map(|col| Cell::from(col[i])));
        table.push(row);
    }
    Ok(vec![table].into())
}

pub fn moments_cmd(cfg: &RunConfig) -> RunResult<Outcome> {
    let sim = cfg.sim_config();
    let model = sim.noise_model()?;
    let study = MomentStudy {
        p: cfg.p,
        delta: cfg.delta,
        horizons: cfg.horizons.clone(),
        ensemble: cfg.ensemble,
        allow_unvalidated: cfg.allow_unvalidated,
    };
    let initial = default_initial_set(cfg.modes);
    let report = moment_estimate(&sim, &model, &initial, &study)?;
    let mut table = Table::new("moments", &["x0_label", "T", "p", "estimate", "se"]);
    for e in &report.estimates {
        table.push(vec![
            e.label.as_str().into(),
            e.horizon.into(),
            e.p.into(),
            e.estimate.into(),
            e.se.into(),
        ]);
    }
    let mut summary = Table::summary("moments_summary");
    summary.put("unvalidated", report.unvalidated);
    for h in &cfg.horizons {
        summary.put(&format!("uniformity_ratio_T{h}"), report.uniformity_ratio(*h));
    }
    if let (Some(first), Some(last)) = (cfg.horizons.first(), cfg.horizons.last()) {
        for (label, _) in &initial {
            if let Some((ratio, rel_se)) = report.growth(label, *first, *last) {
                summary.put(&format!("growth_{label}"), ratio);
                summary.put(&format!("growth_rel_se_{label}"), rel_se);
            }
        }
    }
    Ok(vec![table, summary].into())
}

pub fn occupation_cmd(cfg: &RunConfig) -> RunResult<Outcome> {
    let sim = cfg.sim_config();
    let model = sim.noise_model()?;
    let x0 = cfg.initial_field()?;
    let twin_x0 = scaled_mode(cfg.modes, cfg.x0_mode, cfg.twin_x0_norm, "x0_mode")?;
    let a = occupation_ensemble(
        &sim,
        &model,
        |_| x0.clone(),
        &cfg.observables,
        cfg.ensemble,
        cfg.burn_in,
    )?;
    let twin_sim = sim.for_trajectory(TWIN_OFFSET);
    let b = occupation_ensemble(
        &twin_sim,
        &model,
        |_| twin_x0.clone(),
        &cfg.observables,
        cfg.ensemble,
        cfg.twin_burn_in,
    )?;
    let mut table = Table::new(
        "occupation",
        &[
            "ensemble",
            "observable",
            "x0_norm",
            "burn_in",
            "mean",
            "se",
            "min",
            "max",
            "count",
        ],
    );
    for (name, norm, stats) in [("A", cfg.x0_norm, &a), ("B", cfg.twin_x0_norm, &b)] {
        for s in stats.iter() {
            table.push(vec![
                name.into(),
                s.observable.to_string().into(),
                norm.into(),
                s.burn_in.into(),
                s.summary.mean.into(),
                s.summary.std_error.into(),
                s.summary.min.into(),
                s.summary.max.into(),
                s.summary.count.into(),
            ]);
        }
    }
    let mut summary = Table::summary("occupation_summary");
    for (sa, sb) in a.iter().zip(&b) {
        summary.put(&format!("discrepancy_se_{}", sa.observable), twin_discrepancy(sa, sb));
    }
    Ok(vec![table, summary].into())
}

/// Survival curve without a fit, for records where nothing was hit.
fn censored_tail(record: &HittingRecord) -> TailCurve {
    let m = record.size();
    let mut curve = TailCurve {
        n: Vec::new(),
        p_tail: Vec::new(),
        ci_lo: Vec::new(),
        ci_hi: Vec::new(),
        fit: None,
    };
    for n in 1..=record.n_max {
        let c = record.survivors(n);
        let (lo, hi) = wilson_interval(c, m, Z_95);
        curve.n.push(n);
        curve.p_tail.push(c as f64 / m as f64);
        curve.ci_lo.push(lo);
        curve.ci_hi.push(hi);
    }
    curve
}

/// `level_quantile` of `‖X_k‖_δ`, pooled over `k = 1..=5` on paths from 0.
pub fn stationary_level(cfg: &RunConfig) -> RunResult<f64> {
    let sim = cfg.sim_config().for_trajectory(STATIONARY_OFFSET);
    let model = sim.noise_model()?;
    let zero = Field::zeros(cfg.modes);
    let norms = integer_time_norms(
        &sim,
        &model,
        |_| zero.clone(),
        cfg.delta,
        STATIONARY_TIMES,
        cfg.stationary_ensemble,
    )?;
    let pooled: Vec<f64> = norms.into_iter().flatten().collect();
    if pooled.is_empty() {
        return Err(crate::config::ConfigError::Invalid("stationary_ensemble must be at least 1".into()).into());
    }
    Ok(quantile(&pooled, cfg.level_quantile))
}

pub fn recurrence_cmd(cfg: &RunConfig) -> RunResult<Outcome> {
    let sim = cfg.sim_config();
    let model = sim.noise_model()?;
    let x0 = cfg.initial_field()?;
    let (level, source) = match cfg.level {
        Auto::Value(v) => (v, "given"),
        Auto::Auto => {
            if !(cfg.level_quantile > 0.0 && cfg.level_quantile < 1.0) {
                return Err(crate::config::ConfigError::Invalid("level_quantile must lie in (0,1)".into()).into());
            }
            (stationary_level(cfg)?, "stationary_quantile")
        }
    };
    let record = hitting_times(&sim, &model, |_| x0.clone(), level, cfg.delta, cfg.n_max, cfg.ensemble)?;
    let all_censored = record.hits() == 0;
    let tail = if all_censored {
        censored_tail(&record)
    } else {
        recurrence_tail(&record)?
    };

    let mut table = Table::new("recurrence", &["n", "p_tail", "ci_lo", "ci_hi"]);
    if all_censored {
        table.note(format!(
            "all {} trajectories censored at n_max; level never reached",
            record.size()
        ));
    }
    for i in 0..tail.n.len() {
        table.push(vec![
            tail.n[i].into(),
            tail.p_tail[i].into(),
            tail.ci_lo[i].into(),
            tail.ci_hi[i].into(),
        ]);
    }

    let mut summary = Table::summary("recurrence_summary");
    summary.put("level", level);
    summary.put("level_source", source);
    summary.put("ensemble", record.size());
    summary.put("hits", record.hits());
    summary.put("censored", record.censored());
    summary.put("all_censored", all_censored);
    let nan = f64::NAN;
    let fit = tail.fit;
    summary.put("fit_points", fit.map_or(0, |f| f.points));
    summary.put("fit_slope", fit.map_or(nan, |f| f.slope));
    summary.put("fit_intercept", fit.map_or(nan, |f| f.intercept));
    summary.put("fit_r_squared", fit.map_or(nan, |f| f.r_squared));
    summary.put("q_hat", fit.map_or(nan, |f| f.rate()));
    let lambdas: Vec<f64> = if !cfg.exp_lambdas.is_empty() {
        cfg.exp_lambdas.clone()
    } else {
        match fit {
            Some(f) if f.slope < 0.0 => vec![-0.5 * f.slope, -2.0 * f.slope],
            _ => Vec::new(),
        }
    };
    for (i, lambda) in lambdas.iter().enumerate() {
        let m = exp_moment_tau(&record, &tail, *lambda)?;
        let key = format!("exp_moment_{}", i + 1);
        summary.put(&format!("{key}_lambda"), m.lambda);
        summary.put(&format!("{key}_estimate"), m.estimate);
        summary.put(&format!("{key}_censored_share"), m.censored_share);
        summary.put(&format!("{key}_geometric_factor"), m.geometric_factor.unwrap_or(nan));
        summary.put(&format!("{key}_verdict"), verdict_name(m.verdict));
    }
    Ok(vec![table, summary].into())
}

pub fn ldp_cmd(cfg: &RunConfig) -> RunResult<Outcome> {
    let sim = cfg.sim_config();
    let model = sim.noise_model()?;
    let x0 = cfg.initial_field()?;
    let obs = cfg.ldp_observable;
    let stats = occupation_ensemble(&sim, &model, |_| x0.clone(), &[obs], cfg.ensemble, cfg.burn_in)?;
    let stats = &stats[0];
    let samples = &stats.samples;
    let lambdas = match cfg.lambda_half_width {
        Auto::Auto => default_lambda_grid(samples, cfg.horizon, cfg.lambda_points)?,
        Auto::Value(w) => {
            let points = cfg.lambda_points;
            if points < 3 || points.is_multiple_of(2) || !(w > 0.0) || !w.is_finite() {
                return Err(crate::config::ConfigError::Invalid(
                    "explicit λ grid needs an odd lambda_points ≥ 3 and a positive half-width".into(),
                )
                .into());
            }
            let mid = (points / 2) as f64;
            (0..points).map(|i| w * (i as f64 - mid) / mid).collect()
        }
    };
    let curve = scgf(samples, &lambdas, cfg.horizon)?;
    let rate = legendre(&curve, &default_rate_grid(&curve, cfg.rate_points))?;

    let mut scgf_table = Table::new("scgf", &["lambda", "scgf"]);
    for (l, v) in curve.lambdas.iter().zip(&curve.values) {
        scgf_table.push(vec![(*l).into(), (*v).into()]);
    }
    let mut rate_table = Table::new("rate", &["r", "rate"]);
    for (r, j) in rate.r.iter().zip(&rate.rate) {
        rate_table.push(vec![(*r).into(), (*j).into()]);
    }
    let mut summary = Table::summary("ldp_summary");
    let zero = curve.lambdas.iter().position(|l| *l == 0.0);
    summary.put("observable", obs.to_string());
    summary.put("mean", stats.mean());
    summary.put("se", stats.std_error());
    summary.put("scgf_at_zero", zero.map_or(f64::NAN, |i| curve.values[i]));
    summary.put(
        "min_second_difference",
        curve.second_differences().into_iter().fold(f64::INFINITY, f64::min),
    );
    summary.put("ess_warnings", curve.ess_warnings().into_iter().filter(|w| *w).count());
    summary.put("rate_min", rate.rate.iter().copied().fold(f64::INFINITY, f64::min));
    summary.put("interior_points", rate.interior.iter().filter(|i| **i).count());
    summary.put("minimizer", rate.minimizer);
    summary.put("min_value", rate.min_value);
    summary.put("zero_set_lo", rate.zero_set.0);
    summary.put("zero_set_hi", rate.zero_set.1);
    summary.put(
        "minimizer_gap_se",
        (rate.minimizer - stats.mean()).abs() / stats.std_error(),
    );
    Ok(vec![scgf_table, rate_table, summary].into())
}

pub fn control_cmd(cfg: &RunConfig) -> RunResult<Outcome> {
    let grid = SpectralGrid::new(cfg.modes)?;
    let x0 = cfg.initial_field()?;
    let a = scaled_mode(cfg.modes, cfg.target_mode, cfg.target_norm, "target_mode")?;
    let mut table = Table::new(
        "control",
        &[
            "dt",
            "residual_v",
            "residual_h",
            "sup_control_v",
            "split_v_norm",
            "passed",
        ],
    );
    let mut residuals = Vec::new();
    for dt in [cfg.dt, cfg.dt / 2.0] {
        let rep = verify_reachability(&grid, &x0, &a, cfg.horizon, dt, cfg.phase_split, cfg.epsilon)?;
        residuals.push(rep.residual_v);
        table.push(vec![
            dt.into(),
            rep.residual_v.into(),
            rep.residual_h.into(),
            rep.sup_control_v.into(),
            rep.split_v_norm.into(),
            rep.passed.into(),
        ]);
    }
    let mut summary = Table::summary("control_summary");
    summary.put("epsilon", cfg.epsilon);
    summary.put("passed", residuals[0] < cfg.epsilon);
    summary.put("shrink_ratio", residuals[0] / residuals[1]);
    Ok(vec![table, summary].into())
}

pub fn noise_check_cmd(cfg: &RunConfig) -> RunResult<Outcome> {
    let mut table = Table::new("noise_check", &["check", "estimate", "reference", "se", "passed"]);
    let mut checks = Vec::new();
    for rho in [0.6, 0.75, 0.9] {
        checks.push(laplace_check(rho, cfg.noise_draws, cfg.seed)?);
    }
    checks.push(levy_cdf_check(cfg.noise_draws, cfg.seed)?);
    for c in &checks {
        table.push(vec![
            c.name.as_str().into(),
            c.estimate.into(),
            c.reference.into(),
            c.se.into(),
            c.passed().into(),
        ]);
    }

    let sim = cfg.sim_config();
    let model = sim.noise_model()?;
    let sups = convolution_sup_norms(&sim, &model, cfg.tail_paths)?;
    let hill = tail_index(&sups, cfg.top_fraction, cfg.seed)?;
    table.push(vec![
        "hill_sup_convolution".into(),
        hill.estimate.into(),
        cfg.alpha.into(),
        ((hill.ci.1 - hill.ci.0) / (2.0 * Z_95)).into(),
        ((hill.estimate - cfg.alpha).abs() <= HILL_TOLERANCE).into(),
    ]);
    table.note(format!(
        "hill interval: [{}, {}] from {} order statistics",
        hill.ci.0, hill.ci.1, hill.k
    ));

    let mut stability = Table::new("moment_stability", &["p", "half", "full", "relative_change", "stable"]);
    for p in STABILITY_ORDERS {
        let s = moment_stability(&sups, p);
        stability.push(vec![
            p.into(),
            s.half.into(),
            s.full.into(),
            s.relative_change.into(),
            s.stable(STABILITY_TOLERANCE).into(),
        ]);
    }
    Ok(vec![table, stability].into())
}
