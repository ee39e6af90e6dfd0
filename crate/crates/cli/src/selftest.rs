//! Invariant suites run by `subac selftest`.

use rand::Rng;

use subac::control::verify_reachability;
use subac::diagnostics::{laplace_check, levy_cdf_check};
use subac::ensemble::run_indexed;
use subac::ergodics::{
    calibrate_young_constant, check_comparison, default_lambda_grid, default_rate_grid, legendre, occupation_ensemble,
    scgf,
};
use subac::integrator::{
    comparison_ode, comparison_plateau, convolution_path, simulate, simulate_pair_synchronous, Scheme, SimConfig,
};
use subac::observable::Observable;
use subac::seeding::{stream_rng, FIELD_STREAM};
use subac::spectral::inequalities::{verify_inequality_suite, Ceilings};
use subac::spectral::{random, Field, SpectralGrid, SPECTRAL_GAP};
use subac::Result;

use crate::commands::Outcome;
use crate::config::RunConfig;
use crate::output::Table;

type Suite = fn(&RunConfig) -> Result<String>;

fn fail(msg: String) -> subac::Error {
    subac::Error::InvariantViolation(msg)
}

fn base(cfg: &RunConfig, modes: usize, dt: f64, horizon: f64) -> SimConfig {
    SimConfig {
        modes,
        dt,
        horizon,
        store_states: false,
        observables: Vec::new(),
        ..cfg.sim_config()
    }
}

fn inequalities(cfg: &RunConfig) -> Result<String> {
    let grid = SpectralGrid::new(cfg.modes)?;
    let r = verify_inequality_suite(&grid, cfg.selftest_fields, cfg.seed, &Ceilings::default())?;
    Ok(format!(
        "{} pairs; max pairing {:.3e}, max L4 ratio {:.3}, min monotonicity {:.3e}",
        r.samples, r.energy_pairing, r.l4_ratio, r.monotonicity
    ))
}

fn subordinator(cfg: &RunConfig) -> Result<String> {
    let mut checks = Vec::new();
    for rho in [0.6, 0.75, 0.9] {
        checks.push(laplace_check(rho, cfg.noise_draws, cfg.seed)?);
    }
    checks.push(levy_cdf_check(cfg.noise_draws, cfg.seed)?);
    let mut worst: f64 = 0.0;
    for c in &checks {
        if !c.passed() {
            return Err(fail(format!(
                "{}: {} vs {} (se {:e})",
                c.name, c.estimate, c.reference, c.se
            )));
        }
        worst = worst.max(c.deviation() / c.se);
    }
    Ok(format!("{} checks within 3 SE, worst {worst:.2} SE", checks.len()))
}

fn comparison_ode_suite(_: &RunConfig) -> Result<String> {
    // from g(0) = 0 the comparison solution is K tanh(K t)
    let k = 3.0;
    let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.02).collect();
    let g = comparison_ode(0.0, k, &times)?;
    let worst = times
        .iter()
        .zip(&g)
        .map(|(t, g)| (g - k * (k * t).tanh()).abs())
        .fold(0.0, f64::max);
    if worst > 1e-12 * k {
        return Err(fail(format!("tanh solution missed by {worst:e}")));
    }
    let high = comparison_ode(1e6, k, &times)?;
    let bound = comparison_plateau(k, 2.0);
    let late = high
        .iter()
        .zip(&times)
        .filter(|(_, t)| **t >= 1.0)
        .map(|(g, _)| *g)
        .fold(0.0, f64::max);
    if late > bound * (1.0 + 1e-12) {
        return Err(fail(format!("plateau {late} above {bound}")));
    }
    Ok(format!("tanh error {worst:.1e}; plateau {late:.6} ≤ {bound:.6}"))
}

fn determinism(cfg: &RunConfig) -> Result<String> {
    let sim = base(cfg, 16, 1e-3, 0.2);
    let x0 = Field::unit_mode(16, 1);
    let run = || run_indexed(6, |i| simulate(&sim.for_trajectory(i), &x0));
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run)?;
    let three = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(run)?;
    if one != three || one != run()? {
        return Err(fail("ensemble depends on scheduling".into()));
    }
    let split = SimConfig {
        scheme: Scheme::YSplit,
        ..sim.clone()
    };
    let a = simulate(&sim, &x0)?;
    let b = simulate(&split, &x0)?;
    let gap = a
        .h_norm
        .iter()
        .zip(&b.h_norm)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    if gap > 1e-12 {
        return Err(fail(format!("split scheme differs from full scheme by {gap:e}")));
    }
    Ok(format!("6 paths identical on 1 and 3 threads; split gap {gap:.1e}"))
}

fn contraction(cfg: &RunConfig) -> Result<String> {
    let horizon = 0.1;
    let sim = SimConfig {
        store_states: true,
        record_stride: 1000,
        ..base(cfg, 32, 1e-4, horizon)
    };
    let bound = (-(SPECTRAL_GAP - 1.0) * horizon).exp() * 1.1;
    let ratios = run_indexed(20, |i| {
        let mut rng = stream_rng(cfg.seed, i, FIELD_STREAM);
        let x0 = random::light_field(32, rng.random_range(0.1..3.0), &mut rng);
        let y0 = random::light_field(32, rng.random_range(0.1..3.0), &mut rng);
        let (a, b) = simulate_pair_synchronous(&sim.for_trajectory(i), &x0, &y0)?;
        let last = a.states.len() - 1;
        Ok((&a.states[last] - &b.states[last]).h_norm() / (&x0 - &y0).h_norm())
    })?;
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    if worst > bound {
        return Err(fail(format!("pair ratio {worst} above {bound}")));
    }
    Ok(format!("20 pairs, worst ratio {worst:.3e} ≤ {bound:.3e}"))
}

fn comparison(cfg: &RunConfig) -> Result<String> {
    let sim = base(cfg, 32, 1e-3, 1.0);
    let model = sim.noise_model()?;
    let cal = calibrate_young_constant(&sim, &model, 50)?;
    let fine = SimConfig {
        dt: 1e-4,
        record_stride: 1,
        ..sim.clone()
    };
    let results = run_indexed(5, |i| {
        let member = fine.for_trajectory(i);
        let z = convolution_path(&member, &model)?;
        let x0 = Field::unit_mode(32, 1).scaled(10f64.powi(i as i32 % 3));
        check_comparison(&member, &x0, &z, cal.constant)
    })?;
    for (i, r) in results.iter().enumerate() {
        if !r.below_comparison() || !r.plateau_holds() {
            return Err(fail(format!(
                "path {i}: gap {:e}, plateau {} vs {}",
                r.worst_gap, r.plateau_max, r.plateau_bound
            )));
        }
    }
    Ok(format!("C = {}; 5 paths below the comparison solution", cal.constant))
}

fn reachability(_: &RunConfig) -> Result<String> {
    let grid = SpectralGrid::new(32)?;
    let x0 = Field::unit_mode(32, 1).scaled(10.0);
    let a = Field::unit_mode(32, 1).scaled(0.1);
    let coarse = verify_reachability(&grid, &x0, &a, 1.0, 1e-4, 0.5, 1e-2)?;
    let fine = verify_reachability(&grid, &x0, &a, 1.0, 5e-5, 0.5, 1e-2)?;
    let shrink = coarse.residual_v / fine.residual_v;
    if !coarse.passed || shrink < 1.8 {
        return Err(fail(format!("residual {} with shrink {shrink}", coarse.residual_v)));
    }
    Ok(format!("residual {:.3e}, shrink {shrink:.3}", coarse.residual_v))
}

fn ldp_shape(cfg: &RunConfig) -> Result<String> {
    let sim = base(cfg, 16, 1e-3, 2.0);
    let model = sim.noise_model()?;
    let obs = Observable::ClippedHNorm(10.0);
    let stats = occupation_ensemble(&sim, &model, |_| Field::zeros(16), &[obs], 200, 0.0)?;
    let samples = &stats[0].samples;
    let curve = scgf(samples, &default_lambda_grid(samples, 2.0, 21)?, 2.0)?;
    if curve.values[10] != 0.0 {
        return Err(fail(format!("SCGF at zero is {}", curve.values[10])));
    }
    // legendre rejects a non-convex curve
    let rate = legendre(&curve, &default_rate_grid(&curve, 41))?;
    let lowest = rate.rate.iter().copied().fold(f64::INFINITY, f64::min);
    if lowest < 0.0 {
        return Err(fail(format!("negative rate {lowest}")));
    }
    Ok(format!("SCGF(0) = 0, convex; rate ≥ {lowest:.2e}"))
}

pub const SUITES: &[(&str, Suite)] = &[
    ("inequalities", inequalities),
    ("subordinator", subordinator),
    ("comparison_ode", comparison_ode_suite),
    ("determinism", determinism),
    ("contraction", contraction),
    ("comparison", comparison),
    ("reachability", reachability),
    ("ldp_shape", ldp_shape),
];

/// Runs every suite. Failures are collected, so one broken suite does not
/// hide the others.
pub fn selftest_cmd(cfg: &RunConfig) -> Outcome {
    let mut table = Table::new("selftest", &["suite", "passed", "detail"]);
    let mut failed = Vec::new();
    for (name, suite) in SUITES {
        let (passed, detail) = match suite(cfg) {
            Ok(d) => (true, d),
            Err(e) => (false, e.to_string()),
        };
        if !passed {
            failed.push(*name);
        }
        // keep the CSV well formed whatever the message says
        let detail = detail.replace([',', '\n'], ";");
        table.push(vec![(*name).into(), passed.into(), detail.into()]);
    }
    Outcome {
        tables: vec![table],
        violation: (!failed.is_empty()).then(|| format!("failed suites: {}", failed.join(" "))),
    }
}
