//! Flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, unknown keys are rejected. A file
//! whose first line starts with `# subac` is read as the header block of a
//! previous output: its `# key = value` lines are the configuration, so any
//! output file can be fed back to reproduce the run.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use subac::integrator::{Scheme, SimConfig};
use subac::observable::Observable;
use subac::spectral::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Moments,
    Occupation,
    Recurrence,
    Ldp,
    Control,
    NoiseCheck,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Moments => "moments",
            Command::Occupation => "occupation",
            Command::Recurrence => "recurrence",
            Command::Ldp => "ldp",
            Command::Control => "control",
            Command::NoiseCheck => "noise-check",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io(String),
    Syntax { line: usize, msg: String },
    UnknownKey(String),
    Duplicate(String),
    Value { key: String, msg: String },
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "cannot read config: {m}"),
            ConfigError::Syntax { line, msg } => write!(f, "config line {line}: {msg}"),
            ConfigError::UnknownKey(k) => write!(f, "unknown config key `{k}`"),
            ConfigError::Duplicate(k) => write!(f, "config key `{k}` given twice"),
            ConfigError::Value { key, msg } => write!(f, "bad value for `{key}`: {msg}"),
            ConfigError::Invalid(m) => write!(f, "invalid configuration: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Types that can appear on the right of `key = value`. `render` is the
/// exact inverse of `parse`.
pub trait ConfigValue: Sized {
    fn parse(s: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

impl ConfigValue for f64 {
    fn parse(s: &str) -> Result<Self, String> {
        s.parse().map_err(|e| format!("{e}"))
    }
    fn render(&self) -> String {
        // Display is the shortest representation that parses back exactly
        format!("{self}")
    }
}

impl ConfigValue for usize {
    fn parse(s: &str) -> Result<Self, String> {
        s.parse().map_err(|e| format!("{e}"))
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for u64 {
    fn parse(s: &str) -> Result<Self, String> {
        s.parse().map_err(|e| format!("{e}"))
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for bool {
    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("expected true or false, got `{s}`")),
        }
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for PathBuf {
    fn parse(s: &str) -> Result<Self, String> {
        if s.is_empty() {
            return Err("empty path".into());
        }
        Ok(PathBuf::from(s))
    }
    fn render(&self) -> String {
        self.display().to_string()
    }
}

impl ConfigValue for Observable {
    fn parse(s: &str) -> Result<Self, String> {
        s.parse().map_err(|e: subac::Error| e.to_string())
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for Scheme {
    fn parse(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "full" => Ok(Scheme::Full),
            None if s == "y_split" => Ok(Scheme::YSplit),
            Some(("truncated", r)) => Ok(Scheme::Truncated(f64::parse(r)?)),
            _ => Err(format!("expected full, y_split or truncated:<radius>, got `{s}`")),
        }
    }
    fn render(&self) -> String {
        match self {
            Scheme::Full => "full".into(),
            Scheme::YSplit => "y_split".into(),
            Scheme::Truncated(r) => format!("truncated:{}", r.render()),
        }
    }
}

/// `auto` or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto {
    Auto,
    Value(f64),
}

impl ConfigValue for Auto {
    fn parse(s: &str) -> Result<Self, String> {
        if s == "auto" {
            Ok(Auto::Auto)
        } else {
            Ok(Auto::Value(f64::parse(s)?))
        }
    }
    fn render(&self) -> String {
        match self {
            Auto::Auto => "auto".into(),
            Auto::Value(v) => v.render(),
        }
    }
}

fn parse_list<T: ConfigValue>(s: &str) -> Result<Vec<T>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| T::parse(p.trim())).collect()
}

fn render_list<T: ConfigValue>(v: &[T]) -> String {
    v.iter().map(|x| x.render()).collect::<Vec<_>>().join(",")
}

impl ConfigValue for Vec<f64> {
    fn parse(s: &str) -> Result<Self, String> {
        parse_list(s)
    }
    fn render(&self) -> String {
        render_list(self)
    }
}

impl ConfigValue for Vec<Observable> {
    fn parse(s: &str) -> Result<Self, String> {
        parse_list(s)
    }
    fn render(&self) -> String {
        render_list(self)
    }
}

macro_rules! run_config {
    ($( $(#[doc = $doc:literal])* $field:ident : $ty:ty ),* $(,)?) => {
        /// Every knob of every subcommand. Keys are the field names.
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $( $(#[doc = $doc])* pub $field: $ty, )*
        }

        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$( stringify!($field) ),*];

            pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
                match key {
                    $( stringify!($field) => {
                        self.$field = <$ty as ConfigValue>::parse(value).map_err(|msg| ConfigError::Value {
                            key: key.to_string(),
                            msg,
                        })?;
                    } )*
                    _ => return Err(ConfigError::UnknownKey(key.to_string())),
                }
                Ok(())
            }

            /// `(key, value)` for every key, in declaration order.
            pub fn pairs(&self) -> Vec<(&'static str, String)> {
                vec![$( (stringify!($field), ConfigValue::render(&self.$field)) ),*]
            }
        }
    };
}

run_config! {
    alpha: f64,
    theta: f64,
    delta_bound: f64,
    modes: usize,
    dt: f64,
    horizon: f64,
    seed: u64,
    record_stride: usize,
    scheme: Scheme,
    /// Sobolev order of recorded norms, hitting times and moments.
    delta: f64,
    observables: Vec<Observable>,
    ensemble: usize,
    /// Worker threads; 0 lets the runtime decide.
    threads: usize,
    out: PathBuf,
    /// Initial field `x0_norm · e_{x0_mode}` with `e_k` of unit `H` norm.
    x0_mode: usize,
    x0_norm: f64,
    p: f64,
    horizons: Vec<f64>,
    allow_unvalidated: bool,
    burn_in: f64,
    twin_x0_norm: f64,
    twin_burn_in: f64,
    level: Auto,
    level_quantile: f64,
    stationary_ensemble: usize,
    n_max: usize,
    /// Exponential-moment orders; empty means `-½ log q̂` and `-2 log q̂`.
    exp_lambdas: Vec<f64>,
    ldp_observable: Observable,
    lambda_points: usize,
    lambda_half_width: Auto,
    rate_points: usize,
    top_fraction: f64,
    target_mode: usize,
    target_norm: f64,
    phase_split: f64,
    epsilon: f64,
    noise_draws: usize,
    tail_paths: usize,
    selftest_fields: usize,
}

impl RunConfig {
    pub fn defaults(cmd: Command) -> Self {
        let mut c = RunConfig {
            alpha: 1.5,
            theta: 1.8,
            delta_bound: 1.0,
            modes: 64,
            dt: 1e-3,
            horizon: 10.0,
            seed: 0,
            record_stride: 10,
            scheme: Scheme::Full,
            delta: 0.5,
            observables: vec![
                Observable::ClippedHNorm(10.0),
                Observable::ModeAmplitude(1),
                Observable::ClippedVNorm(10.0),
            ],
            ensemble: 1000,
            threads: 0,
            out: PathBuf::from("."),
            x0_mode: 1,
            x0_norm: 0.0,
            p: 0.3,
            horizons: vec![1.0, 2.0, 4.0],
            allow_unvalidated: false,
            burn_in: 0.0,
            twin_x0_norm: 10.0,
            twin_burn_in: 1.0,
            level: Auto::Auto,
            level_quantile: 0.9,
            stationary_ensemble: 400,
            n_max: 50,
            exp_lambdas: Vec::new(),
            ldp_observable: Observable::ClippedHNorm(10.0),
            lambda_points: 21,
            lambda_half_width: Auto::Auto,
            rate_points: 41,
            top_fraction: 0.05,
            target_mode: 1,
            target_norm: 0.1,
            phase_split: 0.5,
            epsilon: 1e-2,
            noise_draws: 100_000,
            tail_paths: 2000,
            selftest_fields: 10_000,
        };
        match cmd {
            Command::Simulate => c.x0_norm = 1.0,
            Command::Recurrence => c.ensemble = 2000,
            Command::Control => {
                c.modes = 32;
                c.dt = 1e-4;
                c.horizon = 1.0;
                c.x0_norm = 10.0;
            }
            Command::NoiseCheck => c.horizon = 1.0,
            _ => {}
        }
        c
    }

    /// Applies `key = value` text on top of the defaults for `cmd`.
    pub fn from_text(cmd: Command, text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::defaults(cmd);
        let mut seen = BTreeSet::new();
        for (line, key, value) in parse_pairs(text)? {
            if !seen.insert(key.clone()) {
                return Err(ConfigError::Duplicate(key));
            }
            cfg.set(&key, &value).map_err(|e| match e {
                ConfigError::UnknownKey(k) => ConfigError::Syntax {
                    line,
                    msg: format!("unknown key `{k}`"),
                },
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn load(cmd: Command, path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            None => Ok(RunConfig::defaults(cmd)),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io(format!("{}: {e}", p.display())))?;
                RunConfig::from_text(cmd, &text)
            }
        }
    }

    /// `key = value` lines reproducing this configuration.
    pub fn echo(&self) -> Vec<String> {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            alpha: self.alpha,
            theta: self.theta,
            delta_bound: self.delta_bound,
            modes: self.modes,
            dt: self.dt,
            horizon: self.horizon,
            seed: self.seed,
            trajectory_index: 0,
            record_stride: self.record_stride,
            scheme: self.scheme,
            sobolev_delta: self.delta,
            observables: self.observables.clone(),
            store_states: false,
        }
    }

    pub fn initial_field(&self) -> Result<Field, ConfigError> {
        scaled_mode(self.modes, self.x0_mode, self.x0_norm, "x0_mode")
    }

    /// Checks shared by every subcommand; study-specific preconditions are
    /// checked by the library before any simulation starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sim_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if self.ensemble == 0 {
            return Err(ConfigError::Invalid("ensemble must be at least 1".into()));
        }
        self.initial_field()?;
        scaled_mode(self.modes, self.target_mode, self.target_norm, "target_mode")?;
        Ok(())
    }
}

pub fn scaled_mode(modes: usize, k: usize, norm: f64, key: &str) -> Result<Field, ConfigError> {
    if k == 0 || k > modes {
        return Err(ConfigError::Invalid(format!("{key} = {k} outside 1..={modes}")));
    }
    if !norm.is_finite() {
        return Err(ConfigError::Invalid(format!("{key}: norm must be finite")));
    }
    Ok(Field::unit_mode(modes, k).scaled(norm))
}

/// `(line number, key, value)` triples of a config text.
fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let echoed = text.lines().next().is_some_and(|l| l.starts_with("# subac"));
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = if echoed {
            match raw.strip_prefix("# ") {
                Some(rest) if rest.contains(" = ") => rest,
                Some(_) => continue,
                None if raw.starts_with('#') => continue,
                None => break,
            }
        } else {
            match raw.split_once('#') {
                Some((before, _)) => before,
                None => raw,
            }
        };
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            msg: format!("expected `key = value`, got `{body}`"),
        })?;
        out.push((line, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_overrides() {
        let text = "# a comment\nmodes = 16 # trailing\n\nscheme = truncated:2.5\nobservables = h_norm, mode:2\n";
        let c = RunConfig::from_text(Command::Simulate, text).unwrap();
        assert_eq!(c.modes, 16);
        assert_eq!(c.scheme, Scheme::Truncated(2.5));
        assert_eq!(c.observables, vec![Observable::HNorm, Observable::ModeAmplitude(2)]);
        assert_eq!(c.x0_norm, 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            RunConfig::from_text(Command::Simulate, "bogus = 1"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::from_text(Command::Simulate, "modes = 2\nmodes = 3"),
            Err(ConfigError::Duplicate(_))
        ));
        assert!(matches!(
            RunConfig::from_text(Command::Simulate, "modes = lots"),
            Err(ConfigError::Value { .. })
        ));
        assert!(matches!(
            RunConfig::from_text(Command::Simulate, "just words"),
            Err(ConfigError::Syntax { .. })
        ));
        let c = RunConfig::from_text(Command::Simulate, "alpha = 2.5").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn echo_round_trips_for_every_command() {
        for cmd in [
            Command::Simulate,
            Command::Moments,
            Command::Occupation,
            Command::Recurrence,
            Command::Ldp,
            Command::Control,
            Command::NoiseCheck,
            Command::Selftest,
        ] {
            let mut c = RunConfig::defaults(cmd);
            c.dt = 0.1 + 0.2;
            c.exp_lambdas = vec![0.25, 1.0 / 3.0];
            c.level = Auto::Value(1e-7);
            let header: String = std::iter::once("# subac 0.1.0".to_string())
                .chain(std::iter::once("# command: x".to_string()))
                .chain(c.echo().into_iter().map(|l| format!("# {l}")))
                .chain(std::iter::once("t,h_norm\n1,2".to_string()))
                .collect::<Vec<_>>()
                .join("\n");
            assert_eq!(RunConfig::from_text(cmd, &header).unwrap(), c);
            assert_eq!(RunConfig::from_text(cmd, &c.echo().join("\n")).unwrap(), c);
        }
        assert_eq!(RunConfig::KEYS.len(), RunConfig::defaults(Command::Ldp).pairs().len());
    }
}
