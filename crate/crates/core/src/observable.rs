use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spectral::{Field, SobolevOrder};

/// Scalar functional of the state, recorded along trajectories.
///
/// The clipped variants `c ∧ ‖x‖` are bounded, which is what the occupation
/// measure large deviation statistics need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    HNorm,
    VNorm,
    Sobolev(f64),
    /// `|a_k|`
    ModeAmplitude(usize),
    ClippedHNorm(f64),
    ClippedVNorm(f64),
}

impl Observable {
    pub fn evaluate(&self, x: &Field) -> f64 {
        match *self {
            Observable::HNorm => x.h_norm(),
            Observable::VNorm => x.v_norm(),
            Observable::Sobolev(d) => x.sobolev_norm(SobolevOrder(d)),
            Observable::ModeAmplitude(k) => {
                if k >= 1 && k <= x.modes() {
                    x.amplitude(k).norm()
                } else {
                    0.0
                }
            }
            Observable::ClippedHNorm(c) => x.h_norm().min(c),
            Observable::ClippedVNorm(c) => x.v_norm().min(c),
        }
    }

    /// Range `[lo, hi]` of the functional; `hi` is infinite when unbounded.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            Observable::ClippedHNorm(c) | Observable::ClippedVNorm(c) => (0.0, c),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.range().1.is_finite()
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Observable::Sobolev(d) if !d.is_finite() => Err(Error::domain("Sobolev order must be finite")),
            Observable::ModeAmplitude(0) => Err(Error::domain("mode index starts at 1")),
            Observable::ClippedHNorm(c) | Observable::ClippedVNorm(c) if !(c > 0.0) => {
                Err(Error::domain(format!("clip level must be positive, got {c}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::HNorm => write!(f, "h_norm"),
            Observable::VNorm => write!(f, "v_norm"),
            Observable::Sobolev(d) => write!(f, "sobolev:{d}"),
            Observable::ModeAmplitude(k) => write!(f, "mode:{k}"),
            Observable::ClippedHNorm(c) => write!(f, "clip_h:{c}"),
            Observable::ClippedVNorm(c) => write!(f, "clip_v:{c}"),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    /// Parses the [`Display`](fmt::Display) form, e.g. `clip_h:10`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::usage(format!("observable `{s}` needs an argument")))?
                .parse::<f64>()
                .map_err(|e| Error::usage(format!("observable `{s}`: {e}")))
        };
        let obs = match head {
            "h_norm" => Observable::HNorm,
            "v_norm" => Observable::VNorm,
            "sobolev" => Observable::Sobolev(num(arg)?),
            "mode" => Observable::ModeAmplitude(
                arg.unwrap_or("")
                    .parse()
                    .map_err(|e| Error::usage(format!("observable `{s}`: {e}")))?,
            ),
            "clip_h" => Observable::ClippedHNorm(num(arg)?),
            "clip_v" => Observable::ClippedVNorm(num(arg)?),
            _ => return Err(Error::usage(format!("unknown observable `{s}`"))),
        };
        obs.validate()?;
        Ok(obs)
    }
}
