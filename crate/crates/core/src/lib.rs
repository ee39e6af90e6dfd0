//! Stochastic Allen–Cahn on the torus driven by subordinated Brownian motion.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod diagnostics;
pub mod ensemble;
pub mod ergodics;
pub mod error;
pub mod integrator;
pub mod noise;
pub mod observable;
pub mod seeding;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/integrator.md")]
    mod integrator {}
    #[doc = include_str!("../../../book/src/ergodics.md")]
    mod ergodics {}
    #[doc = include_str!("../../../book/src/control.md")]
    mod control {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
