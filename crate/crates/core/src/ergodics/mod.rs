//! Ensemble statistics of the long-time behaviour: occupation averages,
//! moment bounds, hitting-time recurrence, tail indices and projected rate
//! functions.

mod comparison;
mod ldp;
mod moments;
mod occupation;
mod recurrence;
mod tail;

pub use comparison::*;
pub use ldp::*;
pub use moments::*;
pub use occupation::*;
pub use recurrence::*;
pub use tail::*;

/// Sobolev order used for hitting times and moments unless configured.
pub const DEFAULT_DELTA: f64 = 0.5;
