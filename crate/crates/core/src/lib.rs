//! Diffusion on metric graphs with time-dependent vertex conditions.

// negated comparisons like `!(dt > 0.0)` are deliberate: they reject NaN
// along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coeff;
pub mod error;
pub mod exec;
pub mod fem;
pub mod graph;
pub mod integrator;
pub mod linalg;
pub mod oracle;
pub mod runner;
pub mod scenario;
pub mod spectral;

pub use error::{Error, Result};
