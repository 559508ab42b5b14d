//! Single-server queue with customer deadlines under non-preemptive
//! earliest-deadline-first service (deadline = start of service).
//!
//! The crate has two halves that are meant to be compared against each other:
//!
//! * [`sim`]: an exact discrete-event simulator of the `N`-th system, recording
//!   queue length, reneging count, frontier and the lead-time measure.
//! * [`fluid`]: the deterministic fluid limit, obtained from a Skorohod problem
//!   whose barrier is the fluid potential queue length `H(0, t)`.
//!
//! [`example`] holds closed forms for the exponential worked example and
//! [`metrics`] turns a simulated trace plus a fluid solution into the error
//! figures used by convergence studies.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod distribution;
pub mod error;
pub mod example;
pub mod fluid;
pub mod math;
pub mod measure;
pub mod metrics;
pub mod model;
pub mod sim;

pub use distribution::{DistributionSpec, YStar};
pub use error::{Error, Result};
pub use example::{ExampleCase, ExampleParams};
pub use fluid::{FluidProblem, FluidSolution};
pub use measure::{FiniteMeasure, MeasurePath};
pub use model::{InitialCondition, Regime, SystemParams};
