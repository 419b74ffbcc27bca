//! Energy-optimal coordination of connected automated vehicles at a
//! signal-free intersection.
//!
//! * [`scheduler`] assigns merging-zone entry times on arrival.
//! * [`ocp`] turns an entry time into a minimum-energy trajectory.
//! * [`feasibility`] checks whether an arrival keeps the rear-end gap.
//! * [`sim`] runs the event-driven coordinator and a signalised baseline.
//! * [`config`] and [`output`] handle scenario files and emitted data.

// `!(x > 0.0)` style checks are there to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod feasibility;
pub mod model;
pub mod ocp;
pub mod output;
pub mod scheduler;
pub mod sim;

pub use error::{Error, Result};
