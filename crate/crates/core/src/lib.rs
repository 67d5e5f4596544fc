//! Backtracking gradient descent and its variants, a smooth step-size
//! construction on boxes, critical-point analysis and random-restart sweeps.

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod io;
pub mod objective;
pub mod sampling;
pub mod smoothrate;
pub mod steppers;
pub mod tracefile;
pub mod verify;

pub use error::{Error, Result};
pub use objective::{corpus_get, Objective, Params, Point};
pub use steppers::{run, BacktrackParams, Rule, RunConfig, StopReason, Trace};
