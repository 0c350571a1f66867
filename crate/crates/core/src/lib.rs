#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Simulation and analysis toolkit for spectral hole burning and permanent
//! photo-trapping in Ce³⁺:Y₂SiO₅.
//!
//! * [`model`]: steady-state four-level trapping model and Gaussian focus optics
//! * [`integrate`]: detected signal S(t) over the focal volume and detuning
//! * [`simplex`]: Nelder–Mead minimizer
//! * [`fit`]: trap-model, hole, exponential and linear fits
//! * [`trace`]: hole-scan background subtraction, normalization, error budget
//! * [`zeeman`]: Zeeman splittings and repumping resonance fields
//! * [`synth`]: synthetic data with ground truth
//! * [`io`]: CSV tables

pub mod constants;
pub mod error;
pub mod fit;
pub mod integrate;
pub mod io;
pub mod model;
pub mod simplex;
pub mod synth;
pub mod trace;
pub mod zeeman;

pub use error::{Error, Result};
