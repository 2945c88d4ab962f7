//! Numerical lab for energy decay of wave equations whose damping vanishes
//! on a lower-dimensional set: spectral grids, damped operators, resolvent
//! sweeps, wave evolution, geometric control checks and quasimodes.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod cli;
pub mod damping;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod operators;
pub mod resolvent;
pub mod spectral;
pub mod wave;

pub use error::{Error, Result};
pub use num_complex::Complex64;
