//! Numerical toolkit for a two-phase free transmission problem.

pub mod barriers;
pub mod error;
pub mod fbdiag;
pub mod geometry;
pub mod hodograph;
pub mod pde;
pub mod selfsim;
pub mod specfun;
pub mod studies;

pub use error::{Error, Result};
