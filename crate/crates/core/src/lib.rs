//! Numerical engine for second-moment divergence diagnostics of mollified
//! fractional noise: Levy areas, wave-equation moments and field simulation.

// negated comparisons such as `!(x > 0.0)` reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod levy;
pub mod quadrature;
pub mod spectral;
pub mod wave;

pub use error::{FrontierError, Result};
