// `!(x > 0.0)` style checks are deliberate: they reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod copula;
pub mod correlation;
pub mod data;
pub mod error;
pub mod fitter;
pub mod gaussian;
pub mod geometry;
pub mod likelihood;
pub mod risk;
pub mod seed;
pub mod simulate;

pub use error::{Error, Result};
