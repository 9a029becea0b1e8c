//! Gaussian building blocks: univariate normal functions, exact bivariate
//! orthant probabilities, dense multivariate normal helpers and the
//! randomized-QMC multivariate normal distribution function.

pub mod bvn;
pub mod matrix;
pub mod normal;
pub mod qmc;

pub use matrix::{conditional_mvn, mvn_logpdf, CorrelationMatrix, MvnSpec};
pub use normal::{cdf as std_normal_cdf, quantile as std_normal_quantile};
pub use qmc::{mvn_cdf, mvn_log_cdf, Estimate, LogEstimate, QmcConfig};
