//! Numerical kernel shared by every assessment module.

pub mod gof;
pub mod linalg;
pub mod quad;
pub mod rng;
pub mod roots;
pub mod special;

pub use gof::{ks_one_sample, ks_two_sample, ks_uniform, KsOutcome};
pub use quad::{adaptive_quad, QuadratureSpec};
pub use rng::RngStream;
pub use roots::{find_root_bracketed, maximize_scalar};
pub use special::{
    binomial_cdf, binomial_pmf, chi2_cdf, chi2_quantile, chi2_sf, f_cdf, log_gamma, normal_cdf,
    normal_quantile, reg_inc_beta, reg_lower_gamma, reg_upper_gamma,
};
