//! Numerical evaluation of the interference transform, nearest-provider
//! laws and rate-coverage expressions.
//!
//! Thresholds and transmit power come from [`NetworkParams`]; the
//! interference transform is evaluated at `t` with `s = t·γd`.
//!
//! [`NetworkParams`]: crate::geometry::NetworkParams

mod coverage;
mod laplace;
mod nearest;

pub use coverage::{
    offloading_gain_curve, poisson_truncation, rate_coverage_approx, rate_coverage_bound,
    rate_coverage_exact, rate_coverage_ncp, rate_coverage_one_provider, z_factor, CoverageModel,
    NearestLaw, DEFAULT_MC_SAMPLES, POISSON_TAIL,
};
pub use laplace::{laplace_exact, laplace_ppp_bound, ppp_gamma_factor, zeta, LaplaceTable};
pub use nearest::{
    cond_mean, cond_var, nearest_cdf, nearest_cdf_jensen, nearest_pdf_exact, nearest_pdf_jensen,
};
pub use crate::quadrature::QuadratureSettings;
