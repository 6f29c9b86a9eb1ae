//! Distance to the nearest active provider and the conditional moments of
//! the power contributed by the farther ones.
//!
//! `rate = c_m · p · n̄` is the mean number of active providers of the file
//! in the representative cluster. Every law here is defective: mass
//! `exp(-rate)` sits on the event that there is no provider at all.

use crate::error::{invalid, Error, Result};
use crate::geometry::{rayleigh_density, rician_density, NetworkParams};
use crate::quadrature::{integrate, integrate_to_infinity, QuadratureSettings};
use crate::special::upper_incomplete_gamma;

const HALF_WIDTH: f64 = 12.0;

fn inner_settings() -> QuadratureSettings {
    QuadratureSettings {
        rel_tol: 1e-11,
        abs_tol: 1e-300,
        max_subdivisions: 400,
    }
}

fn outer_settings() -> QuadratureSettings {
    QuadratureSettings {
        rel_tol: 1e-10,
        abs_tol: 1e-300,
        max_subdivisions: 600,
    }
}

pub(crate) fn provider_rate(c_m: f64, params: &NetworkParams) -> Result<f64> {
    params.validate()?;
    if !(0.0..=1.0).contains(&c_m) {
        return Err(invalid("c_m", format!("must lie in [0, 1], got {c_m}")));
    }
    Ok(c_m * params.active_mean())
}

fn check_h1(h1: f64) -> Result<()> {
    if !(h1 >= 0.0) {
        return Err(invalid("h1", format!("must be non-negative, got {h1}")));
    }
    Ok(())
}

/// `P(U ≤ h)` for the Rician distance `U` to a member of a cluster centered
/// at distance `v0`.
fn rician_cdf(h: f64, v0: f64, sigma: f64) -> Result<f64> {
    let lo = (v0 - HALF_WIDTH * sigma).max(0.0);
    let hi = v0 + HALF_WIDTH * sigma;
    if h <= lo {
        return Ok(0.0);
    }
    let value = integrate(|u| rician_density(u, v0, sigma), lo, h.min(hi), &inner_settings())?;
    Ok(value.min(1.0))
}

/// Probability that an active provider lies within `h1` of the client.
pub fn nearest_cdf(h1: f64, c_m: f64, params: &NetworkParams) -> Result<f64> {
    let rate = provider_rate(c_m, params)?;
    check_h1(h1)?;
    if rate == 0.0 || h1 == 0.0 {
        return Ok(0.0);
    }
    let sigma = params.sigma;
    let mut failure: Option<Error> = None;
    let f = |v0: f64| match rician_cdf(h1, v0, sigma) {
        Ok(inside) => rayleigh_density(v0, sigma) * -(-rate * inside).exp_m1(),
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let value = integrate(f, 0.0, HALF_WIDTH * sigma, &outer_settings())?;
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Closed-form counterpart of [`nearest_cdf`] that treats provider
/// distances as independent with the unconditioned Rayleigh(√2σ) law.
pub fn nearest_cdf_jensen(h1: f64, c_m: f64, params: &NetworkParams) -> Result<f64> {
    let rate = provider_rate(c_m, params)?;
    check_h1(h1)?;
    let inside = -(-h1 * h1 / (4.0 * params.sigma * params.sigma)).exp_m1();
    Ok(-(-rate * inside).exp_m1())
}

/// Density of the nearest active provider's distance.
pub fn nearest_pdf_exact(h1: f64, c_m: f64, params: &NetworkParams) -> Result<f64> {
    let rate = provider_rate(c_m, params)?;
    check_h1(h1)?;
    if rate == 0.0 || h1 == 0.0 {
        return Ok(0.0);
    }
    let sigma = params.sigma;
    let lo = (h1 - HALF_WIDTH * sigma).max(0.0);
    let hi = (h1 + HALF_WIDTH * sigma).min(HALF_WIDTH * sigma);
    if lo >= hi {
        return Ok(0.0);
    }
    let mut failure: Option<Error> = None;
    let f = |v0: f64| match rician_cdf(h1, v0, sigma) {
        Ok(inside) => {
            rayleigh_density(v0, sigma) * rate * rician_density(h1, v0, sigma) * (-rate * inside).exp()
        }
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let value = integrate(f, lo, hi, &outer_settings())?;
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Closed-form nearest-distance density under the independence
/// approximation: `(r h/2σ²) exp(-r (1 - e^{-h²/4σ²}) - h²/4σ²)`.
pub fn nearest_pdf_jensen(h1: f64, c_m: f64, params: &NetworkParams) -> Result<f64> {
    let rate = provider_rate(c_m, params)?;
    check_h1(h1)?;
    Ok(jensen_density(h1, rate, params.sigma))
}

#[inline]
pub(crate) fn jensen_density(h: f64, rate: f64, sigma: f64) -> f64 {
    let x = h * h / (4.0 * sigma * sigma);
    rate * h / (2.0 * sigma * sigma) * (rate * (-x).exp_m1() - x).exp()
}

/// `r ∫_{h1}^∞ h^{-order} f(h) dh` with `f` the Rayleigh(√2σ) density,
/// evaluated in `w = h²/4σ²`: `r (2σ)^{-order} ∫_x^∞ w^{-order/2} e^{-w} dw`.
fn tail_moment_by_quadrature(h1: f64, order: f64, rate: f64, sigma: f64) -> Result<f64> {
    let x = h1 * h1 / (4.0 * sigma * sigma);
    let settings = QuadratureSettings {
        rel_tol: 1e-12,
        abs_tol: 1e-300,
        max_subdivisions: 1000,
    };
    let f = |w: f64| (-0.5 * order * w.ln() - w).exp();
    let near = integrate(f, x, x + 1.0, &settings)?;
    let far = integrate_to_infinity(f, x + 1.0, 1.0, &settings)?;
    Ok(rate * (2.0 * sigma).powf(-order) * (near + far))
}

fn check_positive_h1(h1: f64) -> Result<()> {
    if !(h1 > 0.0) || !h1.is_finite() {
        return Err(Error::Domain(format!(
            "conditional moments need a finite positive nearest distance, got {h1}"
        )));
    }
    Ok(())
}

/// Mean of `Σ h_i^{-α}` over the providers beyond the nearest one, given
/// the nearest lies at `h1`.
///
/// At α = 4 this is `(r/2σ²)[e^{-x}/(2h1²) - Γ(0, x)/(8σ²)]` with
/// `x = h1²/4σ²`, evaluated as `r Γ(-1, x) / (16σ⁴)` to avoid the
/// subtraction; other exponents integrate the defining tail directly.
pub fn cond_mean(h1: f64, c_m: f64, params: &NetworkParams) -> Result<f64> {
    let rate = provider_rate(c_m, params)?;
    check_positive_h1(h1)?;
    cond_mean_at_rate(h1, rate, params)
}

pub(crate) fn cond_mean_at_rate(h1: f64, rate: f64, params: &NetworkParams) -> Result<f64> {
    if rate == 0.0 {
        return Ok(0.0);
    }
    let sigma = params.sigma;
    if params.alpha == 4.0 {
        let x = h1 * h1 / (4.0 * sigma * sigma);
        return Ok(rate * upper_incomplete_gamma(-1.0, x)? / (16.0 * sigma.powi(4)));
    }
    tail_moment_by_quadrature(h1, params.alpha, rate, sigma)
}

/// Variance of `Σ h_i^{-α}` over the providers beyond the nearest one,
/// given the nearest lies at `h1`: `r ∫_{h1}^∞ h^{-2α} f(h) dh`.
///
/// At α = 4 this is `r (2σ)^{-8} Γ(-3, x)`.
pub fn cond_var(h1: f64, c_m: f64, params: &NetworkParams) -> Result<f64> {
    let rate = provider_rate(c_m, params)?;
    check_positive_h1(h1)?;
    if rate == 0.0 {
        return Ok(0.0);
    }
    let sigma = params.sigma;
    if params.alpha == 4.0 {
        let x = h1 * h1 / (4.0 * sigma * sigma);
        return Ok(rate * (2.0 * sigma).powi(-8) * upper_incomplete_gamma(-3.0, x)?);
    }
    tail_moment_by_quadrature(h1, 2.0 * params.alpha, rate, sigma)
}
