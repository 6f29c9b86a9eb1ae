//! Laplace transform of the aggregate interference seen by the typical
//! client, its Poisson-process lower bound, and a tabulated fast path.
//!
//! The transform is evaluated at `t`, with `s = t·γd` the product that
//! actually enters the integrands.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::{rician_density, NetworkParams};
use crate::quadrature::{integrate, QuadratureSettings};
use crate::special::gamma;

// Rician mass beyond this many σ from its center is below 1e-31.
const RICIAN_HALF_WIDTH: f64 = 12.0;

// Beyond this multiple of `knee + σ` a remote cluster is treated as a point.
const FAR_FIELD: f64 = 1e3;

fn zeta_settings() -> QuadratureSettings {
    QuadratureSettings {
        rel_tol: 1e-9,
        abs_tol: 1e-300,
        max_subdivisions: 400,
    }
}

fn outer_settings() -> QuadratureSettings {
    QuadratureSettings {
        rel_tol: 1e-8,
        abs_tol: 1e-300,
        max_subdivisions: 400,
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("transform argument must be non-negative, got {t}")));
    }
    Ok(())
}

/// `∫ s / (u^α + s) · f(u | v) du` with `f` the Rician law of the distance
/// to a member of a cluster centered at distance `v`.
pub(crate) fn zeta_at(v: f64, s: f64, params: &NetworkParams) -> Result<f64> {
    if s == 0.0 {
        return Ok(0.0);
    }
    if s.is_infinite() {
        return Ok(1.0);
    }
    let sigma = params.sigma;
    let alpha = params.alpha;
    let lo = (v - RICIAN_HALF_WIDTH * sigma).max(0.0);
    let hi = v + RICIAN_HALF_WIDTH * sigma;
    let knee = s.powf(1.0 / alpha);
    let f = |u: f64| s / (u.powf(alpha) + s) * rician_density(u, v, sigma);
    let settings = zeta_settings();
    let value = if knee > lo && knee < hi {
        integrate(f, lo, knee, &settings)? + integrate(f, knee, hi, &settings)?
    } else {
        integrate(f, lo, hi, &settings)?
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Probability-weighted fraction of a remote cluster at distance `v` that
/// the transform at `t` "sees"; lies in `[0, 1]`.
pub fn zeta(v: f64, t: f64, params: &NetworkParams) -> Result<f64> {
    params.validate()?;
    if !(v >= 0.0) {
        return Err(invalid("v", "must be non-negative"));
    }
    check_t(t)?;
    zeta_at(v, t * params.gamma_d, params)
}

/// `-ln L` at `s = t·γd`.
pub(crate) fn neg_log_laplace_at(s: f64, params: &NetworkParams) -> Result<f64> {
    let active = params.active_mean();
    if s == 0.0 || active == 0.0 {
        return Ok(0.0);
    }
    let sigma = params.sigma;
    let knee = s.powf(1.0 / params.alpha);
    let far = FAR_FIELD * (knee + sigma);
    let f = |v: f64| -> f64 {
        if v > far {
            let z = s / (v.powf(params.alpha) + s);
            return -(-active * z).exp_m1() * v;
        }
        match zeta_at(v, s, params) {
            Ok(z) => -(-active * z).exp_m1() * v,
            Err(_) => f64::NAN,
        }
    };
    let settings = outer_settings();
    let edge = knee + RICIAN_HALF_WIDTH * sigma;
    let near = integrate(f, 0.0, knee, &settings)?;
    let mid = integrate(f, knee, edge, &settings)?;
    // The tail decays like v^(1-α), slowly for α near 2; integrate it in
    // log v up to the far field and in closed form beyond.
    let outer = integrate(|y: f64| f(y.exp()) * y.exp(), edge.ln(), far.ln(), &settings)?;
    let tail = far_field_tail(far, s, active, params.alpha);
    Ok(2.0 * std::f64::consts::PI * params.lambda_p * (near + mid + outer + tail))
}

/// `∫_far^∞ (1 - exp(-a s / (v^α + s))) v dv` to second order in
/// `s / far^α`.
fn far_field_tail(far: f64, s: f64, active: f64, alpha: f64) -> f64 {
    let first = s * far.powf(2.0 - alpha) / (alpha - 2.0);
    let second = s * s * far.powf(2.0 - 2.0 * alpha) / (2.0 * alpha - 2.0);
    active * (first - second) - 0.5 * active * active * second
}

/// Laplace transform of the inter-cluster interference,
/// `exp(-2πλp ∫ (1 - exp(-p n̄ ζ(v, t))) v dv)`.
pub fn laplace_exact(t: f64, params: &NetworkParams) -> Result<f64> {
    params.validate()?;
    check_t(t)?;
    Ok((-neg_log_laplace_at(t * params.gamma_d, params)?).exp())
}

/// `Γ(1 + 2/α) Γ(1 - 2/α)`.
pub fn ppp_gamma_factor(alpha: f64) -> Result<f64> {
    if !(alpha > 2.0) {
        return Err(crate::error::Error::Domain(format!(
            "the Poisson interference bound needs alpha > 2, got {alpha}"
        )));
    }
    let delta = 2.0 / alpha;
    Ok(gamma(1.0 + delta) * gamma(1.0 - delta))
}

/// `-ln` of the Poisson-process bound at `s = t·γd`.
pub(crate) fn neg_log_ppp_at(s: f64, params: &NetworkParams, gamma_factor: f64) -> f64 {
    std::f64::consts::PI * params.active_mean() * params.lambda_p * s.powf(2.0 / params.alpha) * gamma_factor
}

/// Interference transform of a homogeneous Poisson process of density
/// `p n̄ λp`, a lower bound on [`laplace_exact`].
pub fn laplace_ppp_bound(t: f64, params: &NetworkParams) -> Result<f64> {
    let factor = ppp_gamma_factor(params.alpha)?;
    params.validate()?;
    check_t(t)?;
    Ok((-neg_log_ppp_at(t * params.gamma_d, params, factor)).exp())
}

/// Natural cubic spline on a uniform grid.
#[derive(Debug, Clone)]
struct UniformSpline {
    x0: f64,
    step: f64,
    y: Vec<f64>,
    second: Vec<f64>,
}

impl UniformSpline {
    fn new(x0: f64, step: f64, y: Vec<f64>) -> Self {
        let n = y.len();
        let mut second = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for m[i-1] + 4 m[i] + m[i+1] = 6 Δ²y[i] / h²
            // with m[0] = m[n-1] = 0.
            let mut c_prime = vec![0.0; n];
            let mut d_prime = vec![0.0; n];
            for i in 1..n - 1 {
                let rhs = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (step * step);
                let denom = 4.0 - c_prime[i - 1];
                c_prime[i] = 1.0 / denom;
                d_prime[i] = (rhs - d_prime[i - 1]) / denom;
            }
            for i in (1..n - 1).rev() {
                second[i] = d_prime[i] - c_prime[i] * second[i + 1];
            }
        }
        Self { x0, step, y, second }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        let pos = (x - self.x0) / self.step;
        if pos <= 0.0 {
            return self.y[0];
        }
        if pos >= (n - 1) as f64 {
            return self.y[n - 1];
        }
        let i = (pos as usize).min(n - 2);
        let b = pos - i as f64;
        let a = 1.0 - b;
        let h2 = self.step * self.step;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h2 / 6.0
    }
}

/// Tabulated [`laplace_exact`] for repeated evaluation.
///
/// Stores `ln(-ln L(s)) - (2/α) ln s` on a log-uniform grid in `s`. That
/// quantity tends to constants at both ends, which the table holds beyond
/// its range.
#[derive(Debug, Clone)]
pub struct LaplaceTable {
    params: NetworkParams,
    spline: UniformSpline,
    s_min: f64,
    s_max: f64,
}

impl LaplaceTable {
    pub const POINTS_PER_DECADE: f64 = 10.0;

    pub fn new(params: &NetworkParams) -> Result<Self> {
        params.validate()?;
        let spacing = params.sigma + params.lambda_p.powf(-0.5);
        let s_min = 1e-8 * params.sigma.powf(params.alpha);
        let s_max = 1e8 * spacing.powf(params.alpha);
        let x_min = s_min.ln();
        let x_max = s_max.ln();
        let decades = (x_max - x_min) / std::f64::consts::LN_10;
        let n = (decades * Self::POINTS_PER_DECADE).ceil() as usize + 1;
        let step = (x_max - x_min) / (n - 1) as f64;
        let slope = 2.0 / params.alpha;
        let active = params.active_mean() > 0.0;
        let y = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = x_min + step * i as f64;
                if !active {
                    return Ok(0.0);
                }
                let nl = neg_log_laplace_at(x.exp(), params)?;
                Ok(nl.ln() - slope * x)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            params: *params,
            spline: UniformSpline::new(x_min, step, y),
            s_min,
            s_max,
        })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    /// Range of `s = t·γd` covered by the grid.
    pub fn range(&self) -> (f64, f64) {
        (self.s_min, self.s_max)
    }

    /// `-ln L` at `s = t·γd`.
    #[inline]
    pub fn neg_log_at(&self, s: f64) -> f64 {
        if s <= 0.0 || self.params.active_mean() == 0.0 {
            return 0.0;
        }
        if s.is_infinite() {
            return f64::INFINITY;
        }
        let x = s.ln();
        (self.spline.eval(x) + 2.0 / self.params.alpha * x).exp()
    }

    /// `L` at `s = t·γd`.
    #[inline]
    pub fn at_s(&self, s: f64) -> f64 {
        (-self.neg_log_at(s)).exp()
    }

    /// `L(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        self.at_s(t * self.params.gamma_d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::stats::Moments;
    use rand_distr::{Distribution, StandardNormal};

    fn defaults() -> NetworkParams {
        NetworkParams::default()
    }

    #[test]
    fn far_field_tail_matches_quadrature() {
        let settings = QuadratureSettings {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_subdivisions: 2000,
        };
        for (alpha, s, active) in [(2.5f64, 1e4f64, 3.0f64), (4.0, 1e6, 10.0), (3.0, 50.0, 0.2)] {
            let far = FAR_FIELD * s.powf(1.0 / alpha);
            let f = |y: f64| {
                let v = y.exp();
                -(-active * s / (v.powf(alpha) + s)).exp_m1() * v * v
            };
            // The remainder beyond far·1e14 is below 1e-7 relative at α ≥ 2.5.
            let quad = integrate(f, far.ln(), (far * 1e14).ln(), &settings).unwrap();
            let closed = far_field_tail(far, s, active, alpha);
            assert!((quad - closed).abs() < 2e-7 * closed, "alpha={alpha}: {quad} vs {closed}");
        }
    }

    #[test]
    fn zeta_limits() {
        let p = defaults();
        assert_eq!(zeta(50.0, 0.0, &p).unwrap(), 0.0);
        assert_eq!(zeta(50.0, f64::INFINITY, &p).unwrap(), 1.0);
        let big = zeta(50.0, 1e30, &p).unwrap();
        assert!((big - 1.0).abs() < 1e-6);
        assert!(zeta(-1.0, 1.0, &p).is_err());
    }

    #[test]
    fn zeta_matches_rician_sampling() {
        let p = defaults();
        let (v, t) = (100.0, 1.0);
        let value = zeta(v, t, &p).unwrap();
        let mut rng = seeded(11);
        let mut m = Moments::new();
        for _ in 0..1_000_000 {
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            let u = (v + p.sigma * x).hypot(p.sigma * y);
            m.push(t / (u.powi(4) + t));
        }
        assert!((m.mean() - value).abs() < 3.0 * m.stderr(), "{} vs {value}", m.mean());
    }

    #[test]
    fn laplace_basic_properties() {
        let p = defaults();
        assert_eq!(laplace_exact(0.0, &p).unwrap(), 1.0);
        assert_eq!(laplace_ppp_bound(0.0, &p).unwrap(), 1.0);
        let mut prev = 1.0;
        for k in -2..=10 {
            let t = 10f64.powi(k);
            let exact = laplace_exact(t, &p).unwrap();
            let bound = laplace_ppp_bound(t, &p).unwrap();
            assert!(exact <= prev && exact > 0.0);
            assert!(bound <= exact * (1.0 + 1e-9), "t={t}: {bound} > {exact}");
            prev = exact;
        }
    }

    #[test]
    fn ppp_gamma_factor_at_alpha_four() {
        let g = ppp_gamma_factor(4.0).unwrap();
        assert!((g - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        assert!(ppp_gamma_factor(2.0).is_err());
        let p = NetworkParams { alpha: 2.0, ..defaults() };
        assert!(laplace_ppp_bound(1.0, &p).is_err());
    }

    #[test]
    fn table_matches_direct_evaluation() {
        for p in [
            defaults(),
            NetworkParams {
                sigma: 10.0,
                lambda_p: 10e-6,
                n_bar: 20.0,
                alpha: 3.3,
                ..defaults()
            },
        ] {
            let table = LaplaceTable::new(&p).unwrap();
            let (s_min, s_max) = table.range();
            // Off-node points spread over the grid, plus both extrapolation
            // regions.
            let mut s = s_min * 0.01;
            while s < s_max * 100.0 {
                let direct = neg_log_laplace_at(s, &p).unwrap();
                let tab = table.neg_log_at(s);
                if s >= s_min && s <= s_max && direct < 50.0 {
                    assert!(
                        (tab - direct).abs() <= 1e-5 * direct,
                        "s={s}: table {tab} vs direct {direct}"
                    );
                }
                assert!((table.at_s(s) - (-direct).exp()).abs() < 1e-7);
                s *= 7.3;
            }
        }
    }
}
