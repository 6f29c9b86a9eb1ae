//! Rate coverage evaluators: Poisson-mixture expectation with sampled
//! distances, its Poisson-interference lower bound, the nearest-plus-mean
//! single integral, nearest-provider-only delivery and the one-provider
//! closed form.

use std::sync::Arc;

use rand::Rng;

use super::laplace::{neg_log_ppp_at, ppp_gamma_factor, LaplaceTable};
use super::nearest::{cond_mean_at_rate, jensen_density, nearest_pdf_exact, provider_rate};
use crate::channel::path_loss;
use crate::error::{invalid, Error, Result};
use crate::geometry::NetworkParams;
use crate::quadrature::{integrate, QuadratureSettings};
use crate::rng::{derive_seed, seeded};
use crate::stats::{Estimate, Moments};

/// Which nearest-distance density the single-integral approximations use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NearestLaw {
    /// Exact law, by quadrature over the representative cluster's center.
    Exact,
    /// Closed form from the independence approximation.
    Jensen,
}

/// Interference transform used inside the Poisson-mixture evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Transform {
    Exact,
    PppBound,
}

/// Default number of sampled distance vectors per provider count.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// Truncation mass for the provider-count sum.
pub const POISSON_TAIL: f64 = 1e-6;

/// Smallest `k` with `P(K > k) < tail` for `K ~ Poisson(rate)`.
pub fn poisson_truncation(rate: f64, tail: f64) -> usize {
    if rate <= 0.0 {
        return 0;
    }
    let mut pmf = (-rate).exp();
    let mut cdf = pmf;
    let mut k = 0usize;
    while 1.0 - cdf >= tail {
        k += 1;
        pmf *= rate / k as f64;
        cdf += pmf;
        if pmf == 0.0 && k as f64 > rate {
            break;
        }
    }
    k
}

fn poisson_pmf(k: usize, rate: f64) -> f64 {
    let kf = k as f64;
    (kf * rate.ln() - rate - crate::special::ln_factorial(k)).exp()
}

/// Precomputed interference transform for one parameter point.
///
/// The tabulated transform depends on geometry and transmit power but not
/// on the threshold, so [`CoverageModel::with_theta`] shares it.
#[derive(Debug, Clone)]
pub struct CoverageModel {
    params: NetworkParams,
    table: Arc<LaplaceTable>,
    gamma_factor: f64,
}

impl CoverageModel {
    pub fn new(params: &NetworkParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params: *params,
            table: Arc::new(LaplaceTable::new(params)?),
            gamma_factor: ppp_gamma_factor(params.alpha)?,
        })
    }

    /// Same model at another SIR threshold.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        let params = NetworkParams { theta, ..self.params };
        params.validate()?;
        Ok(Self { params, ..self.clone() })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn table(&self) -> &LaplaceTable {
        &self.table
    }

    #[inline]
    fn transform_at_s(&self, which: Transform, s: f64) -> f64 {
        match which {
            Transform::Exact => self.table.at_s(s),
            Transform::PppBound => (-neg_log_ppp_at(s, &self.params, self.gamma_factor)).exp(),
        }
    }

    fn mixture(&self, which: Transform, c_m: f64, k_max: Option<usize>, samples: usize, seed: u64) -> Result<Estimate> {
        let rate = provider_rate(c_m, &self.params)?;
        if samples == 0 {
            return Err(invalid("mc_samples", "must be positive"));
        }
        if rate == 0.0 {
            return Ok(Estimate::exact(0.0, samples as u64));
        }
        let k_max = k_max.unwrap_or_else(|| poisson_truncation(rate, POISSON_TAIL));
        let theta = self.params.theta;
        let alpha = self.params.alpha;
        let two_sigma = 2.0 * self.params.sigma;
        let mut mean = 0.0;
        let mut var = 0.0;
        for k in 1..=k_max {
            let weight = poisson_pmf(k, rate);
            let mut rng = seeded(derive_seed(seed, k as u64));
            let mut m = Moments::new();
            for _ in 0..samples {
                // Rayleigh(√2σ) by inversion.
                let total: f64 = (0..k)
                    .map(|_| {
                        let u: f64 = rng.random();
                        path_loss(two_sigma * (-(1.0 - u).ln()).sqrt(), alpha)
                    })
                    .sum();
                m.push(self.transform_at_s(which, theta / total));
            }
            mean += weight * m.mean();
            var += weight * weight * m.variance() / samples as f64;
        }
        Ok(Estimate {
            mean,
            stderr: var.sqrt(),
            trials: samples as u64,
        })
    }

    /// Rate coverage as a Poisson mixture over the provider count with the
    /// exact interference transform; the expectation over provider
    /// distances (i.i.d. Rayleigh(√2σ)) is sampled.
    pub fn rate_coverage_exact(&self, c_m: f64, k_max: Option<usize>, samples: usize, seed: u64) -> Result<Estimate> {
        self.mixture(Transform::Exact, c_m, k_max, samples, seed)
    }

    /// Same mixture with the Poisson-process interference bound; a lower
    /// bound on [`CoverageModel::rate_coverage_exact`].
    pub fn rate_coverage_bound(&self, c_m: f64, k_max: Option<usize>, samples: usize, seed: u64) -> Result<Estimate> {
        self.mixture(Transform::PppBound, c_m, k_max, samples, seed)
    }

    fn single_integral<F>(&self, c_m: f64, law: NearestLaw, signal: F) -> Result<f64>
    where
        F: Fn(f64, f64) -> Result<f64>,
    {
        let rate = provider_rate(c_m, &self.params)?;
        if rate == 0.0 {
            return Ok(0.0);
        }
        let sigma = self.params.sigma;
        let theta = self.params.theta;
        let mut failure: Option<Error> = None;
        let mut integrand = |h: f64| -> f64 {
            if h <= 0.0 {
                return 0.0;
            }
            let density = match law {
                NearestLaw::Jensen => Ok(jensen_density(h, rate, sigma)),
                NearestLaw::Exact => nearest_pdf_exact(h, c_m, &self.params),
            };
            let value = density.and_then(|d| {
                if d == 0.0 {
                    return Ok(0.0);
                }
                let power = signal(h, rate)?;
                Ok(d * self.table.at_s(theta / power))
            });
            value.unwrap_or_else(|e| {
                failure.get_or_insert(e);
                0.0
            })
        };
        let settings = QuadratureSettings {
            rel_tol: match law {
                NearestLaw::Jensen => 1e-9,
                NearestLaw::Exact => 1e-7,
            },
            abs_tol: 1e-13,
            max_subdivisions: 1000,
        };
        let spread = 2.0 * sigma;
        let top = spread * (45.0f64 + rate.max(1.0).ln()).sqrt();
        let bend = spread / (rate + 1.0).sqrt();
        let mut breaks = vec![0.0, bend, spread, 2.0 * spread, top];
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut total = 0.0;
        for w in breaks.windows(2) {
            total += integrate(&mut integrand, w[0], w[1], &settings)?;
        }
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(total.clamp(0.0, -(-rate).exp_m1()))
    }

    /// Single-integral approximation: the serving power is the nearest
    /// provider's plus the conditional mean of the rest.
    pub fn rate_coverage_approx(&self, c_m: f64, law: NearestLaw) -> Result<f64> {
        let alpha = self.params.alpha;
        self.single_integral(c_m, law, |h, rate| {
            Ok(path_loss(h, alpha) + cond_mean_at_rate(h, rate, &self.params)?)
        })
    }

    /// Rate coverage when only the nearest provider transmits.
    pub fn rate_coverage_ncp(&self, c_m: f64, law: NearestLaw) -> Result<f64> {
        let alpha = self.params.alpha;
        self.single_integral(c_m, law, |h, _| Ok(path_loss(h, alpha)))
    }

    /// `I(c) = Υ^≈(c) / (c p n̄)` with the closed-form nearest law: the
    /// per-provider factor of the approximation, evaluated at `c_m`.
    pub fn jensen_integral(&self, c_m: f64) -> Result<f64> {
        let rate = provider_rate(c_m, &self.params)?;
        if rate > 0.0 {
            return Ok(self.rate_coverage_approx(c_m, NearestLaw::Jensen)? / rate);
        }
        // c_m = 0: the density divided by the rate has a finite limit.
        let sigma = self.params.sigma;
        let theta = self.params.theta;
        let alpha = self.params.alpha;
        let settings = QuadratureSettings {
            rel_tol: 1e-9,
            abs_tol: 1e-13,
            max_subdivisions: 1000,
        };
        let spread = 2.0 * sigma;
        let f = |h: f64| {
            if h <= 0.0 {
                return 0.0;
            }
            let x = h * h / (4.0 * sigma * sigma);
            h / (2.0 * sigma * sigma) * (-x).exp() * self.table.at_s(theta / path_loss(h, alpha))
        };
        let mut total = 0.0;
        for w in [0.0, spread, 2.0 * spread, spread * 45f64.sqrt()].windows(2) {
            total += integrate(f, w[0], w[1], &settings)?;
        }
        Ok(total)
    }
}

/// See [`CoverageModel::rate_coverage_exact`].
pub fn rate_coverage_exact(
    c_m: f64,
    params: &NetworkParams,
    k_max: Option<usize>,
    mc_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    CoverageModel::new(params)?.rate_coverage_exact(c_m, k_max, mc_samples, seed)
}

/// See [`CoverageModel::rate_coverage_bound`].
pub fn rate_coverage_bound(
    c_m: f64,
    params: &NetworkParams,
    k_max: Option<usize>,
    mc_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    CoverageModel::new(params)?.rate_coverage_bound(c_m, k_max, mc_samples, seed)
}

/// See [`CoverageModel::rate_coverage_approx`].
pub fn rate_coverage_approx(c_m: f64, params: &NetworkParams, law: NearestLaw) -> Result<f64> {
    CoverageModel::new(params)?.rate_coverage_approx(c_m, law)
}

/// See [`CoverageModel::rate_coverage_ncp`].
pub fn rate_coverage_ncp(c_m: f64, params: &NetworkParams, law: NearestLaw) -> Result<f64> {
    CoverageModel::new(params)?.rate_coverage_ncp(c_m, law)
}

/// `Z = 4σ²π p n̄ λp ϑ^{2/α} Γ(1+2/α) Γ(1-2/α) + 1`.
pub fn z_factor(params: &NetworkParams) -> Result<f64> {
    let g = ppp_gamma_factor(params.alpha)?;
    params.validate()?;
    let s2 = params.sigma * params.sigma;
    Ok(4.0 * s2 * std::f64::consts::PI * params.active_mean() * params.lambda_p
        * params.theta.powf(2.0 / params.alpha)
        * g
        + 1.0)
}

/// Closed-form rate coverage keeping one provider and the Poisson
/// interference bound: `(1 - e^{-c p n̄}) / Z`.
pub fn rate_coverage_one_provider(c_m: f64, params: &NetworkParams) -> Result<f64> {
    let z = z_factor(params)?;
    let rate = provider_rate(c_m, params)?;
    Ok(-(-rate).exp_m1() / z)
}

/// `Σ q_m [c_m + (1 - c_m) Υ_m(c_m)]` for any rate-coverage evaluator
/// `upsilon(m, c_m)`.
pub fn offloading_gain_curve<F>(c: &[f64], q: &[f64], mut upsilon: F) -> Result<f64>
where
    F: FnMut(usize, f64) -> Result<f64>,
{
    if c.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            actual: c.len(),
        });
    }
    let mut total = 0.0;
    for (m, (&cm, &qm)) in c.iter().zip(q).enumerate() {
        if qm == 0.0 {
            continue;
        }
        let served = if cm < 1.0 { (1.0 - cm) * upsilon(m, cm)? } else { 0.0 };
        total += qm * (cm + served);
    }
    Ok(total)
}
