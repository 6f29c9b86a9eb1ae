//! Thomas cluster process sampling and the distance laws it induces.
//!
//! Lengths are in meters and densities in points per square meter. The
//! typical client sits at the origin; its own cluster is the
//! *representative* cluster, centered at a Gaussian offset from the origin.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::caching::{sample_cache_set, CachingVector};
use crate::error::{invalid, Result};
use crate::special::bessel_i0e;

pub type Point = [f64; 2];

#[inline]
pub fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

/// Geometry and channel parameters of the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    /// Cluster-center density (per m²).
    pub lambda_p: f64,
    /// Standard deviation of member scattering around a center (m).
    pub sigma: f64,
    /// Mean number of devices per cluster.
    pub n_bar: f64,
    /// Probability that a device is active as a provider.
    pub p: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// D2D transmit power, normalized.
    pub gamma_d: f64,
    /// SIR threshold, linear.
    pub theta: f64,
}

impl Default for NetworkParams {
    /// α = 4, ϑ = 0 dB, λp = 30 km⁻², σ = 30 m, n̄ = 6, p = 0.5, γd = 1.
    fn default() -> Self {
        Self {
            lambda_p: 30e-6,
            sigma: 30.0,
            n_bar: 6.0,
            p: 0.5,
            alpha: 4.0,
            gamma_d: 1.0,
            theta: 1.0,
        }
    }
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_p", self.lambda_p),
            ("sigma", self.sigma),
            ("n_bar", self.n_bar),
            ("gamma_d", self.gamma_d),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(invalid(name, format!("must be finite and positive, got {value}")));
            }
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid("p", format!("must lie in [0, 1], got {}", self.p)));
        }
        if !(self.alpha > 2.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("must exceed 2, got {}", self.alpha)));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(invalid("theta", format!("must be finite and non-negative, got {}", self.theta)));
        }
        Ok(())
    }

    /// Mean number of active devices per cluster, p·n̄.
    pub fn active_mean(&self) -> f64 {
        self.p * self.n_bar
    }

    /// Window radius holding `expected_parents` cluster centers on average.
    pub fn window_radius_for(&self, expected_parents: f64) -> f64 {
        (expected_parents / (std::f64::consts::PI * self.lambda_p)).sqrt()
    }
}

/// Poisson draw that accepts a zero mean.
pub fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("finite positive mean");
    d.sample(rng) as usize
}

/// Cluster centers of a homogeneous PPP on the disc of radius
/// `window_radius` around the origin.
pub fn sample_parent_ppp<R: Rng + ?Sized>(
    lambda_p: f64,
    window_radius: f64,
    rng: &mut R,
) -> Result<Vec<Point>> {
    if !(window_radius > 0.0 && window_radius.is_finite()) {
        return Err(invalid("window_radius", "must be finite and positive"));
    }
    if !(lambda_p >= 0.0 && lambda_p.is_finite()) {
        return Err(invalid("lambda_p", "must be finite and non-negative"));
    }
    let area = std::f64::consts::PI * window_radius * window_radius;
    let count = poisson_count(lambda_p * area, rng);
    Ok((0..count).map(|_| uniform_in_disc(window_radius, rng)).collect())
}

#[inline]
pub(crate) fn uniform_in_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = std::f64::consts::TAU * rng.random::<f64>();
    [r * phi.cos(), r * phi.sin()]
}

#[inline]
pub(crate) fn gaussian_offset<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> Point {
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    [sigma * x, sigma * y]
}

/// `count` i.i.d. isotropic Gaussian offsets with per-coordinate standard
/// deviation `sigma`.
pub fn sample_gaussian_offsets<R: Rng + ?Sized>(
    count: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<Point>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", "must be finite and positive"));
    }
    Ok((0..count).map(|_| gaussian_offset(sigma, rng)).collect())
}

/// The representative cluster as seen from the typical client.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalCluster {
    pub center: Point,
    /// Distances from the origin to the active devices caching the file.
    pub provider_distances: Vec<f64>,
}

/// Samples the representative cluster's center and the distances of the
/// active providers of a file cached with probability `c_m`.
pub fn sample_typical_cluster<R: Rng + ?Sized>(
    params: &NetworkParams,
    c_m: f64,
    rng: &mut R,
) -> Result<TypicalCluster> {
    params.validate()?;
    if !(0.0..=1.0).contains(&c_m) {
        return Err(invalid("c_m", format!("must lie in [0, 1], got {c_m}")));
    }
    let center = gaussian_offset(params.sigma, rng);
    let k = poisson_count(c_m * params.active_mean(), rng);
    let provider_distances = (0..k)
        .map(|_| {
            let y = gaussian_offset(params.sigma, rng);
            norm([center[0] + y[0], center[1] + y[1]])
        })
        .collect();
    Ok(TypicalCluster {
        center,
        provider_distances,
    })
}

/// Rician density of the distance `u` from the origin to a member of a
/// cluster centered at distance `v`, evaluated in log space.
pub fn rician_pdf(u: f64, v: f64, sigma: f64) -> Result<f64> {
    if !(u >= 0.0) || !(v >= 0.0) {
        return Err(invalid("distance", "must be non-negative"));
    }
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    Ok(rician_density(u, v, sigma))
}

#[inline]
pub(crate) fn rician_density(u: f64, v: f64, sigma: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let s2 = sigma * sigma;
    let z = u * v / s2;
    let d = u - v;
    let log = u.ln() - s2.ln() - d * d / (2.0 * s2) + bessel_i0e(z).ln();
    log.exp()
}

/// Rayleigh density with the given scale.
pub fn rayleigh_pdf(r: f64, scale: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(invalid("r", "must be non-negative"));
    }
    if !(scale > 0.0) {
        return Err(invalid("scale", "must be positive"));
    }
    Ok(rayleigh_density(r, scale))
}

#[inline]
pub(crate) fn rayleigh_density(r: f64, scale: f64) -> f64 {
    let s2 = scale * scale;
    r / s2 * (-r * r / (2.0 * s2)).exp()
}

pub fn rayleigh_cdf(r: f64, scale: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    -(-r * r / (2.0 * scale * scale)).exp_m1()
}

/// One cluster: center, member offsets relative to it, activity marks and
/// cache contents (0-based file indices).
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub center: Point,
    pub offsets: Vec<Point>,
    pub active: Vec<bool>,
    pub caches: Vec<Vec<usize>>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Absolute position of member `i`.
    pub fn position(&self, i: usize) -> Point {
        [self.center[0] + self.offsets[i][0], self.center[1] + self.offsets[i][1]]
    }
}

/// A sampled network around the typical client.
///
/// The representative cluster does not list the typical client itself.
/// Remote clusters are those whose centers fall in the simulation window.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    pub representative: Cluster,
    pub remote: Vec<Cluster>,
    pub window_radius: f64,
}

impl NetworkRealization {
    pub fn representative_center(&self) -> Point {
        self.representative.center
    }

    pub fn parents(&self) -> impl Iterator<Item = Point> + '_ {
        self.remote.iter().map(|c| c.center)
    }
}

fn sample_cluster<R: Rng + ?Sized>(
    center: Point,
    params: &NetworkParams,
    caching: &CachingVector,
    rng: &mut R,
) -> Result<Cluster> {
    let n = poisson_count(params.n_bar, rng);
    let mut cluster = Cluster {
        center,
        offsets: Vec::with_capacity(n),
        active: Vec::with_capacity(n),
        caches: Vec::with_capacity(n),
    };
    for _ in 0..n {
        cluster.offsets.push(gaussian_offset(params.sigma, rng));
        cluster.active.push(rng.random::<f64>() < params.p);
        cluster.caches.push(sample_cache_set(caching, rng));
    }
    Ok(cluster)
}

/// Samples a full realization: the representative cluster plus every
/// cluster centered in the disc of radius `window_radius`, with per-device
/// activity marks and cache sets drawn from `caching`.
pub fn sample_realization<R: Rng + ?Sized>(
    params: &NetworkParams,
    caching: &CachingVector,
    window_radius: f64,
    rng: &mut R,
) -> Result<NetworkRealization> {
    params.validate()?;
    let center = gaussian_offset(params.sigma, rng);
    let representative = sample_cluster(center, params, caching, rng)?;
    let parents = sample_parent_ppp(params.lambda_p, window_radius, rng)?;
    let remote = parents
        .into_iter()
        .map(|c| sample_cluster(c, params, caching, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkRealization {
        representative,
        remote,
        window_radius,
    })
}
