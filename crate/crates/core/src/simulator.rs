//! Monte Carlo estimation of rate coverage, offloading gain and energy per
//! request.
//!
//! Trial `i` draws from its own generator seeded by `(master_seed, i)` and
//! trials are aggregated in fixed-size chunks merged in index order, so an
//! estimate does not depend on how many threads ran it.
//!
//! Each trial consumes its generator in a fixed order that does not depend
//! on the caching vector or threshold being evaluated. Estimates for several
//! thresholds, schemes or caching vectors computed in one call therefore
//! share their random numbers.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::caching::{CachingVector, ContentParams};
use crate::channel::{complex_gaussian, path_loss_sq, DeliveryScheme};
use crate::error::{invalid, Error, Result};
use crate::geometry::{gaussian_offset, poisson_count, uniform_in_disc, NetworkParams, Point};
use crate::rng::{trial_rng, SimRng};
use crate::stats::Moments;

pub use crate::stats::Estimate;

/// Expected number of interfering clusters in the default window.
pub const DEFAULT_EXPECTED_PARENTS: f64 = 300.0;

const CHUNK: u64 = 1024;

/// Window and trial settings shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSettings {
    pub trials: u64,
    pub master_seed: u64,
    /// Radius of the disc holding the interfering cluster centers. `None`
    /// picks the radius holding [`DEFAULT_EXPECTED_PARENTS`] on average.
    pub window_radius: Option<f64>,
}

impl SimulationSettings {
    pub fn new(trials: u64, master_seed: u64) -> Self {
        Self {
            trials,
            master_seed,
            window_radius: None,
        }
    }

    pub fn with_window(self, radius: f64) -> Self {
        Self {
            window_radius: Some(radius),
            ..self
        }
    }

    fn radius(&self, params: &NetworkParams) -> Result<f64> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        let r = self
            .window_radius
            .unwrap_or_else(|| params.window_radius_for(DEFAULT_EXPECTED_PARENTS));
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid("window_radius", "must be finite and positive"));
        }
        Ok(r)
    }
}

/// Runs `trial` for every index and merges per-output moments in index
/// order.
fn run_trials<F>(settings: &SimulationSettings, outputs: usize, trial: F) -> Vec<Moments>
where
    F: Fn(&mut SimRng, &mut [f64]) + Sync,
{
    let chunks = settings.trials.div_ceil(CHUNK);
    let partial: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut acc = vec![Moments::new(); outputs];
            let mut out = vec![0.0; outputs];
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(settings.trials);
            for i in start..end {
                let mut rng = trial_rng(settings.master_seed, i);
                trial(&mut rng, &mut out);
                for (a, &x) in acc.iter_mut().zip(&out) {
                    a.push(x);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::new(); outputs];
    for chunk in &partial {
        for (t, c) in total.iter_mut().zip(chunk) {
            t.merge(c);
        }
    }
    total
}

/// Unit-power interference from every active device of the clusters
/// centered in the window, with exponential power fades.
fn streamed_interference(params: &NetworkParams, radius: f64, rng: &mut SimRng) -> f64 {
    let area = std::f64::consts::PI * radius * radius;
    let parents = poisson_count(params.lambda_p * area, rng);
    let active = params.active_mean();
    let mut total = 0.0;
    for _ in 0..parents {
        let center = uniform_in_disc(radius, rng);
        let k = poisson_count(active, rng);
        for _ in 0..k {
            let y = gaussian_offset(params.sigma, rng);
            let x = center[0] + y[0];
            let z = center[1] + y[1];
            let g: f64 = Exp1.sample(rng);
            total += g * path_loss_sq(x * x + z * z, params.alpha);
        }
    }
    total
}

/// Active members of the representative cluster: squared distance to the
/// client, cache slot offset and complex fade.
struct ActiveMember {
    d2: f64,
    slot: f64,
    fade: (f64, f64),
}

fn representative_members(params: &NetworkParams, rng: &mut SimRng, members: &mut Vec<ActiveMember>) {
    members.clear();
    let center: Point = gaussian_offset(params.sigma, rng);
    let k = poisson_count(params.active_mean(), rng);
    for _ in 0..k {
        let y = gaussian_offset(params.sigma, rng);
        let x = center[0] + y[0];
        let z = center[1] + y[1];
        let slot: f64 = rng.random();
        let fade = complex_gaussian(rng);
        members.push(ActiveMember {
            d2: x * x + z * z,
            slot,
            fade,
        });
    }
}

/// Unit desired powers of the three schemes over the members selected by
/// `serves`; `None` when nothing is selected. `pick` ∈ [0, 1) chooses the
/// random provider.
fn scheme_powers<F: Fn(&ActiveMember) -> bool>(
    members: &[ActiveMember],
    alpha: f64,
    pick: f64,
    serves: F,
) -> Option<[f64; 3]> {
    let (mut re, mut im) = (0.0, 0.0);
    let mut count = 0usize;
    let mut nearest = (f64::INFINITY, 0.0);
    for m in members.iter().filter(|m| serves(m)) {
        let amp = path_loss_sq(m.d2, alpha).sqrt();
        re += m.fade.0 * amp;
        im += m.fade.1 * amp;
        let single = (m.fade.0 * m.fade.0 + m.fade.1 * m.fade.1) * amp * amp;
        if m.d2 < nearest.0 {
            nearest = (m.d2, single);
        }
        count += 1;
    }
    if count == 0 {
        return None;
    }
    let target = ((pick * count as f64) as usize).min(count - 1);
    let random = members
        .iter()
        .filter(|m| serves(m))
        .nth(target)
        .map(|m| {
            let amp2 = path_loss_sq(m.d2, alpha);
            (m.fade.0 * m.fade.0 + m.fade.1 * m.fade.1) * amp2
        })
        .expect("target < count");
    Some([re * re + im * im, nearest.1, random])
}

#[inline]
fn covered(desired: f64, interference: f64, theta: f64) -> bool {
    // SIR ≥ ϑ, written without the division so zero interference counts.
    desired >= theta * interference
}

/// Rate coverage of a file cached with probability `c_m` for every scheme
/// and every threshold in `thetas`, from one set of trials.
///
/// Result `[j][s]` is threshold `thetas[j]` and scheme
/// `DeliveryScheme::ALL[s]`. `params.theta` is ignored.
pub fn estimate_rate_coverage_grid(
    params: &NetworkParams,
    c_m: f64,
    thetas: &[f64],
    settings: &SimulationSettings,
) -> Result<Vec<[Estimate; 3]>> {
    params.validate()?;
    if !(0.0..=1.0).contains(&c_m) {
        return Err(invalid("c_m", format!("must lie in [0, 1], got {c_m}")));
    }
    if thetas.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(invalid("theta", "thresholds must be finite and non-negative"));
    }
    let radius = settings.radius(params)?;
    let outputs = 3 * thetas.len();
    let moments = run_trials(settings, outputs, |rng, out| {
        let mut members = Vec::new();
        representative_members(params, rng, &mut members);
        let pick: f64 = rng.random();
        let interference = streamed_interference(params, radius, rng);
        let powers = scheme_powers(&members, params.alpha, pick, |m| m.slot < c_m);
        for (j, &theta) in thetas.iter().enumerate() {
            for s in 0..3 {
                out[3 * j + s] = match powers {
                    Some(p) if covered(p[s], interference, theta) => 1.0,
                    _ => 0.0,
                };
            }
        }
    });
    Ok(thetas
        .iter()
        .enumerate()
        .map(|(j, _)| std::array::from_fn(|s| Estimate::from_moments(&moments[3 * j + s])))
        .collect())
}

/// Fraction of trials in which an active provider caches the file and the
/// SIR under `scheme` reaches `params.theta`.
pub fn estimate_rate_coverage(
    scheme: DeliveryScheme,
    params: &NetworkParams,
    c_m: f64,
    trials: u64,
    master_seed: u64,
) -> Result<Estimate> {
    estimate_rate_coverage_with(scheme, params, c_m, &SimulationSettings::new(trials, master_seed))
}

pub fn estimate_rate_coverage_with(
    scheme: DeliveryScheme,
    params: &NetworkParams,
    c_m: f64,
    settings: &SimulationSettings,
) -> Result<Estimate> {
    let grid = estimate_rate_coverage_grid(params, c_m, &[params.theta], settings)?;
    Ok(grid[0][scheme.index()])
}

/// A popularity profile paired with a caching vector.
#[derive(Debug, Clone, Copy)]
pub struct Placement<'a> {
    pub content: &'a ContentParams,
    pub caching: &'a CachingVector,
}

fn check_placement(p: &Placement<'_>) -> Result<()> {
    p.content.validate()?;
    if p.caching.len() != p.content.n_files {
        return Err(Error::DimensionMismatch {
            expected: p.content.n_files,
            actual: p.caching.len(),
        });
    }
    if p.caching.cache_size() != p.content.cache_size {
        return Err(invalid("c", "budget differs from the cache size"));
    }
    Ok(())
}

fn sample_file(cumulative: &[f64], u: f64) -> usize {
    let idx = cumulative.partition_point(|&c| c <= u);
    idx.min(cumulative.len() - 1)
}

/// Offloading gain under `scheme` for several placements from one set of
/// trials: the requested file is served from the client's own cache, or
/// over D2D when the SIR reaches `params.theta`.
pub fn estimate_offloading_gains(
    params: &NetworkParams,
    placements: &[Placement<'_>],
    scheme: DeliveryScheme,
    settings: &SimulationSettings,
) -> Result<Vec<Estimate>> {
    params.validate()?;
    for p in placements {
        check_placement(p)?;
    }
    let radius = settings.radius(params)?;
    let cumulative: Vec<Vec<f64>> = placements
        .iter()
        .map(|p| {
            let mut acc = 0.0;
            p.content
                .q
                .iter()
                .map(|&q| {
                    acc += q;
                    acc
                })
                .collect()
        })
        .collect();
    let s = scheme.index();
    let moments = run_trials(settings, placements.len(), |rng, out| {
        let request: f64 = rng.random();
        let own_slot: f64 = rng.random();
        let mut members = Vec::new();
        representative_members(params, rng, &mut members);
        let pick: f64 = rng.random();
        let interference = streamed_interference(params, radius, rng);
        for (k, p) in placements.iter().enumerate() {
            let m = sample_file(&cumulative[k], request);
            out[k] = if p.caching.slot_contains(own_slot, m) {
                1.0
            } else {
                match scheme_powers(&members, params.alpha, pick, |a| p.caching.slot_contains(a.slot, m)) {
                    Some(pw) if covered(pw[s], interference, params.theta) => 1.0,
                    _ => 0.0,
                }
            };
        }
    });
    Ok(moments.iter().map(Estimate::from_moments).collect())
}

/// Offloading gain with joint transmission for one placement.
pub fn estimate_offloading_gain(
    params: &NetworkParams,
    content: &ContentParams,
    caching: &CachingVector,
    trials: u64,
    master_seed: u64,
) -> Result<Estimate> {
    let placement = Placement { content, caching };
    let settings = SimulationSettings::new(trials, master_seed);
    Ok(estimate_offloading_gains(params, &[placement], DeliveryScheme::Comp, &settings)?[0])
}

/// Transmit power, mean content size and bandwidth of a D2D link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// Device transmit power (W).
    pub power_w: f64,
    /// Mean content size (bits).
    pub content_bits: f64,
    /// Bandwidth (Hz).
    pub bandwidth_hz: f64,
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("power_w", self.power_w),
            ("content_bits", self.content_bits),
            ("bandwidth_hz", self.bandwidth_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be finite and positive"));
            }
        }
        Ok(())
    }

    pub fn dbm_to_watts(dbm: f64) -> f64 {
        10f64.powf(dbm / 10.0) * 1e-3
    }
}

/// Energy spent per request for file `m` in one cluster,
/// `q_m c_m n̄ P_d S̄ / (W log2(1 + ϑ) Υ_m)` (J).
pub fn energy_per_request(
    q_m: f64,
    c_m: f64,
    n_bar: f64,
    energy: &EnergyParams,
    theta: f64,
    upsilon_m: f64,
) -> Result<f64> {
    energy.validate()?;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid("theta", "must be finite and positive"));
    }
    if upsilon_m == 0.0 {
        return Err(Error::UndefinedRate);
    }
    if !(upsilon_m > 0.0 && upsilon_m <= 1.0) {
        return Err(invalid("upsilon_m", format!("must lie in (0, 1], got {upsilon_m}")));
    }
    let rate = energy.bandwidth_hz * (1.0 + theta).log2() * upsilon_m;
    Ok(q_m * c_m * n_bar * energy.power_w * energy.content_bits / rate)
}

/// Outcome of [`calibrate_window`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowCalibration {
    pub radius: f64,
    pub estimate: Estimate,
    pub doublings: u32,
}

/// Doubles the window radius, starting from the one holding
/// [`DEFAULT_EXPECTED_PARENTS`] clusters, until the joint-transmission rate
/// coverage moves by less than one standard error; returns the smaller
/// radius of the last pair.
pub fn calibrate_window(
    params: &NetworkParams,
    c_m: f64,
    trials: u64,
    master_seed: u64,
    max_doublings: u32,
) -> Result<WindowCalibration> {
    let mut radius = params.window_radius_for(DEFAULT_EXPECTED_PARENTS);
    let base = SimulationSettings::new(trials, master_seed);
    let mut current = estimate_rate_coverage_with(DeliveryScheme::Comp, params, c_m, &base.with_window(radius))?;
    for doublings in 0..max_doublings {
        let next = estimate_rate_coverage_with(DeliveryScheme::Comp, params, c_m, &base.with_window(2.0 * radius))?;
        if (next.mean - current.mean).abs() < current.stderr.max(next.stderr) {
            return Ok(WindowCalibration {
                radius,
                estimate: current,
                doublings,
            });
        }
        radius *= 2.0;
        current = next;
    }
    Err(Error::Domain(format!(
        "window did not stabilize after {max_doublings} doublings (radius {radius})"
    )))
}
