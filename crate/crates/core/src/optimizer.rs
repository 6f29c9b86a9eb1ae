//! Caching-vector optimization for the offloading gain.
//!
//! Two problems are solved:
//!
//! * P1 maximizes the single-integral approximation of the offloading gain.
//!   The per-provider integral is frozen at a reference vector, which makes
//!   each file's term a concave quadratic; the resulting KKT system is solved
//!   by water-filling and the reference vector is iterated to a fixed point.
//! * P2 maximizes the one-provider closed form, which is concave in the
//!   caching vector and solved exactly by water-filling.
//!
//! Popularities are divided by their maximum before solving, so scaling all
//! of them by a power of two leaves the solution unchanged bit for bit.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use crate::analytics::{z_factor, CoverageModel};
use crate::caching::{CachingVector, ContentParams};
use crate::error::{invalid, Error, Result};
use crate::geometry::NetworkParams;
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    /// Tolerance on `|Σ c - M|`.
    pub bisection_tol: f64,
    /// Cap on fixed-point iterations per start (P1).
    pub max_iter: usize,
    /// Number of random starting vectors (P1).
    pub multistart_count: usize,
    /// Stop when `‖c - c⁰‖∞` falls below this (P1).
    pub fixed_point_tol: f64,
    /// Iterate the frozen-integral solve; `false` solves once per start.
    pub iterate: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            bisection_tol: 1e-9,
            max_iter: 50,
            multistart_count: 10,
            fixed_point_tol: 1e-6,
            iterate: true,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("bisection_tol", self.bisection_tol),
            ("fixed_point_tol", self.fixed_point_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be finite and positive"));
            }
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub c_star: CachingVector,
    pub objective: f64,
    /// Lagrange multiplier of the budget constraint, in the units of the
    /// popularities passed in.
    pub v_star: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ROOT_ITERATIONS: usize = 200;

/// Finds `v` with `Σ_m alloc(m, v) = budget` where every `alloc(m, ·)` is
/// non-increasing with values in `[0, 1]`, then removes the leftover
/// residual so the budget holds to rounding.
fn water_fill<F>(n: usize, budget: f64, mut lo: f64, mut hi: f64, tol: f64, alloc: F) -> Result<(Vec<f64>, f64)>
where
    F: Fn(usize, f64) -> f64,
{
    let total = |v: f64| (0..n).map(|m| alloc(m, v)).sum::<f64>();
    let mut width = (hi - lo).abs().max(1.0);
    let mut widened = 0;
    while total(lo) < budget || total(hi) > budget {
        if widened == 64 {
            return Err(Error::Bracket(format!(
                "no multiplier in [{lo}, {hi}] meets the budget {budget}"
            )));
        }
        if total(lo) < budget {
            lo -= width;
        }
        if total(hi) > budget {
            hi += width;
        }
        width *= 2.0;
        widened += 1;
    }
    for _ in 0..ROOT_ITERATIONS {
        let v = 0.5 * (lo + hi);
        if v == lo || v == hi {
            break;
        }
        let t = total(v);
        if (t - budget).abs() < 0.01 * tol {
            let mut c: Vec<f64> = (0..n).map(|m| alloc(m, v)).collect();
            repair_budget(&mut c, budget);
            return Ok((c, v));
        }
        if t > budget {
            lo = v;
        } else {
            hi = v;
        }
    }
    // The total jumps across the multiplier: entries tied at the level take
    // the fraction of their jump that meets the budget.
    let below: Vec<f64> = (0..n).map(|m| alloc(m, hi)).collect();
    let above: Vec<f64> = (0..n).map(|m| alloc(m, lo)).collect();
    let (t_below, t_above) = (below.iter().sum::<f64>(), above.iter().sum::<f64>());
    let frac = if t_above > t_below {
        ((budget - t_below) / (t_above - t_below)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut c: Vec<f64> = below.iter().zip(&above).map(|(b, a)| b + frac * (a - b)).collect();
    repair_budget(&mut c, budget);
    Ok((c, 0.5 * (lo + hi)))
}

/// Spreads `budget - Σ c` over entries with room, interior entries first.
/// Stops at rounding level so entries at a bound stay exactly there.
fn repair_budget(c: &mut [f64], budget: f64) {
    let settled = 1e-13 * budget.max(1.0);
    for pass in 0..2 {
        for _ in 0..c.len() + 2 {
            let r = budget - c.iter().sum::<f64>();
            if r.abs() <= settled {
                return;
            }
            let room = |x: f64| if r > 0.0 { x < 1.0 } else { x > 0.0 };
            let eligible: Vec<usize> = (0..c.len())
                .filter(|&m| room(c[m]) && (pass == 1 || (c[m] > 0.0 && c[m] < 1.0)))
                .collect();
            if eligible.is_empty() {
                break;
            }
            let share = r / eligible.len() as f64;
            for m in eligible {
                c[m] = (c[m] + share).clamp(0.0, 1.0);
            }
        }
    }
}

fn normalized_weights(q: &[f64]) -> Result<(Vec<f64>, f64)> {
    let q_max = q.iter().copied().fold(0.0, f64::max);
    if q.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || q_max <= 0.0 {
        return Err(invalid("q", "popularities must be finite, non-negative and not all zero"));
    }
    Ok((q.iter().map(|x| x / q_max).collect(), q_max))
}

fn check_budget(n: usize, cache_size: usize) -> Result<()> {
    if cache_size == 0 || cache_size > n {
        return Err(invalid("cache_size", format!("must lie in 1..={n}, got {cache_size}")));
    }
    Ok(())
}

/// `Σ q_m [c_m + (1 - c_m)(1 - e^{-c_m p n̄}) / Z]`.
pub fn objective_p2(c: &[f64], params: &NetworkParams, content: &ContentParams) -> Result<f64> {
    if c.len() != content.q.len() {
        return Err(Error::DimensionMismatch {
            expected: content.q.len(),
            actual: c.len(),
        });
    }
    let z = z_factor(params)?;
    let a = params.active_mean();
    Ok(c.iter()
        .zip(&content.q)
        .map(|(&cm, &q)| q * (cm + (1.0 - cm) * -(-a * cm).exp_m1() / z))
        .sum())
}

/// Derivative of one file's P2 term per unit popularity.
fn p2_slope(c: f64, a: f64, z: f64) -> f64 {
    let e = (-a * c).exp();
    1.0 + (a * (1.0 - c) * e + (-a * c).exp_m1()) / z
}

/// Largest violation of the P2 KKT conditions at `(c, v)`: stationarity for
/// interior entries, and the sign conditions at the box bounds.
pub fn kkt_residual_p2(c: &[f64], v: f64, params: &NetworkParams, content: &ContentParams) -> Result<f64> {
    if c.len() != content.q.len() {
        return Err(Error::DimensionMismatch {
            expected: content.q.len(),
            actual: c.len(),
        });
    }
    let z = z_factor(params)?;
    let a = params.active_mean();
    let mut worst: f64 = 0.0;
    for (&cm, &q) in c.iter().zip(&content.q) {
        let g = q * p2_slope(cm, a, z);
        let violation = if cm >= 1.0 {
            (v - g).max(0.0)
        } else if cm <= 0.0 {
            (g - v).max(0.0)
        } else {
            (g - v).abs()
        };
        worst = worst.max(violation);
    }
    Ok(worst)
}

fn p2_solve(weights: &[f64], cache_size: usize, a: f64, z: f64, tol: f64) -> Result<(Vec<f64>, f64)> {
    let top = 1.0 + a / z;
    let hi = weights.iter().fold(0.0f64, |acc, &w| acc.max(w * top));
    water_fill(weights.len(), cache_size as f64, 0.0, hi, tol, |m, v| {
        let w = weights[m];
        if w == 0.0 {
            return if v < 0.0 { 1.0 } else { 0.0 };
        }
        if v <= w * p2_slope(1.0, a, z) {
            return 1.0;
        }
        if v >= w * top {
            return 0.0;
        }
        // The slope is strictly decreasing, so bisection on (0, 1) is safe.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if w * p2_slope(mid, a, z) > v {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Maximizes the one-provider closed form over caching vectors; see
/// [`optimize_p2_with_weights`].
pub fn optimize_p2(params: &NetworkParams, content: &ContentParams, settings: &OptimizerSettings) -> Result<OptimResult> {
    content.validate()?;
    optimize_p2_with_weights(params, &content.q, content.cache_size, settings)
}

/// P2 for arbitrary non-negative weights in place of popularities. The
/// objective is reported for the weights as given.
pub fn optimize_p2_with_weights(
    params: &NetworkParams,
    weights: &[f64],
    cache_size: usize,
    settings: &OptimizerSettings,
) -> Result<OptimResult> {
    params.validate()?;
    settings.validate()?;
    check_budget(weights.len(), cache_size)?;
    let (w, q_max) = normalized_weights(weights)?;
    let z = z_factor(params)?;
    let a = params.active_mean();
    let (c, v) = p2_solve(&w, cache_size, a, z, settings.bisection_tol)?;
    let objective = c
        .iter()
        .zip(weights)
        .map(|(&cm, &q)| q * (cm + (1.0 - cm) * -(-a * cm).exp_m1() / z))
        .sum();
    Ok(OptimResult {
        c_star: CachingVector::new(c, cache_size)?,
        objective,
        v_star: v * q_max,
        iterations: 1,
        converged: true,
    })
}

/// Single-integral approximation of the offloading gain with the
/// closed-form nearest-distance law, the objective of P1.
pub fn objective_p1(c: &[f64], params: &NetworkParams, content: &ContentParams) -> Result<f64> {
    if c.len() != content.q.len() {
        return Err(Error::DimensionMismatch {
            expected: content.q.len(),
            actual: c.len(),
        });
    }
    let model = CoverageModel::new(params)?;
    let mut cache = IntegralCache::new(&model);
    weighted_objective(c, &content.q, &mut cache)
}

/// Memoized per-provider integral `I(c)`.
struct IntegralCache<'a> {
    model: &'a CoverageModel,
    values: HashMap<u64, f64>,
}

impl<'a> IntegralCache<'a> {
    fn new(model: &'a CoverageModel) -> Self {
        Self {
            model,
            values: HashMap::new(),
        }
    }

    fn get(&mut self, c: f64) -> Result<f64> {
        if let Some(v) = self.values.get(&c.to_bits()) {
            return Ok(*v);
        }
        let v = self.model.jensen_integral(c)?;
        self.values.insert(c.to_bits(), v);
        Ok(v)
    }
}

fn weighted_objective(c: &[f64], weights: &[f64], cache: &mut IntegralCache<'_>) -> Result<f64> {
    let a = cache.model.params().active_mean();
    let mut total = 0.0;
    for (&cm, &w) in c.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let served = if cm > 0.0 && cm < 1.0 {
            ((1.0 - cm) * cm * a * cache.get(cm)?).min(1.0 - cm)
        } else {
            0.0
        };
        total += w * (cm + served);
    }
    Ok(total)
}

/// Water-filling solution of the frozen-integral surrogate with per-file
/// slopes `k_m = p n̄ I_m`.
fn p1_step(weights: &[f64], slopes: &[f64], cache_size: usize, tol: f64) -> Result<(Vec<f64>, f64)> {
    let lo = weights
        .iter()
        .zip(slopes)
        .fold(f64::INFINITY, |acc, (&w, &k)| acc.min(w * (1.0 - k)))
        .min(0.0);
    let hi = weights
        .iter()
        .zip(slopes)
        .fold(0.0f64, |acc, (&w, &k)| acc.max(w * (1.0 + k)));
    water_fill(weights.len(), cache_size as f64, lo, hi, tol, |m, v| {
        let (w, k) = (weights[m], slopes[m]);
        if w == 0.0 || k <= 0.0 {
            return if v < w { 1.0 } else { 0.0 };
        }
        (0.5 - (v - w) / (2.0 * w * k)).clamp(0.0, 1.0)
    })
}

struct StartOutcome {
    c: Vec<f64>,
    objective: f64,
    v: f64,
    iterations: usize,
    converged: bool,
}

fn fixed_point(
    model: &CoverageModel,
    weights: &[f64],
    cache_size: usize,
    start: Vec<f64>,
    start_v: f64,
    settings: &OptimizerSettings,
) -> Result<StartOutcome> {
    let a = model.params().active_mean();
    let mut cache = IntegralCache::new(model);
    let mut best = StartOutcome {
        objective: weighted_objective(&start, weights, &mut cache)?,
        c: start.clone(),
        v: start_v,
        iterations: 0,
        converged: false,
    };
    let mut reference = start;
    let mut previous_step = f64::INFINITY;
    let mut damped = false;
    for iteration in 1..=settings.max_iter {
        let mut slopes = Vec::with_capacity(reference.len());
        for &c0 in &reference {
            slopes.push(a * cache.get(c0)?);
        }
        let (c, v) = p1_step(weights, &slopes, cache_size, settings.bisection_tol)?;
        let objective = weighted_objective(&c, weights, &mut cache)?;
        let step = c
            .iter()
            .zip(&reference)
            .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
        let converged = step < settings.fixed_point_tol;
        if objective > best.objective {
            best = StartOutcome {
                c: c.clone(),
                objective,
                v,
                iterations: iteration,
                converged,
            };
        }
        if converged {
            best.converged = true;
            best.iterations = iteration;
            break;
        }
        if !settings.iterate {
            best.iterations = iteration;
            break;
        }
        // Oscillation: the step stopped shrinking.
        if step >= previous_step {
            damped = true;
        }
        previous_step = step;
        reference = if damped {
            let mut mix: Vec<f64> = reference.iter().zip(&c).map(|(x, y)| 0.5 * (x + y)).collect();
            repair_budget(&mut mix, cache_size as f64);
            mix
        } else {
            c
        };
        best.iterations = best.iterations.max(iteration);
    }
    Ok(best)
}

/// Random feasible vector: a uniform point of the unit cube projected onto
/// the budget slice.
fn random_start(n: usize, cache_size: usize, seed: u64, tol: f64) -> Result<Vec<f64>> {
    let mut rng = seeded(seed);
    let point: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let (c, _) = water_fill(n, cache_size as f64, -1.0, 1.0, tol, |m, v| (point[m] - v).clamp(0.0, 1.0))?;
    Ok(c)
}

/// Maximizes the single-integral approximation of the offloading gain; see
/// [`optimize_p1_with_weights`].
pub fn optimize_p1(
    params: &NetworkParams,
    content: &ContentParams,
    settings: &OptimizerSettings,
    seed: u64,
) -> Result<OptimResult> {
    content.validate()?;
    optimize_p1_with_weights(params, &content.q, content.cache_size, settings, seed)
}

/// P1 for arbitrary non-negative weights. Starts from the P2 solution and
/// from `multistart_count` random vectors; returns the best iterate found.
pub fn optimize_p1_with_weights(
    params: &NetworkParams,
    weights: &[f64],
    cache_size: usize,
    settings: &OptimizerSettings,
    seed: u64,
) -> Result<OptimResult> {
    params.validate()?;
    settings.validate()?;
    check_budget(weights.len(), cache_size)?;
    let (w, q_max) = normalized_weights(weights)?;
    let n = w.len();
    let model = CoverageModel::new(params)?;
    let z = z_factor(params)?;
    let (warm, warm_v) = p2_solve(&w, cache_size, params.active_mean(), z, settings.bisection_tol)?;

    let mut starts = vec![(warm, warm_v)];
    for i in 0..settings.multistart_count {
        let c = random_start(n, cache_size, derive_seed(seed, i as u64), settings.bisection_tol)?;
        starts.push((c, f64::NAN));
    }
    let outcomes: Vec<Result<StartOutcome>> = starts
        .into_par_iter()
        .map(|(c, v)| fixed_point(&model, &w, cache_size, c, v, settings))
        .collect();
    let mut best: Option<StartOutcome> = None;
    for outcome in outcomes {
        let outcome = outcome?;
        if best.as_ref().is_none_or(|b| outcome.objective > b.objective) {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least the warm start");
    Ok(OptimResult {
        c_star: CachingVector::new(best.c, cache_size)?,
        objective: best.objective * q_max,
        v_star: best.v * q_max,
        iterations: best.iterations,
        converged: best.converged,
    })
}

/// Entropy of `c / M` divided by `ln N_f`; 1 for uniform caching.
pub fn normalized_entropy(c: &CachingVector) -> f64 {
    let n = c.len();
    if n < 2 {
        return 0.0;
    }
    let m = c.cache_size() as f64;
    let h: f64 = c
        .values()
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| {
            let p = x / m;
            -p * p.ln()
        })
        .sum();
    h / (n as f64).ln()
}
