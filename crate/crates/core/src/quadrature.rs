//! Globally adaptive Gauss–Kronrod (G10/K21) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

// Gauss weights for the odd-indexed Kronrod abscissae.
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Tolerances for adaptive quadrature. The routine stops once the summed
/// error estimate is below `max(abs_tol, rel_tol * |integral|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol >= 0.0 && self.abs_tol >= 0.0) || (self.rel_tol == 0.0 && self.abs_tol == 0.0) {
            return Err(crate::error::invalid(
                "quadrature",
                "tolerances must be non-negative and not both zero",
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(crate::error::invalid("quadrature", "max_subdivisions must be positive"));
        }
        Ok(())
    }

    /// Same settings with both tolerances scaled by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { a, b, value, error }
}

/// Integrates `f` over the finite interval `[a, b]`, returning the estimate
/// together with its error bound.
pub fn integrate_with_error<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    settings: &QuadratureSettings,
) -> Result<QuadratureResult> {
    settings.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(crate::error::invalid("bounds", "use integrate_to_infinity for infinite limits"));
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    let first = gauss_kronrod21(&mut f, a, b);
    if !first.value.is_finite() {
        return Err(Error::Quadrature {
            lower: a,
            upper: b,
            estimate: first.value,
            error: first.error,
            subdivisions: 0,
        });
    }
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 0;
    while total_err > settings.abs_tol.max(settings.rel_tol * total.abs()) {
        if subdivisions >= settings.max_subdivisions {
            return Err(Error::Quadrature {
                lower: a,
                upper: b,
                estimate: total,
                error: total_err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // Interval exhausted at machine precision; accept what we have.
            heap.push(Segment { error: 0.0, ..worst });
            total_err -= worst.error;
            continue;
        }
        let left = gauss_kronrod21(&mut f, worst.a, mid);
        let right = gauss_kronrod21(&mut f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
        if subdivisions % 64 == 0 {
            // Re-sum to shed accumulated cancellation in the running totals.
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    if !total.is_finite() {
        return Err(Error::Quadrature {
            lower: a,
            upper: b,
            estimate: total,
            error: total_err,
            subdivisions,
        });
    }
    Ok(QuadratureResult {
        value: total,
        error: total_err,
        subdivisions,
    })
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    integrate_with_error(f, a, b, settings).map(|r| r.value)
}

/// Integrates `f` over `[a, ∞)` through the substitution
/// `u = a + scale · x / (1 - x)`, `x ∈ [0, 1)`.
///
/// `scale` should be the length over which `f` does most of its work.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    if !(scale > 0.0) {
        return Err(crate::error::invalid("scale", "must be positive"));
    }
    integrate(
        |x| {
            let one_minus = 1.0 - x;
            if one_minus <= 0.0 {
                return 0.0;
            }
            let u = a + scale * x / one_minus;
            let jac = scale / (one_minus * one_minus);
            let v = f(u);
            if v == 0.0 {
                0.0
            } else {
                v * jac
            }
        },
        0.0,
        1.0,
        settings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_rule_is_exact_for_low_degree_polynomials() {
        let settings = QuadratureSettings::default();
        for deg in 0..=20 {
            let exact = 2.0 / (deg as f64 + 1.0) * if deg % 2 == 0 { 1.0 } else { 0.0 };
            let seg = gauss_kronrod21(&mut |x: f64| x.powi(deg), -1.0, 1.0);
            assert!((seg.value - exact).abs() < 1e-14, "degree {deg}");
        }
        // Weights sum to the interval length.
        let w: f64 = WGK[10] + 2.0 * WGK[..10].iter().sum::<f64>();
        assert!((w - 2.0).abs() < 1e-15);
        let wg: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((wg - 2.0).abs() < 1e-15);
        let _ = settings;
    }

    #[test]
    fn adaptive_handles_peaked_and_singular_integrands() {
        let settings = QuadratureSettings {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            ..Default::default()
        };
        let v = integrate(|x: f64| x.sqrt(), 0.0, 1.0, &settings).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
        let v = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, &settings).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v - exact).abs() / exact < 1e-9);
    }

    #[test]
    fn semi_infinite_map() {
        let settings = QuadratureSettings {
            rel_tol: 1e-12,
            abs_tol: 0.0,
            ..Default::default()
        };
        let v = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, 1.0, &settings).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = integrate_to_infinity(|x: f64| x.powi(-3), 1.0, 1.0, &settings).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let settings = QuadratureSettings {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            max_subdivisions: 3,
        };
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, &settings).unwrap_err();
        assert!(matches!(err, Error::Quadrature { subdivisions: 3, .. }));
    }
}
