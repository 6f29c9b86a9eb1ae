//! Path loss, Rayleigh fading and SIR for the three delivery schemes.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::geometry::{norm, NetworkParams, NetworkRealization};

/// Distances below this are clamped inside the path-loss law (m).
pub const DISTANCE_FLOOR: f64 = 1e-3;

/// How the providers of the representative cluster serve the client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeliveryScheme {
    /// Joint transmission by every active provider caching the file.
    Comp,
    /// The nearest active provider alone.
    Ncp,
    /// One active provider picked uniformly at random.
    Rscp,
}

impl DeliveryScheme {
    pub const ALL: [DeliveryScheme; 3] = [DeliveryScheme::Comp, DeliveryScheme::Ncp, DeliveryScheme::Rscp];

    pub fn name(self) -> &'static str {
        match self {
            DeliveryScheme::Comp => "comp",
            DeliveryScheme::Ncp => "ncp",
            DeliveryScheme::Rscp => "rscp",
        }
    }

    /// Position in [`DeliveryScheme::ALL`].
    pub fn index(self) -> usize {
        match self {
            DeliveryScheme::Comp => 0,
            DeliveryScheme::Ncp => 1,
            DeliveryScheme::Rscp => 2,
        }
    }
}

impl fmt::Display for DeliveryScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DeliveryScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "comp" => Ok(DeliveryScheme::Comp),
            "ncp" => Ok(DeliveryScheme::Ncp),
            "rscp" => Ok(DeliveryScheme::Rscp),
            other => Err(invalid("scheme", format!("unknown delivery scheme `{other}`"))),
        }
    }
}

/// Received powers at the typical client for one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirSample {
    pub desired_power: f64,
    pub interference_power: f64,
    /// `+∞` when there is no interference.
    pub sir: f64,
}

impl SirSample {
    /// Builds a sample from powers *before* scaling by the transmit power, so
    /// the ratio does not depend on `gamma_d` even in floating point.
    fn from_unit_powers(desired: f64, interference: f64, gamma_d: f64) -> Self {
        let sir = if interference > 0.0 {
            desired / interference
        } else {
            f64::INFINITY
        };
        Self {
            desired_power: gamma_d * desired,
            interference_power: gamma_d * interference,
            sir,
        }
    }
}

#[inline]
pub fn path_loss(d: f64, alpha: f64) -> f64 {
    d.max(DISTANCE_FLOOR).powf(-alpha)
}

/// Path loss from a squared distance; avoids the square root on the
/// interference hot path.
#[inline]
pub(crate) fn path_loss_sq(d2: f64, alpha: f64) -> f64 {
    let d2 = d2.max(DISTANCE_FLOOR * DISTANCE_FLOOR);
    if alpha == 4.0 {
        1.0 / (d2 * d2)
    } else {
        d2.powf(-0.5 * alpha)
    }
}

/// Standard circularly-symmetric complex Gaussian, `E|G|² = 1`.
#[inline]
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    (re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
}

/// `|Σ G_i d_i^(-α/2)|²` for given fades.
pub fn coherent_power(distances: &[f64], fades: &[(f64, f64)], alpha: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (&d, &(g_re, g_im)) in distances.iter().zip(fades) {
        let amp = path_loss(d, alpha).sqrt();
        re += g_re * amp;
        im += g_im * amp;
    }
    re * re + im * im
}

/// Joint-transmission power `γd |Σ G_i d_i^(-α/2)|²` with i.i.d. standard
/// complex Gaussian fades. `None` when there is no provider.
pub fn desired_power_comp<R: Rng + ?Sized>(
    distances: &[f64],
    gamma_d: f64,
    alpha: f64,
    rng: &mut R,
) -> Option<f64> {
    if distances.is_empty() {
        return None;
    }
    let fades: Vec<(f64, f64)> = distances.iter().map(|_| complex_gaussian(rng)).collect();
    Some(gamma_d * coherent_power(distances, &fades, alpha))
}

fn unit_interference<R: Rng + ?Sized>(realization: &NetworkRealization, alpha: f64, rng: &mut R) -> f64 {
    let mut total = 0.0;
    for cluster in &realization.remote {
        for i in 0..cluster.len() {
            if cluster.active[i] {
                let g: f64 = Exp1.sample(rng);
                total += g * path_loss(norm(cluster.position(i)), alpha);
            }
        }
    }
    total
}

/// Interference `γd Σ G_u ‖x+y‖^(-α)` from every active device of every
/// remote cluster, with i.i.d. unit-mean exponential power fades.
pub fn interference_power<R: Rng + ?Sized>(
    realization: &NetworkRealization,
    gamma_d: f64,
    alpha: f64,
    rng: &mut R,
) -> f64 {
    gamma_d * unit_interference(realization, alpha, rng)
}

/// SIR of file `m` (0-based) under all three schemes from one shared set of
/// fades, in [`DeliveryScheme::ALL`] order. `None` when no active device of
/// the representative cluster caches `m`.
pub fn sir_all_schemes<R: Rng + ?Sized>(
    realization: &NetworkRealization,
    m: usize,
    params: &NetworkParams,
    rng: &mut R,
) -> Option<[SirSample; 3]> {
    let rep = &realization.representative;
    let distances: Vec<f64> = (0..rep.len())
        .filter(|&i| rep.active[i] && rep.caches[i].contains(&m))
        .map(|i| norm(rep.position(i)))
        .collect();
    if distances.is_empty() {
        return None;
    }
    let fades: Vec<(f64, f64)> = distances.iter().map(|_| complex_gaussian(rng)).collect();
    let pick = rng.random_range(0..distances.len());
    let interference = unit_interference(realization, params.alpha, rng);

    let comp = coherent_power(&distances, &fades, params.alpha);
    let nearest = distances
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty");
    let single = |i: usize| coherent_power(&distances[i..=i], &fades[i..=i], params.alpha);
    let g = params.gamma_d;
    Some([
        SirSample::from_unit_powers(comp, interference, g),
        SirSample::from_unit_powers(single(nearest), interference, g),
        SirSample::from_unit_powers(single(pick), interference, g),
    ])
}

/// SIR of file `m` under one scheme. Draws are consumed exactly as in
/// [`sir_all_schemes`], so fixing the generator fixes all three outcomes.
pub fn sir_for_scheme<R: Rng + ?Sized>(
    scheme: DeliveryScheme,
    realization: &NetworkRealization,
    m: usize,
    params: &NetworkParams,
    rng: &mut R,
) -> Option<SirSample> {
    sir_all_schemes(realization, m, params, rng).map(|s| s[scheme.index()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caching::CachingVector;
    use crate::geometry::{sample_realization, Cluster};
    use crate::rng::seeded;
    use crate::stats::{ks_distance, Moments};

    fn empty_cluster(center: [f64; 2]) -> Cluster {
        Cluster {
            center,
            offsets: vec![],
            active: vec![],
            caches: vec![],
        }
    }

    #[test]
    fn path_loss_values() {
        assert_eq!(path_loss(1.0, 4.0), 1.0);
        assert!((path_loss(10.0, 4.0) - 1e-4).abs() < 1e-19);
        assert!((path_loss(0.0, 4.0) - 1e12).abs() < 1e-3);
    }

    #[test]
    fn comp_power_is_exponential_with_summed_mean() {
        let mut rng = seeded(1);
        assert!(desired_power_comp(&[], 1.0, 4.0, &mut rng).is_none());
        let d = [3.0];
        let mut m = Moments::new();
        for _ in 0..100_000 {
            m.push(desired_power_comp(&d, 2.0, 4.0, &mut rng).unwrap());
        }
        let mean = 2.0 * 3f64.powi(-4);
        assert!((m.mean() - mean).abs() < 3.0 * m.stderr());

        let d = [3.0, 3.0];
        let mut m = Moments::new();
        for _ in 0..100_000 {
            m.push(desired_power_comp(&d, 1.0, 4.0, &mut rng).unwrap());
        }
        assert!((m.mean() - 2.0 * 3f64.powi(-4)).abs() < 3.0 * m.stderr());

        let d = [2.0, 5.0, 9.0];
        let mean: f64 = d.iter().map(|&x| path_loss(x, 3.5)).sum();
        let mut xs: Vec<f64> = (0..100_000)
            .map(|_| desired_power_comp(&d, 1.0, 3.5, &mut rng).unwrap())
            .collect();
        let ks = ks_distance(&mut xs, |x| -(-x / mean).exp_m1());
        assert!(ks < 0.01, "ks = {ks}");
    }

    #[test]
    fn unit_fades_reduce_to_amplitude_sum() {
        let d = [2.0, 4.0];
        let fades = [(1.0, 0.0), (1.0, 0.0)];
        let amp: f64 = d.iter().map(|&x| path_loss(x, 4.0).sqrt()).sum();
        assert!((coherent_power(&d, &fades, 4.0) - amp * amp).abs() < 1e-15);
    }

    #[test]
    fn single_interferer_mean() {
        let mut rng = seeded(2);
        let empty = NetworkRealization {
            representative: empty_cluster([0.0, 0.0]),
            remote: vec![],
            window_radius: 100.0,
        };
        assert_eq!(interference_power(&empty, 1.0, 4.0, &mut rng), 0.0);
        let one = NetworkRealization {
            representative: empty_cluster([0.0, 0.0]),
            remote: vec![Cluster {
                center: [30.0, 0.0],
                offsets: vec![[0.0, 10.0]],
                active: vec![true],
                caches: vec![vec![0]],
            }],
            window_radius: 100.0,
        };
        let u = 30f64.hypot(10.0);
        let mut m = Moments::new();
        for _ in 0..100_000 {
            m.push(interference_power(&one, 1.0, 4.0, &mut rng));
        }
        assert!((m.mean() - u.powi(-4)).abs() < 3.0 * m.stderr());
    }

    #[test]
    fn schemes_coincide_with_one_provider() {
        let params = NetworkParams::default();
        let realization = NetworkRealization {
            representative: Cluster {
                center: [5.0, 0.0],
                offsets: vec![[1.0, 1.0], [2.0, 0.0]],
                active: vec![true, false],
                caches: vec![vec![0], vec![0]],
            },
            remote: vec![Cluster {
                center: [200.0, 0.0],
                offsets: vec![[0.0, 0.0]],
                active: vec![true],
                caches: vec![vec![1]],
            }],
            window_radius: 500.0,
        };
        let mut rng = seeded(3);
        for _ in 0..100 {
            let s = sir_all_schemes(&realization, 0, &params, &mut rng).unwrap();
            assert_eq!(s[0], s[1]);
            assert_eq!(s[1], s[2]);
        }
        assert!(sir_all_schemes(&realization, 1, &params, &mut rng).is_none());
    }

    #[test]
    fn sir_does_not_depend_on_transmit_power() {
        let params = NetworkParams {
            n_bar: 20.0,
            ..Default::default()
        };
        let loud = NetworkParams {
            gamma_d: 10.0,
            ..params
        };
        let caching = CachingVector::new(vec![0.5; 4], 2).unwrap();
        for seed in 0..50 {
            let r = sample_realization(&params, &caching, 800.0, &mut seeded(seed)).unwrap();
            let a = sir_all_schemes(&r, 0, &params, &mut seeded(1000 + seed));
            let b = sir_all_schemes(&r, 0, &loud, &mut seeded(1000 + seed));
            match (a, b) {
                (Some(a), Some(b)) => {
                    for k in 0..3 {
                        assert_eq!(a[k].sir.to_bits(), b[k].sir.to_bits());
                    }
                }
                (None, None) => {}
                _ => panic!("provider sets differ"),
            }
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in DeliveryScheme::ALL {
            assert_eq!(s.name().parse::<DeliveryScheme>().unwrap(), s);
        }
        assert!("mrc".parse::<DeliveryScheme>().is_err());
    }
}
