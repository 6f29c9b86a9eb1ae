//! Analytic expressions against independent Monte Carlo routes.

use d2dcomp::analytics::{laplace_exact, laplace_ppp_bound, CoverageModel};
use d2dcomp::caching::CachingVector;
use d2dcomp::channel::{desired_power_comp, interference_power, sir_for_scheme, DeliveryScheme};
use d2dcomp::geometry::{sample_parent_ppp, sample_realization, NetworkParams};
use d2dcomp::rng::{derive_seed, seeded, SimRng};
use d2dcomp::simulator::{estimate_rate_coverage_grid, Estimate, SimulationSettings};
use d2dcomp::stats::Moments;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

fn agree(a: &Estimate, b: &Estimate, k: f64) -> bool {
    (a.mean - b.mean).abs() <= k * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}

#[test]
fn interference_transform_matches_sampled_clusters() {
    let params = NetworkParams::default();
    let t = 1e6;
    let caching = CachingVector::new(vec![1.0], 1).unwrap();
    let radius = params.window_radius_for(300.0);
    let mut m = Moments::new();
    for i in 0..20_000 {
        let mut rng = seeded(derive_seed(11, i));
        let real = sample_realization(&params, &caching, radius, &mut rng).unwrap();
        let interference = interference_power(&real, 1.0, params.alpha, &mut rng);
        m.push((-t * interference).exp());
    }
    let exact = laplace_exact(t, &params).unwrap();
    let est = Estimate::from_moments(&m);
    assert!(est.agrees_with(exact, 4.0, 0.0), "{est:?} vs {exact}");
}

#[test]
fn poisson_bound_matches_sampled_poisson_field() {
    let params = NetworkParams::default();
    let density = params.lambda_p * params.active_mean();
    let radius = (2000.0 / (std::f64::consts::PI * density)).sqrt();
    for t in [1e5, 1e6, 1e7] {
        let mut m = Moments::new();
        let mut rng = seeded(12);
        for _ in 0..20_000 {
            let field = sample_parent_ppp(density, radius, &mut rng).unwrap();
            let total: f64 = field
                .iter()
                .map(|x| {
                    let g: f64 = Exp1.sample(&mut rng);
                    g * (x[0] * x[0] + x[1] * x[1]).sqrt().max(1e-3).powf(-params.alpha)
                })
                .sum();
            m.push((-t * total).exp());
        }
        let bound = laplace_ppp_bound(t, &params).unwrap();
        let est = Estimate::from_moments(&m);
        assert!(est.agrees_with(bound, 4.0, 1e-4), "t={t}: {est:?} vs {bound}");
    }
}

#[test]
fn exact_mixture_sits_just_above_simulation() {
    let params = NetworkParams {
        sigma: 20.0,
        lambda_p: 10e-6,
        n_bar: 20.0,
        ..Default::default()
    };
    let model = CoverageModel::new(&params).unwrap();
    let thetas = [0.1, 1.0, 10.0];
    let sim = estimate_rate_coverage_grid(&params, 0.5, &thetas, &SimulationSettings::new(100_000, 13)).unwrap();
    for (j, &theta) in thetas.iter().enumerate() {
        let exact = model
            .with_theta(theta)
            .unwrap()
            .rate_coverage_exact(0.5, None, 50_000, 14)
            .unwrap();
        // Treating provider distances as independent drops their shared
        // center, which puts the mixture slightly above the simulation.
        let comp = &sim[j][DeliveryScheme::Comp.index()];
        let se = (comp.stderr.powi(2) + exact.stderr.powi(2)).sqrt();
        assert!(exact.mean >= comp.mean - 3.0 * se, "theta={theta}: {comp:?} vs {exact:?}");
        if theta == 1.0 {
            assert!(exact.mean - comp.mean <= (3.0 * se).max(0.02), "{comp:?} vs {exact:?}");
        }
    }
}

/// The simulator's representative-cluster fast path against SIRs computed
/// on fully sampled networks with explicit cache sets.
#[test]
fn fast_path_matches_full_realizations() {
    let params = NetworkParams::default();
    let caching = CachingVector::new(vec![0.5, 0.5], 1).unwrap();
    let radius = params.window_radius_for(300.0);
    let trials = 40_000;
    let mut full = [Moments::new(), Moments::new(), Moments::new()];
    for i in 0..trials {
        let mut rng = seeded(derive_seed(15, i));
        let real = sample_realization(&params, &caching, radius, &mut rng).unwrap();
        for scheme in DeliveryScheme::ALL {
            let mut fade_rng = seeded(derive_seed(16, i));
            let hit = sir_for_scheme(scheme, &real, 0, &params, &mut fade_rng).is_some_and(|s| s.sir >= params.theta);
            full[scheme.index()].push(if hit { 1.0 } else { 0.0 });
        }
    }
    let fast = estimate_rate_coverage_grid(&params, 0.5, &[params.theta], &SimulationSettings::new(trials, 17)).unwrap();
    for s in 0..3 {
        let f = Estimate::from_moments(&full[s]);
        assert!(agree(&f, &fast[0][s], 4.0), "scheme {s}: {f:?} vs {:?}", fast[0][s]);
    }
}

/// Given two or more provider distances, the faded desired power under
/// joint transmission stochastically dominates the nearest provider's,
/// which dominates a random provider's.
#[test]
fn scheme_powers_order_in_distribution() {
    let params = NetworkParams::default();
    let distances = [15.0, 30.0, 45.0];
    let nearest = [distances[0]];
    let mut rng = seeded(18);
    let n = 100_000;
    let draw = |which: usize, rng: &mut SimRng| -> f64 {
        match which {
            0 => desired_power_comp(&distances, 1.0, params.alpha, rng).unwrap(),
            1 => desired_power_comp(&nearest, 1.0, params.alpha, rng).unwrap(),
            _ => {
                let pick = [distances[rng.random_range(0..distances.len())]];
                desired_power_comp(&pick, 1.0, params.alpha, rng).unwrap()
            }
        }
    };
    let samples: Vec<Vec<f64>> = (0..3).map(|w| (0..n).map(|_| draw(w, &mut rng)).collect()).collect();
    let scale = 15f64.powf(-params.alpha);
    for x in [0.1, 0.5, 1.0, 2.0, 4.0].map(|f| f * scale) {
        let ccdf: Vec<f64> = samples
            .iter()
            .map(|s| s.iter().filter(|&&v| v > x).count() as f64 / n as f64)
            .collect();
        let se = (0.25 / n as f64).sqrt();
        assert!(ccdf[0] + 3.0 * se >= ccdf[1], "x={x}: {ccdf:?}");
        assert!(ccdf[1] + 3.0 * se >= ccdf[2], "x={x}: {ccdf:?}");
    }
}
