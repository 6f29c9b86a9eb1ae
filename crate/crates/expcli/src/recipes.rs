//! Built-in experiments, one per figure-style parameter study.
//!
//! A recipe fixes the network, library, schemes, evaluators and sweep. Run
//! controls (trials, seed, sample counts, window, output, energy and
//! optimizer settings, timing) still come from the config file.

use crate::config::{
    Axis, Caching, ContentConfig, Delivery, Evaluator, ExperimentConfig, NetworkConfig, SchemeConfig, SweepConfig,
    SweepMode, SweepVar,
};

pub struct Recipe {
    pub name: &'static str,
    pub description: &'static str,
    apply: fn(&mut ExperimentConfig),
}

impl Recipe {
    pub fn apply_to(&self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut cfg = base.clone();
        cfg.network = NetworkConfig::default();
        cfg.content = ContentConfig::default();
        cfg.sweep = SweepConfig::default();
        cfg.c_m = 0.5;
        (self.apply)(&mut cfg);
        cfg
    }
}

fn range(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + step * i as f64).collect()
}

fn schemes(delivery: &[Delivery], caching: &[Caching]) -> Vec<SchemeConfig> {
    delivery
        .iter()
        .flat_map(|&d| caching.iter().map(move |&c| SchemeConfig { delivery: d, caching: c }))
        .collect()
}

fn grid(axes: Vec<(SweepVar, Vec<f64>)>) -> SweepConfig {
    SweepConfig {
        mode: SweepMode::Grid,
        variable: None,
        values: None,
        axes: axes.into_iter().map(|(variable, values)| Axis { variable, values }).collect(),
    }
}

const ALL_DELIVERY: [Delivery; 3] = [Delivery::Comp, Delivery::Ncp, Delivery::Rscp];

pub const RECIPES: [Recipe; 8] = [
    Recipe {
        name: "fig2",
        description: "Poisson-interference lower bound vs simulation over sigma, three cluster densities",
        apply: |c| {
            c.network.n_bar = 20.0;
            c.schemes = schemes(&[Delivery::Comp], &[Caching::Fixed]);
            c.evaluators = vec![Evaluator::Simulate, Evaluator::Bound];
            c.sweep = grid(vec![
                (SweepVar::LambdaP, vec![10.0, 20.0, 50.0]),
                (SweepVar::Sigma, range(10.0, 10.0, 10)),
            ]);
        },
    },
    Recipe {
        name: "fig3",
        description: "Nearest-provider distance CDF: exact, closed-form approximation and empirical",
        apply: |c| {
            c.network.n_bar = 20.0;
            c.network.sigma = 10.0;
            c.network.p = 1.0;
            c.schemes = Vec::new();
            c.evaluators = vec![Evaluator::NearestCdf];
        },
    },
    Recipe {
        name: "fig4",
        description: "Offloading gain under Zipf caching vs beta: simulation, bound and approximation",
        apply: |c| {
            c.schemes = schemes(&[Delivery::Comp], &[Caching::Zipf]);
            c.evaluators = vec![Evaluator::Simulate, Evaluator::Bound, Evaluator::Approx];
            c.sweep = grid(vec![(SweepVar::Beta, range(0.2, 0.2, 10))]);
        },
    },
    Recipe {
        name: "fig5",
        description: "Nearest-plus-mean approximation vs simulation over sigma and cluster density",
        apply: |c| {
            c.network.n_bar = 20.0;
            c.schemes = schemes(&[Delivery::Comp], &[Caching::Fixed]);
            c.evaluators = vec![Evaluator::Simulate, Evaluator::Approx];
            c.sweep = grid(vec![
                (SweepVar::LambdaP, vec![10.0, 30.0]),
                (SweepVar::Sigma, range(10.0, 10.0, 5)),
            ]);
        },
    },
    Recipe {
        name: "fig6",
        description: "Offloading gain of optimized and heuristic caching vs beta (40 files, 8 slots)",
        apply: |c| {
            c.content.n_files = 40;
            c.content.cache_size = 8;
            c.schemes = schemes(
                &[Delivery::Comp],
                &[Caching::P1, Caching::P2, Caching::Zipf, Caching::Cpf, Caching::Rc],
            );
            c.evaluators = vec![Evaluator::Simulate, Evaluator::Approx];
            c.sweep = grid(vec![(SweepVar::Beta, range(0.2, 0.2, 7))]);
        },
    },
    Recipe {
        name: "fig7",
        description: "One-provider caching solution for three network geometries (beta = 0.4)",
        apply: |c| {
            c.content.beta = 0.4;
            c.schemes = Vec::new();
            c.evaluators = vec![Evaluator::OptimizeP2];
            c.sweep = SweepConfig {
                mode: SweepMode::Zip,
                variable: None,
                values: None,
                axes: vec![
                    Axis {
                        variable: SweepVar::Sigma,
                        values: vec![10.0, 30.0, 50.0],
                    },
                    Axis {
                        variable: SweepVar::LambdaP,
                        values: vec![10.0, 30.0, 40.0],
                    },
                ],
            };
        },
    },
    Recipe {
        name: "fig8",
        description: "Rate coverage and energy per request vs mean cluster size (8 dB, c_m = 1)",
        apply: |c| {
            c.network.theta_db = 8.0;
            c.c_m = 1.0;
            c.schemes = schemes(&ALL_DELIVERY, &[Caching::Fixed]);
            c.evaluators = vec![Evaluator::Simulate, Evaluator::Energy];
            c.sweep = grid(vec![
                (SweepVar::LambdaP, vec![10.0, 30.0]),
                (SweepVar::NBar, range(2.0, 2.0, 10)),
            ]);
        },
    },
    Recipe {
        name: "fig9",
        description: "Rate coverage of joint, nearest and random-provider delivery vs SIR threshold",
        apply: |c| {
            c.network.n_bar = 20.0;
            c.schemes = schemes(&ALL_DELIVERY, &[Caching::Fixed]);
            c.evaluators = vec![Evaluator::Simulate, Evaluator::Approx];
            c.sweep = grid(vec![
                (SweepVar::LambdaP, vec![10.0, 30.0]),
                (SweepVar::Theta, range(-10.0, 2.5, 11)),
            ]);
        },
    },
];

pub fn find(name: &str) -> Option<&'static Recipe> {
    RECIPES.iter().find(|r| r.name == name)
}
