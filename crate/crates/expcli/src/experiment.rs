//! Sweep expansion and evaluation of one config into result rows.

use std::time::Instant;

use d2dcomp::analytics::{
    nearest_cdf, nearest_cdf_jensen, offloading_gain_curve, rate_coverage_one_provider, CoverageModel, NearestLaw,
};
use d2dcomp::caching::{scheme_cpf, scheme_rc, scheme_zipf, CachingVector, ContentParams};
use d2dcomp::channel::DeliveryScheme;
use d2dcomp::geometry::{sample_typical_cluster, NetworkParams};
use d2dcomp::optimizer::{normalized_entropy, optimize_p1, optimize_p2};
use d2dcomp::rng::trial_rng;
use d2dcomp::simulator::{
    energy_per_request, estimate_offloading_gains, estimate_rate_coverage_grid, Estimate, Placement,
    SimulationSettings,
};
use rayon::prelude::*;

use crate::config::{Caching, Evaluator, ExperimentConfig, SchemeConfig, SweepMode, SweepVar};

/// One output line: a sweep point, a scheme and an evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub point: usize,
    pub lambda_p: f64,
    pub sigma: f64,
    pub n_bar: f64,
    pub p: f64,
    pub alpha: f64,
    pub gamma_d: f64,
    pub theta_db: f64,
    pub c_m: f64,
    pub beta: Option<f64>,
    pub n_files: usize,
    pub cache_size: usize,
    pub delivery: String,
    pub caching: String,
    pub evaluator: String,
    pub item: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub wall_time_ms: Option<f64>,
}

/// Failure at a sweep point, reported with the point's coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointError {
    pub point: usize,
    pub coordinates: Vec<(SweepVar, f64)>,
    pub source: d2dcomp::Error,
}

impl std::fmt::Display for PointError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "sweep point {}", self.point)?;
        if !self.coordinates.is_empty() {
            let coords: Vec<String> = self
                .coordinates
                .iter()
                .map(|(v, x)| format!("{}={x}", v.name()))
                .collect();
            write!(f, " ({})", coords.join(", "))?;
        }
        write!(f, ": {}", self.source)
    }
}

impl std::error::Error for PointError {}

/// Sweep points in output order; an empty sweep gives one point.
pub fn expand_sweep(cfg: &ExperimentConfig) -> Vec<Vec<(SweepVar, f64)>> {
    let axes = cfg.sweep.all_axes();
    if axes.is_empty() {
        return vec![Vec::new()];
    }
    match cfg.sweep.mode {
        SweepMode::Zip => {
            let len = axes.iter().map(|a| a.values.len()).min().unwrap_or(0);
            (0..len)
                .map(|i| axes.iter().map(|a| (a.variable, a.values[i])).collect())
                .collect()
        }
        SweepMode::Grid => {
            let mut points: Vec<Vec<(SweepVar, f64)>> = vec![Vec::new()];
            for axis in &axes {
                points = points
                    .into_iter()
                    .flat_map(|prefix| {
                        axis.values.iter().map(move |&v| {
                            let mut p = prefix.clone();
                            p.push((axis.variable, v));
                            p
                        })
                    })
                    .collect();
            }
            points
        }
    }
}

/// Runs every sweep point; rows come back in sweep order.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, PointError> {
    let points = expand_sweep(cfg);
    let per_point: Vec<Result<Vec<ResultRow>, PointError>> = points
        .par_iter()
        .enumerate()
        .map(|(i, coords)| {
            let mut local = cfg.clone();
            for &(var, value) in coords {
                local = local.with_value(var, value);
            }
            evaluate_point(&local, i).map_err(|source| PointError {
                point: i,
                coordinates: coords.clone(),
                source,
            })
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(rows)
}

struct Point<'a> {
    cfg: &'a ExperimentConfig,
    index: usize,
    params: NetworkParams,
    content: ContentParams,
    settings: SimulationSettings,
    model: Option<CoverageModel>,
}

impl Point<'_> {
    fn row(&self, scheme: Option<SchemeConfig>, evaluator: &str, item: String, value: f64, stderr: Option<f64>) -> ResultRow {
        let n = &self.cfg.network;
        ResultRow {
            point: self.index,
            lambda_p: n.lambda_p,
            sigma: n.sigma,
            n_bar: n.n_bar,
            p: n.p,
            alpha: n.alpha,
            gamma_d: n.gamma_d,
            theta_db: n.theta_db,
            c_m: self.cfg.c_m,
            beta: self.content.beta,
            n_files: self.content.n_files,
            cache_size: self.content.cache_size,
            delivery: scheme.map_or("-", |s| s.delivery.scheme().name()).to_string(),
            caching: scheme.map_or("-", |s| s.caching.name()).to_string(),
            evaluator: evaluator.to_string(),
            item,
            value,
            stderr,
            wall_time_ms: None,
        }
    }

    fn model(&mut self) -> d2dcomp::Result<&CoverageModel> {
        if self.model.is_none() {
            self.model = Some(CoverageModel::new(&self.params)?);
        }
        Ok(self.model.as_ref().expect("just set"))
    }

    fn caching_vector(&self, caching: Caching) -> d2dcomp::Result<CachingVector> {
        let settings = self.cfg.optimizer.to_settings();
        match caching {
            Caching::Fixed => unreachable!("fixed caching has no library vector"),
            Caching::Zipf => scheme_zipf(&self.content),
            Caching::Cpf => scheme_cpf(&self.content),
            Caching::Rc => scheme_rc(&self.content),
            Caching::P1 => Ok(optimize_p1(&self.params, &self.content, &settings, self.cfg.seed)?.c_star),
            Caching::P2 => Ok(optimize_p2(&self.params, &self.content, &settings)?.c_star),
        }
    }
}

fn timed<T>(record: bool, f: impl FnOnce() -> d2dcomp::Result<T>) -> d2dcomp::Result<(T, Option<f64>)> {
    let start = Instant::now();
    let out = f()?;
    let ms = record.then(|| start.elapsed().as_secs_f64() * 1e3);
    Ok((out, ms))
}

fn evaluate_point(cfg: &ExperimentConfig, index: usize) -> d2dcomp::Result<Vec<ResultRow>> {
    let params = cfg.network.to_params();
    params.validate()?;
    let mut settings = SimulationSettings::new(cfg.trials, cfg.seed);
    if let Some(r) = cfg.window_radius {
        settings = settings.with_window(r);
    }
    let mut point = Point {
        cfg,
        index,
        params,
        content: cfg.content.to_params()?,
        settings,
        model: None,
    };
    let mut rows = Vec::new();
    for &evaluator in &cfg.evaluators {
        let (mut new, ms) = timed(cfg.record_timing, || evaluate(&mut point, evaluator))?;
        if let Some(ms) = ms {
            // Shared evaluation cost is split evenly over the rows it made.
            let each = ms / new.len().max(1) as f64;
            for r in &mut new {
                r.wall_time_ms = Some(each);
            }
        }
        rows.extend(new);
    }
    Ok(rows)
}

fn evaluate(point: &mut Point<'_>, evaluator: Evaluator) -> d2dcomp::Result<Vec<ResultRow>> {
    let cfg = point.cfg;
    match evaluator {
        Evaluator::NearestCdf => nearest_rows(point),
        Evaluator::OptimizeP1 | Evaluator::OptimizeP2 => {
            let settings = cfg.optimizer.to_settings();
            let result = if evaluator == Evaluator::OptimizeP1 {
                optimize_p1(&point.params, &point.content, &settings, cfg.seed)?
            } else {
                optimize_p2(&point.params, &point.content, &settings)?
            };
            let name = evaluator.name();
            let mut rows = vec![
                point.row(None, name, "objective".into(), result.objective, None),
                point.row(None, name, "entropy".into(), normalized_entropy(&result.c_star), None),
            ];
            for (m, &c) in result.c_star.values().iter().enumerate() {
                rows.push(point.row(None, name, format!("c[{m}]"), c, None));
            }
            Ok(rows)
        }
        Evaluator::Simulate => simulate_rows(point),
        Evaluator::Energy => energy_rows(point),
        Evaluator::Exact | Evaluator::Bound | Evaluator::Approx | Evaluator::OneProvider => {
            let mut rows = Vec::new();
            for &scheme in &cfg.schemes {
                if let Some((value, stderr)) = analytic(point, evaluator, scheme)? {
                    rows.push(point.row(Some(scheme), evaluator.name(), String::new(), value, stderr));
                }
            }
            Ok(rows)
        }
    }
}

/// Analytic rate coverage of one file. Only joint transmission has exact,
/// bound and one-provider forms; nearest-provider delivery has an
/// approximation; random-provider delivery has none.
fn file_coverage(point: &mut Point<'_>, evaluator: Evaluator, delivery: DeliveryScheme, c_m: f64) -> d2dcomp::Result<Option<Estimate>> {
    let (samples, seed) = (point.cfg.mc_samples, point.cfg.seed);
    let trials = samples as u64;
    let value = match (evaluator, delivery) {
        (Evaluator::Exact, DeliveryScheme::Comp) => point.model()?.rate_coverage_exact(c_m, None, samples, seed)?,
        (Evaluator::Bound, DeliveryScheme::Comp) => point.model()?.rate_coverage_bound(c_m, None, samples, seed)?,
        (Evaluator::Approx, DeliveryScheme::Comp) => {
            Estimate::exact(point.model()?.rate_coverage_approx(c_m, NearestLaw::Exact)?, trials)
        }
        (Evaluator::Approx, DeliveryScheme::Ncp) => {
            Estimate::exact(point.model()?.rate_coverage_ncp(c_m, NearestLaw::Exact)?, trials)
        }
        (Evaluator::OneProvider, DeliveryScheme::Comp) => {
            Estimate::exact(rate_coverage_one_provider(c_m, &point.params)?, trials)
        }
        _ => return Ok(None),
    };
    Ok(Some(value))
}

fn is_deterministic(evaluator: Evaluator) -> bool {
    matches!(evaluator, Evaluator::Approx | Evaluator::OneProvider)
}

fn analytic(point: &mut Point<'_>, evaluator: Evaluator, scheme: SchemeConfig) -> d2dcomp::Result<Option<(f64, Option<f64>)>> {
    let delivery = scheme.delivery.scheme();
    let keep_stderr = |e: Estimate| if is_deterministic(evaluator) { None } else { Some(e.stderr) };
    if scheme.caching == Caching::Fixed {
        return Ok(file_coverage(point, evaluator, delivery, point.cfg.c_m)?.map(|e| (e.mean, keep_stderr(e))));
    }
    if file_coverage(point, evaluator, delivery, 0.0)?.is_none() {
        return Ok(None);
    }
    let c = point.caching_vector(scheme.caching)?;
    let q = point.content.q.clone();
    let mut variance = 0.0;
    let value = offloading_gain_curve(c.values(), &q, |m, cm| {
        let e = file_coverage(point, evaluator, delivery, cm)?.expect("supported above");
        variance += (q[m] * (1.0 - cm) * e.stderr).powi(2);
        Ok(e.mean)
    })?;
    let stderr = (!is_deterministic(evaluator)).then(|| variance.sqrt());
    Ok(Some((value, stderr)))
}

fn simulate_rows(point: &mut Point<'_>) -> d2dcomp::Result<Vec<ResultRow>> {
    let cfg = point.cfg;
    let mut rows = Vec::new();
    let fixed: Vec<SchemeConfig> = cfg.schemes.iter().copied().filter(|s| s.caching == Caching::Fixed).collect();
    let fixed_estimates = if fixed.is_empty() {
        None
    } else {
        let grid = estimate_rate_coverage_grid(&point.params, cfg.c_m, &[point.params.theta], &point.settings)?;
        Some(grid[0])
    };
    // Library schemes sharing a delivery scheme share their trials.
    let mut library: Vec<(SchemeConfig, CachingVector)> = Vec::new();
    for &s in cfg.schemes.iter().filter(|s| s.caching != Caching::Fixed) {
        library.push((s, point.caching_vector(s.caching)?));
    }
    let mut gains: Vec<Option<Estimate>> = vec![None; library.len()];
    for delivery in DeliveryScheme::ALL {
        let members: Vec<usize> = (0..library.len())
            .filter(|&i| library[i].0.delivery.scheme() == delivery)
            .collect();
        if members.is_empty() {
            continue;
        }
        let placements: Vec<Placement<'_>> = members
            .iter()
            .map(|&i| Placement {
                content: &point.content,
                caching: &library[i].1,
            })
            .collect();
        let estimates = estimate_offloading_gains(&point.params, &placements, delivery, &point.settings)?;
        for (&i, e) in members.iter().zip(estimates) {
            gains[i] = Some(e);
        }
    }
    let mut next_library = 0;
    for &s in &cfg.schemes {
        let e = if s.caching == Caching::Fixed {
            fixed_estimates.expect("computed when fixed schemes exist")[s.delivery.scheme().index()]
        } else {
            next_library += 1;
            gains[next_library - 1].expect("every library scheme simulated")
        };
        rows.push(point.row(Some(s), "simulate", String::new(), e.mean, Some(e.stderr)));
    }
    Ok(rows)
}

fn energy_rows(point: &mut Point<'_>) -> d2dcomp::Result<Vec<ResultRow>> {
    let cfg = point.cfg;
    let grid = estimate_rate_coverage_grid(&point.params, cfg.c_m, &[point.params.theta], &point.settings)?;
    let energy = cfg.energy.to_params();
    let mut rows = Vec::new();
    for &s in &cfg.schemes {
        let upsilon = grid[0][s.delivery.scheme().index()];
        let e = energy_per_request(1.0, cfg.c_m, point.params.n_bar, &energy, point.params.theta, upsilon.mean)?;
        // Delta method: the energy is inversely proportional to Υ.
        let stderr = if upsilon.mean > 0.0 {
            e * upsilon.stderr / upsilon.mean
        } else {
            0.0
        };
        rows.push(point.row(Some(s), "energy", String::new(), e, Some(stderr)));
    }
    Ok(rows)
}

fn nearest_rows(point: &mut Point<'_>) -> d2dcomp::Result<Vec<ResultRow>> {
    let cfg = point.cfg;
    let sigma = point.params.sigma;
    let h_values: Vec<f64> = cfg
        .h_values
        .clone()
        .unwrap_or_else(|| (0..=30).map(|i| i as f64 * sigma / 5.0).collect());
    let mut nearest: Vec<f64> = Vec::with_capacity(cfg.trials as usize);
    for i in 0..cfg.trials {
        let mut rng = trial_rng(cfg.seed, i);
        let cluster = sample_typical_cluster(&point.params, cfg.c_m, &mut rng)?;
        let d = cluster.provider_distances.iter().copied().fold(f64::INFINITY, f64::min);
        nearest.push(d);
    }
    nearest.sort_by(f64::total_cmp);
    let n = nearest.len() as f64;
    let mut rows = Vec::new();
    for &h in &h_values {
        let item = format!("{h}");
        let exact = nearest_cdf(h, cfg.c_m, &point.params)?;
        let jensen = nearest_cdf_jensen(h, cfg.c_m, &point.params)?;
        let empirical = nearest.partition_point(|&d| d <= h) as f64 / n;
        rows.push(point.row(None, "nearest_cdf_exact", item.clone(), exact, None));
        rows.push(point.row(None, "nearest_cdf_jensen", item.clone(), jensen, None));
        let se = (empirical * (1.0 - empirical) / n).sqrt();
        rows.push(point.row(None, "nearest_cdf_empirical", item, empirical, Some(se)));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Axis, Delivery};

    #[test]
    fn grid_and_zip_expansion() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(expand_sweep(&cfg), vec![Vec::new()]);
        cfg.sweep.axes = vec![
            Axis {
                variable: SweepVar::Sigma,
                values: vec![10.0, 20.0],
            },
            Axis {
                variable: SweepVar::LambdaP,
                values: vec![1.0, 2.0, 3.0],
            },
        ];
        let grid = expand_sweep(&cfg);
        assert_eq!(grid.len(), 6);
        assert_eq!(grid[1], vec![(SweepVar::Sigma, 10.0), (SweepVar::LambdaP, 2.0)]);
        cfg.sweep.mode = SweepMode::Zip;
        cfg.sweep.axes[1].values.truncate(2);
        let zip = expand_sweep(&cfg);
        assert_eq!(zip, vec![
            vec![(SweepVar::Sigma, 10.0), (SweepVar::LambdaP, 1.0)],
            vec![(SweepVar::Sigma, 20.0), (SweepVar::LambdaP, 2.0)],
        ]);
    }

    #[test]
    fn single_point_gives_one_row_per_evaluator() {
        let cfg = ExperimentConfig {
            trials: 2000,
            mc_samples: 500,
            evaluators: vec![Evaluator::Simulate, Evaluator::Approx, Evaluator::OneProvider, Evaluator::Bound],
            ..Default::default()
        };
        let rows = run(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.point == 0));
        assert!(rows[1].stderr.is_none());
        assert!(rows[3].stderr.is_some());
    }

    #[test]
    fn unsupported_analytic_pairs_are_skipped() {
        let cfg = ExperimentConfig {
            trials: 500,
            schemes: vec![
                SchemeConfig {
                    delivery: Delivery::Ncp,
                    caching: Caching::Fixed,
                },
                SchemeConfig {
                    delivery: Delivery::Rscp,
                    caching: Caching::Fixed,
                },
            ],
            evaluators: vec![Evaluator::Approx, Evaluator::OneProvider],
            ..Default::default()
        };
        let rows = run(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].delivery, "ncp");
    }

    #[test]
    fn library_schemes_simulate_and_compose() {
        let cfg = ExperimentConfig {
            trials: 3000,
            schemes: vec![
                SchemeConfig {
                    delivery: Delivery::Comp,
                    caching: Caching::Zipf,
                },
                SchemeConfig {
                    delivery: Delivery::Comp,
                    caching: Caching::Cpf,
                },
            ],
            evaluators: vec![Evaluator::Simulate, Evaluator::OneProvider],
            ..Default::default()
        };
        let rows = run(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.value > 0.0 && r.value < 1.0, "{r:?}");
        }
    }

    #[test]
    fn numeric_failure_names_the_point() {
        let mut cfg = ExperimentConfig {
            trials: 100,
            evaluators: vec![Evaluator::Energy],
            c_m: 0.0,
            ..Default::default()
        };
        cfg.sweep.variable = Some(SweepVar::NBar);
        cfg.sweep.values = Some(vec![4.0]);
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.point, 0);
        assert!(err.to_string().contains("n_bar=4"), "{err}");
    }
}
