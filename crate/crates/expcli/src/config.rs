//! Experiment configuration: JSON schema, unit conversion and validation.
//!
//! Config files quote the cluster density in km⁻², the SIR threshold in dB
//! and the transmit power in dBm. Everything is converted to linear SI
//! values when a sweep point is resolved.

use std::fmt;
use std::path::PathBuf;

use d2dcomp::caching::ContentParams;
use d2dcomp::channel::DeliveryScheme;
use d2dcomp::geometry::NetworkParams;
use d2dcomp::optimizer::OptimizerSettings;
use d2dcomp::simulator::EnergyParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Cluster-center density (km⁻²).
    pub lambda_p: f64,
    /// Scattering standard deviation (m).
    pub sigma: f64,
    pub n_bar: f64,
    pub p: f64,
    pub alpha: f64,
    pub gamma_d: f64,
    pub theta_db: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            lambda_p: 30.0,
            sigma: 30.0,
            n_bar: 6.0,
            p: 0.5,
            alpha: 4.0,
            gamma_d: 1.0,
            theta_db: 0.0,
        }
    }
}

impl NetworkConfig {
    pub fn to_params(&self) -> NetworkParams {
        NetworkParams {
            lambda_p: self.lambda_p * 1e-6,
            sigma: self.sigma,
            n_bar: self.n_bar,
            p: self.p,
            alpha: self.alpha,
            gamma_d: self.gamma_d,
            theta: db_to_linear(self.theta_db),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContentConfig {
    #[serde(rename = "N_f")]
    pub n_files: usize,
    #[serde(rename = "M")]
    pub cache_size: usize,
    /// Zipf exponent; ignored when `q` is given.
    pub beta: f64,
    pub q: Option<Vec<f64>>,
}

impl Default for ContentConfig {
    fn default() -> Self {
        Self {
            n_files: 12,
            cache_size: 2,
            beta: 0.8,
            q: None,
        }
    }
}

impl ContentConfig {
    pub fn to_params(&self) -> d2dcomp::Result<ContentParams> {
        match &self.q {
            Some(q) => ContentParams::with_popularity(self.cache_size, q.clone()),
            None => ContentParams::zipf(self.n_files, self.cache_size, self.beta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    #[serde(rename = "P_d_dbm")]
    pub power_dbm: f64,
    #[serde(rename = "S_bar_bytes")]
    pub content_bytes: f64,
    #[serde(rename = "W_hz")]
    pub bandwidth_hz: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            power_dbm: 20.0,
            content_bytes: 5e6,
            bandwidth_hz: 5e6,
        }
    }
}

impl EnergyConfig {
    pub fn to_params(&self) -> EnergyParams {
        EnergyParams {
            power_w: EnergyParams::dbm_to_watts(self.power_dbm),
            content_bits: 8.0 * self.content_bytes,
            bandwidth_hz: self.bandwidth_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delivery {
    Comp,
    Ncp,
    Rscp,
}

impl Delivery {
    pub fn scheme(self) -> DeliveryScheme {
        match self {
            Delivery::Comp => DeliveryScheme::Comp,
            Delivery::Ncp => DeliveryScheme::Ncp,
            Delivery::Rscp => DeliveryScheme::Rscp,
        }
    }
}

/// How the caching vector is chosen. `Fixed` evaluates one file cached
/// with probability `c_m`; the others evaluate the offloading gain of the
/// whole library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Caching {
    Fixed,
    Zipf,
    Cpf,
    Rc,
    P1,
    P2,
}

impl Caching {
    pub fn name(self) -> &'static str {
        match self {
            Caching::Fixed => "fixed",
            Caching::Zipf => "zipf",
            Caching::Cpf => "cpf",
            Caching::Rc => "rc",
            Caching::P1 => "p1",
            Caching::P2 => "p2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub delivery: Delivery,
    pub caching: Caching,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluator {
    Simulate,
    Exact,
    Bound,
    Approx,
    OneProvider,
    OptimizeP1,
    OptimizeP2,
    Energy,
    NearestCdf,
}

impl Evaluator {
    pub fn name(self) -> &'static str {
        match self {
            Evaluator::Simulate => "simulate",
            Evaluator::Exact => "exact",
            Evaluator::Bound => "bound",
            Evaluator::Approx => "approx",
            Evaluator::OneProvider => "one_provider",
            Evaluator::OptimizeP1 => "optimize_p1",
            Evaluator::OptimizeP2 => "optimize_p2",
            Evaluator::Energy => "energy",
            Evaluator::NearestCdf => "nearest_cdf",
        }
    }

    /// Evaluators whose output does not depend on the scheme list.
    pub fn is_scheme_free(self) -> bool {
        matches!(self, Evaluator::OptimizeP1 | Evaluator::OptimizeP2 | Evaluator::NearestCdf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    Beta,
    Sigma,
    LambdaP,
    Theta,
    NBar,
    CM,
    P,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Beta => "beta",
            SweepVar::Sigma => "sigma",
            SweepVar::LambdaP => "lambda_p",
            SweepVar::Theta => "theta",
            SweepVar::NBar => "n_bar",
            SweepVar::CM => "c_m",
            SweepVar::P => "p",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub variable: SweepVar,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Cartesian product of the axes, last axis fastest.
    #[default]
    Grid,
    /// Axes advance together; all must have the same length.
    Zip,
}

/// Sweep description. A single axis may be written inline with `variable`
/// and `values`; several go in `axes`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub mode: SweepMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variable: Option<SweepVar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub axes: Vec<Axis>,
}

impl SweepConfig {
    pub fn all_axes(&self) -> Vec<Axis> {
        let mut out = Vec::new();
        if let Some(variable) = self.variable {
            out.push(Axis {
                variable,
                values: self.values.clone().unwrap_or_default(),
            });
        }
        out.extend(self.axes.iter().cloned());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub bisection_tol: f64,
    pub max_iter: usize,
    pub multistart_count: usize,
    pub fixed_point_tol: f64,
    pub iterate: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let s = OptimizerSettings::default();
        Self {
            bisection_tol: s.bisection_tol,
            max_iter: s.max_iter,
            multistart_count: s.multistart_count,
            fixed_point_tol: s.fixed_point_tol,
            iterate: s.iterate,
        }
    }
}

impl OptimizerConfig {
    pub fn to_settings(&self) -> OptimizerSettings {
        OptimizerSettings {
            bisection_tol: self.bisection_tol,
            max_iter: self.max_iter,
            multistart_count: self.multistart_count,
            fixed_point_tol: self.fixed_point_tol,
            iterate: self.iterate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub content: ContentConfig,
    pub energy: EnergyConfig,
    pub optimizer: OptimizerConfig,
    pub schemes: Vec<SchemeConfig>,
    pub sweep: SweepConfig,
    /// Caching probability of the file under study for `fixed` schemes.
    pub c_m: f64,
    pub trials: u64,
    /// Distance samples per provider count for `exact` and `bound`.
    pub mc_samples: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub evaluators: Vec<Evaluator>,
    /// Interference window radius (m); unset uses the library default.
    pub window_radius: Option<f64>,
    /// Distances (m) at which `nearest_cdf` is reported; unset uses 31
    /// points on [0, 6σ].
    pub h_values: Option<Vec<f64>>,
    /// Record per-row wall time. Off makes re-runs byte-identical.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::default(),
            content: ContentConfig::default(),
            energy: EnergyConfig::default(),
            optimizer: OptimizerConfig::default(),
            schemes: vec![SchemeConfig {
                delivery: Delivery::Comp,
                caching: Caching::Fixed,
            }],
            sweep: SweepConfig::default(),
            c_m: 0.5,
            trials: 100_000,
            mc_samples: 100_000,
            seed: 1,
            output: None,
            evaluators: vec![Evaluator::Simulate],
            window_radius: None,
            h_values: None,
            record_timing: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Canonical serialization, used for the provenance hash.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Copy with one swept variable set. `theta` is in dB and `lambda_p`
    /// in km⁻², as in the config file.
    pub fn with_value(&self, variable: SweepVar, value: f64) -> Self {
        let mut c = self.clone();
        match variable {
            SweepVar::Beta => {
                c.content.beta = value;
                c.content.q = None;
            }
            SweepVar::Sigma => c.network.sigma = value,
            SweepVar::LambdaP => c.network.lambda_p = value,
            SweepVar::Theta => c.network.theta_db = value,
            SweepVar::NBar => c.network.n_bar = value,
            SweepVar::CM => c.c_m = value,
            SweepVar::P => c.network.p = value,
        }
        c
    }
}

/// One failed check, addressed by its path in the config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn push(out: &mut Vec<Violation>, path: impl Into<String>, message: impl Into<String>) {
    out.push(Violation {
        path: path.into(),
        message: message.into(),
    });
}

/// Field-level checks of everything a sweep can change.
fn check_point(cfg: &ExperimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = &cfg.network;
    for (field, v) in [
        ("network.lambda_p", n.lambda_p),
        ("network.sigma", n.sigma),
        ("network.n_bar", n.n_bar),
        ("network.gamma_d", n.gamma_d),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            push(&mut out, field, format!("must be finite and positive, got {v}"));
        }
    }
    if !(0.0..=1.0).contains(&n.p) {
        push(&mut out, "network.p", format!("must lie in [0, 1], got {}", n.p));
    }
    if !(n.alpha > 2.0 && n.alpha.is_finite()) {
        push(
            &mut out,
            "network.alpha",
            format!("must exceed 2 (interference transform diverges otherwise), got {}", n.alpha),
        );
    }
    if !n.theta_db.is_finite() {
        push(&mut out, "network.theta_db", "must be finite");
    }
    if !(0.0..=1.0).contains(&cfg.c_m) {
        push(&mut out, "c_m", format!("must lie in [0, 1], got {}", cfg.c_m));
    }
    let c = &cfg.content;
    if c.n_files == 0 {
        push(&mut out, "content.N_f", "library must hold at least one file");
    }
    let files = c.q.as_ref().map_or(c.n_files, Vec::len);
    if c.cache_size == 0 || c.cache_size > files {
        push(&mut out, "content.M", format!("must lie in 1..={files}, got {}", c.cache_size));
    }
    match &c.q {
        Some(q) => {
            if q.len() != c.n_files {
                push(&mut out, "content.q", format!("has {} entries, N_f is {}", q.len(), c.n_files));
            }
            if q.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                push(&mut out, "content.q", "entries must be finite and non-negative");
            }
            let sum: f64 = q.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                push(&mut out, "content.q", format!("must sum to 1, sums to {sum}"));
            }
            if q.windows(2).any(|w| w[1] > w[0]) {
                push(&mut out, "content.q", "must be sorted by decreasing popularity");
            }
        }
        None => {
            if !(c.beta >= 0.0 && c.beta.is_finite()) {
                push(&mut out, "content.beta", format!("must be finite and non-negative, got {}", c.beta));
            }
        }
    }
    out
}

/// Every violated constraint of the config, with its field path. An empty
/// list means the config is valid.
pub fn validate_config(cfg: &ExperimentConfig) -> Vec<Violation> {
    let base = check_point(cfg);
    let mut out = base.clone();

    let e = &cfg.energy;
    if !e.power_dbm.is_finite() {
        push(&mut out, "energy.P_d_dbm", "must be finite");
    }
    for (path, v) in [("energy.S_bar_bytes", e.content_bytes), ("energy.W_hz", e.bandwidth_hz)] {
        if !(v > 0.0 && v.is_finite()) {
            push(&mut out, path, format!("must be finite and positive, got {v}"));
        }
    }
    let o = &cfg.optimizer;
    for (path, v) in [
        ("optimizer.bisection_tol", o.bisection_tol),
        ("optimizer.fixed_point_tol", o.fixed_point_tol),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            push(&mut out, path, format!("must be finite and positive, got {v}"));
        }
    }
    if o.max_iter == 0 {
        push(&mut out, "optimizer.max_iter", "must be at least 1");
    }
    if cfg.trials == 0 {
        push(&mut out, "trials", "must be at least 1");
    }
    if cfg.mc_samples == 0 {
        push(&mut out, "mc_samples", "must be at least 1");
    }
    if let Some(r) = cfg.window_radius {
        if !(r > 0.0 && r.is_finite()) {
            push(&mut out, "window_radius", format!("must be finite and positive, got {r}"));
        }
    }
    if let Some(h) = &cfg.h_values {
        if h.is_empty() || h.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            push(&mut out, "h_values", "must be a non-empty list of finite non-negative distances");
        }
    }
    if cfg.evaluators.is_empty() {
        push(&mut out, "evaluators", "must name at least one evaluator");
    }
    let needs_schemes = cfg.evaluators.iter().any(|e| !e.is_scheme_free());
    if needs_schemes && cfg.schemes.is_empty() {
        push(&mut out, "schemes", "must list at least one scheme");
    }
    if cfg.evaluators.contains(&Evaluator::Energy) {
        for (i, s) in cfg.schemes.iter().enumerate() {
            if s.caching != Caching::Fixed {
                push(
                    &mut out,
                    format!("schemes[{i}].caching"),
                    "the energy evaluator needs `fixed` caching",
                );
            }
        }
    }

    let axes = cfg.sweep.all_axes();
    if cfg.sweep.values.is_some() && cfg.sweep.variable.is_none() {
        push(&mut out, "sweep.variable", "values given without a variable");
    }
    let mut seen = Vec::new();
    for (i, axis) in axes.iter().enumerate() {
        let path = if cfg.sweep.variable.is_some() && i == 0 {
            "sweep".to_string()
        } else {
            let offset = usize::from(cfg.sweep.variable.is_some());
            format!("sweep.axes[{}]", i - offset)
        };
        if seen.contains(&axis.variable) {
            push(&mut out, format!("{path}.variable"), format!("`{}` is swept twice", axis.variable.name()));
        }
        seen.push(axis.variable);
        if axis.values.is_empty() {
            push(&mut out, format!("{path}.values"), "must not be empty");
        }
        for (j, &v) in axis.values.iter().enumerate() {
            let value_path = format!("{path}.values[{j}]");
            if !v.is_finite() {
                push(&mut out, value_path, "must be finite");
                continue;
            }
            if axis.variable == SweepVar::Beta && cfg.content.q.is_some() {
                push(&mut out, value_path.clone(), "beta cannot be swept with an explicit content.q");
            }
            let mut point = cfg.with_value(axis.variable, v);
            if axis.variable == SweepVar::Beta {
                point.content.q = None;
            }
            // Only report problems the swept value introduces.
            for v in check_point(&point) {
                if !base.contains(&v) {
                    push(&mut out, format!("{value_path} ({})", v.path), v.message);
                }
            }
        }
    }
    if cfg.sweep.mode == SweepMode::Zip {
        if let Some(first) = axes.first() {
            for (i, axis) in axes.iter().enumerate().skip(1) {
                if axis.values.len() != first.values.len() {
                    push(
                        &mut out,
                        format!("sweep.axes[{i}].values"),
                        format!("zip mode needs equal lengths ({} vs {})", axis.values.len(), first.values.len()),
                    );
                }
            }
        }
    }
    out
}
