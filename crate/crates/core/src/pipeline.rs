//! JSON-configured analysis runs: configuration parsing, built-in fixtures, execution and
//! report/trace emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::coeffs::{
    carleman_diagnostic, total_variation, validate_family, CoefficientFamily, ScalarWeight, Violation, WeightKind,
    DEFAULT_HORIZON,
};
use crate::commutator::{
    c_limit, check_growth, check_log_envelope, eigenvector_lower_bound, weighted_conditions, AlphaStrategy,
};
use crate::error::{Error, Result};
use crate::opcore::{Operator, Vector, DEFAULT_DEFINITENESS_EPS};
use crate::recurrence::{propagate, Trace, Trajectory};
use crate::sampling::unit_sphere_samples;
use crate::turan::{
    asymptotic_band, christoffel_limit, exact_asymptotics, extract_periodic_limits, indeterminacy_probe,
    lambda_scan_window, q_scan, turan_convergence, LambdaSet, PeriodicLimitData, ScanSettings, DEFAULT_BURN_IN,
};

/// Smallest accepted horizon.
pub const MIN_HORIZON: usize = 100;

/// How the coefficients are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    /// `a_n = a`, `b_n = b`.
    Constant { a: Operator, b: Operator },
    /// `a_n = x_n X_{n mod N}`, `b_n = y_n Y_{n mod N}`.
    ScaledPeriodic { x: ScalarWeight, y: ScalarWeight, xs: Vec<Operator>, ys: Vec<Operator> },
    /// Explicit finite lists.
    Tabulated { a: Vec<Operator>, b: Vec<Operator> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub dim: usize,
    /// The period `N` of the asymptotic structure.
    #[serde(default = "one")]
    pub period: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub coefficients: CoefficientSpec,
}

fn one() -> usize {
    1
}

impl FamilySpec {
    pub fn build(&self) -> Result<CoefficientFamily> {
        let fam = match &self.coefficients {
            CoefficientSpec::Constant { a, b } => CoefficientFamily::constant(a.clone(), b.clone())?,
            CoefficientSpec::ScaledPeriodic { x, y, xs, ys } => {
                CoefficientFamily::scaled_periodic(x.clone(), y.clone(), xs.clone(), ys.clone())?
            }
            CoefficientSpec::Tabulated { a, b } => CoefficientFamily::tabulated(a.clone(), b.clone())?,
        };
        if fam.dim() != self.dim {
            return Err(parse_error("family.dim", format!("declared {} but operators are {}×{}", self.dim, fam.dim(), fam.dim())));
        }
        Ok(match &self.description {
            Some(d) => fam.with_description(d.clone()),
            None => fam,
        })
    }
}

/// Initial conditions `α = (u_0, u_1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaSpec {
    /// That many seeded uniform samples from the unit sphere of `H ⊕ H`.
    Random(usize),
    /// Explicit vectors of `[re, im]` pairs.
    Explicit(Vec<Vec<[f64; 2]>>),
}

impl AlphaSpec {
    pub fn resolve(&self, dim: usize, seed: u64) -> Result<Vec<Vector>> {
        match self {
            Self::Random(count) => Ok(unit_sphere_samples(2 * dim, *count, seed)),
            Self::Explicit(list) => list.iter().map(|v| vector_from_pairs(v, 2 * dim)).collect(),
        }
    }

    fn check(&self, dim: usize, path: &str) -> Result<()> {
        match self {
            Self::Random(0) => Err(parse_error(path, "at least one sample is required")),
            Self::Random(_) => Ok(()),
            Self::Explicit(list) if list.is_empty() => Err(parse_error(path, "at least one vector is required")),
            Self::Explicit(list) => {
                for (i, v) in list.iter().enumerate() {
                    vector_from_pairs(v, 2 * dim).map_err(|e| parse_error(&format!("{path}[{i}]"), e.to_string()))?;
                }
                Ok(())
            }
        }
    }
}

/// Builds a nonzero vector of length `len` from `[re, im]` pairs.
pub fn vector_from_pairs(pairs: &[[f64; 2]], len: usize) -> Result<Vector> {
    if pairs.len() != len {
        return Err(Error::DimensionMismatch { expected: len, actual: pairs.len() });
    }
    if pairs.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("vector entries must be finite".into()));
    }
    let v = Vector::from_iterator(len, pairs.iter().map(|p| Complex64::new(p[0], p[1])));
    if v.norm() == 0.0 {
        return Err(Error::InvalidInput("initial condition must be nonzero".into()));
    }
    Ok(v)
}

fn to_complex(z: [f64; 2]) -> Complex64 {
    Complex64::new(z[0], z[1])
}

/// Sequences whose total `N`-variation can be requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    /// `a_n⁻¹`.
    Inverse,
    /// `a_n⁻¹ b_n`.
    Potential,
    /// `a_n⁻¹ a_{n−1}*`.
    Ratio,
    /// `a_n / ‖a_n‖`.
    Direction,
}

fn default_eps() -> f64 {
    DEFAULT_DEFINITENESS_EPS
}

/// One requested analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisSpec {
    /// Invertibility of `a_n` and self-adjointness of `b_n` over an index range.
    Validate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        range: Option<(usize, usize)>,
    },
    /// `Σ 1/‖a_n‖` with a summability verdict.
    Carleman {},
    /// Total `N`-variation of a coefficient sequence.
    Variation {
        sequence: SequenceKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<(usize, usize)>,
    },
    /// Periodic limits `T, Q, R, C`.
    Limits {},
    /// Definiteness set of `λ ↦ F(λ)`.
    LambdaScan {
        range: (f64, f64),
        grid: usize,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default)]
        window: usize,
    },
    /// Definiteness set of `F(λ)` as the potential limits are scaled by `q/q_ref`.
    QScan {
        q_ref: f64,
        lambda: f64,
        range: (f64, f64),
        grid: usize,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    /// Two-sided bound on `‖a_n‖(‖u_{n−1}‖² + ‖u_n‖²)`.
    Band {
        z: Vec<[f64; 2]>,
        alphas: AlphaSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        burn_in: Option<usize>,
    },
    /// Limits of the `N`-shifted Turán determinants.
    TuranConvergence {
        z: Vec<[f64; 2]>,
        alphas: AlphaSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        burn_in: Option<usize>,
    },
    /// Weighted commutator functionals: limit form, summability conditions and lower bounds.
    Commutator {
        strategy: AlphaStrategy,
        lambdas: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alphas: Option<AlphaSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
    },
    /// Growth-regime hypothesis checks.
    #[serde(alias = "spec2")]
    Growth {},
    /// Log-envelope hypothesis checks.
    #[serde(alias = "spec3")]
    LogEnvelope { k: usize, n_start: usize },
    /// Complete indeterminacy versus the self-adjoint regime.
    Indeterminacy {
        z: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scan: Option<ScanSettings>,
    },
    /// Weighted quadratic trace against the Turán limit when the limits are trivial.
    ExactAsymptotics {
        z: [f64; 2],
        alphas: AlphaSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
    },
    /// Cesàro-type average of `⟨C u_k, u_k⟩`.
    Christoffel {
        z: [f64; 2],
        alpha: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
    },
}

impl AnalysisSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Validate { .. } => "validate",
            Self::Carleman {} => "carleman",
            Self::Variation { .. } => "variation",
            Self::Limits {} => "limits",
            Self::LambdaScan { .. } => "lambda_scan",
            Self::QScan { .. } => "q_scan",
            Self::Band { .. } => "band",
            Self::TuranConvergence { .. } => "turan_convergence",
            Self::Commutator { .. } => "commutator",
            Self::Growth {} => "growth",
            Self::LogEnvelope { .. } => "log_envelope",
            Self::Indeterminacy { .. } => "indeterminacy",
            Self::ExactAsymptotics { .. } => "exact_asymptotics",
            Self::Christoffel { .. } => "christoffel",
        }
    }

    fn needs_limits(&self) -> bool {
        matches!(
            self,
            Self::Limits {}
                | Self::LambdaScan { .. }
                | Self::QScan { .. }
                | Self::ExactAsymptotics { .. }
                | Self::Christoffel { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub family: FamilySpec,
    #[serde(default)]
    pub analyses: Vec<AnalysisSpec>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

fn parse_error(path: &str, message: impl Into<String>) -> Error {
    Error::Parse { path: path.into(), message: message.into() }
}

fn check_range(range: (f64, f64), path: &str) -> Result<()> {
    if !(range.0 < range.1) || !range.0.is_finite() || !range.1.is_finite() {
        return Err(parse_error(path, format!("range ({}, {}) must be finite and nonempty", range.0, range.1)));
    }
    Ok(())
}

fn check_grid(grid: usize, path: &str) -> Result<()> {
    if grid < 2 {
        return Err(parse_error(path, "grid must have at least 2 points"));
    }
    Ok(())
}

fn check_horizon(h: Option<usize>, path: &str) -> Result<()> {
    match h {
        Some(h) if h < MIN_HORIZON => Err(parse_error(path, format!("horizon must be at least {MIN_HORIZON}"))),
        _ => Ok(()),
    }
}

fn check_points(zs: &[[f64; 2]], path: &str) -> Result<()> {
    if zs.is_empty() {
        return Err(parse_error(path, "at least one point is required"));
    }
    if zs.iter().flatten().any(|x| !x.is_finite()) {
        return Err(parse_error(path, "points must be finite"));
    }
    Ok(())
}

impl AnalysisConfig {
    /// Semantic validation beyond the JSON schema.
    pub fn validate(&self) -> Result<()> {
        let d = self.family.dim;
        if d == 0 {
            return Err(parse_error("family.dim", "dimension must be at least 1"));
        }
        if self.family.period == 0 {
            return Err(parse_error("family.period", "period must be at least 1"));
        }
        if self.horizon < MIN_HORIZON {
            return Err(parse_error("horizon", format!("horizon must be at least {MIN_HORIZON}")));
        }
        self.family.build().map_err(|e| match e {
            Error::Parse { .. } => e,
            other => parse_error("family.coefficients", other.to_string()),
        })?;
        for (i, a) in self.analyses.iter().enumerate() {
            let p = |key: &str| format!("analyses[{i}].{key}");
            match a {
                AnalysisSpec::Validate { range: Some((lo, hi)) } if lo >= hi => {
                    return Err(parse_error(&p("range"), "range must be nonempty"));
                }
                AnalysisSpec::Variation { window: Some((lo, hi)), .. } if lo >= hi => {
                    return Err(parse_error(&p("window"), "window must be nonempty"));
                }
                AnalysisSpec::LambdaScan { range, grid, eps, window } => {
                    check_range(*range, &p("range"))?;
                    check_grid(*grid, &p("grid"))?;
                    if !(*eps > 0.0) {
                        return Err(parse_error(&p("eps"), "eps must be positive"));
                    }
                    if *window >= self.family.period {
                        return Err(parse_error(&p("window"), "window start must be below the period"));
                    }
                }
                AnalysisSpec::QScan { q_ref, lambda, range, grid, eps } => {
                    check_range(*range, &p("range"))?;
                    check_grid(*grid, &p("grid"))?;
                    if !(*eps > 0.0) {
                        return Err(parse_error(&p("eps"), "eps must be positive"));
                    }
                    if *q_ref == 0.0 || !q_ref.is_finite() || !lambda.is_finite() {
                        return Err(parse_error(&p("q_ref"), "q_ref must be finite and nonzero"));
                    }
                }
                AnalysisSpec::Band { z, alphas, horizon, .. }
                | AnalysisSpec::TuranConvergence { z, alphas, horizon, .. } => {
                    check_points(z, &p("z"))?;
                    alphas.check(d, &p("alphas"))?;
                    check_horizon(*horizon, &p("horizon"))?;
                }
                AnalysisSpec::Commutator { strategy, lambdas, alphas, horizon } => {
                    strategy.validate().map_err(|e| parse_error(&p("strategy"), e.to_string()))?;
                    if lambdas.is_empty() || lambdas.iter().any(|l| !l.is_finite()) {
                        return Err(parse_error(&p("lambdas"), "at least one finite λ is required"));
                    }
                    if let Some(alphas) = alphas {
                        alphas.check(d, &p("alphas"))?;
                    }
                    check_horizon(*horizon, &p("horizon"))?;
                }
                AnalysisSpec::LogEnvelope { k, n_start } => {
                    AlphaStrategy::LogWeights { k: *k, n_start: *n_start }
                        .validate()
                        .map_err(|e| parse_error(&p("k"), e.to_string()))?;
                }
                AnalysisSpec::Indeterminacy { z, scan } => {
                    check_points(z, &p("z"))?;
                    if let Some(s) = scan {
                        check_range(s.range, &p("scan.range"))?;
                        check_grid(s.grid, &p("scan.grid"))?;
                    }
                }
                AnalysisSpec::ExactAsymptotics { z, alphas, horizon } => {
                    check_points(&[*z], &p("z"))?;
                    alphas.check(d, &p("alphas"))?;
                    check_horizon(*horizon, &p("horizon"))?;
                }
                AnalysisSpec::Christoffel { z, alpha, horizon } => {
                    check_points(&[*z], &p("z"))?;
                    vector_from_pairs(alpha, 2 * d).map_err(|e| parse_error(&p("alpha"), e.to_string()))?;
                    check_horizon(*horizon, &p("horizon"))?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Pretty JSON text of the configuration.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }
}

/// Parses and validates a UTF-8 JSON configuration; errors carry the path of the offending key.
pub fn parse_config(text: &[u8]) -> Result<AnalysisConfig> {
    let text = std::str::from_utf8(text).map_err(|e| parse_error("$", format!("not UTF-8: {e}")))?;
    let mut de = serde_json::Deserializer::from_str(text);
    let config: AnalysisConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        parse_error(&path, e.into_inner().to_string())
    })?;
    de.end().map_err(|e| parse_error("$", e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Parses a standalone family specification.
pub fn parse_family(text: &[u8]) -> Result<FamilySpec> {
    let text = std::str::from_utf8(text).map_err(|e| parse_error("$", format!("not UTF-8: {e}")))?;
    let mut de = serde_json::Deserializer::from_str(text);
    let spec: FamilySpec = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| parse_error(&e.path().to_string(), e.into_inner().to_string()))?;
    if spec.dim == 0 {
        return Err(parse_error("dim", "dimension must be at least 1"));
    }
    spec.build()?;
    Ok(spec)
}

/// A plot-ready table exported as one CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn from_trace(name: impl Into<String>, trace: &Trace) -> Self {
        Self {
            name: name.into(),
            columns: vec!["n".into(), "value".into()],
            rows: trace.iter().map(|(n, v)| vec![n as f64, v]).collect(),
        }
    }

    pub fn from_lambda_set(name: impl Into<String>, set: &LambdaSet) -> Self {
        Self {
            name: name.into(),
            columns: vec!["param".into(), "min_eig".into(), "max_eig".into()],
            rows: set.samples.iter().map(|s| vec![s.param, s.min_eig, s.max_eig]).collect(),
        }
    }

    pub fn from_trajectory(name: impl Into<String>, traj: &Trajectory) -> Self {
        let d = traj.u.first().map_or(0, |u| u.len());
        let mut columns = vec!["n".to_string()];
        for k in 0..d {
            columns.push(format!("re_u{k}"));
            columns.push(format!("im_u{k}"));
        }
        columns.push("norm".into());
        let rows = traj
            .u
            .iter()
            .enumerate()
            .map(|(n, u)| {
                let mut row = vec![n as f64];
                for c in u.iter() {
                    row.push(c.re);
                    row.push(c.im);
                }
                row.push(u.norm());
                row
            })
            .collect();
        Self { name: name.into(), columns, rows }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOutcome {
    pub analysis: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    /// Names of the tables exported for this analysis.
    pub tables: Vec<String>,
    pub wall_time_ms: f64,
    #[serde(skip)]
    pub data: Vec<Table>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool: String,
    pub version: String,
    pub config: AnalysisConfig,
    pub results: Vec<AnalysisOutcome>,
    pub wall_time_ms: f64,
}

impl AnalysisReport {
    /// Report JSON with every `wall_time_ms` field removed (the deterministic part).
    pub fn deterministic_json(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        strip_wall_times(&mut v);
        v
    }

    pub fn outcome(&self, analysis: &str) -> Option<&AnalysisOutcome> {
        self.results.iter().find(|o| o.analysis == analysis)
    }
}

fn strip_wall_times(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wall_time_ms");
            map.values_mut().for_each(strip_wall_times);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_wall_times),
        _ => {}
    }
}

struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Self(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.0.elapsed().as_secs_f64() * 1e3
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("analysis results serialize")
}

/// Context shared by the analyses of one run.
struct Runner<'a> {
    config: &'a AnalysisConfig,
    fam: CoefficientFamily,
    limits: Option<Result<PeriodicLimitData>>,
}

impl Runner<'_> {
    fn limits(&mut self) -> Result<PeriodicLimitData> {
        if self.limits.is_none() {
            self.limits = Some(extract_periodic_limits(&self.fam, self.config.family.period, self.config.horizon));
        }
        self.limits.clone().expect("limits computed")
    }

    fn converged_limits(&mut self) -> Result<PeriodicLimitData> {
        let lim = self.limits()?;
        lim.require_converged()?;
        Ok(lim)
    }

    fn seed(&self, index: usize) -> u64 {
        self.config.seed.wrapping_add(index as u64)
    }

    fn run_one(&mut self, index: usize, spec: &AnalysisSpec) -> Result<(Value, Vec<Table>)> {
        let fam = self.fam.clone();
        let fam = &fam;
        let d = fam.dim();
        let period = self.config.family.period;
        let horizon = self.config.horizon;
        match spec {
            AnalysisSpec::Validate { range } => {
                let (lo, hi) = range.unwrap_or((0, horizon));
                let violations = validate_family(fam, lo..hi);
                Ok((json!({ "range": [lo, hi], "violations": violations }), Vec::new()))
            }
            AnalysisSpec::Carleman {} => {
                let rep = carleman_diagnostic(fam, horizon)?;
                Ok((to_value(&rep), Vec::new()))
            }
            AnalysisSpec::Variation { sequence, window } => {
                let (lo, hi) = window.unwrap_or((1, horizon - period));
                let rep = match sequence {
                    SequenceKind::Inverse => total_variation(|n| fam.a_inv(n), period, lo..hi)?,
                    SequenceKind::Potential => total_variation(|n| fam.potential_term(n), period, lo..hi)?,
                    SequenceKind::Ratio => total_variation(|n| fam.ratio_term(n), period, lo.max(1)..hi)?,
                    SequenceKind::Direction => total_variation(|n| fam.direction_term(n), period, lo..hi)?,
                };
                Ok((to_value(&rep), Vec::new()))
            }
            AnalysisSpec::Limits {} => {
                let lim = self.limits()?;
                Ok((to_value(&lim), Vec::new()))
            }
            AnalysisSpec::LambdaScan { range, grid, eps, window } => {
                let lim = self.converged_limits()?;
                let set = lambda_scan_window(&lim, *window, *range, *grid, *eps)?;
                let table = Table::from_lambda_set("lambda_samples", &set);
                Ok((to_value(&set), vec![table]))
            }
            AnalysisSpec::QScan { q_ref, lambda, range, grid, eps } => {
                let lim = self.converged_limits()?;
                let set = q_scan(&lim, *q_ref, *lambda, *range, *grid, *eps)?;
                let table = Table::from_lambda_set("q_samples", &set);
                Ok((to_value(&set), vec![table]))
            }
            AnalysisSpec::Band { z, alphas, horizon: h, burn_in } => {
                let alphas = alphas.resolve(d, self.seed(index))?;
                let (h, burn) = (h.unwrap_or(horizon), burn_in.unwrap_or(DEFAULT_BURN_IN));
                let mut out = Vec::new();
                let mut tables = Vec::new();
                for (zi, z) in z.iter().enumerate() {
                    let rep = asymptotic_band(fam, to_complex(*z), &alphas, h, burn)?;
                    for (ai, t) in rep.traces.iter().enumerate() {
                        tables.push(Table::from_trace(format!("band_z{zi}_alpha{ai}"), t));
                    }
                    out.push(json!({
                        "z": z, "c1": rep.c1, "c2": rep.c2, "ratio": rep.ratio,
                        "burn_in": rep.burn_in, "horizon": rep.horizon, "overflow": rep.overflow,
                    }));
                }
                Ok((Value::Array(out), tables))
            }
            AnalysisSpec::TuranConvergence { z, alphas, horizon: h, burn_in } => {
                let alphas = alphas.resolve(d, self.seed(index))?;
                let (h, burn) = (h.unwrap_or(horizon), burn_in.unwrap_or(DEFAULT_BURN_IN));
                let mut out = Vec::new();
                let mut tables = Vec::new();
                for (zi, z) in z.iter().enumerate() {
                    let rep = turan_convergence(fam, period, to_complex(*z), &alphas, h, burn)?;
                    for (ai, t) in rep.traces.iter().enumerate() {
                        tables.push(Table::from_trace(format!("turan_z{zi}_alpha{ai}"), t));
                    }
                    out.push(json!({
                        "z": z, "limits": rep.limits, "all_converged": rep.all_converged,
                        "min_abs_g": rep.min_abs_g, "max_abs_g": rep.max_abs_g, "rate": rep.rate,
                    }));
                }
                Ok((Value::Array(out), tables))
            }
            AnalysisSpec::Commutator { strategy, lambdas, alphas, horizon: h } => {
                let h = h.unwrap_or(horizon);
                let conditions = weighted_conditions(fam, strategy, h)?;
                let mut tables: Vec<Table> = conditions
                    .conditions
                    .iter()
                    .map(|c| Table::from_trace(format!("condition_{}", c.label), &c.trace))
                    .collect();
                let alphas = match alphas {
                    Some(a) => a.resolve(d, self.seed(index))?,
                    None => Vec::new(),
                };
                let mut per_lambda = Vec::new();
                for (li, &lambda) in lambdas.iter().enumerate() {
                    let limit = match c_limit(fam, strategy, lambda, h) {
                        Ok(l) => to_value(&l),
                        Err(e) => json!({ "error": e.to_string() }),
                    };
                    let mut bounds = Vec::new();
                    for (ai, alpha) in alphas.iter().enumerate() {
                        let traj = propagate(fam, Complex64::new(lambda, 0.0), alpha, h)?;
                        let rep = eigenvector_lower_bound(fam, strategy, &traj)?;
                        tables.push(Table::from_trace(format!("s_lambda{li}_alpha{ai}"), &rep.s));
                        bounds.push(json!({
                            "tail_min_s": rep.tail_min_s,
                            "tail_min_weighted_norm": rep.tail_min_weighted_norm,
                        }));
                    }
                    per_lambda.push(json!({ "lambda": lambda, "c_limit": limit, "lower_bounds": bounds }));
                }
                let conditions_json: Vec<Value> = conditions
                    .conditions
                    .iter()
                    .map(|c| {
                        json!({
                            "label": c.label, "description": c.description, "expected": c.expected,
                            "series": c.series, "holds": c.holds,
                        })
                    })
                    .collect();
                Ok((
                    json!({
                        "strategy": strategy,
                        "conditions": conditions_json,
                        "all_hold": conditions.all_hold,
                        "lambdas": per_lambda,
                    }),
                    tables,
                ))
            }
            AnalysisSpec::Growth {} => {
                let rep = check_growth(fam, horizon)?;
                let tables = [&rep.positivity_defect, &rep.commutator_defect, &rep.carleman_squared]
                    .iter()
                    .map(|c| Table::from_trace(format!("condition_{}", c.label), &c.trace))
                    .collect();
                Ok((strip_traces(to_value(&rep)), tables))
            }
            AnalysisSpec::LogEnvelope { k, n_start } => {
                let rep = check_log_envelope(fam, *k, *n_start, horizon)?;
                let tables = [&rep.envelope_slack, &rep.potential_variation, &rep.inverse_over_n]
                    .iter()
                    .map(|c| Table::from_trace(format!("condition_{}", c.label), &c.trace))
                    .collect();
                Ok((strip_traces(to_value(&rep)), tables))
            }
            AnalysisSpec::Indeterminacy { z, scan } => {
                let zs: Vec<Complex64> = z.iter().copied().map(to_complex).collect();
                let verdict = indeterminacy_probe(fam, period, &zs, horizon, scan.unwrap_or_default())?;
                Ok((to_value(&verdict), Vec::new()))
            }
            AnalysisSpec::ExactAsymptotics { z, alphas, horizon: h } => {
                let lim = self.converged_limits()?;
                let alphas = alphas.resolve(d, self.seed(index))?;
                let rep = exact_asymptotics(fam, &lim, to_complex(*z), &alphas, h.unwrap_or(horizon))?;
                let mut tables = Vec::new();
                for (ai, (s, w)) in rep.turan_traces.iter().zip(&rep.weighted_traces).enumerate() {
                    tables.push(Table::from_trace(format!("turan_alpha{ai}"), s));
                    tables.push(Table::from_trace(format!("weighted_alpha{ai}"), w));
                }
                let value = json!({
                    "c_hermitian": rep.c_hermitian, "c_deviation": rep.c_deviation, "c": rep.c,
                    "samples": rep.samples, "max_relative_difference": rep.max_relative_difference,
                });
                Ok((value, tables))
            }
            AnalysisSpec::Christoffel { z, alpha, horizon: h } => {
                let lim = self.converged_limits()?;
                let alpha = vector_from_pairs(alpha, 2 * d)?;
                let traj = propagate(fam, to_complex(*z), &alpha, h.unwrap_or(horizon))?;
                let rep = christoffel_limit(fam, &lim.c[0], &traj)?;
                let table = Table::from_trace("christoffel_ratio", &rep.ratios);
                Ok((json!({ "limit": rep.limit, "carleman": rep.carleman }), vec![table]))
            }
        }
    }
}

/// Removes `trace` members (exported separately as tables) from a JSON value.
fn strip_traces(mut v: Value) -> Value {
    fn walk(v: &mut Value) {
        match v {
            Value::Object(map) => {
                map.remove("trace");
                map.values_mut().for_each(walk);
            }
            Value::Array(items) => items.iter_mut().for_each(walk),
            _ => {}
        }
    }
    walk(&mut v);
    v
}

/// Executes the analyses in order. Fails only when the family itself is invalid over
/// `[0, horizon)`; individual analysis failures are recorded in the report.
pub fn run(config: &AnalysisConfig) -> Result<AnalysisReport> {
    let total = Stopwatch::start();
    config.validate()?;
    let fam = config.family.build()?;
    let violations: Vec<Violation> = validate_family(&fam, 0..config.horizon);
    if let Some(first) = violations.first() {
        return Err(Error::InvalidInput(format!(
            "family fails validation at {} indices; first at n = {}: {:?} ({})",
            violations.len(),
            first.index,
            first.kind,
            first.detail
        )));
    }
    let mut runner = Runner { config, fam, limits: None };
    // Limits first, so that every dependent analysis sees the same extraction.
    if config.analyses.iter().any(AnalysisSpec::needs_limits) {
        let _ = runner.limits();
    }
    let mut results = Vec::with_capacity(config.analyses.len());
    for (index, spec) in config.analyses.iter().enumerate() {
        let watch = Stopwatch::start();
        let outcome = match runner.run_one(index, spec) {
            Ok((result, data)) => AnalysisOutcome {
                analysis: spec.name().into(),
                status: Status::Ok,
                error: None,
                result: Some(result),
                tables: data.iter().map(|t| t.name.clone()).collect(),
                wall_time_ms: watch.elapsed_ms(),
                data,
            },
            Err(e) => AnalysisOutcome {
                analysis: spec.name().into(),
                status: Status::Failed,
                error: Some(e.to_string()),
                result: None,
                tables: Vec::new(),
                wall_time_ms: watch.elapsed_ms(),
                data: Vec::new(),
            },
        };
        results.push(outcome);
    }
    Ok(AnalysisReport {
        tool: "blockjacobi".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        results,
        wall_time_ms: total.elapsed_ms(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Writes the report into `dir`: `report.json` for [`OutputFormat::Json`]; for
/// [`OutputFormat::Csv`] one `NN_<analysis>_<table>.csv` per table plus `index.csv`
/// (`position,analysis,status,error,file`). Returns the written paths.
pub fn emit(report: &AnalysisReport, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        OutputFormat::Json => {
            let path = dir.join("report.json");
            let text = serde_json::to_string_pretty(report).expect("report serializes");
            fs::write(&path, text + "\n")?;
            written.push(path);
        }
        OutputFormat::Csv => {
            let index_path = dir.join("index.csv");
            let mut index = csv::Writer::from_path(&index_path).map_err(|e| Error::Io(e.to_string()))?;
            let io = |e: csv::Error| Error::Io(e.to_string());
            index.write_record(["position", "analysis", "status", "error", "file"]).map_err(io)?;
            for (i, outcome) in report.results.iter().enumerate() {
                let status = match outcome.status {
                    Status::Ok => "ok",
                    Status::Failed => "failed",
                };
                let error = outcome.error.clone().unwrap_or_default();
                if outcome.data.is_empty() {
                    index.write_record([&i.to_string(), &outcome.analysis, status, &error, ""]).map_err(io)?;
                }
                for table in &outcome.data {
                    let name = format!("{i:02}_{}_{}.csv", outcome.analysis, table.name);
                    let path = dir.join(&name);
                    table.write_csv(fs::File::create(&path)?)?;
                    index.write_record([&i.to_string(), &outcome.analysis, status, &error, &name]).map_err(io)?;
                    written.push(path);
                }
            }
            index.flush()?;
            written.push(index_path);
        }
    }
    Ok(written)
}

fn x_matrix() -> Operator {
    Operator::from_real_rows(&[[1.0, 1.0], [1.0, 2.0]])
}

fn y_matrix() -> Operator {
    Operator::from_real_rows(&[[2.0, 1.0], [1.0, 1.0]])
}

/// Built-in fixtures: `(name, summary)`.
pub const FIXTURES: &[(&str, &str)] = &[
    ("paper-constant", "constant a = [[1,1],[1,2]], b = [[2,1],[1,1]]; Λ-scan, band and Turán limits at λ = 1"),
    ("paper-unbounded", "a_n = (n+1)X, b_n = 0.5(n+1)Y; limits, Λ-scan and q-band"),
    ("paper-blockrepeat", "a_n = x_n X, b_n = y_n Y with block-repeated k√log(k+1), 1/(k log(k+1)); growth checks"),
    ("paper-logweight", "a_n = (n+3)log(n+3) X, b_n = Y/log(n+3); log-envelope checks and log weights"),
    ("geometric", "a_n = 2ⁿ X, b_n = 0; complete indeterminacy"),
    ("sqrt-growth", "a_n = √(n+1) X, b_n = 0; exact asymptotics and Christoffel limit at λ = 0"),
];

fn scaled(x: ScalarWeight, y: ScalarWeight, description: &str) -> FamilySpec {
    FamilySpec {
        dim: 2,
        period: 1,
        description: Some(description.into()),
        coefficients: CoefficientSpec::ScaledPeriodic { x, y, xs: vec![x_matrix()], ys: vec![y_matrix()] },
    }
}

/// The configuration of a built-in fixture.
pub fn fixture(name: &str) -> Option<AnalysisConfig> {
    let summary = FIXTURES.iter().find(|(n, _)| *n == name)?.1;
    let config = match name {
        "paper-constant" => AnalysisConfig {
            family: FamilySpec {
                dim: 2,
                period: 1,
                description: Some(summary.into()),
                coefficients: CoefficientSpec::Constant { a: x_matrix(), b: y_matrix() },
            },
            analyses: vec![
                AnalysisSpec::Validate { range: None },
                AnalysisSpec::Carleman {},
                AnalysisSpec::Limits {},
                AnalysisSpec::LambdaScan { range: (-5.0, 10.0), grid: 301, eps: DEFAULT_DEFINITENESS_EPS, window: 0 },
                AnalysisSpec::Band { z: vec![[1.0, 0.0]], alphas: AlphaSpec::Random(20), horizon: None, burn_in: None },
                AnalysisSpec::TuranConvergence {
                    z: vec![[1.0, 0.0]],
                    alphas: AlphaSpec::Random(20),
                    horizon: None,
                    burn_in: None,
                },
            ],
            horizon: 5000,
            seed: 0,
            out_dir: None,
        },
        "paper-unbounded" => AnalysisConfig {
            family: scaled(ScalarWeight::power(1.0, 1.0), ScalarWeight::scaled(WeightKind::Power { exponent: 1.0, offset: 1.0 }, 0.5), summary),
            analyses: vec![
                AnalysisSpec::Carleman {},
                AnalysisSpec::Limits {},
                AnalysisSpec::LambdaScan { range: (-10.0, 10.0), grid: 201, eps: DEFAULT_DEFINITENESS_EPS, window: 0 },
                AnalysisSpec::QScan {
                    q_ref: 0.5,
                    lambda: 0.0,
                    range: (-1.5, 1.5),
                    grid: 301,
                    eps: DEFAULT_DEFINITENESS_EPS,
                },
            ],
            horizon: 5000,
            seed: 0,
            out_dir: None,
        },
        "paper-blockrepeat" => AnalysisConfig {
            family: scaled(
                ScalarWeight::new(WeightKind::BlockRepeatedSqrtLog),
                ScalarWeight::new(WeightKind::BlockRepeatedInvLog),
                summary,
            ),
            analyses: vec![
                AnalysisSpec::Carleman {},
                AnalysisSpec::Growth {},
                AnalysisSpec::Commutator {
                    strategy: AlphaStrategy::AnWeights,
                    lambdas: vec![0.0],
                    alphas: None,
                    horizon: None,
                },
            ],
            horizon: 100_000,
            seed: 0,
            out_dir: None,
        },
        "paper-logweight" => AnalysisConfig {
            family: scaled(
                ScalarWeight::new(WeightKind::LogProduct { k: 1, offset: 3.0 }),
                ScalarWeight::new(WeightKind::ReciprocalLogProduct { k: 1, offset: 3.0 }),
                summary,
            ),
            analyses: vec![
                AnalysisSpec::LogEnvelope { k: 1, n_start: 3 },
                AnalysisSpec::Commutator {
                    strategy: AlphaStrategy::LogWeights { k: 1, n_start: 3 },
                    lambdas: vec![-1.0, 0.0, 1.0],
                    alphas: Some(AlphaSpec::Random(4)),
                    horizon: None,
                },
            ],
            horizon: 20_000,
            seed: 0,
            out_dir: None,
        },
        "geometric" => AnalysisConfig {
            family: FamilySpec {
                dim: 2,
                period: 1,
                description: Some(summary.into()),
                coefficients: CoefficientSpec::ScaledPeriodic {
                    x: ScalarWeight::new(WeightKind::Geometric { ratio: 2.0 }),
                    y: ScalarWeight::constant(0.0),
                    xs: vec![x_matrix()],
                    ys: vec![Operator::zeros(2)],
                },
            },
            analyses: vec![
                AnalysisSpec::Carleman {},
                AnalysisSpec::Indeterminacy { z: vec![[0.0, 1.0], [0.0, -1.0], [0.0, 0.0], [1.0, 1.0]], scan: None },
            ],
            horizon: 200,
            seed: 0,
            out_dir: None,
        },
        "sqrt-growth" => AnalysisConfig {
            family: FamilySpec {
                dim: 2,
                period: 1,
                description: Some(summary.into()),
                coefficients: CoefficientSpec::ScaledPeriodic {
                    x: ScalarWeight::power(0.5, 1.0),
                    y: ScalarWeight::constant(0.0),
                    xs: vec![x_matrix()],
                    ys: vec![Operator::zeros(2)],
                },
            },
            analyses: vec![
                AnalysisSpec::Limits {},
                AnalysisSpec::ExactAsymptotics { z: [0.0, 0.0], alphas: AlphaSpec::Random(3), horizon: None },
                AnalysisSpec::Christoffel {
                    z: [0.0, 0.0],
                    alpha: vec![[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]],
                    horizon: None,
                },
            ],
            horizon: 100_000,
            seed: 0,
            out_dir: None,
        },
        _ => return None,
    };
    Some(config)
}

/// Resolves a family argument: a fixture name, or a path to a JSON file holding either a full
/// configuration or a bare family specification.
pub fn resolve_family(arg: &str) -> Result<FamilySpec> {
    if let Some(config) = fixture(arg) {
        return Ok(config.family);
    }
    let text = fs::read(arg).map_err(|e| Error::Io(format!("{arg}: {e}")))?;
    let value: Value = serde_json::from_slice(&text).map_err(|e| parse_error("$", e.to_string()))?;
    if value.get("family").is_some() {
        Ok(parse_config(&text)?.family)
    } else {
        parse_family(&text)
    }
}
