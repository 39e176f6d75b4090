//! Coefficient families `(a_n, b_n)`, scalar weight sequences and sequence diagnostics.

use std::fmt;
use std::ops::Range;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opcore::{invert_with_condition, op_norm, Operator, HERMITIAN_TOL};

/// Default analysis horizon.
pub const DEFAULT_HORIZON: usize = 10_000;
/// Indices above this are computed on demand without being memoized.
const CACHE_LIMIT: usize = 1 << 19;

/// `log^{(i)}(x)`: the `i`-fold iterated natural logarithm.
pub fn iter_log(i: usize, x: f64) -> Result<f64> {
    let mut v = x;
    for step in 0..i {
        if !(v > 0.0) {
            return Err(Error::Domain(format!(
                "iterated logarithm undefined: log^({step})({x}) = {v} is not positive"
            )));
        }
        v = v.ln();
    }
    if i > 0 && !(v > 0.0) {
        return Err(Error::Domain(format!("log^({i})({x}) = {v} is not positive")));
    }
    Ok(v)
}

/// `g_j(x) = ∏_{i=1}^{j} log^{(i)}(x)`, with `g_0 = 1`.
pub fn g_product(j: usize, x: f64) -> Result<f64> {
    let mut prod = 1.0;
    let mut v = x;
    for i in 1..=j {
        if !(v > 0.0) {
            return Err(Error::Domain(format!("log^({})({x}) undefined", i - 1)));
        }
        v = v.ln();
        if !(v > 0.0) {
            return Err(Error::Domain(format!("log^({i})({x}) = {v} is not positive")));
        }
        prod *= v;
    }
    Ok(prod)
}

/// Block index `k ≥ 1` of position `n` in a sequence whose `k`th block has length `k`.
///
/// Block `k` covers `[k(k−1)/2, k(k+1)/2)`.
pub fn repeat_block(n: usize) -> usize {
    let mut k = ((1.0 + (1.0 + 8.0 * n as f64).sqrt()) / 2.0).floor() as usize;
    while k * (k - 1) / 2 > n {
        k -= 1;
    }
    while (k + 1) * k / 2 <= n {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightKind {
    /// `(n + offset)^exponent`.
    Power { exponent: f64, offset: f64 },
    /// `ratio^n`.
    Geometric { ratio: f64 },
    /// `k √log(k+1)` repeated over the `k`th block of length `k`.
    BlockRepeatedSqrtLog,
    /// `1 / (k log(k+1))` repeated over the `k`th block of length `k`.
    BlockRepeatedInvLog,
    /// `(n + offset) g_K(n + offset)`.
    LogProduct { k: usize, offset: f64 },
    /// `1 / log^{(K)}(n + offset)`.
    ReciprocalLogProduct { k: usize, offset: f64 },
    /// `(−1)^n`.
    Alternating,
    /// Explicit values; evaluation beyond the table is an error.
    Tabulated { values: Vec<f64> },
    Constant { value: f64 },
}

/// A real sequence `n ↦ scale · kind(n)`.
///
/// Serialized as the weight-kind object with an optional extra `scale` key; other unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value")]
pub struct ScalarWeight {
    #[serde(flatten)]
    pub kind: WeightKind,
    #[serde(skip_serializing_if = "is_unit_scale")]
    pub scale: f64,
}

fn is_unit_scale(s: &f64) -> bool {
    *s == 1.0
}

impl TryFrom<serde_json::Value> for ScalarWeight {
    type Error = String;

    fn try_from(value: serde_json::Value) -> std::result::Result<Self, String> {
        let serde_json::Value::Object(mut map) = value else {
            return Err("weight must be an object with a `kind` key".into());
        };
        let scale = match map.remove("scale") {
            None => 1.0,
            Some(v) => v.as_f64().ok_or("weight `scale` must be a number")?,
        };
        let kind = serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| e.to_string())?;
        Ok(Self { kind, scale })
    }
}

impl From<WeightKind> for ScalarWeight {
    fn from(kind: WeightKind) -> Self {
        Self { kind, scale: 1.0 }
    }
}

impl ScalarWeight {
    pub fn new(kind: WeightKind) -> Self {
        kind.into()
    }

    pub fn scaled(kind: WeightKind, scale: f64) -> Self {
        Self { kind, scale }
    }

    pub fn power(exponent: f64, offset: f64) -> Self {
        WeightKind::Power { exponent, offset }.into()
    }

    pub fn constant(value: f64) -> Self {
        WeightKind::Constant { value }.into()
    }

    /// Checks the parameter constraints of the weight kind.
    pub fn validate(&self) -> Result<()> {
        if !self.scale.is_finite() {
            return Err(Error::InvalidInput("weight scale must be finite".into()));
        }
        match &self.kind {
            WeightKind::Power { exponent, offset } => {
                if !(*exponent > 0.0) || !(*offset >= 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "power weight needs exponent > 0 and offset >= 1, got ({exponent}, {offset})"
                    )));
                }
            }
            WeightKind::Geometric { ratio } => {
                if !(*ratio > 0.0) {
                    return Err(Error::InvalidInput(format!("geometric ratio must be positive, got {ratio}")));
                }
            }
            WeightKind::LogProduct { k, offset } | WeightKind::ReciprocalLogProduct { k, offset } => {
                if *k == 0 {
                    return Err(Error::InvalidInput("log-product order must be positive".into()));
                }
                iter_log(*k, *offset)?;
            }
            WeightKind::Tabulated { values } => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput("tabulated weights must be finite".into()));
                }
            }
            WeightKind::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidInput("constant weight must be finite".into()));
                }
            }
            WeightKind::BlockRepeatedSqrtLog | WeightKind::BlockRepeatedInvLog | WeightKind::Alternating => {}
        }
        Ok(())
    }

    pub fn eval(&self, n: usize) -> Result<f64> {
        let nf = n as f64;
        let raw = match &self.kind {
            WeightKind::Power { exponent, offset } => (nf + offset).powf(*exponent),
            WeightKind::Geometric { ratio } => ratio.powi(n as i32),
            WeightKind::BlockRepeatedSqrtLog => {
                let k = repeat_block(n) as f64;
                k * (k + 1.0).ln().sqrt()
            }
            WeightKind::BlockRepeatedInvLog => {
                let k = repeat_block(n) as f64;
                1.0 / (k * (k + 1.0).ln())
            }
            WeightKind::LogProduct { k, offset } => (nf + offset) * g_product(*k, nf + offset)?,
            WeightKind::ReciprocalLogProduct { k, offset } => 1.0 / iter_log(*k, nf + offset)?,
            WeightKind::Alternating => {
                if n % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            WeightKind::Tabulated { values } => {
                *values.get(n).ok_or(Error::IndexOutOfRange { index: n, len: values.len() })?
            }
            WeightKind::Constant { value } => *value,
        };
        Ok(self.scale * raw)
    }
}

/// Coefficients at a single index together with derived quantities.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub a: Operator,
    pub b: Operator,
    pub a_inv: Operator,
    pub a_norm: f64,
    pub a_cond: f64,
}

pub type CoefficientFn = dyn Fn(usize) -> Result<(Operator, Operator)> + Send + Sync;

#[derive(Clone)]
pub enum FamilyKind {
    Constant { a: Operator, b: Operator },
    /// `a_n = x_n X_{n mod N}`, `b_n = y_n Y_{n mod N}`.
    ScaledPeriodic { x: ScalarWeight, y: ScalarWeight, xs: Vec<Operator>, ys: Vec<Operator> },
    Tabulated { a: Vec<Operator>, b: Vec<Operator> },
    Custom(Arc<CoefficientFn>),
}

impl fmt::Debug for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { a, b } => f.debug_struct("Constant").field("a", a).field("b", b).finish(),
            Self::ScaledPeriodic { x, y, xs, ys } => f
                .debug_struct("ScaledPeriodic")
                .field("x", x)
                .field("y", y)
                .field("xs", xs)
                .field("ys", ys)
                .finish(),
            Self::Tabulated { a, .. } => f.debug_struct("Tabulated").field("len", &a.len()).finish(),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Generator of the Jacobi parameters `(a_n)` and `(b_n)`, memoized on demand.
pub struct CoefficientFamily {
    dim: usize,
    description: String,
    kind: FamilyKind,
    cache: RwLock<Vec<Arc<Coefficients>>>,
}

impl fmt::Debug for CoefficientFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientFamily")
            .field("dim", &self.dim)
            .field("description", &self.description)
            .field("kind", &self.kind)
            .finish()
    }
}

impl Clone for CoefficientFamily {
    fn clone(&self) -> Self {
        Self { dim: self.dim, description: self.description.clone(), kind: self.kind.clone(), cache: RwLock::default() }
    }
}

fn check_dims<'a>(dim: usize, ops: impl IntoIterator<Item = &'a Operator>) -> Result<()> {
    for op in ops {
        if op.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: op.dim() });
        }
    }
    Ok(())
}

impl CoefficientFamily {
    pub fn constant(a: Operator, b: Operator) -> Result<Self> {
        let dim = a.dim();
        check_dims(dim, [&b])?;
        Ok(Self::build(dim, "constant coefficients".into(), FamilyKind::Constant { a, b }))
    }

    pub fn scaled_periodic(x: ScalarWeight, y: ScalarWeight, xs: Vec<Operator>, ys: Vec<Operator>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidInput(format!(
                "periodic operator lists must be non-empty and of equal length, got {} and {}",
                xs.len(),
                ys.len()
            )));
        }
        x.validate()?;
        y.validate()?;
        let dim = xs[0].dim();
        check_dims(dim, xs.iter().chain(ys.iter()))?;
        let description = format!("scaled {}-periodic coefficients", xs.len());
        Ok(Self::build(dim, description, FamilyKind::ScaledPeriodic { x, y, xs, ys }))
    }

    pub fn tabulated(a: Vec<Operator>, b: Vec<Operator>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::InvalidInput("tabulated a and b must be non-empty and of equal length".into()));
        }
        let dim = a[0].dim();
        check_dims(dim, a.iter().chain(b.iter()))?;
        Ok(Self::build(dim, format!("tabulated coefficients ({} terms)", a.len()), FamilyKind::Tabulated { a, b }))
    }

    pub fn custom(
        dim: usize,
        description: impl Into<String>,
        f: impl Fn(usize) -> Result<(Operator, Operator)> + Send + Sync + 'static,
    ) -> Self {
        Self::build(dim, description.into(), FamilyKind::Custom(Arc::new(f)))
    }

    fn build(dim: usize, description: String, kind: FamilyKind) -> Self {
        Self { dim, description, kind, cache: RwLock::default() }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    /// Length of the available index range, if finite.
    pub fn len_limit(&self) -> Option<usize> {
        match &self.kind {
            FamilyKind::Tabulated { a, .. } => Some(a.len()),
            _ => None,
        }
    }

    /// Raw `(a_n, b_n)` without inversion or validity checks.
    pub fn raw(&self, n: usize) -> Result<(Operator, Operator)> {
        let (a, b) = match &self.kind {
            FamilyKind::Constant { a, b } => (a.clone(), b.clone()),
            FamilyKind::ScaledPeriodic { x, y, xs, ys } => {
                let j = n % xs.len();
                (xs[j].scale_real(x.eval(n)?), ys[j].scale_real(y.eval(n)?))
            }
            FamilyKind::Tabulated { a, b } => {
                let len = a.len();
                let err = Error::IndexOutOfRange { index: n, len };
                (a.get(n).ok_or(err.clone())?.clone(), b.get(n).ok_or(err)?.clone())
            }
            FamilyKind::Custom(f) => f(n)?,
        };
        check_dims(self.dim, [&a, &b])?;
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFiniteCoefficient { index: n });
        }
        Ok((a, b))
    }

    fn compute(&self, n: usize) -> Result<Coefficients> {
        let (a, b) = self.raw(n)?;
        let (a_inv, a_cond) = invert_with_condition(&a).map_err(|e| match e {
            Error::Singular { condition } => Error::SingularCoefficient { index: n, condition },
            other => other,
        })?;
        let a_norm = op_norm(&a);
        Ok(Coefficients { a, b, a_inv, a_norm, a_cond })
    }

    /// Memoized coefficients at index `n`.
    pub fn coeffs(&self, n: usize) -> Result<Arc<Coefficients>> {
        if let Some(c) = self.cache.read().expect("coefficient cache poisoned").get(n) {
            return Ok(Arc::clone(c));
        }
        if n >= CACHE_LIMIT {
            return self.compute(n).map(Arc::new);
        }
        let mut cache = self.cache.write().expect("coefficient cache poisoned");
        while cache.len() <= n {
            let next = cache.len();
            cache.push(Arc::new(self.compute(next)?));
        }
        Ok(Arc::clone(&cache[n]))
    }

    pub fn a(&self, n: usize) -> Result<Operator> {
        Ok(self.coeffs(n)?.a.clone())
    }

    pub fn b(&self, n: usize) -> Result<Operator> {
        Ok(self.coeffs(n)?.b.clone())
    }

    pub fn a_inv(&self, n: usize) -> Result<Operator> {
        Ok(self.coeffs(n)?.a_inv.clone())
    }

    pub fn a_norm(&self, n: usize) -> Result<f64> {
        Ok(self.coeffs(n)?.a_norm)
    }

    /// `a_n⁻¹ a_{n−1}*` for `n ≥ 1`.
    pub fn ratio_term(&self, n: usize) -> Result<Operator> {
        if n == 0 {
            return Err(Error::InvalidInput("a_n⁻¹ a_(n−1)* needs n ≥ 1".into()));
        }
        let prev = self.coeffs(n - 1)?;
        Ok(&self.coeffs(n)?.a_inv * &prev.a.adjoint())
    }

    /// `a_n⁻¹ b_n`.
    pub fn potential_term(&self, n: usize) -> Result<Operator> {
        let c = self.coeffs(n)?;
        Ok(&c.a_inv * &c.b)
    }

    /// `a_n / ‖a_n‖`.
    pub fn direction_term(&self, n: usize) -> Result<Operator> {
        let c = self.coeffs(n)?;
        Ok(c.a.scale_real(1.0 / c.a_norm))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    SingularA,
    NonHermitianB,
    NonFinite,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

/// Checks invertibility of every `a_n` and self-adjointness of every `b_n` on `range`.
pub fn validate_family(fam: &CoefficientFamily, range: Range<usize>) -> Vec<Violation> {
    let mut out = Vec::new();
    for n in range {
        let (a, b) = match fam.raw(n) {
            Ok(pair) => pair,
            Err(Error::NonFiniteCoefficient { .. }) => {
                out.push(Violation { index: n, kind: ViolationKind::NonFinite, detail: "non-finite entries".into() });
                continue;
            }
            Err(e) => {
                out.push(Violation { index: n, kind: ViolationKind::Unavailable, detail: e.to_string() });
                continue;
            }
        };
        if let Err(e) = invert_with_condition(&a) {
            out.push(Violation { index: n, kind: ViolationKind::SingularA, detail: e.to_string() });
        }
        let deviation = b.hermitian_deviation();
        if deviation > HERMITIAN_TOL {
            out.push(Violation {
                index: n,
                kind: ViolationKind::NonHermitianB,
                detail: format!("relative deviation {deviation:.3e}"),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub period: usize,
    pub partial_sum: f64,
    pub window: (usize, usize),
    pub tail_estimate: f64,
    pub converged: bool,
}

/// Windowed total `N`-variation `Σ_{n ∈ window} ‖x_{n+N} − x_n‖`.
pub fn total_variation(
    seq: impl Fn(usize) -> Result<Operator>,
    period: usize,
    window: Range<usize>,
) -> Result<VariationReport> {
    if period == 0 {
        return Err(Error::InvalidInput("variation period must be positive".into()));
    }
    let increments = (window.clone())
        .map(|n| Ok(op_norm(&(&seq(n + period)? - &seq(n)?))))
        .collect::<Result<Vec<f64>>>()?;
    Ok(variation_from_increments(&increments, period, window))
}

pub(crate) fn variation_from_increments(increments: &[f64], period: usize, window: Range<usize>) -> VariationReport {
    let partial_sum: f64 = increments.iter().sum();
    let len = increments.len();
    let last = &increments[len - len / 10..];
    let late_sum: f64 = last.iter().sum();
    let converged = partial_sum == 0.0 || late_sum < 1e-8 * partial_sum;
    VariationReport {
        period,
        partial_sum,
        window: (window.start, window.end),
        tail_estimate: geometric_tail(last),
        converged,
    }
}

/// Geometric extrapolation of the remaining sum from the trailing terms.
fn geometric_tail(terms: &[f64]) -> f64 {
    let half = terms.len() / 2;
    if half == 0 {
        return terms.iter().sum();
    }
    let first: f64 = terms[..half].iter().sum();
    let second: f64 = terms[half..2 * half].iter().sum();
    if second == 0.0 {
        return 0.0;
    }
    let rho = second / first;
    if rho < 1.0 {
        second * rho / (1.0 - rho)
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesVerdict {
    Diverges,
    Converges,
    Undecided,
}

/// Heuristic summability verdict with the evidence it was based on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub partial_sum: f64,
    pub terms: usize,
    pub verdict: SeriesVerdict,
    /// Log-log slope of the terms over the last decade of indices.
    pub loglog_slope: Option<f64>,
    /// Effective logarithmic decay exponent beyond `1/n`.
    pub effective_exponent: Option<f64>,
    /// Fitted geometric ratio over the last decade.
    pub geometric_ratio: Option<f64>,
    pub tail_estimate: f64,
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Classifies the series `Σ terms[i]`, where `terms[i]` is the term with index `start + i`.
///
/// Terms at or below `zero_floor` count as exact zeros. The fit uses indices in the last decade
/// `[end/10, end)`; a geometric tail that is negligible against the partial sum means convergence,
/// otherwise the power-law exponent (including logarithmic corrections) decides.
pub fn classify_series(terms: &[f64], start: usize, zero_floor: f64) -> SeriesReport {
    let partial_sum: f64 = terms.iter().sum();
    let end = start + terms.len();
    let from = (end / 10).max(start).max(1);
    let mut ns = Vec::new();
    let mut logs = Vec::new();
    let mut window_sum = 0.0;
    for n in from..end {
        let t = terms[n - start];
        if t > zero_floor {
            ns.push(n as f64);
            logs.push(t.ln());
            window_sum += t;
        }
    }
    let mut report = SeriesReport {
        partial_sum,
        terms: terms.len(),
        verdict: SeriesVerdict::Undecided,
        loglog_slope: None,
        effective_exponent: None,
        geometric_ratio: None,
        tail_estimate: f64::INFINITY,
    };
    if ns.is_empty() {
        report.verdict = if end > from { SeriesVerdict::Converges } else { SeriesVerdict::Undecided };
        report.tail_estimate = if end > from { 0.0 } else { f64::INFINITY };
        return report;
    }
    if ns.len() < 8 {
        // Sparse nonzero terms: decide only when they are negligible.
        if window_sum <= 1e-10 * partial_sum.abs() {
            report.verdict = SeriesVerdict::Converges;
            report.tail_estimate = window_sum;
        }
        return report;
    }
    let (beta, _) = linear_fit(&ns, &logs);
    let rho = beta.exp();
    report.geometric_ratio = Some(rho);
    if rho < 1.0 {
        let last = logs[logs.len() - 1].exp();
        let tail = last * rho / (1.0 - rho);
        report.tail_estimate = tail;
        if tail <= 1e-10 * partial_sum.abs() {
            report.verdict = SeriesVerdict::Converges;
            return report;
        }
    }
    let log_ns: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let (slope, _) = linear_fit(&log_ns, &logs);
    report.loglog_slope = Some(slope);
    let mean_log = log_ns.iter().sum::<f64>() / log_ns.len() as f64;
    let q_eff = -(slope + 1.0) * mean_log;
    report.effective_exponent = Some(q_eff);
    if slope < -1.0 {
        let last = logs[logs.len() - 1].exp();
        report.tail_estimate = report.tail_estimate.min(last * ns[ns.len() - 1] / (-slope - 1.0));
    }
    report.verdict = if slope >= -0.95 || q_eff <= 1.15 {
        SeriesVerdict::Diverges
    } else if q_eff >= 1.25 {
        SeriesVerdict::Converges
    } else {
        SeriesVerdict::Undecided
    };
    report
}

/// Carleman diagnostic `Σ_{n<M} 1/‖a_n‖` with a summability verdict.
///
/// Coefficients that overflow truncate the sum; the report then covers only the computed prefix.
pub fn carleman_diagnostic(fam: &CoefficientFamily, horizon: usize) -> Result<SeriesReport> {
    let mut terms = Vec::with_capacity(horizon);
    for n in 0..horizon {
        match fam.a_norm(n) {
            Ok(norm) => terms.push(1.0 / norm),
            Err(Error::NonFiniteCoefficient { .. }) if n > 0 => break,
            Err(e) => return Err(e),
        }
    }
    Ok(classify_series(&terms, 0, 0.0))
}

/// Whether a nonnegative sequence (index `start + i`) tends to zero.
pub fn tends_to_zero(values: &[f64], start: usize) -> bool {
    let end = start + values.len();
    let from = (end / 10).max(start).max(1);
    let window: Vec<(f64, f64)> =
        (from..end).map(|n| (n as f64, values[n - start].abs())).collect();
    if window.is_empty() {
        return false;
    }
    let max = window.iter().map(|w| w.1).fold(0.0, f64::max);
    if max <= 1e-10 {
        return true;
    }
    let pts: Vec<(f64, f64)> = window.iter().filter(|w| w.1 > 0.0).map(|w| (w.0.ln(), w.1.ln())).collect();
    if pts.len() < 2 {
        return false;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    linear_fit(&xs, &ys).0 < -0.05
}

/// Whether a nonnegative sequence stays bounded: the supremum over the second half of the
/// horizon exceeds the supremum over `[H/10, H/2)` by at most one percent.
pub fn appears_bounded(values: &[f64]) -> bool {
    let h = values.len();
    if h < 20 {
        return values.iter().all(|v| v.is_finite());
    }
    let early = values[h / 10..h / 2].iter().copied().fold(0.0, f64::max);
    let late = values[h / 2..].iter().copied().fold(0.0, f64::max);
    late.is_finite() && late <= 1.01 * early + 1e-300
}

/// Estimate of a limit along a sampled sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitEstimate {
    /// Last sample plus the extrapolated remaining drift.
    pub value: Operator,
    /// Largest successive difference over the last decade of samples.
    pub residual: f64,
    /// Extrapolated remaining drift (norm bound from the scalar difference series).
    pub tail_estimate: f64,
    /// Norm of the extrapolation correction added to the last sample.
    pub correction: f64,
    pub converged: bool,
}

/// Cauchy acceptance threshold for limits.
pub const CAUCHY_TOL: f64 = 1e-8;

/// Limit of `samples[k]` as `k → ∞`, with `samples[k]` taken at `n = k + 1`.
///
/// See [`cauchy_limit_at`].
pub fn cauchy_limit(samples: &[Operator]) -> Result<LimitEstimate> {
    cauchy_limit_at(samples, 1, 1)
}

/// Limit of a sequence sampled at `n = first + k·step`: accepted when successive differences over
/// the last decade stay below [`CAUCHY_TOL`] or, failing that, when the differences form a
/// summable series.
///
/// When the differences are summable, the remaining drift is extrapolated under a power-law tail
/// `x_n ≈ L + c·n^{−p}`: the exponent is fitted from three samples at `n ≈ n_max/4, n_max/2, n_max`
/// and the tail `L − x_{n_max}` is added to the last sample, provided the two increments point the
/// same way.
pub fn cauchy_limit_at(samples: &[Operator], first: usize, step: usize) -> Result<LimitEstimate> {
    let last = samples
        .last()
        .cloned()
        .ok_or_else(|| Error::InvalidInput("limit needs at least one sample".into()))?;
    if samples.len() < 2 {
        return Ok(LimitEstimate { value: last, residual: 0.0, tail_estimate: 0.0, correction: 0.0, converged: true });
    }
    if step == 0 {
        return Err(Error::InvalidInput("sample step must be positive".into()));
    }
    let diffs: Vec<f64> = samples.windows(2).map(|w| w[1].max_abs_diff(&w[0])).collect();
    let from = diffs.len() - (diffs.len() / 10).max(1);
    let residual = diffs[from..].iter().copied().fold(0.0, f64::max);
    let scale = op_norm(&last).max(1.0);
    let series = classify_series(&diffs, 1, 1e-15 * scale);
    let converged = residual < CAUCHY_TOL * scale || series.verdict == SeriesVerdict::Converges;
    let tail_estimate = if residual == 0.0 { 0.0 } else { series.tail_estimate };
    let mut estimate = LimitEstimate { value: last, residual, tail_estimate, correction: 0.0, converged };
    if series.verdict == SeriesVerdict::Converges && samples.len() >= 9 {
        if let Some(shift) = power_tail_shift(samples, first, step) {
            estimate.correction = op_norm(&shift);
            estimate.value = &estimate.value + &shift;
        }
    }
    Ok(estimate)
}

/// Remaining drift `L − x_{n_max}` under a fitted power-law tail, when the fit is consistent.
fn power_tail_shift(samples: &[Operator], first: usize, step: usize) -> Option<Operator> {
    let index_of = |n: usize| (n.saturating_sub(first) + step / 2) / step;
    let k3 = samples.len() - 1;
    let n_at = |k: usize| (first + k * step) as f64;
    let k2 = index_of((first + k3 * step) / 2).min(k3 - 1);
    let k1 = index_of((first + k2 * step) / 2).min(k2.checked_sub(1)?);
    let (n1, n2, n3) = (n_at(k1), n_at(k2), n_at(k3));
    let (d1, d2) = (&samples[k2] - &samples[k1], &samples[k3] - &samples[k2]);
    let (m1, m2) = (op_norm(&d1), op_norm(&d2));
    if !(m1 > 0.0 && m2 > 0.0) {
        return None;
    }
    // Increment ratio of the model as a function of the exponent; decreasing from
    // ln(n3/n2)/ln(n2/n1) at p → 0 to 0 at p → ∞.
    let ratio = |p: f64| (n3.powf(-p) - n2.powf(-p)) / (n2.powf(-p) - n1.powf(-p));
    let target = m2 / m1;
    let (mut lo, mut hi) = (1e-6, 64.0);
    if !(ratio(lo) > target && ratio(hi) < target) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    let aligned = op_norm(&(&d2 - &d1.scale_real(ratio(p)))) <= 0.1 * m2;
    if !aligned {
        return None;
    }
    // x_{n3} − L = c·n3^{−p} and x_{n3} − x_{n2} = c·(n3^{−p} − n2^{−p}).
    let factor = n3.powf(-p) / (n2.powf(-p) - n3.powf(-p));
    Some(d2.scale_real(factor))
}
