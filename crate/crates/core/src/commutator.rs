//! Weighted commutator functionals `S_n(α, λ)`, their limit form `C(λ)`, the four summability
//! conditions on the weights, and hypothesis checkers for the growth and log-envelope regimes.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::{
    appears_bounded, cauchy_limit_at, classify_series, g_product, iter_log, tends_to_zero, CoefficientFamily,
    SeriesReport, SeriesVerdict,
};
use crate::error::{Error, Result};
use crate::opcore::{
    abs_val, classify_definiteness, condition_number, hermitian_extremes, neg_part, op_norm, sym, BlockOperator,
    Definiteness, Operator, Vector, DEFAULT_DEFINITENESS_EPS, SINGULAR_CONDITION,
};
use crate::recurrence::{Trace, Trajectory};

/// Terms at or below this value count as exact zeros in summability verdicts.
pub const TERM_ZERO_FLOOR: f64 = 1e-12;

pub type WeightFn = dyn Fn(usize) -> Result<Operator> + Send + Sync;

/// Choice of the weight sequence `(α_n)`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaStrategy {
    /// `α_n = Id`.
    #[serde(alias = "identity_weights")]
    Identity,
    /// `α_n = a_n`.
    #[serde(alias = "a_n_weights")]
    AnWeights,
    /// `α_n = Id` for `n < n_start`, else `n g_K(n) (a_n*)⁻¹`.
    LogWeights { k: usize, n_start: usize },
    #[serde(skip)]
    Custom(Arc<WeightFn>),
}

impl fmt::Debug for AlphaStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => f.write_str("Identity"),
            Self::AnWeights => f.write_str("AnWeights"),
            Self::LogWeights { k, n_start } => {
                f.debug_struct("LogWeights").field("k", k).field("n_start", n_start).finish()
            }
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl PartialEq for AlphaStrategy {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Identity, Self::Identity) | (Self::AnWeights, Self::AnWeights) => true,
            (Self::LogWeights { k: a, n_start: b }, Self::LogWeights { k: c, n_start: d }) => a == c && b == d,
            (Self::Custom(f), Self::Custom(g)) => Arc::ptr_eq(f, g),
            _ => false,
        }
    }
}

impl AlphaStrategy {
    pub fn custom(f: impl Fn(usize) -> Result<Operator> + Send + Sync + 'static) -> Self {
        Self::Custom(Arc::new(f))
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::LogWeights { k, n_start } = *self {
            if k == 0 {
                return Err(Error::InvalidInput("log weights need K ≥ 1".into()));
            }
            match iter_log(k, n_start as f64) {
                Ok(v) if v > 0.0 => {}
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "log^({k})({n_start}) must be positive for log weights"
                    )))
                }
            }
        }
        Ok(())
    }

    /// The weight `α_n`.
    pub fn alpha(&self, fam: &CoefficientFamily, n: usize) -> Result<Operator> {
        match self {
            Self::Identity => Ok(Operator::identity(fam.dim())),
            Self::AnWeights => fam.a(n),
            Self::LogWeights { k, n_start } => {
                if n < *n_start {
                    Ok(Operator::identity(fam.dim()))
                } else {
                    let scale = n as f64 * g_product(*k, n as f64)?;
                    Ok(fam.a_inv(n)?.adjoint().scale_real(scale))
                }
            }
            Self::Custom(f) => {
                let alpha = f(n)?;
                if alpha.dim() != fam.dim() {
                    return Err(Error::DimensionMismatch { expected: fam.dim(), actual: alpha.dim() });
                }
                Ok(alpha)
            }
        }
    }
}

/// Quantities shared by the forms and conditions at index `n ≥ 1`.
struct Local {
    /// `α_n a_n*`.
    weight: Operator,
    /// `a_{n−1}⁻¹ α_{n−1} a_n`.
    transported: Operator,
    alpha: Operator,
}

fn local(fam: &CoefficientFamily, strategy: &AlphaStrategy, n: usize) -> Result<Local> {
    if n == 0 {
        return Err(Error::InvalidInput("commutator quantities need n ≥ 1".into()));
    }
    let alpha = strategy.alpha(fam, n)?;
    let prev = strategy.alpha(fam, n - 1)?;
    let a = fam.a(n)?;
    let weight = &alpha * &a.adjoint();
    let transported = &(&fam.a_inv(n - 1)? * &prev) * &a;
    Ok(Local { weight, transported, alpha })
}

fn shifted(fam: &CoefficientFamily, n: usize, lambda: f64) -> Result<Operator> {
    Ok(&Operator::scalar(fam.dim(), Complex64::new(lambda, 0.0)) - &fam.b(n)?)
}

/// Hermitian form acting on `(u_n, u_{n+1})`:
/// `sym (α_n a_n*, −(λ − b_n) a_{n−1}⁻¹ α_{n−1} a_n; 0, a_n* a_{n−1}⁻¹ α_{n−1} a_n)`.
pub fn commutator_form(fam: &CoefficientFamily, strategy: &AlphaStrategy, n: usize, lambda: f64) -> Result<BlockOperator> {
    let l = local(fam, strategy, n)?;
    let off = -&(&shifted(fam, n, lambda)? * &l.transported);
    let bottom = &fam.a(n)?.adjoint() * &l.transported;
    Ok(BlockOperator::from_blocks(&l.weight, &off, &Operator::zeros(fam.dim()), &bottom)?.sym())
}

/// The same functional as a form acting on `(u_{n−1}, u_n)`:
/// `sym (α_{n−1} a_{n−1}*, −α_{n−1}(λ − b_n); 0, α_n a_n*)`.
pub fn commutator_form_lagged(
    fam: &CoefficientFamily,
    strategy: &AlphaStrategy,
    n: usize,
    lambda: f64,
) -> Result<BlockOperator> {
    if n == 0 {
        return Err(Error::InvalidInput("commutator quantities need n ≥ 1".into()));
    }
    let prev = strategy.alpha(fam, n - 1)?;
    let top = &prev * &fam.a(n - 1)?.adjoint();
    let off = -&(&prev * &shifted(fam, n, lambda)?);
    let bottom = &strategy.alpha(fam, n)? * &fam.a(n)?.adjoint();
    Ok(BlockOperator::from_blocks(&top, &off, &Operator::zeros(fam.dim()), &bottom)?.sym())
}

fn real_parameter(traj: &Trajectory) -> Result<f64> {
    if traj.z.im != 0.0 {
        return Err(Error::InvalidInput(format!("commutator functionals need real λ, got {}", traj.z)));
    }
    Ok(traj.z.re)
}

fn pair_at(traj: &Trajectory, first: usize) -> Result<Vector> {
    if first + 1 > traj.horizon() {
        return Err(Error::IndexOutOfRange { index: first + 1, len: traj.horizon() + 1 });
    }
    Ok(traj.pair(first + 1))
}

/// `S_n(α, λ)` evaluated on `(u_n, u_{n+1})`.
pub fn commutator_value(fam: &CoefficientFamily, strategy: &AlphaStrategy, n: usize, traj: &Trajectory) -> Result<f64> {
    let lambda = real_parameter(traj)?;
    let v = pair_at(traj, n)?;
    Ok(commutator_form(fam, strategy, n, lambda)?.quadratic_form(&v))
}

/// `S_n(α, λ)` evaluated on `(u_{n−1}, u_n)`.
pub fn commutator_value_lagged(
    fam: &CoefficientFamily,
    strategy: &AlphaStrategy,
    n: usize,
    traj: &Trajectory,
) -> Result<f64> {
    let lambda = real_parameter(traj)?;
    if n == 0 {
        return Err(Error::InvalidInput("commutator quantities need n ≥ 1".into()));
    }
    let v = pair_at(traj, n - 1)?;
    Ok(commutator_form_lagged(fam, strategy, n, lambda)?.quadratic_form(&v))
}

/// `S_n` for `n = 1..M−1`.
pub fn commutator_trace(fam: &CoefficientFamily, strategy: &AlphaStrategy, traj: &Trajectory) -> Result<Trace> {
    let values = (1..traj.horizon()).map(|n| commutator_value(fam, strategy, n, traj)).collect::<Result<_>>()?;
    Ok(Trace::new(1, values))
}

/// Factor bounding the negative part of the increment:
/// `[S_{n+1} − S_n]⁻ ≤ factor · (‖u_n‖² + ‖u_{n+1}‖²)` with
/// `factor = ‖sym{α_{n+1}a_{n+1}* − a_n* β_n}⁻‖ + |λ| ‖β_n − α_n‖ + ‖α_n b_{n+1} − b_n β_n‖`,
/// `β_n = a_{n−1}⁻¹ α_{n−1} a_n`.
pub fn commutator_increment_bound(
    fam: &CoefficientFamily,
    strategy: &AlphaStrategy,
    n: usize,
    lambda: f64,
) -> Result<f64> {
    let [a, b, c] = raw_condition_terms(fam, strategy, n)?;
    Ok(a + lambda.abs() * b + c)
}

/// Unnormalized `[‖sym{…}⁻‖, ‖β_n − α_n‖, ‖α_n b_{n+1} − b_n β_n‖]` at index `n`.
fn raw_condition_terms(fam: &CoefficientFamily, strategy: &AlphaStrategy, n: usize) -> Result<[f64; 3]> {
    let l = local(fam, strategy, n)?;
    let next = &strategy.alpha(fam, n + 1)? * &fam.a(n + 1)?.adjoint();
    let shear = &next - &(&fam.a(n)?.adjoint() * &l.transported);
    let a = op_norm(&neg_part(&sym(&shear))?);
    let b = op_norm(&(&l.transported - &l.alpha));
    let c = op_norm(&(&(&l.alpha * &fam.b(n + 1)?) - &(&fam.b(n)? * &l.transported)));
    Ok([a, b, c])
}

/// Numerical limit of the normalized form `C(λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CLimit {
    pub lambda: f64,
    /// The limit, as a `2d x 2d` matrix.
    pub value: Operator,
    pub residual: f64,
    pub converged: bool,
    pub definiteness: Definiteness,
    pub min_eig: f64,
    pub max_eig: f64,
}

/// `lim (1/‖α_n a_n*‖) · form_n(λ)`; fails with `NotConvergent` when the sequence is not Cauchy.
pub fn c_limit(fam: &CoefficientFamily, strategy: &AlphaStrategy, lambda: f64, horizon: usize) -> Result<CLimit> {
    strategy.validate()?;
    if horizon < 20 {
        return Err(Error::InvalidInput(format!("horizon {horizon} too short")));
    }
    let from = match strategy {
        AlphaStrategy::LogWeights { n_start, .. } => (*n_start + 1).max(1),
        _ => 1,
    };
    let samples = (from..horizon)
        .map(|n| {
            let l = local(fam, strategy, n)?;
            Ok(commutator_form(fam, strategy, n, lambda)?.scale_real(1.0 / op_norm(&l.weight)).into_operator())
        })
        .collect::<Result<Vec<_>>>()?;
    let est = cauchy_limit_at(&samples, from, 1)?;
    if !est.converged {
        return Err(Error::NotConvergent { what: format!("normalized commutator form at λ = {lambda}"), residual: est.residual });
    }
    let value = sym(&est.value);
    let (min_eig, max_eig) = hermitian_extremes(&value)?;
    Ok(CLimit {
        lambda,
        definiteness: classify_definiteness(&value, DEFAULT_DEFINITENESS_EPS)?,
        value,
        residual: est.residual,
        converged: true,
        min_eig,
        max_eig,
    })
}

/// One summability condition with its evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCondition {
    pub label: String,
    pub description: String,
    /// Verdict the condition requires.
    pub expected: SeriesVerdict,
    pub series: SeriesReport,
    pub holds: bool,
    pub trace: Trace,
}

impl SeriesCondition {
    fn new(label: &str, description: &str, expected: SeriesVerdict, start: usize, terms: Vec<f64>) -> Self {
        let series = classify_series(&terms, start, TERM_ZERO_FLOOR);
        Self {
            label: label.into(),
            description: description.into(),
            expected,
            holds: series.verdict == expected,
            series,
            trace: Trace::new(start, terms),
        }
    }
}

/// A pointwise (non-series) condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCondition {
    pub label: String,
    pub description: String,
    pub holds: bool,
    /// Representative value (last sample, limit residual, or condition number).
    pub value: f64,
}

impl PointCondition {
    fn new(label: &str, description: &str, holds: bool, value: f64) -> Self {
        Self { label: label.into(), description: description.into(), holds, value }
    }
}

/// The four summability conditions on the weighted coefficients, labelled `a`–`d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub conditions: Vec<SeriesCondition>,
    pub all_hold: bool,
}

/// Terms `(a)`–`(c)` divided by `‖α_n a_n*‖` must be summable and `Σ 1/‖α_n a_n*‖` must diverge.
pub fn weighted_conditions(fam: &CoefficientFamily, strategy: &AlphaStrategy, horizon: usize) -> Result<ConditionReport> {
    strategy.validate()?;
    if horizon < 20 {
        return Err(Error::InvalidInput(format!("horizon {horizon} too short")));
    }
    let mut terms: [Vec<f64>; 4] = Default::default();
    for n in 1..horizon {
        let weight = op_norm(&local(fam, strategy, n)?.weight);
        let raw = raw_condition_terms(fam, strategy, n)?;
        for (t, r) in terms.iter_mut().zip(raw) {
            t.push(r / weight);
        }
        terms[3].push(1.0 / weight);
    }
    let [ta, tb, tc, td] = terms;
    let conditions = vec![
        SeriesCondition::new(
            "a",
            "Σ ‖sym{α_{n+1}a_{n+1}* − a_n* a_{n−1}⁻¹α_{n−1}a_n}⁻‖ / ‖α_n a_n*‖ < ∞",
            SeriesVerdict::Converges,
            1,
            ta,
        ),
        SeriesCondition::new(
            "b",
            "Σ ‖a_{n−1}⁻¹α_{n−1}a_n − α_n‖ / ‖α_n a_n*‖ < ∞",
            SeriesVerdict::Converges,
            1,
            tb,
        ),
        SeriesCondition::new(
            "c",
            "Σ ‖α_n b_{n+1} − b_n a_{n−1}⁻¹α_{n−1}a_n‖ / ‖α_n a_n*‖ < ∞",
            SeriesVerdict::Converges,
            1,
            tc,
        ),
        SeriesCondition::new("d", "Σ 1/‖α_n a_n*‖ = ∞", SeriesVerdict::Diverges, 1, td),
    ];
    Ok(ConditionReport { all_hold: conditions.iter().all(|c| c.holds), conditions })
}

/// Evidence that generalized eigenvectors are not square summable: the tail infimum of `S_n` and of
/// `‖α_n a_n*‖ (‖u_n‖² + ‖u_{n+1}‖²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub tail_min_s: f64,
    pub tail_min_weighted_norm: f64,
    pub s: Trace,
    pub weighted_norm: Trace,
}

/// Tail (second half) infima of `S_n` and of the weighted norms along a trajectory.
pub fn eigenvector_lower_bound(
    fam: &CoefficientFamily,
    strategy: &AlphaStrategy,
    traj: &Trajectory,
) -> Result<LowerBoundReport> {
    let s = commutator_trace(fam, strategy, traj)?;
    let weighted = (1..traj.horizon())
        .map(|n| {
            let w = op_norm(&local(fam, strategy, n)?.weight);
            Ok(w * (traj.norm_sq(n) + traj.norm_sq(n + 1)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let half = |v: &[f64]| v[v.len() / 2..].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LowerBoundReport {
        tail_min_s: half(&s.values),
        tail_min_weighted_norm: half(&weighted),
        s,
        weighted_norm: Trace::new(1, weighted),
    })
}

fn norms(range: std::ops::Range<usize>, f: impl Fn(usize) -> Result<f64>) -> Result<Vec<f64>> {
    range.map(f).collect()
}

/// Checks of the regime `a_n⁻¹ → 0` with `a_n/‖a_n‖` converging and `α_n = a_n` admissible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub inverse_to_zero: PointCondition,
    pub potential_to_zero: PointCondition,
    pub positivity_defect: SeriesCondition,
    pub commutator_defect: SeriesCondition,
    pub carleman_squared: SeriesCondition,
    pub direction_limit: PointCondition,
    pub all_hold: bool,
}

/// Growth-regime hypotheses: `‖a_n⁻¹‖ → 0`, `‖a_n⁻¹ b_n‖ → 0`,
/// `Σ ‖[a_{n+1}a_{n+1}* − a_n*a_n]⁻‖/‖a_n‖² < ∞`, `Σ ‖a_n b_{n+1} − b_n a_n‖/‖a_n‖² < ∞`,
/// `Σ 1/‖a_n‖² = ∞` and `a_n/‖a_n‖ → C` invertible.
pub fn check_growth(fam: &CoefficientFamily, horizon: usize) -> Result<GrowthReport> {
    if horizon < 100 {
        return Err(Error::InvalidInput(format!("horizon {horizon} too short (need ≥ 100)")));
    }
    let inv = norms(0..horizon, |n| Ok(op_norm(&fam.a_inv(n)?)))?;
    let pot = norms(0..horizon, |n| Ok(op_norm(&fam.potential_term(n)?)))?;
    let (mut ta, mut tb, mut tc) = (Vec::new(), Vec::new(), Vec::new());
    for n in 0..horizon - 1 {
        let (an, an1) = (fam.a(n)?, fam.a(n + 1)?);
        let norm_sq = fam.a_norm(n)?.powi(2);
        let shear = &(&an1 * &an1.adjoint()) - &(&an.adjoint() * &an);
        ta.push(op_norm(&neg_part(&sym(&shear))?) / norm_sq);
        tb.push(op_norm(&(&(&an * &fam.b(n + 1)?) - &(&fam.b(n)? * &an))) / norm_sq);
        tc.push(1.0 / norm_sq);
    }
    let directions = (0..horizon).map(|n| fam.direction_term(n)).collect::<Result<Vec<_>>>()?;
    let dir = cauchy_limit_at(&directions, 0, 1)?;
    let cond = condition_number(&dir.value);
    let report = GrowthReport {
        inverse_to_zero: PointCondition::new("inverse_to_zero", "‖a_n⁻¹‖ → 0", tends_to_zero(&inv, 0), inv[horizon - 1]),
        potential_to_zero: PointCondition::new(
            "potential_to_zero",
            "‖a_n⁻¹ b_n‖ → 0",
            tends_to_zero(&pot, 0),
            pot[horizon - 1],
        ),
        positivity_defect: SeriesCondition::new(
            "a",
            "Σ ‖[a_{n+1}a_{n+1}* − a_n*a_n]⁻‖ / ‖a_n‖² < ∞",
            SeriesVerdict::Converges,
            0,
            ta,
        ),
        commutator_defect: SeriesCondition::new(
            "b",
            "Σ ‖a_n b_{n+1} − b_n a_n‖ / ‖a_n‖² < ∞",
            SeriesVerdict::Converges,
            0,
            tb,
        ),
        carleman_squared: SeriesCondition::new("c", "Σ 1/‖a_n‖² = ∞", SeriesVerdict::Diverges, 0, tc),
        direction_limit: PointCondition::new(
            "direction_limit",
            "a_n/‖a_n‖ → C with C invertible (value: condition number of C)",
            dir.converged && cond < SINGULAR_CONDITION,
            cond,
        ),
        all_hold: false,
    };
    let all_hold = report.inverse_to_zero.holds
        && report.potential_to_zero.holds
        && report.positivity_defect.holds
        && report.commutator_defect.holds
        && report.carleman_squared.holds
        && report.direction_limit.holds;
    Ok(GrowthReport { all_hold, ..report })
}

/// Checks of the regime where `|(a_{n−1}*)⁻¹ a_n|` stays within the iterated-log envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEnvelopeReport {
    pub k: usize,
    pub n_start: usize,
    pub inverse_to_zero: PointCondition,
    /// Summability of the minimal slack `c_n` making the two-sided envelope hold.
    pub envelope_slack: SeriesCondition,
    pub potential_bounded: PointCondition,
    pub potential_variation: SeriesCondition,
    pub inverse_over_n: SeriesCondition,
    pub all_hold: bool,
}

/// Log-envelope hypotheses for `n ≥ n_start`: `a_n⁻¹ → 0`;
/// `(1 − c_n) ≤ |(a_{n−1}*)⁻¹ a_n| ≤ 1 + 1/n + Σ_{j≤K} 1/(n g_j(n)) + c_n` with summable `c_n`;
/// `b_n` bounded with `Σ ‖a_n⁻¹ b_n − b_{n+1} a_n⁻¹‖ < ∞`; and `Σ ‖a_n⁻¹‖/n < ∞`.
pub fn check_log_envelope(fam: &CoefficientFamily, k: usize, n_start: usize, horizon: usize) -> Result<LogEnvelopeReport> {
    AlphaStrategy::LogWeights { k, n_start }.validate()?;
    let start = n_start.max(1);
    if horizon < start + 100 {
        return Err(Error::InvalidInput(format!("horizon {horizon} too short for start {start}")));
    }
    let inv = norms(start..horizon, |n| Ok(op_norm(&fam.a_inv(n)?)))?;
    let mut slack = Vec::with_capacity(horizon - start);
    for n in start..horizon {
        let ratio = &fam.a_inv(n - 1)?.adjoint() * &fam.a(n)?;
        let (lo, hi) = hermitian_extremes(&abs_val(&ratio))?;
        let nf = n as f64;
        let mut upper = 1.0 + 1.0 / nf;
        for j in 1..=k {
            upper += 1.0 / (nf * g_product(j, nf)?);
        }
        slack.push((1.0 - lo).max(hi - upper).max(0.0));
    }
    let b_norms = norms(start..horizon, |n| Ok(op_norm(&fam.b(n)?)))?;
    let variation = norms(start..horizon - 1, |n| {
        let t = fam.a_inv(n)?;
        Ok(op_norm(&(&(&t * &fam.b(n)?) - &(&fam.b(n + 1)? * &t))))
    })?;
    let over_n: Vec<f64> = inv.iter().enumerate().map(|(i, v)| v / (start + i) as f64).collect();
    let report = LogEnvelopeReport {
        k,
        n_start,
        inverse_to_zero: PointCondition::new("a", "a_n⁻¹ → 0", tends_to_zero(&inv, start), inv[inv.len() - 1]),
        envelope_slack: SeriesCondition::new(
            "b",
            "(1 − c_n) ≤ |(a_{n−1}*)⁻¹ a_n| ≤ 1 + 1/n + Σ_j 1/(n g_j(n)) + c_n with Σ c_n < ∞",
            SeriesVerdict::Converges,
            start,
            slack,
        ),
        potential_bounded: PointCondition::new(
            "c_bounded",
            "sup ‖b_n‖ < ∞ (value: largest sampled norm)",
            appears_bounded(&b_norms),
            b_norms.iter().copied().fold(0.0, f64::max),
        ),
        potential_variation: SeriesCondition::new(
            "c",
            "Σ ‖a_n⁻¹ b_n − b_{n+1} a_n⁻¹‖ < ∞",
            SeriesVerdict::Converges,
            start,
            variation,
        ),
        inverse_over_n: SeriesCondition::new("d", "Σ ‖a_n⁻¹‖/n < ∞", SeriesVerdict::Converges, start, over_n),
        all_hold: false,
    };
    let all_hold = report.inverse_to_zero.holds
        && report.envelope_slack.holds
        && report.potential_bounded.holds
        && report.potential_variation.holds
        && report.inverse_over_n.holds;
    Ok(LogEnvelopeReport { all_hold, ..report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{ScalarWeight, WeightKind};
    use crate::recurrence::propagate;
    use approx::assert_abs_diff_eq;

    fn x() -> Operator {
        Operator::from_real_rows(&[[1.0, 1.0], [1.0, 2.0]])
    }

    fn y() -> Operator {
        Operator::from_real_rows(&[[2.0, 1.0], [1.0, 1.0]])
    }

    fn vec_of(xs: &[f64]) -> Vector {
        Vector::from_iterator(xs.len(), xs.iter().map(|v| Complex64::new(*v, 0.0)))
    }

    fn free_scalar() -> CoefficientFamily {
        CoefficientFamily::constant(Operator::identity(1), Operator::zeros(1)).unwrap()
    }

    fn block_repeat() -> CoefficientFamily {
        CoefficientFamily::scaled_periodic(
            ScalarWeight::new(WeightKind::BlockRepeatedSqrtLog),
            ScalarWeight::new(WeightKind::BlockRepeatedInvLog),
            vec![x()],
            vec![y()],
        )
        .unwrap()
    }

    fn log_weight() -> CoefficientFamily {
        CoefficientFamily::scaled_periodic(
            ScalarWeight::new(WeightKind::LogProduct { k: 1, offset: 3.0 }),
            ScalarWeight::new(WeightKind::ReciprocalLogProduct { k: 1, offset: 3.0 }),
            vec![x()],
            vec![y()],
        )
        .unwrap()
    }

    #[test]
    fn scalar_form() {
        for lambda in [-1.0, 0.0, 0.4] {
            let f = commutator_form(&free_scalar(), &AlphaStrategy::Identity, 2, lambda).unwrap();
            let expected = Operator::from_real_rows(&[[1.0, -lambda / 2.0], [-lambda / 2.0, 1.0]]);
            assert!(f.as_operator().max_abs_diff(&expected) < 1e-15);
        }
    }

    #[test]
    fn an_weights_constant_form() {
        let fam = CoefficientFamily::constant(x(), Operator::zeros(2)).unwrap();
        let f = commutator_form(&fam, &AlphaStrategy::AnWeights, 3, 0.0).unwrap();
        let sq = &x() * &x();
        assert!(f.max_abs_diff(&BlockOperator::diag(&sq, &sq).unwrap()) < 1e-13);
    }

    #[test]
    fn scalar_value_period_four() {
        let traj = propagate(&free_scalar(), Complex64::new(0.0, 0.0), &vec_of(&[1.0, 0.0]), 20).unwrap();
        for n in 1..18 {
            assert_abs_diff_eq!(commutator_value(&free_scalar(), &AlphaStrategy::Identity, n, &traj).unwrap(), 1.0);
        }
    }

    #[test]
    fn representations_agree() {
        let fam = block_repeat();
        let traj = propagate(&fam, Complex64::new(0.7, 0.0), &vec_of(&[0.3, -0.1, 0.2, 0.5]), 60).unwrap();
        for strategy in [AlphaStrategy::Identity, AlphaStrategy::AnWeights, AlphaStrategy::LogWeights { k: 1, n_start: 3 }] {
            for n in 1..50 {
                let s = commutator_value(&fam, &strategy, n, &traj).unwrap();
                let l = commutator_value_lagged(&fam, &strategy, n, &traj).unwrap();
                assert!((s - l).abs() <= 1e-9 * s.abs().max(1e-300), "{strategy:?} n={n}: {s} vs {l}");
            }
        }
    }

    #[test]
    fn constant_family_conditions() {
        let fam = CoefficientFamily::constant(x(), Operator::zeros(2)).unwrap();
        let rep = weighted_conditions(&fam, &AlphaStrategy::AnWeights, 500).unwrap();
        for c in &rep.conditions[..3] {
            assert!(c.trace.values.iter().all(|t| *t < 1e-12), "{}", c.label);
        }
        assert_eq!(rep.conditions[3].series.verdict, SeriesVerdict::Diverges);
        assert!(rep.all_hold);
        let rep = weighted_conditions(&CoefficientFamily::constant(x(), y()).unwrap(), &AlphaStrategy::AnWeights, 500)
            .unwrap();
        assert!(!rep.conditions[2].holds);
    }

    #[test]
    fn c_limit_an_weights() {
        let fam = CoefficientFamily::scaled_periodic(
            ScalarWeight::power(1.0, 1.0),
            ScalarWeight::constant(0.0),
            vec![x()],
            vec![Operator::zeros(2)],
        )
        .unwrap();
        let lim = c_limit(&fam, &AlphaStrategy::AnWeights, 1.5, 5000).unwrap();
        let sq = (&x() * &x()).scale_real(1.0 / op_norm(&(&x() * &x())));
        let expected = BlockOperator::diag(&sq, &sq).unwrap().into_operator();
        assert!(lim.value.max_abs_diff(&expected) < 1e-3);
        assert_eq!(lim.definiteness, Definiteness::StrictlyPositive);
    }

    #[test]
    fn c_limit_log_weights_is_identity() {
        let lim = c_limit(&log_weight(), &AlphaStrategy::LogWeights { k: 1, n_start: 3 }, 0.5, 20_000).unwrap();
        assert!(lim.value.max_abs_diff(&Operator::identity(4)) < 1e-2, "{:?}", lim.value);
        assert_eq!(lim.definiteness, Definiteness::StrictlyPositive);
    }

    #[test]
    fn c_limit_oscillating_fails() {
        let fam = CoefficientFamily::scaled_periodic(
            ScalarWeight::new(WeightKind::Alternating),
            ScalarWeight::constant(0.0),
            vec![Operator::identity(2)],
            vec![y()],
        )
        .unwrap();
        assert!(matches!(
            c_limit(&fam, &AlphaStrategy::Identity, 1.0, 500),
            Err(Error::NotConvergent { .. })
        ));
    }

    #[test]
    fn growth_checker_verdicts() {
        let rep = check_growth(&block_repeat(), 100_000).unwrap();
        assert!(rep.all_hold, "{rep:#?}");
        let constant = CoefficientFamily::constant(x(), y()).unwrap();
        let rep = check_growth(&constant, 1000).unwrap();
        assert!(!rep.inverse_to_zero.holds);
        let linear = CoefficientFamily::scaled_periodic(
            ScalarWeight::power(1.0, 1.0),
            ScalarWeight::power(1.0, 1.0),
            vec![Operator::identity(2)],
            vec![y()],
        )
        .unwrap();
        let rep = check_growth(&linear, 1000).unwrap();
        assert!(!rep.potential_to_zero.holds);
        assert!(!rep.all_hold);
    }

    #[test]
    fn log_envelope_checker_verdicts() {
        let rep = check_log_envelope(&log_weight(), 1, 3, 20_000).unwrap();
        assert!(rep.all_hold, "{rep:#?}");
        let geo = CoefficientFamily::scaled_periodic(
            ScalarWeight::new(WeightKind::Geometric { ratio: 2.0 }),
            ScalarWeight::constant(0.0),
            vec![Operator::identity(2)],
            vec![Operator::zeros(2)],
        )
        .unwrap();
        let rep = check_log_envelope(&geo, 1, 3, 200).unwrap();
        assert!(!rep.envelope_slack.holds);
        let unbounded = CoefficientFamily::scaled_periodic(
            ScalarWeight::new(WeightKind::LogProduct { k: 1, offset: 3.0 }),
            ScalarWeight::power(1.0, 1.0),
            vec![x()],
            vec![y()],
        )
        .unwrap();
        let rep = check_log_envelope(&unbounded, 1, 3, 5000).unwrap();
        assert!(!rep.potential_bounded.holds);
        assert!(check_log_envelope(&log_weight(), 2, 2, 1000).is_err());
    }

    #[test]
    fn log_weights_conditions_hold() {
        let rep = weighted_conditions(&log_weight(), &AlphaStrategy::LogWeights { k: 1, n_start: 3 }, 20_000).unwrap();
        assert!(rep.all_hold, "{:#?}", rep.conditions.iter().map(|c| (&c.label, &c.series)).collect::<Vec<_>>());
    }

    #[test]
    fn strategy_serde() {
        let s: AlphaStrategy = serde_json::from_str(r#"{"kind":"log_weights","k":1,"n_start":3}"#).unwrap();
        assert!(matches!(s, AlphaStrategy::LogWeights { k: 1, n_start: 3 }));
        let s: AlphaStrategy = serde_json::from_str(r#"{"kind":"an_weights"}"#).unwrap();
        assert!(matches!(s, AlphaStrategy::AnWeights));
        assert!(serde_json::from_str::<AlphaStrategy>(r#"{"kind":"optimal"}"#).is_err());
    }
}
