//! `N`-shifted Turán determinants, periodic limits, the limit form `F(λ)`, scans of the
//! definiteness set `Λ`, eigenvector asymptotics and the indeterminacy probe.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::{
    carleman_diagnostic, cauchy_limit_at, tends_to_zero, CoefficientFamily, SeriesReport, SeriesVerdict,
};
use crate::error::{Error, Result};
use crate::opcore::{
    classify_spectrum, hermitian_eigen, invert, op_norm, stack, sym, BlockOperator, Definiteness, Operator,
    Vector, DEFAULT_DEFINITENESS_EPS,
};
use crate::parallel::par_map;
use crate::recurrence::{
    formal_eigenvector_start, l2_tail_diagnostic, propagate, weighted_norm_trace, window_product, L2Verdict,
    Trace, Trajectory,
};
use crate::sampling::basis;

/// Default number of initial indices skipped by band statistics.
pub const DEFAULT_BURN_IN: usize = 10;
/// Relative last-decade oscillation below which a Turán sequence counts as Cauchy.
pub const TURAN_CAUCHY_TOL: f64 = 1e-6;
/// Width to which Λ endpoints are bisected.
pub const ENDPOINT_WIDTH: f64 = 1e-10;

fn real(z: f64) -> Complex64 {
    Complex64::new(z, 0.0)
}

fn require_period(period: usize) -> Result<()> {
    if period == 0 {
        return Err(Error::InvalidInput("period N must be positive".into()));
    }
    Ok(())
}

/// `sym(diag(a, a*) E X_n(z))` with `a = a_{n+N−1}` (not normalized).
pub fn turan_form_unnormalized(fam: &CoefficientFamily, period: usize, n: usize, z: Complex64) -> Result<BlockOperator> {
    require_period(period)?;
    let a = fam.a(n + period - 1)?;
    let lead = BlockOperator::diag(&a, &a.adjoint())?;
    let e = BlockOperator::symplectic(fam.dim());
    let x = window_product(fam, z, n, period)?;
    Ok((&(&lead * &e) * &x).sym())
}

/// The Hermitian form `Q_n^z` normalized by `1/‖a_{n+N−1}‖`.
pub fn turan_form(fam: &CoefficientFamily, period: usize, n: usize, z: Complex64) -> Result<BlockOperator> {
    let norm = fam.a_norm(n + period - 1)?;
    Ok(turan_form_unnormalized(fam, period, n, z)?.scale_real(1.0 / norm))
}

/// `S_n = ‖a_{n+N−1}‖ Q_n^z(u_{n−1}, u_n)` evaluated through the form.
pub fn turan_value(fam: &CoefficientFamily, period: usize, n: usize, traj: &Trajectory) -> Result<f64> {
    if n == 0 || n > traj.horizon() {
        return Err(Error::IndexOutOfRange { index: n, len: traj.horizon() + 1 });
    }
    let form = turan_form_unnormalized(fam, period, n, traj.z)?;
    Ok(form.quadratic_form(&traj.pair(n)))
}

/// `S_n` for every `n` with `n + N ≤ M`, using `X_n(z)(u_{n−1}, u_n) = (u_{n+N−1}, u_{n+N})`:
/// `S_n = Re(⟨a* u_{n+N−1}, u_n⟩ − ⟨a u_{n+N}, u_{n−1}⟩)` with `a = a_{n+N−1}`.
pub fn turan_trace(fam: &CoefficientFamily, period: usize, traj: &Trajectory) -> Result<Trace> {
    require_period(period)?;
    let m = traj.horizon();
    let mut values = Vec::with_capacity(m.saturating_sub(period));
    for n in 1..=m.saturating_sub(period) {
        let a = &fam.coeffs(n + period - 1)?.a;
        let first = traj.u[n].dotc(&a.adjoint().apply(&traj.u[n + period - 1]));
        let second = traj.u[n - 1].dotc(&a.apply(&traj.u[n + period]));
        values.push((first - second).re);
    }
    Ok(Trace::new(1, values))
}

/// Right-hand side factor of the increment bound
/// `|S_{n+1} − S_n| ≤ factor · (‖u_{n−1}‖² + ‖u_n‖²)`:
/// `‖X_n‖ ‖a_{n+N}‖ (‖R_{n+N} − R_n‖ + |z| ‖a_{n+N}⁻¹ − a_n⁻¹‖ + |z − z̄| ‖a_{n+N}⁻¹‖ + ‖Q_{n+N} − Q_n‖)`
/// with `R_k = a_k⁻¹ a_{k−1}*` and `Q_k = a_k⁻¹ b_k`.
pub fn turan_increment_bound(fam: &CoefficientFamily, period: usize, n: usize, z: Complex64) -> Result<f64> {
    let x = window_product(fam, z, n, period)?;
    let far = fam.coeffs(n + period)?;
    let variation = variation_term(fam, period, n, z)?;
    Ok(x.norm() * far.a_norm * variation)
}

/// `‖R_{n+N} − R_n‖ + |z| ‖a_{n+N}⁻¹ − a_n⁻¹‖ + |z − z̄| ‖a_{n+N}⁻¹‖ + ‖Q_{n+N} − Q_n‖`.
fn variation_term(fam: &CoefficientFamily, period: usize, n: usize, z: Complex64) -> Result<f64> {
    let far = fam.coeffs(n + period)?;
    let near = fam.coeffs(n)?;
    let dr = op_norm(&(&fam.ratio_term(n + period)? - &fam.ratio_term(n)?));
    let dt = op_norm(&(&far.a_inv - &near.a_inv));
    let dq = op_norm(&(&fam.potential_term(n + period)? - &fam.potential_term(n)?));
    let imag = 2.0 * z.im.abs() * op_norm(&far.a_inv);
    Ok(dr + z.norm() * dt + imag + dq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitResidual {
    pub t: f64,
    pub q: f64,
    pub r: f64,
    pub c: f64,
}

/// `N`-periodic limits `T, Q, R, C` of `a_n⁻¹`, `a_n⁻¹ b_n`, `a_n⁻¹ a_{n−1}*`, `a_n/‖a_n‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicLimitData {
    pub period: usize,
    pub t: Vec<Operator>,
    pub q: Vec<Operator>,
    pub r: Vec<Operator>,
    pub c: Vec<Operator>,
    /// `r_i = ‖C_i⁻¹ C_{i−1}* R_i⁻¹‖`.
    pub ratios: Vec<f64>,
    /// Diagonal blocks of the limit forms when they are of the form `diag(D_j, D_j)`.
    pub d: Option<Vec<Operator>>,
    pub residuals: Vec<LimitResidual>,
    pub converged: bool,
    pub horizon: usize,
}

impl PeriodicLimitData {
    /// Builds limit data from given operators, computing the derived ratios.
    pub fn from_limits(t: Vec<Operator>, q: Vec<Operator>, r: Vec<Operator>, c: Vec<Operator>) -> Result<Self> {
        let period = t.len();
        if period == 0 || q.len() != period || r.len() != period || c.len() != period {
            return Err(Error::InvalidInput("limit lists must be non-empty and of equal length".into()));
        }
        let mut data = Self {
            period,
            t,
            q,
            r,
            c,
            ratios: Vec::new(),
            d: None,
            residuals: vec![LimitResidual { t: 0.0, q: 0.0, r: 0.0, c: 0.0 }; period],
            converged: true,
            horizon: 0,
        };
        data.ratios = data.compute_ratios()?;
        data.d = data.compute_d()?;
        Ok(data)
    }

    pub fn dim(&self) -> usize {
        self.c[0].dim()
    }

    fn idx(&self, i: isize) -> usize {
        i.rem_euclid(self.period as isize) as usize
    }

    fn compute_ratios(&self) -> Result<Vec<f64>> {
        (0..self.period)
            .map(|i| {
                let c_inv = invert(&self.c[i])
                    .map_err(|_| Error::HypothesisViolated(format!("limit C_{i} is not invertible")))?;
                let r_inv = invert(&self.r[i])
                    .map_err(|_| Error::HypothesisViolated(format!("limit R_{i} is not invertible")))?;
                let prev = &self.c[self.idx(i as isize - 1)];
                Ok(op_norm(&(&(&c_inv * &prev.adjoint()) * &r_inv)))
            })
            .collect()
    }

    fn compute_d(&self) -> Result<Option<Vec<Operator>>> {
        let mut out = Vec::with_capacity(self.period);
        for j in 0..self.period {
            let mut block = None;
            for lambda in [0.0, 1.0] {
                let f = f_matrix_window(self, lambda, j)?;
                let scale = f.norm().max(1e-300);
                let off = f.block(0, 1).max_abs_diff(&Operator::zeros(self.dim()));
                let diag = f.block(0, 0).max_abs_diff(&f.block(1, 1));
                if off > 1e-8 * scale || diag > 1e-8 * scale {
                    return Ok(None);
                }
                block = Some(f.block(0, 0));
            }
            out.push(block.expect("two samples evaluated"));
        }
        Ok(Some(out))
    }

    /// `𝓑_i(z) = (0, Id; −R_i, z T_i − Q_i)`.
    pub fn limit_transfer(&self, i: usize, z: Complex64) -> Result<BlockOperator> {
        let i = i % self.period;
        let d = self.dim();
        BlockOperator::from_blocks(
            &Operator::zeros(d),
            &Operator::identity(d),
            &-&self.r[i],
            &(&self.t[i].scale(z) - &self.q[i]),
        )
    }

    /// Fails with `NotConvergent` when extraction did not pass the Cauchy test.
    pub fn require_converged(&self) -> Result<()> {
        if self.converged {
            return Ok(());
        }
        let worst = self
            .residuals
            .iter()
            .map(|r| r.t.max(r.q).max(r.r).max(r.c))
            .fold(0.0, f64::max);
        Err(Error::NotConvergent { what: "periodic coefficient limits".into(), residual: worst })
    }
}

/// Extracts the periodic limits along each residue class `n ≡ j (mod N)`, `1 ≤ n < horizon`.
///
/// Non-convergence is reported through `converged` and the residuals rather than as an error.
pub fn extract_periodic_limits(fam: &CoefficientFamily, period: usize, horizon: usize) -> Result<PeriodicLimitData> {
    require_period(period)?;
    if horizon < 2 * period + 2 {
        return Err(Error::InvalidInput(format!("horizon {horizon} too short for period {period}")));
    }
    let mut limits = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut residuals = Vec::with_capacity(period);
    let mut converged = true;
    for j in 0..period {
        let (mut ts, mut qs, mut rs, mut cs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let first = if j == 0 { period } else { j };
        for n in (first..horizon).step_by(period) {
            ts.push(fam.a_inv(n)?);
            qs.push(fam.potential_term(n)?);
            rs.push(fam.ratio_term(n)?);
            cs.push(fam.direction_term(n)?);
        }
        let lim = |xs: &[Operator]| cauchy_limit_at(xs, first, period);
        let (t, q, r, c) = (lim(&ts)?, lim(&qs)?, lim(&rs)?, lim(&cs)?);
        converged &= t.converged && q.converged && r.converged && c.converged;
        residuals.push(LimitResidual { t: t.residual, q: q.residual, r: r.residual, c: c.residual });
        limits.0.push(t.value);
        limits.1.push(q.value);
        limits.2.push(r.value);
        limits.3.push(c.value);
    }
    let mut data = PeriodicLimitData::from_limits(limits.0, limits.1, limits.2, limits.3)?;
    data.residuals = residuals;
    data.converged = converged;
    data.horizon = horizon;
    Ok(data)
}

/// Unsymmetrized limit form `F^s(z) = diag(C_{s+N−1}, C*_{s+N−1}) E ∏_{k=s}^{s+N−1} 𝓑_k(z)`
/// (highest index leftmost, indices mod `N`).
pub fn limit_form(lim: &PeriodicLimitData, z: Complex64, start: usize) -> Result<BlockOperator> {
    let n = lim.period;
    let c = &lim.c[(start + n - 1) % n];
    let lead = BlockOperator::diag(c, &c.adjoint())?;
    let mut acc = &lead * &BlockOperator::symplectic(lim.dim());
    let mut prod = BlockOperator::identity(lim.dim());
    for k in start..start + n {
        prod = &lim.limit_transfer(k, z)? * &prod;
    }
    acc = &acc * &prod;
    Ok(acc)
}

/// The Hermitian matrix `F(λ)` with residue-0 window alignment.
pub fn f_matrix(lim: &PeriodicLimitData, lambda: f64) -> Result<BlockOperator> {
    f_matrix_window(lim, lambda, 0)
}

/// `sym F^s(λ)` for window start `s`.
pub fn f_matrix_window(lim: &PeriodicLimitData, lambda: f64, start: usize) -> Result<BlockOperator> {
    Ok(limit_form(lim, real(lambda), start)?.sym())
}

/// Leading principal minors of a Hermitian matrix, sizes `1..=n`.
pub fn principal_minors(x: &Operator) -> Result<Vec<f64>> {
    let deviation = x.hermitian_deviation();
    if deviation > crate::opcore::HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok((1..=x.dim()).map(|k| x.matrix().view((0, 0), (k, k)).into_owned().determinant().re).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedInterval {
    pub lo: f64,
    pub hi: f64,
    pub sign: Sign,
    /// The interval reaches the lower end of the scanned range (its true end may lie beyond).
    pub lo_clipped: bool,
    pub hi_clipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub param: f64,
    pub min_eig: f64,
    pub max_eig: f64,
}

/// Parameter set where a Hermitian family is strictly definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSet {
    pub intervals: Vec<SignedInterval>,
    pub eps: f64,
    pub grid: usize,
    pub range: (f64, f64),
    pub samples: Vec<ScanSample>,
}

impl LambdaSet {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.lo < x && x < i.hi)
    }

    /// CSV with columns `param,min_eig,max_eig`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidInput(format!("csv output failed: {e}"));
        w.write_record(["param", "min_eig", "max_eig"]).map_err(io)?;
        for s in &self.samples {
            w.write_record([format!("{:e}", s.param), format!("{:e}", s.min_eig), format!("{:e}", s.max_eig)])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidInput(format!("csv output failed: {e}")))?;
        Ok(())
    }
}

fn sign_of(values: &[f64], eps: f64) -> Option<Sign> {
    match classify_spectrum(values, eps) {
        Definiteness::StrictlyPositive => Some(Sign::Positive),
        Definiteness::StrictlyNegative => Some(Sign::Negative),
        _ => None,
    }
}

/// Scans a Hermitian-valued map over `range` on a uniform grid, merges same-sign runs and
/// bisects every interior endpoint.
pub fn definiteness_scan<F>(f: F, range: (f64, f64), grid: usize, eps: f64) -> Result<LambdaSet>
where
    F: Fn(f64) -> Result<Operator> + Sync + Send,
{
    let (lo, hi) = range;
    if grid < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInput(format!("invalid scan: range ({lo}, {hi}), grid {grid}")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("definiteness margin must be positive".into()));
    }
    let params: Vec<f64> = (0..grid).map(|k| lo + (hi - lo) * k as f64 / (grid - 1) as f64).collect();
    let spectra = par_map(&params, |&p| hermitian_eigen(&f(p)?).map(|(v, _)| v))
        .into_iter()
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let samples: Vec<ScanSample> = params
        .iter()
        .zip(&spectra)
        .map(|(&param, v)| ScanSample { param, min_eig: v[0], max_eig: v[v.len() - 1] })
        .collect();
    let signs: Vec<Option<Sign>> = spectra.iter().map(|v| sign_of(v, eps)).collect();
    let classify = |p: f64| -> Result<Option<Sign>> { Ok(sign_of(&hermitian_eigen(&f(p)?)?.0, eps)) };
    let bisect = |mut outside: f64, mut inside: f64, sign: Sign| -> Result<f64> {
        while (inside - outside).abs() > ENDPOINT_WIDTH {
            let mid = 0.5 * (inside + outside);
            if classify(mid)? == Some(sign) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(0.5 * (inside + outside))
    };
    let mut intervals = Vec::new();
    let mut k = 0;
    while k < grid {
        let Some(sign) = signs[k] else {
            k += 1;
            continue;
        };
        let start = k;
        while k + 1 < grid && signs[k + 1] == Some(sign) {
            k += 1;
        }
        let end = k;
        let lo_clipped = start == 0;
        let hi_clipped = end == grid - 1;
        let a = if lo_clipped { params[0] } else { bisect(params[start - 1], params[start], sign)? };
        let b = if hi_clipped { params[grid - 1] } else { bisect(params[end + 1], params[end], sign)? };
        intervals.push(SignedInterval { lo: a, hi: b, sign, lo_clipped, hi_clipped });
        k += 1;
    }
    Ok(LambdaSet { intervals, eps, grid, range, samples })
}

/// Scan of `λ ↦ F(λ)` (residue-0 window).
pub fn lambda_scan(lim: &PeriodicLimitData, range: (f64, f64), grid: usize, eps: f64) -> Result<LambdaSet> {
    lambda_scan_window(lim, 0, range, grid, eps)
}

pub fn lambda_scan_window(
    lim: &PeriodicLimitData,
    start: usize,
    range: (f64, f64),
    grid: usize,
    eps: f64,
) -> Result<LambdaSet> {
    definiteness_scan(|l| Ok(f_matrix_window(lim, l, start)?.into_operator()), range, grid, eps)
}

/// Scan over a multiplier `q` of the potential limits: `Q_i ↦ (q / q_ref) Q_i`, at fixed `λ`.
pub fn q_scan(
    lim: &PeriodicLimitData,
    q_ref: f64,
    lambda: f64,
    range: (f64, f64),
    grid: usize,
    eps: f64,
) -> Result<LambdaSet> {
    if q_ref == 0.0 {
        return Err(Error::InvalidInput("reference multiplier must be nonzero".into()));
    }
    definiteness_scan(
        |q| {
            let mut scaled = lim.clone();
            for qi in scaled.q.iter_mut() {
                *qi = qi.scale_real(q / q_ref);
            }
            Ok(f_matrix(&scaled, lambda)?.into_operator())
        },
        range,
        grid,
        eps,
    )
}

/// Empirical constants of the two-sided bound on `‖a_n‖(‖u_{n−1}‖² + ‖u_n‖²)/‖α‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub c1: f64,
    pub c2: f64,
    pub ratio: f64,
    pub burn_in: usize,
    pub horizon: usize,
    pub overflow: bool,
    /// Normalized traces `s_n / ‖α‖²`, one per initial condition.
    pub traces: Vec<Trace>,
}

pub fn asymptotic_band(
    fam: &CoefficientFamily,
    z: Complex64,
    alphas: &[Vector],
    horizon: usize,
    burn_in: usize,
) -> Result<BandReport> {
    if alphas.is_empty() {
        return Err(Error::InvalidInput("at least one initial condition is required".into()));
    }
    if burn_in + 1 >= horizon {
        return Err(Error::InvalidInput(format!("burn-in {burn_in} leaves no data below horizon {horizon}")));
    }
    let results = par_map(alphas, |alpha| -> Result<(Trace, bool)> {
        let traj = propagate(fam, z, alpha, horizon + 1)?;
        let norm_sq = alpha.norm_squared();
        let mut s = weighted_norm_trace(fam, &traj)?;
        s.values.iter_mut().for_each(|v| *v /= norm_sq);
        Ok((s, traj.overflow.is_some()))
    });
    let mut traces = Vec::with_capacity(alphas.len());
    let (mut c1, mut c2, mut overflow) = (f64::INFINITY, 0.0f64, false);
    for r in results {
        let (trace, over) = r?;
        overflow |= over;
        for &v in trace.slice(burn_in, horizon + 1) {
            c1 = c1.min(v);
            c2 = c2.max(v);
        }
        traces.push(trace);
    }
    let ratio = if overflow { f64::INFINITY } else { c2 / c1 };
    Ok(BandReport { c1, c2, ratio, burn_in, horizon, overflow, traces })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuranLimit {
    /// Mean of `S_n` over the last decade of the trace.
    pub g: f64,
    /// Largest deviation from `g` over the last decade.
    pub residual: f64,
    pub relative_residual: f64,
    pub converged: bool,
}

fn last_decade_limit(trace: &Trace) -> TuranLimit {
    let len = trace.len();
    let window = &trace.values[len - (len / 10).max(1)..];
    let g = window.iter().sum::<f64>() / window.len() as f64;
    let residual = window.iter().map(|v| (v - g).abs()).fold(0.0, f64::max);
    let relative_residual = if g != 0.0 { residual / g.abs() } else { f64::INFINITY };
    TuranLimit { g, residual, relative_residual, converged: relative_residual < TURAN_CAUCHY_TOL }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub passed: bool,
    /// Fitted constant `c` in `|g − S_m| ≤ c V(m)`, largest over the initial conditions.
    pub fitted_c: f64,
    pub m_values: Vec<usize>,
    /// Tail variation `V(m)` at each checked `m`.
    pub tail_variation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuranConvergence {
    pub limits: Vec<TuranLimit>,
    pub all_converged: bool,
    pub min_abs_g: f64,
    pub max_abs_g: f64,
    pub rate: RateCheck,
    pub traces: Vec<Trace>,
}

impl TuranConvergence {
    pub fn require_converged(&self) -> Result<()> {
        if self.all_converged {
            return Ok(());
        }
        let worst = self.limits.iter().map(|l| l.relative_residual).fold(0.0, f64::max);
        Err(Error::NotConvergent { what: "Turán determinants".into(), residual: worst })
    }
}

/// Five indices spread geometrically over `[lo, hi]`.
fn geometric_points(lo: usize, hi: usize) -> Vec<usize> {
    let (lo, hi) = (lo.max(1) as f64, hi.max(lo.max(1)) as f64);
    let mut pts: Vec<usize> = (0..5).map(|i| (lo * (hi / lo).powf(i as f64 / 4.0)).round() as usize).collect();
    pts.dedup();
    pts
}

/// Limits `g(α, z) = lim S_n` per initial condition, with a tail-variation rate check.
pub fn turan_convergence(
    fam: &CoefficientFamily,
    period: usize,
    z: Complex64,
    alphas: &[Vector],
    horizon: usize,
    burn_in: usize,
) -> Result<TuranConvergence> {
    require_period(period)?;
    if alphas.is_empty() {
        return Err(Error::InvalidInput("at least one initial condition is required".into()));
    }
    if horizon < 10 * (period + burn_in) {
        return Err(Error::InvalidInput(format!("horizon {horizon} too short")));
    }
    let traces = par_map(alphas, |alpha| -> Result<Trace> {
        let traj = propagate(fam, z, alpha, horizon)?;
        if let Some(at) = traj.overflow {
            return Err(Error::NotConvergent { what: format!("trajectory overflowed at n = {at}"), residual: f64::INFINITY });
        }
        turan_trace(fam, period, &traj)
    })
    .into_iter()
    .collect::<Result<Vec<Trace>>>()?;
    let limits: Vec<TuranLimit> = traces.iter().map(last_decade_limit).collect();

    let end = traces[0].end();
    let mut variation = vec![0.0; end + 1];
    for n in (1..end).rev() {
        variation[n] = variation[n + 1] + variation_term(fam, period, n, z)?;
    }
    let m_values = geometric_points(burn_in, end / 2);
    let tail_variation: Vec<f64> = m_values.iter().map(|&m| variation[m]).collect();
    let mut passed = true;
    let mut fitted_c = 0.0f64;
    for (trace, lim) in traces.iter().zip(&limits) {
        let tol = lim.residual + 1e-9 * lim.g.abs();
        let dev = |m: usize| (lim.g - trace.get(m).unwrap_or(f64::NAN)).abs();
        let c = if tail_variation[0] > 0.0 { (dev(m_values[0]) - tol).max(0.0) / tail_variation[0] } else { 0.0 };
        fitted_c = fitted_c.max(c);
        for (&m, &v) in m_values.iter().zip(&tail_variation) {
            if !(dev(m) <= 10.0 * c * v + tol) {
                passed = false;
            }
        }
    }
    let abs: Vec<f64> = limits.iter().map(|l| l.g.abs()).collect();
    Ok(TuranConvergence {
        all_converged: limits.iter().all(|l| l.converged),
        min_abs_g: abs.iter().copied().fold(f64::INFINITY, f64::min),
        max_abs_g: abs.iter().copied().fold(0.0, f64::max),
        limits,
        rate: RateCheck { passed, fitted_c, m_values, tail_variation },
        traces,
    })
}

/// Settings for the definiteness scan used inside composite analyses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub range: (f64, f64),
    pub grid: usize,
    pub eps: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self { range: (-10.0, 10.0), grid: 201, eps: DEFAULT_DEFINITENESS_EPS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    pub z: (f64, f64),
    pub basis_verdicts: Vec<L2Verdict>,
    pub all_square_summable: bool,
    /// Eigenvalues of the Gram matrix of the `d` formal eigenvectors (ascending).
    pub gram_eigenvalues: Vec<f64>,
    pub solution_dimension: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndeterminacyEvidence {
    pub carleman: SeriesReport,
    pub effective_horizon: usize,
    pub limits_converged: Option<bool>,
    pub lambda_set: Option<LambdaSet>,
    pub samples: Vec<SpectralSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "evidence")]
pub enum IndeterminacyVerdict {
    CompleteIndeterminate(IndeterminacyEvidence),
    SelfAdjointRegime(IndeterminacyEvidence),
    Undecided(IndeterminacyEvidence),
}

impl IndeterminacyVerdict {
    pub fn evidence(&self) -> &IndeterminacyEvidence {
        match self {
            Self::CompleteIndeterminate(e) | Self::SelfAdjointRegime(e) | Self::Undecided(e) => e,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::CompleteIndeterminate(_) => "CompleteIndeterminate",
            Self::SelfAdjointRegime(_) => "SelfAdjointRegime",
            Self::Undecided(_) => "Undecided",
        }
    }
}

fn spectral_sample(fam: &CoefficientFamily, z: Complex64, horizon: usize) -> Result<SpectralSample> {
    let d = fam.dim();
    let mut basis_verdicts = Vec::with_capacity(2 * d);
    for alpha in basis(2 * d) {
        basis_verdicts.push(l2_tail_diagnostic(&propagate(fam, z, &alpha, horizon)?).verdict);
    }
    let mut formal: Vec<Trajectory> = Vec::with_capacity(d);
    for u0 in basis(d) {
        formal.push(propagate(fam, z, &formal_eigenvector_start(fam, z, &u0)?, horizon)?);
    }
    let len = formal.iter().map(|t| t.u.len()).min().unwrap_or(0);
    let gram = Operator::from_rows(
        &(0..d)
            .map(|i| {
                (0..d)
                    .map(|j| (0..len).map(|n| formal[i].u[n].dotc(&formal[j].u[n])).sum::<Complex64>())
                    .collect()
            })
            .collect::<Vec<Vec<Complex64>>>(),
    )?;
    let (gram_eigenvalues, _) = hermitian_eigen(&sym(&gram))?;
    let top = gram_eigenvalues.last().copied().unwrap_or(0.0);
    let finite = formal.iter().all(|t| t.overflow.is_none());
    let solution_dimension =
        if finite { gram_eigenvalues.iter().filter(|&&l| l > 1e-10 * top).count() } else { 0 };
    Ok(SpectralSample {
        z: (z.re, z.im),
        all_square_summable: basis_verdicts.iter().all(|v| *v == L2Verdict::SquareSummable),
        basis_verdicts,
        gram_eigenvalues,
        solution_dimension,
    })
}

/// Distinguishes the complete indeterminate case from the self-adjoint regime.
pub fn indeterminacy_probe(
    fam: &CoefficientFamily,
    period: usize,
    z_samples: &[Complex64],
    horizon: usize,
    scan: ScanSettings,
) -> Result<IndeterminacyVerdict> {
    let i = Complex64::new(0.0, 1.0);
    if !z_samples.contains(&i) || !z_samples.contains(&-i) {
        return Err(Error::InvalidInput("z samples must include i and −i".into()));
    }
    let carleman = carleman_diagnostic(fam, horizon)?;
    let effective_horizon = carleman.terms;
    let mut evidence = IndeterminacyEvidence {
        carleman: carleman.clone(),
        effective_horizon,
        limits_converged: None,
        lambda_set: None,
        samples: Vec::new(),
    };
    match carleman.verdict {
        SeriesVerdict::Diverges => return Ok(IndeterminacyVerdict::SelfAdjointRegime(evidence)),
        SeriesVerdict::Undecided => return Ok(IndeterminacyVerdict::Undecided(evidence)),
        SeriesVerdict::Converges => {}
    }
    let lim = match extract_periodic_limits(fam, period, effective_horizon) {
        Ok(lim) => lim,
        Err(Error::HypothesisViolated(_)) => return Ok(IndeterminacyVerdict::Undecided(evidence)),
        Err(e) => return Err(e),
    };
    evidence.limits_converged = Some(lim.converged);
    if !lim.converged {
        return Ok(IndeterminacyVerdict::Undecided(evidence));
    }
    let set = lambda_scan(&lim, scan.range, scan.grid, scan.eps)?;
    let empty = set.is_empty();
    evidence.lambda_set = Some(set);
    if empty {
        return Ok(IndeterminacyVerdict::Undecided(evidence));
    }
    evidence.samples = par_map(z_samples, |&z| spectral_sample(fam, z, effective_horizon))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let d = fam.dim();
    if evidence.samples.iter().all(|s| s.all_square_summable && s.solution_dimension == d) {
        Ok(IndeterminacyVerdict::CompleteIndeterminate(evidence))
    } else {
        Ok(IndeterminacyVerdict::Undecided(evidence))
    }
}

/// Tolerance for the approximate hypotheses `R ≡ Id`, `Q ≡ 0` and `C_i ≡ C` at a finite horizon.
pub const ASYMPTOTIC_HYPOTHESIS_TOL: f64 = 1e-4;
/// Tolerance on `C = C*`.
pub const HERMITIAN_LIMIT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactAsymptoticSample {
    pub g: f64,
    pub g_residual: f64,
    pub weighted_limit: f64,
    pub weighted_residual: f64,
    pub relative_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactAsymptotics {
    pub c_hermitian: bool,
    pub c_deviation: f64,
    pub c: Operator,
    pub samples: Vec<ExactAsymptoticSample>,
    pub max_relative_difference: f64,
    /// `S_n` traces, one per initial condition.
    pub turan_traces: Vec<Trace>,
    /// `‖a_n‖(⟨C u_{n−1}, u_{n−1}⟩ + ⟨C u_n, u_n⟩)` traces.
    pub weighted_traces: Vec<Trace>,
}

fn check_exact_hypotheses(fam: &CoefficientFamily, lim: &PeriodicLimitData, horizon: usize) -> Result<(Operator, f64)> {
    let violated = |what: &str| Err(Error::HypothesisViolated(what.to_string()));
    if lim.period % 2 == 0 {
        return violated("period N must be odd");
    }
    let inv_norms = (1..horizon).map(|n| Ok(op_norm(&fam.a_inv(n)?))).collect::<Result<Vec<f64>>>()?;
    if !tends_to_zero(&inv_norms, 1) {
        return violated("T ≡ 0 fails: ‖a_n⁻¹‖ does not tend to zero");
    }
    let pot = (1..horizon).map(|n| Ok(op_norm(&fam.potential_term(n)?))).collect::<Result<Vec<f64>>>()?;
    let pot_tail = pot[pot.len() - pot.len() / 10..].iter().copied().fold(0.0, f64::max);
    if !(tends_to_zero(&pot, 1) || pot_tail <= ASYMPTOTIC_HYPOTHESIS_TOL) {
        return violated("Q ≡ 0 fails: ‖a_n⁻¹ b_n‖ does not tend to zero");
    }
    let id = Operator::identity(lim.dim());
    for (j, r) in lim.r.iter().enumerate() {
        if op_norm(&(r - &id)) > ASYMPTOTIC_HYPOTHESIS_TOL {
            return violated(&format!("R ≡ Id fails at residue {j}"));
        }
    }
    let c = lim.c[0].clone();
    for (j, cj) in lim.c.iter().enumerate() {
        if op_norm(&(cj - &c)) > ASYMPTOTIC_HYPOTHESIS_TOL {
            return violated(&format!("C_i ≡ C fails at residue {j}"));
        }
    }
    let deviation = op_norm(&(&c - &c.adjoint()));
    if deviation > HERMITIAN_LIMIT_TOL {
        return violated(&format!("C = C* fails (‖C − C*‖ = {deviation:.3e})"));
    }
    Ok((c, deviation))
}

/// Checks `lim ‖a_n‖(⟨C u_{n−1}, u_{n−1}⟩ + ⟨C u_n, u_n⟩) = lim S_n` when the limits are trivial.
pub fn exact_asymptotics(
    fam: &CoefficientFamily,
    lim: &PeriodicLimitData,
    z: Complex64,
    alphas: &[Vector],
    horizon: usize,
) -> Result<ExactAsymptotics> {
    if alphas.is_empty() {
        return Err(Error::InvalidInput("at least one initial condition is required".into()));
    }
    let (c, c_deviation) = check_exact_hypotheses(fam, lim, horizon)?;
    let c = sym(&c);
    let period = lim.period;
    let results = par_map(alphas, |alpha| -> Result<(Trace, Trace)> {
        let traj = propagate(fam, z, alpha, horizon)?;
        if let Some(at) = traj.overflow {
            return Err(Error::NotConvergent { what: format!("trajectory overflowed at n = {at}"), residual: f64::INFINITY });
        }
        let s = turan_trace(fam, period, &traj)?;
        let w = (1..s.end())
            .map(|n| {
                Ok(fam.a_norm(n)? * (c.quadratic_form(&traj.u[n - 1]) + c.quadratic_form(&traj.u[n])))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((s, Trace::new(1, w)))
    });
    let mut samples = Vec::new();
    let (mut turan_traces, mut weighted_traces) = (Vec::new(), Vec::new());
    for r in results {
        let (s, w) = r?;
        let (ls, lw) = (last_decade_limit(&s), last_decade_limit(&w));
        samples.push(ExactAsymptoticSample {
            g: ls.g,
            g_residual: ls.residual,
            weighted_limit: lw.g,
            weighted_residual: lw.residual,
            relative_difference: (lw.g - ls.g).abs() / ls.g.abs(),
        });
        turan_traces.push(s);
        weighted_traces.push(w);
    }
    Ok(ExactAsymptotics {
        c_hermitian: true,
        c_deviation,
        c,
        max_relative_difference: samples.iter().map(|s| s.relative_difference).fold(0.0, f64::max),
        samples,
        turan_traces,
        weighted_traces,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChristoffelReport {
    /// `[Σ_{k≤n} 1/‖a_k‖]⁻¹ Σ_{k≤n} ⟨C u_k, u_k⟩`.
    pub ratios: Trace,
    pub limit: f64,
    pub carleman: SeriesReport,
}

/// Cesàro-type average of `⟨C u_k, u_k⟩` against `Σ 1/‖a_k‖`; its limit is `g/2`.
pub fn christoffel_limit(fam: &CoefficientFamily, c: &Operator, traj: &Trajectory) -> Result<ChristoffelReport> {
    let deviation = op_norm(&(c - &c.adjoint()));
    if deviation > HERMITIAN_LIMIT_TOL {
        return Err(Error::HypothesisViolated(format!("C must be Hermitian (‖C − C*‖ = {deviation:.3e})")));
    }
    let carleman = carleman_diagnostic(fam, traj.u.len())?;
    if carleman.verdict == SeriesVerdict::Converges {
        return Err(Error::HypothesisViolated("Carleman series converges".into()));
    }
    let (mut weight, mut mass) = (0.0, 0.0);
    let mut ratios = Vec::with_capacity(traj.u.len());
    for (k, u) in traj.u.iter().enumerate() {
        weight += 1.0 / fam.a_norm(k)?;
        mass += c.quadratic_form(u);
        ratios.push(mass / weight);
    }
    let limit = *ratios.last().expect("trajectory is non-empty");
    Ok(ChristoffelReport { ratios: Trace::new(0, ratios), limit, carleman })
}

/// `(u_{n−1}, u_n)` pairs are what the forms act on; exposed for callers building custom checks.
pub fn pair(traj: &Trajectory, n: usize) -> Vector {
    stack(&traj.u[n - 1], &traj.u[n])
}
