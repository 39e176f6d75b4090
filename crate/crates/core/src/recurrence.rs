//! Transfer matrices and generalised-eigenvector propagation.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::{classify_series, CoefficientFamily, SeriesReport, SeriesVerdict};
use crate::error::{Error, Result};
use crate::opcore::{invert, split, stack, BlockOperator, Operator, Vector};

/// Norm above which a trajectory is considered to have overflowed.
pub const OVERFLOW_NORM: f64 = 1e150;

/// A real sequence indexed from `start`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub start: usize,
    pub values: Vec<f64>,
}

impl Trace {
    pub fn new(start: usize, values: Vec<f64>) -> Self {
        Self { start, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One past the last index.
    pub fn end(&self) -> usize {
        self.start + self.values.len()
    }

    pub fn get(&self, n: usize) -> Option<f64> {
        n.checked_sub(self.start).and_then(|i| self.values.get(i).copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, v)| (self.start + i, *v))
    }

    /// Values with index in `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> &[f64] {
        let lo = from.saturating_sub(self.start).min(self.values.len());
        let hi = to.saturating_sub(self.start).min(self.values.len()).max(lo);
        &self.values[lo..hi]
    }
}

/// Generalised eigenvector `u_0, …, u_M` for spectral parameter `z`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub z: Complex64,
    pub alpha: Vector,
    pub u: Vec<Vector>,
    /// Relative residual of the three-term relation at `n = 1, …, M−1` (entry `n − 1`).
    pub residuals: Vec<f64>,
    /// Index at which the norm exceeded the overflow guard; the trajectory stops before it.
    pub overflow: Option<usize>,
}

impl Trajectory {
    /// Largest index `M` held by the trajectory.
    pub fn horizon(&self) -> usize {
        self.u.len() - 1
    }

    pub fn norm_sq(&self, n: usize) -> f64 {
        self.u[n].norm_squared()
    }

    /// `(u_{n−1}, u_n)` as a vector of `H ⊕ H`.
    pub fn pair(&self, n: usize) -> Vector {
        stack(&self.u[n - 1], &self.u[n])
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

fn require_index(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("transfer matrices are defined for n ≥ 1".into()));
    }
    Ok(())
}

/// `B_n(z) = (0, Id; −a_n⁻¹ a_{n−1}*, a_n⁻¹(z − b_n))`.
pub fn transfer(fam: &CoefficientFamily, n: usize, z: Complex64) -> Result<BlockOperator> {
    require_index(n)?;
    let d = fam.dim();
    let cur = fam.coeffs(n)?;
    let prev = fam.coeffs(n - 1)?;
    let shift = &Operator::scalar(d, z) - &cur.b;
    BlockOperator::from_blocks(
        &Operator::zeros(d),
        &Operator::identity(d),
        &-&(&cur.a_inv * &prev.a.adjoint()),
        &(&cur.a_inv * &shift),
    )
}

/// `B_n(z)⁻¹ = ((a_{n−1}*)⁻¹(z − b_n), −(a_{n−1}*)⁻¹ a_n; Id, 0)`.
pub fn transfer_inv(fam: &CoefficientFamily, n: usize, z: Complex64) -> Result<BlockOperator> {
    require_index(n)?;
    let d = fam.dim();
    let cur = fam.coeffs(n)?;
    let prev = fam.coeffs(n - 1)?;
    let prev_adj_inv = prev.a_inv.adjoint();
    let shift = &Operator::scalar(d, z) - &cur.b;
    BlockOperator::from_blocks(
        &(&prev_adj_inv * &shift),
        &-&(&prev_adj_inv * &cur.a),
        &Operator::identity(d),
        &Operator::zeros(d),
    )
}

/// Ordered product `B_{n+len−1}(z) ⋯ B_n(z)`; the empty product is the identity.
pub fn window_product(fam: &CoefficientFamily, z: Complex64, n: usize, len: usize) -> Result<BlockOperator> {
    let mut acc = BlockOperator::identity(fam.dim());
    for j in n..n + len {
        acc = &transfer(fam, j, z)? * &acc;
    }
    Ok(acc)
}

fn check_alpha(fam: &CoefficientFamily, alpha: &Vector) -> Result<()> {
    if alpha.len() != 2 * fam.dim() {
        return Err(Error::DimensionMismatch { expected: 2 * fam.dim(), actual: alpha.len() });
    }
    if alpha.iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
        return Err(Error::InvalidInput("initial condition must be nonzero".into()));
    }
    if alpha.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::InvalidInput("initial condition must be finite".into()));
    }
    Ok(())
}

/// Solves the three-term recurrence from `(u_0, u_1) = alpha` up to `u_M`.
pub fn propagate(fam: &CoefficientFamily, z: Complex64, alpha: &Vector, horizon: usize) -> Result<Trajectory> {
    check_alpha(fam, alpha)?;
    if horizon < 2 {
        return Err(Error::InvalidInput(format!("horizon must be at least 2, got {horizon}")));
    }
    let (u0, u1) = split(alpha);
    let mut u = Vec::with_capacity(horizon + 1);
    u.push(u0);
    u.push(u1);
    let mut residuals = Vec::with_capacity(horizon);
    let mut overflow = None;
    for n in 1..horizon {
        let cur = fam.coeffs(n)?;
        let prev = fam.coeffs(n - 1)?;
        let prev_term = prev.a.adjoint().apply(&u[n - 1]);
        let rhs = &u[n] * z - cur.b.apply(&u[n]) - &prev_term;
        let next = cur.a_inv.apply(&rhs);
        let next_norm = next.norm();
        if !(next_norm <= OVERFLOW_NORM) {
            overflow = Some(n + 1);
            break;
        }
        let lhs = &prev_term + cur.b.apply(&u[n]) + cur.a.apply(&next) - &u[n] * z;
        let vec_scale = u[n - 1].norm().max(u[n].norm()).max(next_norm);
        let op_scale = prev.a_norm.max(cur.a_norm).max(crate::opcore::op_norm(&cur.b)).max(z.norm());
        let scale = vec_scale * op_scale;
        residuals.push(if scale > 0.0 { lhs.norm() / scale } else { 0.0 });
        u.push(next);
    }
    Ok(Trajectory { z, alpha: alpha.clone(), u, residuals, overflow })
}

/// Initial condition `(u_0, a_0⁻¹(z − b_0) u_0)` of the formal eigenvector with `u_{−1} = 0`.
pub fn formal_eigenvector_start(fam: &CoefficientFamily, z: Complex64, u0: &Vector) -> Result<Vector> {
    if u0.len() != fam.dim() {
        return Err(Error::DimensionMismatch { expected: fam.dim(), actual: u0.len() });
    }
    if u0.iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
        return Err(Error::InvalidInput("u_0 must be nonzero".into()));
    }
    let c0 = fam.coeffs(0)?;
    let shift = &Operator::scalar(fam.dim(), z) - &c0.b;
    Ok(stack(u0, &c0.a_inv.apply(&shift.apply(u0))))
}

/// `s_n = ‖a_n‖ (‖u_{n−1}‖² + ‖u_n‖²)` for `1 ≤ n ≤ M − 1`.
pub fn weighted_norm_trace(fam: &CoefficientFamily, traj: &Trajectory) -> Result<Trace> {
    let values = (1..traj.horizon())
        .map(|n| Ok(fam.a_norm(n)? * (traj.norm_sq(n - 1) + traj.norm_sq(n))))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Trace::new(1, values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum L2Verdict {
    SquareSummable,
    NotSquareSummable,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Report {
    pub partial_sum: f64,
    pub verdict: L2Verdict,
    pub overflow: Option<usize>,
    pub series: SeriesReport,
}

/// Square-summability of `(‖u_n‖²)` judged from the decay of its tail.
pub fn l2_tail_diagnostic(traj: &Trajectory) -> L2Report {
    let terms: Vec<f64> = traj.u.iter().map(|v| v.norm_squared()).collect();
    let series = classify_series(&terms, 0, 0.0);
    let verdict = if traj.overflow.is_some() {
        L2Verdict::NotSquareSummable
    } else {
        match series.verdict {
            SeriesVerdict::Converges => L2Verdict::SquareSummable,
            SeriesVerdict::Diverges => L2Verdict::NotSquareSummable,
            SeriesVerdict::Undecided => L2Verdict::Undecided,
        }
    };
    L2Report { partial_sum: series.partial_sum, verdict, overflow: traj.overflow, series }
}

/// Writes a trajectory as CSV: `n`, real and imaginary part of each component of `u_n`,
/// `norm`, `s_n` and `residual` (the last two empty where undefined).
pub fn write_trajectory_csv<W: Write>(fam: &CoefficientFamily, traj: &Trajectory, out: W) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidInput(format!("csv output failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    let d = fam.dim();
    let mut header = vec!["n".to_string()];
    for k in 0..d {
        header.push(format!("re_u{k}"));
        header.push(format!("im_u{k}"));
    }
    header.extend(["norm", "s_n", "residual"].map(String::from));
    w.write_record(&header).map_err(io)?;
    let s = weighted_norm_trace(fam, traj)?;
    for (n, v) in traj.u.iter().enumerate() {
        let mut row = vec![n.to_string()];
        for c in v.iter() {
            row.push(format!("{:e}", c.re));
            row.push(format!("{:e}", c.im));
        }
        row.push(format!("{:e}", v.norm()));
        row.push(s.get(n).map(|x| format!("{x:e}")).unwrap_or_default());
        row.push(n.checked_sub(1).and_then(|i| traj.residuals.get(i)).map(|x| format!("{x:e}")).unwrap_or_default());
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("csv output failed: {e}")))?;
    Ok(())
}

/// Inverse of a transfer matrix computed numerically (used as an independent cross-check).
pub fn numeric_inverse(b: &BlockOperator) -> Result<BlockOperator> {
    BlockOperator::from_operator(invert(&b.as_operator())?)
}
