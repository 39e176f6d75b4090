//! Finite-dimensional operator calculus on `H = C^d`.
//!
//! Every operator is a dense `d x d` complex matrix. Block operators act on
//! `H ⊕ H` and are stored as a single `2d x 2d` matrix with block accessors.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Vector = DVector<Complex64>;

/// Relative tolerance (against the operator norm) for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Condition numbers above this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;
/// Default eigenvalue margin for definiteness classification.
pub const DEFAULT_DEFINITENESS_EPS: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct Operator(DMatrix<Complex64>);

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Operator").field(&self.to_rows()).finish()
    }
}

impl Operator {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "operator must be a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn scalar(dim: usize, value: Complex64) -> Self {
        Self(DMatrix::from_diagonal_element(dim, dim, value))
    }

    pub fn diag(values: &[f64]) -> Self {
        let d = values.len();
        Self(DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                ZERO
            }
        }))
    }

    /// Builds a real operator from row-major data.
    ///
    /// Panics if the rows are ragged or not square; intended for literals.
    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let d = rows.len();
        assert!(rows.iter().all(|r| r.as_ref().len() == d), "rows must form a square matrix");
        Self(DMatrix::from_fn(d, d, |i, j| Complex64::new(rows[i].as_ref()[j], 0.0)))
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("rows must form a non-empty square matrix".into()));
        }
        Ok(Self(DMatrix::from_fn(d, d, |i, j| rows[i][j])))
    }

    pub fn to_rows(&self) -> Vec<Vec<Complex64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self(&self.0 * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        Self(self.0.map(|z| z * c))
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        &self.0 * v
    }

    /// `Re <X v, v>`.
    pub fn quadratic_form(&self, v: &Vector) -> f64 {
        v.dotc(&(&self.0 * v)).re
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Relative distance from Hermitian: `‖X − X*‖ / ‖X‖` (zero for the zero matrix).
    pub fn hermitian_deviation(&self) -> f64 {
        let norm = op_norm(self);
        if norm == 0.0 {
            return 0.0;
        }
        op_norm(&Operator(&self.0 - self.0.adjoint())) / norm
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_deviation() <= HERMITIAN_TOL
    }

    fn require_hermitian(&self) -> Result<()> {
        let deviation = self.hermitian_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }
}

/// A matrix entry on the wire: either a plain real or a `[re, im]` pair.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Serialize for Operator {
    /// Row-major nested arrays of `[re, im]` pairs.
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> =
            self.to_rows().iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<Entry>> = Vec::deserialize(deserializer)?;
        let rows: Vec<Vec<Complex64>> = rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|e| match e {
                        Entry::Real(x) => Complex64::new(x, 0.0),
                        Entry::Complex([re, im]) => Complex64::new(re, im),
                    })
                    .collect()
            })
            .collect();
        let op = Operator::from_rows(&rows).map_err(serde::de::Error::custom)?;
        if !op.is_finite() {
            return Err(serde::de::Error::custom("matrix entries must be finite"));
        }
        Ok(op)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator(-&self.0)
    }
}

/// Hermitian real part `(X + X*) / 2`.
pub fn sym(x: &Operator) -> Operator {
    Operator((&x.0 + x.0.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian operator.
pub fn hermitian_eigen(x: &Operator) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    x.require_hermitian()?;
    Ok(eigen_unchecked(&x.0))
}

fn eigen_unchecked(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn spectral_map(values: &[f64], vectors: &DMatrix<Complex64>, f: impl Fn(f64) -> f64) -> Operator {
    let d = values.len();
    let mapped = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::new(f(values[i]), 0.0)
        } else {
            ZERO
        }
    });
    let out = vectors * mapped * vectors.adjoint();
    Operator((&out + out.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Negative part `X⁻` of a Hermitian operator, via the spectral theorem.
pub fn neg_part(x: &Operator) -> Result<Operator> {
    let (values, vectors) = hermitian_eigen(x)?;
    Ok(spectral_map(&values, &vectors, |l| (-l).max(0.0)))
}

/// Absolute value `|X| = (X* X)^{1/2}`.
pub fn abs_val(x: &Operator) -> Operator {
    let gram = x.0.adjoint() * &x.0;
    let (values, vectors) = eigen_unchecked(&gram);
    spectral_map(&values, &vectors, |l| l.max(0.0).sqrt())
}

/// Singular values in descending order.
pub fn singular_values(x: &Operator) -> Vec<f64> {
    let mut s: Vec<f64> = x.0.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral norm (largest singular value).
pub fn op_norm(x: &Operator) -> f64 {
    if x.dim() == 1 {
        return x.0[(0, 0)].norm();
    }
    x.0.singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn condition_number(x: &Operator) -> f64 {
    let s = singular_values(x);
    let (max, min) = (s[0], s[s.len() - 1]);
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Smallest and largest eigenvalue of a Hermitian operator.
pub fn hermitian_extremes(x: &Operator) -> Result<(f64, f64)> {
    let (values, _) = hermitian_eigen(x)?;
    Ok((values[0], values[values.len() - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Definiteness {
    StrictlyPositive,
    StrictlyNegative,
    Indefinite,
    Degenerate,
}

impl Definiteness {
    pub fn is_definite(self) -> bool {
        matches!(self, Self::StrictlyPositive | Self::StrictlyNegative)
    }
}

pub fn classify_definiteness(x: &Operator, eps: f64) -> Result<Definiteness> {
    let (values, _) = hermitian_eigen(x)?;
    Ok(classify_spectrum(&values, eps))
}

pub(crate) fn classify_spectrum(values: &[f64], eps: f64) -> Definiteness {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min > eps {
        Definiteness::StrictlyPositive
    } else if max < -eps {
        Definiteness::StrictlyNegative
    } else if values.iter().any(|l| l.abs() <= eps) {
        Definiteness::Degenerate
    } else {
        Definiteness::Indefinite
    }
}

/// Inverse together with the condition-number estimate used to accept it.
pub fn invert_with_condition(x: &Operator) -> Result<(Operator, f64)> {
    if !x.is_finite() {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let condition = condition_number(x);
    if !(condition <= SINGULAR_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let inv = x.0.clone().try_inverse().ok_or(Error::Singular { condition })?;
    Ok((Operator(inv), condition))
}

pub fn invert(x: &Operator) -> Result<Operator> {
    invert_with_condition(x).map(|(inv, _)| inv)
}

/// Operator on `H ⊕ H`, stored as a `2d x 2d` matrix.
#[derive(Clone, PartialEq)]
pub struct BlockOperator {
    half: usize,
    m: DMatrix<Complex64>,
}

impl fmt::Debug for BlockOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockOperator")
            .field("dim", &self.half)
            .field("matrix", &self.as_operator().to_rows())
            .finish()
    }
}

impl BlockOperator {
    pub fn from_blocks(
        top_left: &Operator,
        top_right: &Operator,
        bottom_left: &Operator,
        bottom_right: &Operator,
    ) -> Result<Self> {
        let d = top_left.dim();
        for blk in [top_right, bottom_left, bottom_right] {
            if blk.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: blk.dim() });
            }
        }
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&top_left.0);
        m.view_mut((0, d), (d, d)).copy_from(&top_right.0);
        m.view_mut((d, 0), (d, d)).copy_from(&bottom_left.0);
        m.view_mut((d, d), (d, d)).copy_from(&bottom_right.0);
        Ok(Self { half: d, m })
    }

    /// Wraps a `2d x 2d` operator.
    pub fn from_operator(x: Operator) -> Result<Self> {
        let n = x.dim();
        if n % 2 != 0 {
            return Err(Error::InvalidInput(format!("block operator needs even size, got {n}")));
        }
        Ok(Self { half: n / 2, m: x.0 })
    }

    pub fn diag(top: &Operator, bottom: &Operator) -> Result<Self> {
        let d = top.dim();
        Self::from_blocks(top, &Operator::zeros(d), &Operator::zeros(d), bottom)
    }

    pub fn identity(dim: usize) -> Self {
        Self { half: dim, m: DMatrix::identity(2 * dim, 2 * dim) }
    }

    /// The symplectic unit `E = (0, −Id; Id, 0)`.
    pub fn symplectic(dim: usize) -> Self {
        let mut m = DMatrix::zeros(2 * dim, 2 * dim);
        for i in 0..dim {
            m[(i, dim + i)] = -ONE;
            m[(dim + i, i)] = ONE;
        }
        Self { half: dim, m }
    }

    pub fn dim(&self) -> usize {
        self.half
    }

    pub fn block(&self, row: usize, col: usize) -> Operator {
        assert!(row < 2 && col < 2, "block index out of range");
        let d = self.half;
        Operator(self.m.view((row * d, col * d), (d, d)).into_owned())
    }

    pub fn as_operator(&self) -> Operator {
        Operator(self.m.clone())
    }

    pub fn into_operator(self) -> Operator {
        Operator(self.m)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn adjoint(&self) -> Self {
        Self { half: self.half, m: self.m.adjoint() }
    }

    pub fn sym(&self) -> Self {
        Self { half: self.half, m: (&self.m + self.m.adjoint()) * Complex64::new(0.5, 0.0) }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        Self { half: self.half, m: self.m.map(|z| z * c) }
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        &self.m * v
    }

    pub fn quadratic_form(&self, v: &Vector) -> f64 {
        v.dotc(&(&self.m * v)).re
    }

    pub fn max_abs_diff(&self, other: &BlockOperator) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        op_norm(&Operator(self.m.clone()))
    }
}

impl Mul for &BlockOperator {
    type Output = BlockOperator;
    fn mul(self, rhs: &BlockOperator) -> BlockOperator {
        BlockOperator { half: self.half, m: &self.m * &rhs.m }
    }
}

impl Add for &BlockOperator {
    type Output = BlockOperator;
    fn add(self, rhs: &BlockOperator) -> BlockOperator {
        BlockOperator { half: self.half, m: &self.m + &rhs.m }
    }
}

impl Sub for &BlockOperator {
    type Output = BlockOperator;
    fn sub(self, rhs: &BlockOperator) -> BlockOperator {
        BlockOperator { half: self.half, m: &self.m - &rhs.m }
    }
}

/// Stacks `(top, bottom)` into a vector of `H ⊕ H`.
pub fn stack(top: &Vector, bottom: &Vector) -> Vector {
    let d = top.len();
    Vector::from_fn(2 * d, |i, _| if i < d { top[i] } else { bottom[i - d] })
}

/// Splits a vector of `H ⊕ H` into its two halves.
pub fn split(v: &Vector) -> (Vector, Vector) {
    let d = v.len() / 2;
    (v.rows(0, d).into_owned(), v.rows(d, d).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sym_of_nilpotent() {
        let x = Operator::from_real_rows(&[[0.0, 2.0], [0.0, 0.0]]);
        let s = sym(&x);
        assert_eq!(s, Operator::from_real_rows(&[[0.0, 1.0], [1.0, 0.0]]));
    }

    #[test]
    fn sym_fixes_hermitian() {
        let x = Operator::from_real_rows(&[[1.0, 1.0], [1.0, 2.0]]);
        assert_eq!(sym(&x), x);
        assert_eq!(sym(&Operator::identity(3)), Operator::identity(3));
    }

    #[test]
    fn neg_part_examples() {
        let x = Operator::diag(&[3.0, -2.0]);
        assert!(neg_part(&x).unwrap().max_abs_diff(&Operator::diag(&[0.0, 2.0])) < 1e-14);

        let psd = Operator::from_real_rows(&[[2.0, 1.0], [1.0, 2.0]]);
        assert!(neg_part(&psd).unwrap().max_abs_diff(&Operator::zeros(2)) < 1e-14);

        // eigenpair (−1, (1, −1)/√2) gives (1/2)[[1, −1], [−1, 1]]
        let swap = Operator::from_real_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        let expected = Operator::from_real_rows(&[[0.5, -0.5], [-0.5, 0.5]]);
        assert!(neg_part(&swap).unwrap().max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn neg_part_rejects_non_hermitian() {
        let x = Operator::from_real_rows(&[[0.0, 1.0], [0.0, 0.0]]);
        assert!(matches!(neg_part(&x), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn abs_val_examples() {
        let psd = Operator::from_real_rows(&[[2.0, 1.0], [1.0, 2.0]]);
        assert!(abs_val(&psd).max_abs_diff(&psd) < 1e-13);
        assert!(abs_val(&Operator::diag(&[-2.0, 3.0])).max_abs_diff(&Operator::diag(&[2.0, 3.0])) < 1e-14);
        let x = Operator::from_real_rows(&[[0.0, 2.0], [0.0, 0.0]]);
        assert!(abs_val(&x).max_abs_diff(&Operator::diag(&[0.0, 2.0])) < 1e-14);
    }

    #[test]
    fn op_norm_examples() {
        assert_abs_diff_eq!(op_norm(&Operator::identity(2)), 1.0, epsilon = 1e-15);
        let x = Operator::from_real_rows(&[[1.0, 1.0], [1.0, 2.0]]);
        assert_abs_diff_eq!(op_norm(&x), (3.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-14);
        assert_eq!(op_norm(&Operator::zeros(3)), 0.0);
    }

    #[test]
    fn extremes_examples() {
        assert_eq!(hermitian_extremes(&Operator::diag(&[-1.0, 5.0])).unwrap(), (-1.0, 5.0));
        let (lo, hi) =
            hermitian_extremes(&Operator::from_real_rows(&[[0.0, 1.0], [1.0, 0.0]])).unwrap();
        assert_abs_diff_eq!(lo, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-15);
        assert_eq!(hermitian_extremes(&Operator::identity(2)).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn complex_hermitian_spectrum() {
        // [[2, i], [−i, 2]] has eigenvalues 1 and 3
        let x = Operator::from_rows(&[vec![c(2.0, 0.0), c(0.0, 1.0)], vec![c(0.0, -1.0), c(2.0, 0.0)]])
            .unwrap();
        let (lo, hi) = hermitian_extremes(&x).unwrap();
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hi, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn definiteness_examples() {
        let eps = DEFAULT_DEFINITENESS_EPS;
        assert_eq!(
            classify_definiteness(&Operator::diag(&[1.0, 2.0]), eps).unwrap(),
            Definiteness::StrictlyPositive
        );
        assert_eq!(
            classify_definiteness(&Operator::diag(&[1.0, -1.0]), eps).unwrap(),
            Definiteness::Indefinite
        );
        assert_eq!(
            classify_definiteness(&Operator::diag(&[1.0, 1e-12]), eps).unwrap(),
            Definiteness::Degenerate
        );
        assert_eq!(
            classify_definiteness(&Operator::diag(&[-1.0, -2.0]), eps).unwrap(),
            Definiteness::StrictlyNegative
        );
    }

    #[test]
    fn invert_examples() {
        assert_eq!(invert(&Operator::identity(2)).unwrap(), Operator::identity(2));
        let x = Operator::from_real_rows(&[[1.0, 1.0], [1.0, 2.0]]);
        let expected = Operator::from_real_rows(&[[2.0, -1.0], [-1.0, 1.0]]);
        assert!(invert(&x).unwrap().max_abs_diff(&expected) < 1e-14);
        assert!(matches!(invert(&Operator::zeros(2)), Err(Error::Singular { .. })));
    }

    #[test]
    fn serde_round_trip() {
        let x = Operator::from_rows(&[vec![c(1.0, 0.0), c(0.0, -2.0)], vec![c(0.0, 2.0), c(3.5, 0.0)]]).unwrap();
        let text = serde_json::to_string(&x).unwrap();
        assert_eq!(serde_json::from_str::<Operator>(&text).unwrap(), x);
        let mixed: Operator = serde_json::from_str("[[1, [0, 1]], [[0, -1], 2.5]]").unwrap();
        assert_eq!(mixed.get(0, 1), c(0.0, 1.0));
        assert!(serde_json::from_str::<Operator>("[[1, 2]]").is_err());
    }

    #[test]
    fn block_layout() {
        let a = Operator::from_real_rows(&[[1.0]]);
        let b = Operator::from_real_rows(&[[2.0]]);
        let c_ = Operator::from_real_rows(&[[3.0]]);
        let d = Operator::from_real_rows(&[[4.0]]);
        let blk = BlockOperator::from_blocks(&a, &b, &c_, &d).unwrap();
        assert_eq!(blk.block(0, 1), b);
        assert_eq!(blk.block(1, 0), c_);
        let e = BlockOperator::symplectic(1);
        assert_eq!(e.block(0, 1), Operator::from_real_rows(&[[-1.0]]));
        assert_eq!(&e * &e, BlockOperator::identity(1).scale_real(-1.0));
    }
}
