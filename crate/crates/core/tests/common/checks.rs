//! Randomized identity and bound checks. Each check builds one instance from `(seed, dim)` and
//! returns a description of the first violation found.

use blockjacobi::coeffs::total_variation;
use blockjacobi::commutator::{commutator_increment_bound, commutator_value, commutator_value_lagged, AlphaStrategy};
use blockjacobi::opcore::{
    abs_val, hermitian_extremes, invert, neg_part, op_norm, sym, BlockOperator, Operator,
};
use blockjacobi::recurrence::{propagate, transfer, transfer_inv};
use blockjacobi::turan::{turan_increment_bound, turan_trace, turan_value};
use num_complex::Complex64;
use rand::Rng;

use super::*;

pub type Check = fn(u64, usize) -> Result<(), String>;

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

/// `sym(X + Y) = sym(X) + sym(Y)`.
pub fn sym_additive(seed: u64, dim: usize) -> Result<(), String> {
    let mut r = rng(seed);
    let (x, y) = (random_operator(&mut r, dim), random_operator(&mut r, dim));
    let err = sym(&(&x + &y)).max_abs_diff(&(&sym(&x) + &sym(&y)));
    ensure(err <= 1e-12, || format!("sym additivity error {err:e}"))
}

/// `Y* sym(X) Y = sym(Y* X Y)`.
pub fn sym_congruence(seed: u64, dim: usize) -> Result<(), String> {
    let mut r = rng(seed);
    let (x, y) = (random_operator(&mut r, dim), random_operator(&mut r, dim));
    let lhs = &(&y.adjoint() * &sym(&x)) * &y;
    let rhs = sym(&(&(&y.adjoint() * &x) * &y));
    let err = lhs.max_abs_diff(&rhs);
    ensure(err <= 1e-10, || format!("congruence error {err:e}"))
}

/// `‖sym(X)‖ ≤ ‖X‖`.
pub fn sym_norm(seed: u64, dim: usize) -> Result<(), String> {
    let x = random_operator(&mut rng(seed), dim);
    let (s, n) = (op_norm(&sym(&x)), op_norm(&x));
    ensure(s <= n + 1e-12, || format!("‖sym X‖ = {s} exceeds ‖X‖ = {n}"))
}

/// `X⁻ ≥ 0` and `X + X⁻ ≥ 0`.
pub fn neg_part_psd(seed: u64, dim: usize) -> Result<(), String> {
    let x = random_hermitian(&mut rng(seed), dim);
    let neg = neg_part(&x).map_err(|e| e.to_string())?;
    let (lo_neg, _) = hermitian_extremes(&neg).map_err(|e| e.to_string())?;
    let (lo_sum, _) = hermitian_extremes(&(&x + &neg)).map_err(|e| e.to_string())?;
    ensure(lo_neg >= -1e-10 && lo_sum >= -1e-10, || format!("min eigenvalues {lo_neg:e}, {lo_sum:e}"))
}

/// `|X|² = X* X`.
pub fn abs_square(seed: u64, dim: usize) -> Result<(), String> {
    let x = random_operator(&mut rng(seed), dim);
    let a = abs_val(&x);
    let err = op_norm(&(&(&a * &a) - &(&x.adjoint() * &x)));
    let norm = op_norm(&x);
    ensure(err <= 1e-9 * (1.0 + norm * norm), || format!("‖|X|² − X*X‖ = {err:e}"))
}

/// `X⁻¹ X = Id`.
pub fn inverse_identity(seed: u64, dim: usize) -> Result<(), String> {
    let x = random_well_conditioned(&mut rng(seed), dim);
    let inv = invert(&x).map_err(|e| e.to_string())?;
    let err = (&inv * &x).max_abs_diff(&Operator::identity(dim)).max((&x * &inv).max_abs_diff(&Operator::identity(dim)));
    ensure(err <= 1e-9, || format!("inverse error {err:e}"))
}

/// `B_n(z) B_n(z)⁻¹ = B_n(z)⁻¹ B_n(z) = Id`.
pub fn transfer_inverse(seed: u64, dim: usize) -> Result<(), String> {
    let mut r = rng(seed);
    let fam = random_family(&mut r, dim, 8);
    let z = complex_z(&mut r);
    let n = r.random_range(1..7);
    let b = transfer(&fam, n, z).map_err(|e| e.to_string())?;
    let inv = transfer_inv(&fam, n, z).map_err(|e| e.to_string())?;
    let id = BlockOperator::identity(dim);
    let err = (&b * &inv).max_abs_diff(&id).max((&inv * &b).max_abs_diff(&id));
    ensure(err <= 1e-9, || format!("transfer inverse error {err:e} at n = {n}"))
}

/// `diag(a_n, a_n*) E B_n(λ) = (B_n(λ)⁻¹)* diag(a_{n−1}, a_{n−1}*) E` for real `λ`.
pub fn transfer_symplectic(seed: u64, dim: usize) -> Result<(), String> {
    let mut r = rng(seed);
    let fam = random_family(&mut r, dim, 8);
    let lambda = Complex64::new(real_lambda(&mut r), 0.0);
    let n = r.random_range(1..7);
    let e = BlockOperator::symplectic(dim);
    let block = |k: usize| -> Result<BlockOperator, String> {
        let a = fam.a(k).map_err(|e| e.to_string())?;
        BlockOperator::diag(&a, &a.adjoint()).map_err(|e| e.to_string())
    };
    let b = transfer(&fam, n, lambda).map_err(|e| e.to_string())?;
    let inv = transfer_inv(&fam, n, lambda).map_err(|e| e.to_string())?;
    let lhs = &(&block(n)? * &e) * &b;
    let rhs = &(&inv.adjoint() * &block(n - 1)?) * &e;
    let err = lhs.max_abs_diff(&rhs);
    ensure(err <= 1e-9, || format!("symplectic identity error {err:e} at n = {n}"))
}

fn strategy_for(r: &mut rand_chacha::ChaCha8Rng, dim: usize, len: usize) -> AlphaStrategy {
    match r.random_range(0..3) {
        0 => AlphaStrategy::Identity,
        1 => AlphaStrategy::AnWeights,
        _ => random_strategy(r, dim, len),
    }
}

/// The two representations of the weighted functional agree (relative to the form's scale).
pub fn commutator_dual(seed: u64, dim: usize) -> Result<(), String> {
    let mut r = rng(seed);
    let len = 24;
    let fam = random_family(&mut r, dim, len);
    let strategy = strategy_for(&mut r, dim, len);
    let lambda = real_lambda(&mut r);
    let alpha = random_vector(&mut r, 2 * dim);
    let traj = propagate(&fam, Complex64::new(lambda, 0.0), &alpha, len - 2).map_err(|e| e.to_string())?;
    for n in 1..len - 3 {
        let s = commutator_value(&fam, &strategy, n, &traj).map_err(|e| e.to_string())?;
        let l = commutator_value_lagged(&fam, &strategy, n, &traj).map_err(|e| e.to_string())?;
        let scale = s.abs().max(magnitude(&fam, &strategy, n, &traj));
        ensure((s - l).abs() <= 1e-9 * scale, || format!("n = {n}: {s} vs {l} ({strategy:?})"))?;
    }
    Ok(())
}

/// `‖α_n a_n*‖ (‖u_n‖² + ‖u_{n+1}‖²)`: the size of the individual terms of the functional.
fn magnitude(fam: &blockjacobi::coeffs::CoefficientFamily, s: &AlphaStrategy, n: usize, traj: &blockjacobi::recurrence::Trajectory) -> f64 {
    let w = op_norm(&(&s.alpha(fam, n).unwrap() * &fam.a(n).unwrap().adjoint()));
    w * (traj.norm_sq(n) + traj.norm_sq(n + 1))
}

/// The form and the fast evaluation of the Turán determinants agree, for complex `z`.
pub fn turan_routes(seed: u64, dim: usize) -> Result<(), String> {
    let mut r = rng(seed);
    let len = 24;
    let fam = random_family(&mut r, dim, len);
    let period = r.random_range(1..4);
    let z = complex_z(&mut r);
    let traj = propagate(&fam, z, &random_vector(&mut r, 2 * dim), len - 2).map_err(|e| e.to_string())?;
    let trace = turan_trace(&fam, period, &traj).map_err(|e| e.to_string())?;
    for (n, fast) in trace.iter() {
        let form = turan_value(&fam, period, n, &traj).map_err(|e| e.to_string())?;
        let a = fam.a_norm(n + period - 1).unwrap();
        let mass: f64 = (n - 1..=n + period).map(|k| traj.norm_sq(k)).sum();
        let scale = fast.abs().max(a * mass);
        ensure((form - fast).abs() <= 1e-9 * scale, || format!("N = {period}, n = {n}: {form} vs {fast}"))?;
    }
    Ok(())
}

/// `𝒱_N(xy) ≤ sup‖x‖ 𝒱_N(y) + sup‖y‖ 𝒱_N(x)` on a finite window.
pub fn variation_product(seed: u64, dim: usize) -> Result<(), String> {
    let mut r = rng(seed);
    let len = 30;
    let period = r.random_range(1..4);
    let xs: Vec<Operator> = (0..len).map(|_| random_operator(&mut r, dim)).collect();
    let ys: Vec<Operator> = (0..len).map(|_| random_operator(&mut r, dim)).collect();
    let window = 0..len - period;
    let v = |f: &dyn Fn(usize) -> Operator| {
        total_variation(|n| Ok(f(n)), period, window.clone()).map(|rep| rep.partial_sum).map_err(|e| e.to_string())
    };
    let vxy = v(&|n| &xs[n] * &ys[n])?;
    let (vx, vy) = (v(&|n| xs[n].clone())?, v(&|n| ys[n].clone())?);
    let sup = |s: &[Operator]| s.iter().map(op_norm).fold(0.0, f64::max);
    let bound = sup(&xs) * vy + sup(&ys) * vx;
    ensure(vxy <= bound + 1e-9, || format!("variation of product {vxy} exceeds {bound}"))
}

/// `[S_{n+1} − S_n]⁻ ≤ factor (‖u_n‖² + ‖u_{n+1}‖²)` for the weighted functional.
pub fn commutator_increment(seed: u64, dim: usize) -> Result<(), String> {
    let mut r = rng(seed);
    let len = 24;
    let fam = random_family(&mut r, dim, len);
    let strategy = strategy_for(&mut r, dim, len);
    let lambda = real_lambda(&mut r);
    let traj = propagate(&fam, Complex64::new(lambda, 0.0), &random_vector(&mut r, 2 * dim), len - 2)
        .map_err(|e| e.to_string())?;
    for n in 1..len - 4 {
        let s0 = commutator_value(&fam, &strategy, n, &traj).map_err(|e| e.to_string())?;
        let s1 = commutator_value(&fam, &strategy, n + 1, &traj).map_err(|e| e.to_string())?;
        let factor = commutator_increment_bound(&fam, &strategy, n, lambda).map_err(|e| e.to_string())?;
        let lhs = (s0 - s1).max(0.0);
        let rhs = (1.0 + 1e-6) * factor * (traj.norm_sq(n) + traj.norm_sq(n + 1));
        ensure(lhs <= rhs, || format!("n = {n}: decrease {lhs} exceeds {rhs} ({strategy:?})"))?;
    }
    Ok(())
}

/// `|S_{n+1} − S_n| ≤ factor (‖u_{n−1}‖² + ‖u_n‖²)` for the Turán determinants, complex `z`.
pub fn turan_increment(seed: u64, dim: usize) -> Result<(), String> {
    let mut r = rng(seed);
    let len = 24;
    let fam = random_family(&mut r, dim, len);
    let period = r.random_range(1..4);
    let z = complex_z(&mut r);
    let traj = propagate(&fam, z, &random_vector(&mut r, 2 * dim), len - 2).map_err(|e| e.to_string())?;
    let trace = turan_trace(&fam, period, &traj).map_err(|e| e.to_string())?;
    for n in 1..trace.end() - 1 {
        let (s0, s1) = (trace.get(n).unwrap(), trace.get(n + 1).unwrap());
        let factor = turan_increment_bound(&fam, period, n, z).map_err(|e| e.to_string())?;
        let lhs = (s1 - s0).abs();
        let rhs = (1.0 + 1e-6) * factor * (traj.norm_sq(n - 1) + traj.norm_sq(n));
        ensure(lhs <= rhs, || format!("N = {period}, n = {n}: increment {lhs} exceeds {rhs}"))?;
    }
    Ok(())
}

/// Identity checks of the algebraic suite, by name.
pub const IDENTITIES: &[(&str, Check)] = &[
    ("sym additivity", sym_additive),
    ("sym congruence", sym_congruence),
    ("sym norm bound", sym_norm),
    ("negative part", neg_part_psd),
    ("absolute value", abs_square),
    ("inverse", inverse_identity),
    ("symplectic transfer identity", transfer_symplectic),
    ("dual representation", commutator_dual),
    ("transfer inverse", transfer_inverse),
    ("variation product bound", variation_product),
    ("turan evaluation routes", turan_routes),
];

pub const BOUNDS: &[(&str, Check)] =
    &[("weighted increment bound", commutator_increment), ("turan increment bound", turan_increment)];
