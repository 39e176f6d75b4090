//! Seeded random instances shared by the property and acceptance suites.

#![allow(dead_code)]

pub mod checks;

use std::sync::Arc;

use blockjacobi::coeffs::CoefficientFamily;
use blockjacobi::commutator::AlphaStrategy;
use blockjacobi::opcore::{condition_number, sym, Operator, Vector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

/// Dense matrix with independent standard complex Gaussian entries.
pub fn random_operator(rng: &mut ChaCha8Rng, dim: usize) -> Operator {
    let rows: Vec<Vec<Complex64>> = (0..dim).map(|_| (0..dim).map(|_| gaussian(rng)).collect()).collect();
    Operator::from_rows(&rows).expect("square rows")
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> Operator {
    sym(&random_operator(rng, dim))
}

/// `Id + 0.4 G` rescaled by a random factor in `[0.5, 2]`, redrawn until well conditioned.
pub fn random_well_conditioned(rng: &mut ChaCha8Rng, dim: usize) -> Operator {
    loop {
        let g = random_operator(rng, dim).scale_real(0.4);
        let x = (&Operator::identity(dim) + &g).scale_real(rng.random_range(0.5..2.0));
        if condition_number(&x) < 20.0 {
            return x;
        }
    }
}

pub fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vector {
    Vector::from_fn(len, |_, _| gaussian(rng))
}

/// Tabulated family of `len` terms with well-conditioned `a_n` and Hermitian `b_n`.
pub fn random_family(rng: &mut ChaCha8Rng, dim: usize, len: usize) -> CoefficientFamily {
    let a = (0..len).map(|_| random_well_conditioned(rng, dim)).collect();
    let b = (0..len).map(|_| random_hermitian(rng, dim)).collect();
    CoefficientFamily::tabulated(a, b).expect("valid tabulated family")
}

/// Random weight sequence `α_n` (well conditioned, not Hermitian).
pub fn random_strategy(rng: &mut ChaCha8Rng, dim: usize, len: usize) -> AlphaStrategy {
    let table: Arc<Vec<Operator>> = Arc::new((0..len).map(|_| random_well_conditioned(rng, dim)).collect());
    AlphaStrategy::custom(move |n| {
        table.get(n).cloned().ok_or_else(|| blockjacobi::error::Error::IndexOutOfRange { index: n, len: table.len() })
    })
}

pub fn real_lambda(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-3.0..3.0)
}

pub fn complex_z(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0))
}

pub fn x_matrix() -> Operator {
    Operator::from_real_rows(&[[1.0, 1.0], [1.0, 2.0]])
}

pub fn y_matrix() -> Operator {
    Operator::from_real_rows(&[[2.0, 1.0], [1.0, 1.0]])
}
