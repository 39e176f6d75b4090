//! Seeded sampling of initial conditions.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::opcore::Vector;

/// `count` independent points uniformly distributed on the unit sphere of `C^len`.
pub fn unit_sphere_samples(len: usize, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = Vector::from_fn(len, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        });
        let norm = v.norm();
        if norm > 1e-12 {
            out.push(v / Complex64::new(norm, 0.0));
        }
    }
    out
}

/// The standard basis of `C^len`.
pub fn basis(len: usize) -> Vec<Vector> {
    (0..len)
        .map(|k| Vector::from_fn(len, |i, _| Complex64::new(if i == k { 1.0 } else { 0.0 }, 0.0)))
        .collect()
}
