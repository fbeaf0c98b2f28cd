use super::assembly::VectorFn;
use crate::weights::Weight;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

/// Seeded smooth vector field: every component is a sum of `modes` sines
/// `a·sin(⟨ω,x⟩ + φ)` with `|a| ≤ 1`, `|ω_i| ∈ [0.5, 3]`.
pub fn random_smooth_field(n: usize, seed: u64, modes: usize) -> VectorFn {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table: Vec<Vec<(f64, Vec<f64>, f64)>> = (0..n)
        .map(|_| {
            (0..modes)
                .map(|_| {
                    let a = rng.gen_range(-1.0..1.0);
                    let w = (0..n)
                        .map(|_| {
                            let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                            s * rng.gen_range(0.5..3.0)
                        })
                        .collect();
                    (a, w, rng.gen_range(0.0..2.0 * PI))
                })
                .collect()
        })
        .collect();
    Arc::new(move |x: &[f64]| {
        table
            .iter()
            .map(|comp| {
                comp.iter()
                    .map(|(a, w, ph)| a * (w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + ph).sin())
                    .sum()
            })
            .collect()
    })
}

/// `F = μG`, so that `F/μ = G` stays bounded.
pub fn weighted_field(mu: Weight, g: VectorFn) -> VectorFn {
    Arc::new(move |x: &[f64]| {
        let m = mu.eval(x);
        g(x).into_iter().map(|v| v * m).collect()
    })
}

/// `∇u*` for `u* = Π sin(πx_i)`, which vanishes on the boundary of the unit cube.
pub fn sine_product_gradient(n: usize) -> VectorFn {
    Arc::new(move |x: &[f64]| {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { PI * (PI * x[j]).cos() } else { (PI * x[j]).sin() })
                    .product()
            })
            .collect()
    })
}
