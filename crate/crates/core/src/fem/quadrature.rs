//! Element quadrature, optionally weighted by a power of `μ`.
//!
//! Away from the origin a power weight is sampled at the quadrature points.
//! On an element whose closure contains the origin the integral is split into
//! cones from the origin over each facet; along each cone the factor
//! `t^{n+β−1}` is absorbed by the substitution `s = t^{n+β}`, which leaves a
//! smooth integrand.

use super::mesh::{determinant, factorial, SimplicialMesh};
use crate::numeric::{gauss_legendre_on, norm};
use crate::weights::Weight;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadPoint {
    pub x: Vec<f64>,
    pub bary: Vec<f64>,
    pub w: f64,
}

/// Collapsed-coordinate Gauss rule on the reference simplex
/// `{ξ ≥ 0, Σξ ≤ 1}`; weights sum to `1/n!`. Order 1 is the centroid rule.
pub fn reference_rule(n: usize, order: usize) -> Vec<(Vec<f64>, f64)> {
    if order <= 1 {
        return vec![(vec![1.0 / (n + 1) as f64; n], 1.0 / factorial(n))];
    }
    let (u, w) = gauss_legendre_on(order, 0.0, 1.0);
    let mut out = Vec::with_capacity(order.pow(n as u32));
    let mut idx = vec![0usize; n];
    loop {
        // ξ_i = u_i Π_{j<i}(1 − u_j), Jacobian Π_i (1 − u_i)^{n−1−i}
        let mut xi = vec![0.0; n];
        let mut left = 1.0;
        let mut jac = 1.0;
        for i in 0..n {
            xi[i] = left * u[idx[i]];
            left *= 1.0 - u[idx[i]];
            jac *= w[idx[i]] * (1.0 - u[idx[i]]).powi((n - 1 - i) as i32);
        }
        out.push((xi, jac));
        let mut axis = n;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if idx[axis] + 1 < order {
                idx[axis] += 1;
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// Unweighted rule on element `e`.
pub fn element_rule(mesh: &SimplicialMesh, e: usize, order: usize) -> Vec<QuadPoint> {
    let n = mesh.dim;
    let p = mesh.element_coords(e);
    let scale = factorial(n) * mesh.volume(e);
    reference_rule(n, order)
        .into_iter()
        .map(|(xi, w)| {
            let mut bary = Vec::with_capacity(n + 1);
            bary.push(1.0 - xi.iter().sum::<f64>());
            bary.extend_from_slice(&xi);
            let x = (0..n).map(|c| (0..=n).map(|i| bary[i] * p[i][c]).sum()).collect();
            QuadPoint { x, bary, w: w * scale }
        })
        .collect()
}

/// Whether the closed element contains the origin.
pub fn touches_origin(mesh: &SimplicialMesh, e: usize) -> bool {
    let zero = vec![0.0; mesh.dim];
    mesh.barycentric(e, &zero).iter().all(|b| *b >= -1e-12)
}

pub const SINGULAR_ORDER: usize = 10;

/// Rule for `∫_T g · μ^t dx`: the returned weights include `μ^t`.
pub fn weighted_rule(mesh: &SimplicialMesh, e: usize, mu: &Weight, t: f64, order: usize) -> Vec<QuadPoint> {
    if t == 0.0 {
        return element_rule(mesh, e, order);
    }
    match mu {
        Weight::Power(pw) => {
            let beta = pw.alpha * t;
            let scale = pw.scale.powf(t);
            if beta != 0.0 && touches_origin(mesh, e) {
                return cone_rule(mesh, e, beta, SINGULAR_ORDER.max(order))
                    .into_iter()
                    .map(|mut q| {
                        q.w *= scale;
                        q
                    })
                    .collect();
            }
            let mut rule = element_rule(mesh, e, order);
            for q in &mut rule {
                q.w *= scale * if beta == 0.0 { 1.0 } else { norm(&q.x).powf(beta) };
            }
            rule
        }
        Weight::Tabulated(_) => {
            let mut rule = element_rule(mesh, e, order);
            for q in &mut rule {
                q.w *= mu.eval(&q.x).powf(t);
            }
            rule
        }
    }
}

/// `∫_T g |x|^β` for an element containing the origin: one cone per facet.
fn cone_rule(mesh: &SimplicialMesh, e: usize, beta: f64, order: usize) -> Vec<QuadPoint> {
    let n = mesh.dim;
    let p = mesh.element_coords(e);
    let facet_rule = reference_rule(n - 1, order);
    let (s, sw) = gauss_legendre_on(order, 0.0, 1.0);
    let power = 1.0 / (n as f64 + beta);
    let mut out = Vec::new();
    for skip in 0..=n {
        let ys: Vec<&Vec<f64>> = p.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, v)| v).collect();
        let mut m: Vec<f64> = ys.iter().flat_map(|v| v.iter().copied()).collect();
        let det = determinant(&mut m, n).abs();
        if det <= 1e-300 {
            continue;
        }
        for (xi, fw) in &facet_rule {
            // facet point from its n barycentric coordinates
            let mut fb = Vec::with_capacity(n);
            fb.push(1.0 - xi.iter().sum::<f64>());
            fb.extend_from_slice(xi);
            let y: Vec<f64> = (0..n).map(|c| (0..n).map(|k| fb[k] * ys[k][c]).sum()).collect();
            let base = fw * det * norm(&y).powf(beta) * power;
            for (sk, wk) in s.iter().zip(&sw) {
                let t = sk.powf(power);
                let x: Vec<f64> = y.iter().map(|v| v * t).collect();
                let bary = mesh.barycentric(e, &x);
                out.push(QuadPoint { x, bary, w: base * wk });
            }
        }
    }
    out
}

/// `∫_T μ^t` for every element.
pub fn element_masses(mesh: &SimplicialMesh, mu: &Weight, t: f64) -> Vec<f64> {
    use rayon::prelude::*;
    (0..mesh.element_count())
        .into_par_iter()
        .map(|e| weighted_rule(mesh, e, mu, t, 1).iter().map(|q| q.w).sum())
        .collect()
}
