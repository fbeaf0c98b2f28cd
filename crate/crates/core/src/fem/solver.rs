use super::assembly::{assemble, EllipticProblem, LinearSystem};
use super::mesh::SimplicialMesh;
use crate::error::{Error, Result};
use crate::numeric::par_dot;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_CG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    /// Defaults to `50·√dofs`.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_CG_TOL, max_iter: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True relative residual `‖b − Ax‖/‖b‖`.
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients.
pub fn solve_cg(system: &LinearSystem, opts: &SolverOptions) -> Result<CgOutcome> {
    let a = &system.matrix;
    let b = &system.rhs;
    let n = a.n;
    let bnorm = par_dot(b, b).sqrt();
    if n == 0 || bnorm == 0.0 {
        return Ok(CgOutcome { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let cap = opts.max_iter.unwrap_or_else(|| ((50.0 * (n as f64).sqrt()).ceil() as usize).max(50));
    let dinv: Vec<f64> = a.diagonal().iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = par_dot(&r, &z);
    let mut it = 0;
    let true_residual = |x: &[f64]| {
        let ax = a.mul(x);
        let res: Vec<f64> = b.iter().zip(&ax).map(|(b, v)| b - v).collect();
        par_dot(&res, &res).sqrt() / bnorm
    };
    loop {
        if par_dot(&r, &r).sqrt() <= opts.tol * bnorm {
            let residual = true_residual(&x);
            if residual <= opts.tol {
                return Ok(CgOutcome { x, iterations: it, residual });
            }
            // recurrence drift: restart from the true residual
            let ax = a.mul(&x);
            r = b.iter().zip(&ax).map(|(b, v)| b - v).collect();
            z = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
            p = z.clone();
            rz = par_dot(&r, &z);
        }
        if it >= cap {
            return Err(Error::NoConvergence { iterations: it, residual: true_residual(&x) });
        }
        a.mul_into(&p, &mut ap);
        let pap = par_dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotSpd { drift: f64::NAN });
        }
        let alpha = rz / pap;
        x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(&ap).for_each(|(r, q)| *r -= alpha * q);
        z.par_iter_mut().zip(&r).zip(&dinv).for_each(|((z, r), d)| *z = r * d);
        let rz_new = par_dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        it += 1;
    }
}

/// Nodal values and per-element gradients of a P1 solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSolution {
    pub dim: usize,
    pub values: Vec<f64>,
    /// `dim` entries per element.
    pub gradients: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl DiscreteSolution {
    pub fn from_nodal(mesh: &SimplicialMesh, values: Vec<f64>, iterations: usize, residual: f64) -> Self {
        let n = mesh.dim;
        let gradients = (0..mesh.element_count())
            .into_par_iter()
            .flat_map_iter(|e| {
                let g = mesh.hat_gradients(e);
                let ids = mesh.element(e);
                let values = &values;
                (0..n).map(move |c| ids.iter().zip(&g).map(|(&v, gi)| values[v] * gi[c]).sum::<f64>()).collect::<Vec<_>>()
            })
            .collect();
        Self { dim: n, values, gradients, iterations, residual }
    }

    pub fn gradient(&self, e: usize) -> &[f64] {
        &self.gradients[e * self.dim..(e + 1) * self.dim]
    }

    pub fn gradient_norms(&self) -> Vec<f64> {
        self.gradients.chunks(self.dim).map(crate::numeric::norm).collect()
    }

    /// `u_h(x)` on element `e` from barycentric coordinates.
    pub fn eval(&self, mesh: &SimplicialMesh, e: usize, bary: &[f64]) -> f64 {
        mesh.element(e).iter().zip(bary).map(|(&v, b)| self.values[v] * b).sum()
    }
}

/// Assembles, solves and reconstructs nodal values including boundary data.
pub fn solve(problem: &EllipticProblem, opts: &SolverOptions) -> Result<DiscreteSolution> {
    let system = assemble(problem)?;
    let out = solve_cg(&system, opts)?;
    let mut values = system.fixed.clone();
    for (k, &v) in system.dofs.iter().enumerate() {
        values[v] = out.x[k];
    }
    Ok(DiscreteSolution::from_nodal(&problem.mesh, values, out.iterations, out.residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::VectorFn;
    use crate::fem::mesh::triangulate_box;
    use crate::geometry::Cuboid;
    use crate::weights::Weight;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn unit_square(m: usize) -> SimplicialMesh {
        triangulate_box(&Cuboid::cube(2, 0.0, 1.0).unwrap(), m).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let p = EllipticProblem::weighted_identity(unit_square(8), Weight::power(0.5), Arc::new(|_: &[f64]| vec![0.0, 0.0]));
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_in_data() {
        let mesh = triangulate_box(&Cuboid::cube(2, -1.0, 1.0).unwrap(), 16).unwrap();
        let f1: VectorFn = Arc::new(|x: &[f64]| vec![x[1].sin(), 1.0]);
        let f2: VectorFn = Arc::new(|x: &[f64]| vec![x[0] * x[1], (2.0 * x[0]).cos()]);
        let (g1, g2) = (f1.clone(), f2.clone());
        let f12: VectorFn = Arc::new(move |x: &[f64]| g1(x).iter().zip(g2(x)).map(|(a, b)| a + b).collect());
        let mu = Weight::power(0.5);
        let opts = SolverOptions::default();
        let s1 = solve(&EllipticProblem::weighted_identity(mesh.clone(), mu.clone(), f1), &opts).unwrap();
        let s2 = solve(&EllipticProblem::weighted_identity(mesh.clone(), mu.clone(), f2), &opts).unwrap();
        let s12 = solve(&EllipticProblem::weighted_identity(mesh, mu, f12), &opts).unwrap();
        let scale = s12.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..s12.values.len() {
            assert!((s12.values[k] - s1.values[k] - s2.values[k]).abs() <= 10.0 * opts.tol * scale.max(1.0));
        }
    }

    #[test]
    fn inhomogeneous_boundary_reproduces_linear_function() {
        let mesh = unit_square(6);
        let d: Vec<f64> = (0..mesh.vertex_count()).map(|v| 2.0 * mesh.vertex(v)[0] - mesh.vertex(v)[1]).collect();
        let mut p = EllipticProblem::weighted_identity(mesh, Weight::lebesgue(), Arc::new(|_: &[f64]| vec![0.0, 0.0]));
        p.dirichlet = Some(d.clone());
        let s = solve(&p, &SolverOptions::default()).unwrap();
        for (a, b) in s.values.iter().zip(&d) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(s.gradients.chunks(2).all(|g| (g[0] - 2.0).abs() < 1e-8 && (g[1] + 1.0).abs() < 1e-8));
    }

    #[test]
    fn manufactured_solution_converges() {
        let grad: VectorFn = Arc::new(|x: &[f64]| {
            vec![PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()]
        });
        let err = |m: usize| {
            let p = EllipticProblem::weighted_identity(unit_square(m), Weight::lebesgue(), grad.clone());
            let s = solve(&p, &SolverOptions::default()).unwrap();
            assert!(s.residual <= 1e-10);
            crate::fem::h1_seminorm_error(&p.mesh, &s, &p.mu, &grad)
        };
        let ratio = err(32) / err(64);
        assert!((1.8..=2.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let p = EllipticProblem::weighted_identity(unit_square(16), Weight::lebesgue(), Arc::new(|x: &[f64]| vec![x[1], 0.0]));
        let opts = SolverOptions { tol: 1e-10, max_iter: Some(2) };
        match solve(&p, &opts) {
            Err(Error::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual > 1e-10);
            }
            other => panic!("{other:?}"),
        }
    }
}
