//! Weighted norms of discrete solutions and the inequalities they are tested against.

use super::assembly::{element_data, Coefficient, EllipticProblem, VectorFn};
use super::mesh::SimplicialMesh;
use super::quadrature::{element_masses, element_rule, weighted_rule, QuadPoint};
use super::solver::{solve, DiscreteSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::geometry::{Cuboid, GridScalarField, UniformGrid};
use crate::numeric::pairwise_sum;
use crate::weights::Weight;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p must lie in [1, ∞), got {p}")));
    }
    Ok(())
}

fn selected(mesh: &SimplicialMesh, region: Option<&Cuboid>) -> Vec<usize> {
    (0..mesh.element_count())
        .filter(|&e| region.map_or(true, |r| r.contains(&mesh.centroid(e))))
        .collect()
}

/// `Σ_T ∫_T g dx` with the weighted rule `μ^t`, summed in element order.
fn integrate<G>(mesh: &SimplicialMesh, elements: &[usize], mu: &Weight, t: f64, order: usize, g: G) -> f64
where
    G: Fn(usize, &QuadPoint) -> f64 + Sync,
{
    let parts: Vec<f64> = elements
        .par_iter()
        .map(|&e| weighted_rule(mesh, e, mu, t, order).iter().map(|q| q.w * g(e, q)).sum())
        .collect();
    pairwise_sum(&parts)
}

/// `(∫|f|^p μ)^{1/p}` for an element-wise constant field.
pub fn weighted_lp_norm(mesh: &SimplicialMesh, values: &[f64], mu: &Weight, p: f64) -> Result<f64> {
    weighted_lp_norm_on(mesh, values, mu, p, None)
}

/// As [`weighted_lp_norm`], restricted to elements whose centroid lies in `region`.
pub fn weighted_lp_norm_on(mesh: &SimplicialMesh, values: &[f64], mu: &Weight, p: f64, region: Option<&Cuboid>) -> Result<f64> {
    check_p(p)?;
    if values.len() != mesh.element_count() {
        return Err(Error::DimensionMismatch { expected: mesh.element_count(), got: values.len() });
    }
    let masses = element_masses(mesh, mu, 1.0);
    let parts: Vec<f64> = selected(mesh, region).into_iter().map(|e| values[e].abs().powf(p) * masses[e]).collect();
    Ok(pairwise_sum(&parts).powf(1.0 / p))
}

/// `‖∇u_h‖_{L^p(μ)}`.
pub fn gradient_norm(mesh: &SimplicialMesh, sol: &DiscreteSolution, mu: &Weight, p: f64, region: Option<&Cuboid>) -> Result<f64> {
    weighted_lp_norm_on(mesh, &sol.gradient_norms(), mu, p, region)
}

/// `‖F/μ‖_{L^p(μ)} = (∫|F|^p μ^{1−p})^{1/p}`.
pub fn data_norm(problem: &EllipticProblem, p: f64, region: Option<&Cuboid>) -> Result<f64> {
    check_p(p)?;
    let mesh = &problem.mesh;
    let els = selected(mesh, region);
    let total = integrate(mesh, &els, &problem.mu, 1.0 - p, 3, |_, q| crate::numeric::norm(&(problem.f)(&q.x)).powf(p));
    Ok(total.powf(1.0 / p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityRow {
    pub m: usize,
    pub sample: usize,
    pub p: f64,
    pub gradient_norm: f64,
    pub data_norm: f64,
    pub constant: f64,
    pub iterations: usize,
}

/// `C_p = ‖∇u_h‖_{L^p μ} / ‖F/μ‖_{L^p μ}`.
pub fn regularity_constant(problem: &EllipticProblem, sol: &DiscreteSolution, p: f64) -> Result<(f64, f64, f64)> {
    let g = gradient_norm(&problem.mesh, sol, &problem.mu, p, None)?;
    let d = data_norm(problem, p, None)?;
    if d == 0.0 {
        return Err(Error::ZeroInput);
    }
    Ok((g, d, g / d))
}

/// `‖∇u_h‖_{L²μ} / ‖F/μ‖_{L²μ}`; at most `Λ⁻¹` up to quadrature for `A = μA₀`.
pub fn energy_ratio(problem: &EllipticProblem, sol: &DiscreteSolution) -> Result<f64> {
    Ok(regularity_constant(problem, sol, 2.0)?.2)
}

/// Solves every `(m, sample)` pair produced by `build` and tabulates `C_p`.
pub fn regularity_table<B>(build: B, ms: &[usize], samples: usize, p: f64, opts: &SolverOptions) -> Result<Vec<RegularityRow>>
where
    B: Fn(usize, usize) -> Result<EllipticProblem>,
{
    let mut rows = Vec::new();
    for &m in ms {
        for k in 0..samples {
            let problem = build(m, k)?;
            let sol = solve(&problem, opts)?;
            let (g, d, c) = regularity_constant(&problem, &sol, p)?;
            rows.push(RegularityRow { m, sample: k, p, gradient_norm: g, data_norm: d, constant: c, iterations: sol.iterations });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorReport {
    pub inner: Cuboid,
    pub outer: Cuboid,
    pub lhs: f64,
    /// `μ(inner)^{1/p−1/2}‖∇u‖_{L²(outer,μ)}`.
    pub gradient_term: f64,
    pub data_term: f64,
    pub ratio: f64,
}

/// Interior estimate on concentric boxes of half-widths `r` and `scale·r`.
pub fn interior_regularity(
    problem: &EllipticProblem,
    sol: &DiscreteSolution,
    p: f64,
    center: &[f64],
    r: f64,
    scale: f64,
) -> Result<InteriorReport> {
    let n = problem.mesh.dim;
    if center.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: center.len() });
    }
    if !(r > 0.0 && scale >= 1.0) {
        return Err(Error::InvalidArgument("need r > 0 and scale ≥ 1".into()));
    }
    let boxed = |h: f64| Cuboid::new(center.iter().map(|c| c - h).collect(), center.iter().map(|c| c + h).collect());
    let (inner, outer) = (boxed(r)?, boxed(scale * r)?);
    if !problem.mesh.bbox().contains_box(&outer) {
        return Err(Error::RegionNotCovered);
    }
    let mesh = &problem.mesh;
    let lhs = gradient_norm(mesh, sol, &problem.mu, p, Some(&inner))?;
    let masses = element_masses(mesh, &problem.mu, 1.0);
    let mu_inner = pairwise_sum(&selected(mesh, Some(&inner)).into_iter().map(|e| masses[e]).collect::<Vec<_>>());
    let gradient_term = mu_inner.powf(1.0 / p - 0.5) * gradient_norm(mesh, sol, &problem.mu, 2.0, Some(&outer))?;
    let data_term = data_norm(problem, p, Some(&outer))?;
    let rhs = gradient_term + data_term;
    Ok(InteriorReport { inner, outer, lhs, gradient_term, data_term, ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 } })
}

/// `(∫|∇u_h − ∇u*|² μ)^{1/2}`.
pub fn h1_seminorm_error(mesh: &SimplicialMesh, sol: &DiscreteSolution, mu: &Weight, exact_grad: &VectorFn) -> f64 {
    let els: Vec<usize> = (0..mesh.element_count()).collect();
    integrate(mesh, &els, mu, 1.0, 3, |e, q| {
        let g = sol.gradient(e);
        exact_grad(&q.x).iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum()
    })
    .sqrt()
}

#[derive(Clone)]
pub enum TestFunction {
    /// Hat function of a free vertex.
    Hat(usize),
    /// Smooth test function vanishing on the boundary, given by its gradient.
    Smooth(VectorFn),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    pub per_test: Vec<f64>,
    pub max: f64,
}

/// `|∫⟨A∇u_h,∇φ⟩ − ∫⟨F,∇φ⟩|` normalized by `‖∇φ‖_{L²μ}·max(‖F/μ‖_{L²μ}, ‖∇u_h‖_{L²μ})`.
/// Hat functions use the assembly quadrature, so Galerkin orthogonality applies.
pub fn weak_residual_check(problem: &EllipticProblem, sol: &DiscreteSolution, tests: &[TestFunction]) -> Result<WeakResidual> {
    let mesh = &problem.mesh;
    let n = mesh.dim;
    let scale = data_norm(problem, 2.0, None)?.max(gradient_norm(mesh, sol, &problem.mu, 2.0, None)?);
    let all: Vec<usize> = (0..mesh.element_count()).collect();
    let masses = element_masses(mesh, &problem.mu, 1.0);
    let mut per_test = Vec::with_capacity(tests.len());
    for t in tests {
        let (res, phi_norm) = match t {
            TestFunction::Hat(v) => {
                if *v >= mesh.vertex_count() || mesh.boundary[*v] {
                    return Err(Error::InvalidArgument(format!("vertex {v} is not a free vertex")));
                }
                let mut res = 0.0;
                let mut nsq = 0.0;
                for e in 0..mesh.element_count() {
                    let ids = mesh.element(e);
                    let Some(i) = ids.iter().position(|id| id == v) else { continue };
                    let d = element_data(problem, e)?;
                    let k = n + 1;
                    res += (0..k).map(|j| d.stiffness[i * k + j] * sol.values[ids[j]]).sum::<f64>() - d.load[i];
                    let g = &mesh.hat_gradients(e)[i];
                    nsq += masses[e] * g.iter().map(|x| x * x).sum::<f64>();
                }
                (res.abs(), nsq.sqrt())
            }
            TestFunction::Smooth(grad) => {
                let stiff = match &problem.coefficient {
                    Coefficient::Product(a0) => integrate(mesh, &all, &problem.mu, 1.0, 3, |e, q| {
                        let g = sol.gradient(e);
                        let dphi = grad(&q.x);
                        (0..n).map(|r| (0..n).map(|c| dphi[r] * a0[r * n + c] * g[c]).sum::<f64>()).sum()
                    }),
                    Coefficient::Pointwise(a) => integrate(mesh, &all, &Weight::lebesgue(), 0.0, 3, |e, q| {
                        let g = sol.gradient(e);
                        let dphi = grad(&q.x);
                        let am = a(&q.x);
                        (0..n).map(|r| (0..n).map(|c| dphi[r] * am[r * n + c] * g[c]).sum::<f64>()).sum()
                    }),
                };
                let load = integrate(mesh, &all, &problem.mu, 0.0, 3, |_, q| {
                    (problem.f)(&q.x).iter().zip(grad(&q.x)).map(|(f, d)| f * d).sum()
                });
                let nsq = integrate(mesh, &all, &problem.mu, 1.0, 3, |_, q| grad(&q.x).iter().map(|d| d * d).sum());
                ((stiff - load).abs(), nsq.sqrt())
            }
        };
        let denom = phi_norm * scale;
        per_test.push(if denom > 0.0 { res / denom } else { res });
    }
    let max = per_test.iter().copied().fold(0.0, f64::max);
    Ok(WeakResidual { per_test, max })
}

/// Standard bump `Π(1 − t_i²)²` on a box, `t_i ∈ [−1, 1]` the normalized coordinate.
pub fn box_bump(bx: &Cuboid) -> (Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>, VectorFn) {
    let c = bx.center();
    let half: Vec<f64> = bx.lo.iter().zip(&bx.hi).map(|(l, h)| 0.5 * (h - l)).collect();
    let (c2, h2) = (c.clone(), half.clone());
    let value = Arc::new(move |x: &[f64]| {
        x.iter().zip(&c).zip(&half).map(|((x, c), h)| {
            let t = (x - c) / h;
            if t.abs() >= 1.0 { 0.0 } else { (1.0 - t * t).powi(2) }
        }).product()
    });
    let grad = Arc::new(move |x: &[f64]| {
        let n = x.len();
        let t: Vec<f64> = (0..n).map(|i| (x[i] - c2[i]) / h2[i]).collect();
        let f: Vec<f64> = t.iter().map(|t| if t.abs() >= 1.0 { 0.0 } else { (1.0 - t * t).powi(2) }).collect();
        (0..n)
            .map(|i| {
                if t[i].abs() >= 1.0 {
                    return 0.0;
                }
                let d = -4.0 * t[i] * (1.0 - t[i] * t[i]) / h2[i];
                d * (0..n).filter(|&j| j != i).map(|j| f[j]).product::<f64>()
            })
            .collect()
    });
    (value, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaccioppoliReport {
    /// `⟨u⟩_μ` over the comparison region.
    pub mean_u: f64,
    /// `∫|∇w|²φ² dμ`.
    pub lhs: f64,
    /// `∫|F/μ|²φ² dμ`.
    pub data_term: f64,
    /// `∫w²|∇φ|² dμ`.
    pub w_term: f64,
    /// `sup|φ∇v|²`.
    pub sup_phi_grad_v_sq: f64,
    /// `∫|A − A₀|² μ⁻¹` with the Frobenius norm.
    pub coefficient_term: f64,
    pub bracket: f64,
    pub ratio: f64,
    pub v_iterations: usize,
}

/// Compares `u` with the solution `v` of `div[A₀∇v] = 0` on the sub-box
/// `region` (with `v = u` on its boundary) and evaluates both sides of the
/// Caccioppoli inequality for `w = u − ⟨u⟩_μ − v` and the bump cutoff.
pub fn caccioppoli_check(
    problem: &EllipticProblem,
    u: &DiscreteSolution,
    region: &Cuboid,
    a0: &[f64],
    opts: &SolverOptions,
) -> Result<CaccioppoliReport> {
    let mesh = &problem.mesh;
    let n = mesh.dim;
    if a0.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, got: a0.len() });
    }
    let (sub, parents) = mesh.submesh(|c| region.contains(c))?;
    let parent_elements = selected(mesh, Some(region));
    let all_sub: Vec<usize> = (0..sub.element_count()).collect();
    let mu = &problem.mu;

    let mu_mass = integrate(&sub, &all_sub, mu, 1.0, 1, |_, _| 1.0);
    let u_sub: Vec<f64> = parents.iter().map(|&p| u.values[p]).collect();
    let eval_sub = |vals: &[f64], e: usize, bary: &[f64]| -> f64 { sub.element(e).iter().zip(bary).map(|(&v, b)| vals[v] * b).sum() };
    let mean_u = integrate(&sub, &all_sub, mu, 1.0, 2, |e, q| eval_sub(&u_sub, e, &q.bary)) / mu_mass;

    let mut vprob = EllipticProblem {
        mesh: sub.clone(),
        coefficient: Coefficient::Product(a0.to_vec()),
        mu: Weight::lebesgue(),
        lambda: 1.0,
        f: Arc::new(move |_: &[f64]| vec![0.0; n]),
        dirichlet: Some(u_sub.clone()),
    };
    // A₀ only has to be elliptic with some constant
    while vprob.validate().is_err() && vprob.lambda > 1e-12 {
        vprob.lambda *= 0.5;
    }
    let v = solve(&vprob, opts)?;
    let w: Vec<f64> = (0..sub.vertex_count()).map(|k| u_sub[k] - mean_u - v.values[k]).collect();
    let wsol = DiscreteSolution::from_nodal(&sub, w.clone(), 0, 0.0);

    let (phi, dphi) = box_bump(region);
    let lhs = integrate(&sub, &all_sub, mu, 1.0, 3, |e, q| {
        let g = wsol.gradient(e);
        g.iter().map(|x| x * x).sum::<f64>() * phi(&q.x).powi(2)
    });
    let data_term = integrate(&sub, &all_sub, mu, -1.0, 3, |_, q| {
        (problem.f)(&q.x).iter().map(|x| x * x).sum::<f64>() * phi(&q.x).powi(2)
    });
    let w_term = integrate(&sub, &all_sub, mu, 1.0, 3, |e, q| {
        eval_sub(&w, e, &q.bary).powi(2) * dphi(&q.x).iter().map(|x| x * x).sum::<f64>()
    });
    let sup_phi_grad_v_sq = all_sub
        .iter()
        .map(|&e| {
            let g2: f64 = v.gradient(e).iter().map(|x| x * x).sum();
            let pmax = element_rule(&sub, e, 3)
                .iter()
                .map(|q| phi(&q.x))
                .chain(sub.element(e).iter().map(|&id| phi(sub.vertex(id))))
                .fold(0.0, f64::max);
            g2 * pmax * pmax
        })
        .fold(0.0, f64::max);
    let coefficient_term = integrate(mesh, &parent_elements, mu, -1.0, 3, |_, q| {
        let a = problem.coefficient.at(mu, &q.x);
        a.iter().zip(a0).map(|(x, y)| (x - y) * (x - y)).sum()
    });
    let bracket = data_term + (1.0 + sup_phi_grad_v_sq) * w_term + sup_phi_grad_v_sq * coefficient_term;
    Ok(CaccioppoliReport {
        mean_u,
        lhs,
        data_term,
        w_term,
        sup_phi_grad_v_sq,
        coefficient_term,
        bracket,
        ratio: if bracket > 0.0 { lhs / bracket } else { 0.0 },
        v_iterations: v.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    /// `A = μ(B)⁻¹∫u dμ`.
    Mu,
    /// `A = |B|⁻¹∫u dx`.
    Lebesgue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareReport {
    pub center_value: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `(⨍^μ|u − A|^{2ς})^{1/2ς}` against `r(⨍^μ|∇u|²)^{1/2}` on the elements
/// whose centroid lies in the ball `B_r(center)`.
pub fn poincare_check(
    mesh: &SimplicialMesh,
    sol: &DiscreteSolution,
    mu: &Weight,
    center: &[f64],
    r: f64,
    sigma: f64,
    centering: Centering,
) -> Result<PoincareReport> {
    if sigma < 1.0 {
        return Err(Error::InvalidArgument(format!("sigma must be at least 1, got {sigma}")));
    }
    let els: Vec<usize> = (0..mesh.element_count())
        .filter(|&e| crate::numeric::dist(&mesh.centroid(e), center) <= r)
        .collect();
    if els.is_empty() {
        return Err(Error::InvalidArgument("ball contains no element".into()));
    }
    let nodal = els.iter().flat_map(|&e| mesh.element(e).iter().map(|&v| sol.values[v]));
    let (lo, hi) = nodal.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if hi - lo <= 1e-14 * lo.abs().max(hi.abs()) {
        return Ok(PoincareReport { center_value: lo, lhs: 0.0, rhs: 0.0, ratio: 0.0 });
    }
    let mass = integrate(mesh, &els, mu, 1.0, 3, |_, _| 1.0);
    let center_value = match centering {
        Centering::Mu => integrate(mesh, &els, mu, 1.0, 3, |e, q| sol.eval(mesh, e, &q.bary)) / mass,
        Centering::Lebesgue => {
            let vol: f64 = pairwise_sum(&els.iter().map(|&e| mesh.volume(e)).collect::<Vec<_>>());
            integrate(mesh, &els, mu, 0.0, 3, |e, q| sol.eval(mesh, e, &q.bary)) / vol
        }
    };
    let lhs = (integrate(mesh, &els, mu, 1.0, 3, |e, q| (sol.eval(mesh, e, &q.bary) - center_value).abs().powf(2.0 * sigma)) / mass)
        .powf(0.5 / sigma);
    let grad = integrate(mesh, &els, mu, 1.0, 3, |e, _| sol.gradient(e).iter().map(|x| x * x).sum()) / mass;
    let rhs = r * grad.sqrt();
    Ok(PoincareReport { center_value, lhs, rhs, ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 } })
}

/// `|∇u_h|²` sampled at grid nodes; nodes outside the mesh are masked.
pub fn gradsq_on_grid(mesh: &SimplicialMesh, sol: &DiscreteSolution, grid: &UniformGrid) -> Result<GridScalarField> {
    let locator = super::mesh::PointLocator::new(mesh);
    let found: Vec<Option<f64>> = (0..grid.node_count())
        .into_par_iter()
        .map(|i| locator.locate(&grid.node(i)).map(|(e, _)| sol.gradient(e).iter().map(|x| x * x).sum()))
        .collect();
    let mask: Vec<bool> = found.iter().map(|v| v.is_none()).collect();
    let values = found.into_iter().map(|v| v.unwrap_or(0.0)).collect();
    let field = GridScalarField::new(grid.clone(), values)?;
    if mask.iter().any(|m| *m) {
        field.with_mask(mask)
    } else {
        Ok(field)
    }
}
