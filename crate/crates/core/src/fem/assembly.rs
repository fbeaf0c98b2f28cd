use super::mesh::SimplicialMesh;
use super::quadrature::{element_rule, weighted_rule};
use crate::error::{Error, Result};
use crate::oscillation::{probe_directions, DEFAULT_PROBE_SEED};
use crate::weights::Weight;
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Row-major `n × n` matrix at a point.
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Coefficient matrix `A(x)`.
#[derive(Clone)]
pub enum Coefficient {
    /// `A(x) = μ(x)·A₀` with a constant symmetric `A₀` (row-major).
    Product(Vec<f64>),
    /// `A(x)` given pointwise; sampled at element centroids.
    Pointwise(MatrixFn),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Product(a0) => f.debug_tuple("Product").field(a0).finish(),
            Coefficient::Pointwise(_) => f.write_str("Pointwise(..)"),
        }
    }
}

impl Coefficient {
    pub fn identity(n: usize) -> Self {
        let mut a0 = vec![0.0; n * n];
        for i in 0..n {
            a0[i * n + i] = 1.0;
        }
        Coefficient::Product(a0)
    }

    pub fn at(&self, mu: &Weight, x: &[f64]) -> Vec<f64> {
        match self {
            Coefficient::Product(a0) => {
                let m = mu.eval(x);
                a0.iter().map(|v| v * m).collect()
            }
            Coefficient::Pointwise(a) => a(x),
        }
    }
}

/// Dirichlet problem `div[A∇u] = div[F]` on a mesh.
#[derive(Clone)]
pub struct EllipticProblem {
    pub mesh: SimplicialMesh,
    pub coefficient: Coefficient,
    pub mu: Weight,
    pub lambda: f64,
    pub f: VectorFn,
    /// Boundary values per vertex; `None` means homogeneous data.
    pub dirichlet: Option<Vec<f64>>,
}

impl fmt::Debug for EllipticProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EllipticProblem")
            .field("vertices", &self.mesh.vertex_count())
            .field("elements", &self.mesh.element_count())
            .field("coefficient", &self.coefficient)
            .field("mu", &self.mu)
            .field("lambda", &self.lambda)
            .finish()
    }
}

impl EllipticProblem {
    /// `A = μI`, `Λ = 1`, homogeneous boundary data.
    pub fn weighted_identity(mesh: SimplicialMesh, mu: Weight, f: VectorFn) -> Self {
        let n = mesh.dim;
        Self {
            mesh,
            coefficient: Coefficient::identity(n),
            mu,
            lambda: 1.0,
            f,
            dirichlet: None,
        }
    }

    /// `(A, μ, F) → (A, μ, F)/λ`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let f = self.f.clone();
        let coefficient = match &self.coefficient {
            Coefficient::Product(a0) => Coefficient::Product(a0.clone()),
            Coefficient::Pointwise(a) => {
                let a = a.clone();
                Coefficient::Pointwise(Arc::new(move |x: &[f64]| a(x).into_iter().map(|v| v / lambda).collect()))
            }
        };
        Self {
            mesh: self.mesh.clone(),
            coefficient,
            mu: self.mu.scaled(1.0 / lambda),
            lambda: self.lambda,
            f: Arc::new(move |x: &[f64]| f(x).into_iter().map(|v| v / lambda).collect()),
            dirichlet: self.dirichlet.clone(),
        }
    }

    /// Checks the two-sided ellipticity bound on probe directions at every centroid.
    pub fn validate(&self) -> Result<()> {
        let n = self.mesh.dim;
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidArgument(format!("Lambda must lie in (0, 1], got {}", self.lambda)));
        }
        if let Some(d) = &self.dirichlet {
            if d.len() != self.mesh.vertex_count() {
                return Err(Error::DimensionMismatch { expected: self.mesh.vertex_count(), got: d.len() });
            }
        }
        let probes = probe_directions(n, DEFAULT_PROBE_SEED);
        let check = |a: &[f64], m: f64, e: usize| -> Result<()> {
            for xi in &probes {
                let q: f64 = (0..n).map(|i| (0..n).map(|j| a[i * n + j] * xi[i] * xi[j]).sum::<f64>()).sum();
                let tol = 1e-12 * m.abs().max(1e-300);
                if q < self.lambda * m - tol || q > m / self.lambda + tol {
                    return Err(Error::NotElliptic { node: e });
                }
            }
            Ok(())
        };
        match &self.coefficient {
            Coefficient::Product(a0) => {
                if a0.len() != n * n {
                    return Err(Error::DimensionMismatch { expected: n * n, got: a0.len() });
                }
                check(a0, 1.0, 0)
            }
            Coefficient::Pointwise(_) => (0..self.mesh.element_count()).try_for_each(|e| {
                let c = self.mesh.centroid(e);
                check(&self.coefficient.at(&self.mu, &c), self.mu.eval(&c), e)
            }),
        }
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries in the order given, so the result does not
    /// depend on how the triplets were produced.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[a..b].binary_search(&j) {
            Ok(k) => self.vals[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut s = 0.0;
            for (j, v) in self.row(i) {
                s += v * x[j];
            }
            *yi = s;
        });
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[i * self.n + j] = v;
            }
        }
        d
    }

    /// Largest `|a_ij − a_ji|` relative to the largest entry.
    pub fn symmetry_drift(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
            / scale
    }
}

/// Reduced system over the free vertices.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Vertex id of every unknown.
    pub dofs: Vec<usize>,
    /// Values on fixed vertices (zero on free ones).
    pub fixed: Vec<f64>,
}

/// Full element stiffness and load.
pub struct ElementData {
    pub stiffness: Vec<f64>,
    pub load: Vec<f64>,
}

/// Local stiffness `∫_T ⟨A∇φ_i, ∇φ_j⟩` and load `∫_T ⟨F, ∇φ_i⟩`.
pub fn element_data(problem: &EllipticProblem, e: usize) -> Result<ElementData> {
    let mesh = &problem.mesh;
    let n = mesh.dim;
    let k = n + 1;
    let g = mesh.hat_gradients(e);
    let (a, scale): (Vec<f64>, f64) = match &problem.coefficient {
        Coefficient::Product(a0) => {
            let mass: f64 = weighted_rule(mesh, e, &problem.mu, 1.0, 1).iter().map(|q| q.w).sum();
            (a0.clone(), mass)
        }
        Coefficient::Pointwise(af) => (af(&mesh.centroid(e)), mesh.volume(e)),
    };
    let mut stiffness = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let mut s = 0.0;
            for r in 0..n {
                for c in 0..n {
                    s += g[i][r] * a[r * n + c] * g[j][c];
                }
            }
            stiffness[i * k + j] = scale * s;
        }
    }
    let local_max = stiffness.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut drift: f64 = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let (x, y) = (stiffness[i * k + j], stiffness[j * k + i]);
            drift = drift.max((x - y).abs() / local_max);
            let avg = 0.5 * (x + y);
            stiffness[i * k + j] = avg;
            stiffness[j * k + i] = avg;
        }
    }
    if drift > 1e-12 {
        return Err(Error::NotSpd { drift });
    }
    let mut fint = vec![0.0; n];
    for q in element_rule(mesh, e, 1) {
        let fv = (problem.f)(&q.x);
        for c in 0..n {
            fint[c] += q.w * fv[c];
        }
    }
    let load = (0..k).map(|i| (0..n).map(|c| fint[c] * g[i][c]).sum()).collect();
    Ok(ElementData { stiffness, load })
}

/// Assembles the reduced SPD system. Element data are computed in parallel
/// and merged in element order.
pub fn assemble(problem: &EllipticProblem) -> Result<LinearSystem> {
    problem.validate()?;
    let mesh = &problem.mesh;
    let nv = mesh.vertex_count();
    let k = mesh.dim + 1;
    let locals: Vec<ElementData> = (0..mesh.element_count())
        .into_par_iter()
        .map(|e| element_data(problem, e))
        .collect::<Result<_>>()?;

    let mut index = vec![usize::MAX; nv];
    let mut dofs = Vec::new();
    for v in 0..nv {
        if !mesh.boundary[v] {
            index[v] = dofs.len();
            dofs.push(v);
        }
    }
    let mut fixed = vec![0.0; nv];
    if let Some(d) = &problem.dirichlet {
        for v in 0..nv {
            if mesh.boundary[v] {
                fixed[v] = d[v];
            }
        }
    }

    let mut triplets = Vec::with_capacity(locals.len() * k * k);
    let mut rhs = vec![0.0; dofs.len()];
    for (e, data) in locals.iter().enumerate() {
        let ids = mesh.element(e);
        for i in 0..k {
            let ri = index[ids[i]];
            if ri == usize::MAX {
                continue;
            }
            rhs[ri] += data.load[i];
            for j in 0..k {
                let v = data.stiffness[i * k + j];
                let cj = index[ids[j]];
                if cj == usize::MAX {
                    rhs[ri] -= v * fixed[ids[j]];
                } else {
                    triplets.push((ri, cj, v));
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(dofs.len(), triplets);
    let drift = matrix.symmetry_drift();
    if drift > 1e-12 {
        return Err(Error::NotSpd { drift });
    }
    Ok(LinearSystem { matrix, rhs, dofs, fixed })
}
