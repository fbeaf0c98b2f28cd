use crate::error::{Error, Result};
use crate::geometry::Cuboid;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Conforming simplicial mesh; vertices and elements are stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplicialMesh {
    pub dim: usize,
    /// `dim` coordinates per vertex.
    pub vertices: Vec<f64>,
    /// `dim + 1` vertex ids per element, positively oriented.
    pub elements: Vec<usize>,
    pub boundary: Vec<bool>,
}

impl SimplicialMesh {
    /// Builds a mesh, fixing orientation and marking boundary vertices from
    /// facets that belong to exactly one element.
    pub fn new(dim: usize, vertices: Vec<f64>, mut elements: Vec<usize>) -> Result<Self> {
        if dim == 0 || vertices.len() % dim != 0 || elements.len() % (dim + 1) != 0 {
            return Err(Error::InvalidArgument("inconsistent mesh arrays".into()));
        }
        let nv = vertices.len() / dim;
        if elements.iter().any(|&v| v >= nv) {
            return Err(Error::InvalidArgument("element references a missing vertex".into()));
        }
        let mut mesh = Self {
            dim,
            vertices,
            elements: Vec::new(),
            boundary: vec![false; nv],
        };
        for e in elements.chunks_mut(dim + 1) {
            let vol = mesh.signed_volume_of(e);
            if vol.abs() <= 1e-300 {
                return Err(Error::InvalidArgument("degenerate element".into()));
            }
            if vol < 0.0 {
                e.swap(0, 1);
            }
        }
        mesh.elements = elements;
        mesh.boundary = mesh.boundary_from_facets();
        Ok(mesh)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len() / self.dim
    }

    pub fn element_count(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i * self.dim..(i + 1) * self.dim]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e * (self.dim + 1)..(e + 1) * (self.dim + 1)]
    }

    fn signed_volume_of(&self, ids: &[usize]) -> f64 {
        let n = self.dim;
        let v0 = self.vertex(ids[0]);
        let mut m = vec![0.0; n * n];
        for (r, &id) in ids[1..].iter().enumerate() {
            let v = self.vertex(id);
            for c in 0..n {
                m[r * n + c] = v[c] - v0[c];
            }
        }
        determinant(&mut m, n) / factorial(n)
    }

    pub fn volume(&self, e: usize) -> f64 {
        self.signed_volume_of(self.element(e))
    }

    pub fn centroid(&self, e: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for &id in self.element(e) {
            for (ci, vi) in c.iter_mut().zip(self.vertex(id)) {
                *ci += vi;
            }
        }
        let k = (self.dim + 1) as f64;
        c.iter_mut().for_each(|v| *v /= k);
        c
    }

    /// Vertex coordinates of element `e`, one row per vertex.
    pub fn element_coords(&self, e: usize) -> Vec<Vec<f64>> {
        self.element(e).iter().map(|&id| self.vertex(id).to_vec()).collect()
    }

    /// Gradients of the `n + 1` barycentric hat functions on element `e`.
    pub fn hat_gradients(&self, e: usize) -> Vec<Vec<f64>> {
        let n = self.dim;
        let p = self.element_coords(e);
        // rows of J are edge vectors; grad λ_i (i ≥ 1) are the columns of J⁻¹
        let mut j = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                j[r * n + c] = p[r + 1][c] - p[0][c];
            }
        }
        let inv = invert(&j, n).expect("non-degenerate element");
        let mut grads = vec![vec![0.0; n]; n + 1];
        for i in 0..n {
            for c in 0..n {
                grads[i + 1][c] = inv[c * n + i];
            }
        }
        for c in 0..n {
            grads[0][c] = -(1..=n).map(|i| grads[i][c]).sum::<f64>();
        }
        grads
    }

    /// Barycentric coordinates of `x` with respect to element `e`.
    pub fn barycentric(&self, e: usize, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let grads = self.hat_gradients(e);
        let v0 = self.vertex(self.element(e)[0]);
        let mut bary = vec![0.0; n + 1];
        for i in 1..=n {
            bary[i] = (0..n).map(|c| grads[i][c] * (x[c] - v0[c])).sum();
        }
        bary[0] = 1.0 - bary[1..].iter().sum::<f64>();
        bary
    }

    fn boundary_from_facets(&self) -> Vec<bool> {
        let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
        for e in 0..self.element_count() {
            let ids = self.element(e);
            for skip in 0..=self.dim {
                let mut facet: Vec<usize> = ids.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, &v)| v).collect();
                facet.sort_unstable();
                *count.entry(facet).or_default() += 1;
            }
        }
        let mut boundary = vec![false; self.vertex_count()];
        for (facet, c) in count {
            if c == 1 {
                for v in facet {
                    boundary[v] = true;
                }
            }
        }
        boundary
    }

    /// Keeps elements whose centroid satisfies `keep` and drops unused vertices.
    /// Also returns the parent id of every kept vertex.
    pub fn submesh<F: Fn(&[f64]) -> bool>(&self, keep: F) -> Result<(SimplicialMesh, Vec<usize>)> {
        let mut map = vec![usize::MAX; self.vertex_count()];
        let mut parents = Vec::new();
        let mut vertices = Vec::new();
        let mut elements = Vec::new();
        for e in 0..self.element_count() {
            if !keep(&self.centroid(e)) {
                continue;
            }
            for &id in self.element(e) {
                if map[id] == usize::MAX {
                    map[id] = parents.len();
                    parents.push(id);
                    vertices.extend_from_slice(self.vertex(id));
                }
                elements.push(map[id]);
            }
        }
        if elements.is_empty() {
            return Err(Error::InvalidArgument("submesh is empty".into()));
        }
        Ok((SimplicialMesh::new(self.dim, vertices, elements)?, parents))
    }

    pub fn bbox(&self) -> Cuboid {
        let n = self.dim;
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for v in self.vertices.chunks(n) {
            for i in 0..n {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        Cuboid { lo, hi }
    }

    /// Largest element diameter.
    pub fn max_diameter(&self) -> f64 {
        (0..self.element_count())
            .map(|e| {
                let p = self.element_coords(e);
                let mut d: f64 = 0.0;
                for a in 0..p.len() {
                    for b in a + 1..p.len() {
                        d = d.max(crate::numeric::dist(&p[a], &p[b]));
                    }
                }
                d
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Determinant by Gaussian elimination with partial pivoting; `m` is clobbered.
pub(crate) fn determinant(m: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| m[a * n + col].abs().total_cmp(&m[b * n + col].abs())).unwrap();
        if m[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for c in 0..n {
                m.swap(pivot * n + c, col * n + c);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det *= p;
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            for c in col..n {
                m[r * n + c] -= f * m[col * n + c];
            }
        }
    }
    det
}

pub(crate) fn invert(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))?;
        if a[pivot * n + col] == 0.0 {
            return None;
        }
        for c in 0..n {
            a.swap(pivot * n + c, col * n + c);
            inv.swap(pivot * n + c, col * n + c);
        }
        let p = a[col * n + col];
        for c in 0..n {
            a[col * n + c] /= p;
            inv[col * n + c] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r * n + col];
                if f != 0.0 {
                    for c in 0..n {
                        a[r * n + c] -= f * a[col * n + c];
                        inv[r * n + c] -= f * inv[col * n + c];
                    }
                }
            }
        }
    }
    Some(inv)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Kuhn triangulation of `m^n` cells: `n!` simplices per cell sharing the main
/// diagonal (2 triangles per square, 6 tetrahedra per cube).
pub fn triangulate_box(bx: &Cuboid, m: usize) -> Result<SimplicialMesh> {
    let n = bx.dim();
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one cell per axis".into()));
    }
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidArgument(format!("meshes are built for n = 2 or 3, got {n}")));
    }
    if n == 3 && m > 24 {
        return Err(Error::InvalidArgument(format!("3-D meshes are capped at 24 cells per axis, got {m}")));
    }
    let side = m + 1;
    let count = side.pow(n as u32);
    let mut vertices = Vec::with_capacity(count * n);
    for idx in 0..count {
        let mut rest = idx;
        let mut multi = vec![0usize; n];
        for axis in (0..n).rev() {
            multi[axis] = rest % side;
            rest /= side;
        }
        for axis in 0..n {
            let t = multi[axis] as f64 / m as f64;
            vertices.push(if multi[axis] == m { bx.hi[axis] } else { bx.lo[axis] + t * (bx.hi[axis] - bx.lo[axis]) });
        }
    }
    let id = |multi: &[usize]| multi.iter().fold(0, |acc, &k| acc * side + k);
    let perms = permutations(n);
    let mut elements = Vec::new();
    let cells = m.pow(n as u32);
    for c in 0..cells {
        let mut rest = c;
        let mut base = vec![0usize; n];
        for axis in (0..n).rev() {
            base[axis] = rest % m;
            rest /= m;
        }
        for p in &perms {
            let mut cur = base.clone();
            elements.push(id(&cur));
            for &axis in p {
                cur[axis] += 1;
                elements.push(id(&cur));
            }
        }
    }
    SimplicialMesh::new(n, vertices, elements)
}

/// `[-1,1]²` with the quadrant `[0,1]×[-1,0]` removed.
pub fn triangulate_lshape(m: usize) -> Result<SimplicialMesh> {
    if m % 2 != 0 {
        return Err(Error::InvalidArgument("L-shape needs an even cell count".into()));
    }
    let full = triangulate_box(&Cuboid::cube(2, -1.0, 1.0)?, m)?;
    Ok(full.submesh(|c| !(c[0] > 0.0 && c[1] < 0.0))?.0)
}

/// Disk of radius `r` about the origin: a center vertex and `rings` rings with
/// `6k` vertices on ring `k`.
pub fn triangulate_disk(r: f64, rings: usize) -> Result<SimplicialMesh> {
    if rings == 0 || !(r > 0.0) {
        return Err(Error::InvalidArgument("disk needs a positive radius and at least one ring".into()));
    }
    let mut vertices = vec![0.0, 0.0];
    let start = |k: usize| if k == 0 { 0 } else { 1 + 3 * k * (k - 1) };
    for k in 1..=rings {
        let rad = r * k as f64 / rings as f64;
        for j in 0..6 * k {
            let t = 2.0 * std::f64::consts::PI * j as f64 / (6 * k) as f64;
            vertices.push(rad * t.cos());
            vertices.push(rad * t.sin());
        }
    }
    let mut elements = Vec::new();
    for k in 1..=rings {
        let outer = |j: usize| start(k) + j % (6 * k);
        let inner = |j: usize| if k == 1 { 0 } else { start(k - 1) + j % (6 * (k - 1)) };
        for s in 0..6 {
            for j in 0..k {
                let a = inner(s * (k - 1) + j);
                elements.extend([a, outer(s * k + j), outer(s * k + j + 1)]);
                if j + 1 < k {
                    elements.extend([a, outer(s * k + j + 1), inner(s * (k - 1) + j + 1)]);
                }
            }
        }
    }
    SimplicialMesh::new(2, vertices, elements)
}

/// Finds the element containing a point through a bucket grid over the mesh box.
pub struct PointLocator<'a> {
    mesh: &'a SimplicialMesh,
    bbox: Cuboid,
    cells: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a SimplicialMesh) -> Self {
        let n = mesh.dim;
        let bbox = mesh.bbox();
        let cells = ((mesh.element_count() as f64).powf(1.0 / n as f64).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); cells.pow(n as u32)];
        let loc = |x: f64, i: usize| -> usize {
            let t = (x - bbox.lo[i]) / (bbox.hi[i] - bbox.lo[i]);
            ((t * cells as f64).floor() as i64).clamp(0, cells as i64 - 1) as usize
        };
        for e in 0..mesh.element_count() {
            let p = mesh.element_coords(e);
            let lo: Vec<usize> = (0..n).map(|i| loc(p.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min), i)).collect();
            let hi: Vec<usize> = (0..n).map(|i| loc(p.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max), i)).collect();
            let mut k = lo.clone();
            loop {
                buckets[k.iter().fold(0, |acc, &v| acc * cells + v)].push(e);
                let mut axis = n;
                let mut done = true;
                while axis > 0 {
                    axis -= 1;
                    if k[axis] < hi[axis] {
                        k[axis] += 1;
                        done = false;
                        break;
                    }
                    k[axis] = lo[axis];
                }
                if done {
                    break;
                }
            }
        }
        Self { mesh, bbox, cells, buckets }
    }

    /// Element containing `x` (first in element order), with its barycentric coordinates.
    pub fn locate(&self, x: &[f64]) -> Option<(usize, Vec<f64>)> {
        let n = self.mesh.dim;
        if !self.bbox.contains(x) {
            return None;
        }
        let idx = (0..n).fold(0, |acc, i| {
            let t = (x[i] - self.bbox.lo[i]) / (self.bbox.hi[i] - self.bbox.lo[i]);
            acc * self.cells + ((t * self.cells as f64).floor() as i64).clamp(0, self.cells as i64 - 1) as usize
        });
        self.buckets[idx].iter().find_map(|&e| {
            let b = self.mesh.barycentric(e, x);
            if b.iter().all(|v| *v >= -1e-12) {
                Some((e, b))
            } else {
                None
            }
        })
    }
}
