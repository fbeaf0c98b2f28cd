use super::Cuboid;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform Cartesian grid with `m` cells per axis; nodes sit at cell centers.
///
/// Nodes are stored in row-major order: the last axis varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub bbox: Cuboid,
    pub m: usize,
}

impl UniformGrid {
    pub fn new(bbox: Cuboid, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("grid needs at least one cell per axis".into()));
        }
        if bbox.dim() > 4 {
            return Err(Error::InvalidArgument("grids are limited to n <= 4".into()));
        }
        let count = (m as f64).powi(bbox.dim() as i32);
        if count > 1e9 {
            return Err(Error::InvalidArgument(format!("grid with {count} nodes is too large")));
        }
        Ok(Self { bbox, m })
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.bbox
            .lo
            .iter()
            .zip(&self.bbox.hi)
            .map(|(a, b)| (b - a) / self.m as f64)
            .collect()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn node_count(&self) -> usize {
        self.m.pow(self.dim() as u32)
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let n = self.dim();
        let mut out = vec![0; n];
        for axis in (0..n).rev() {
            out[axis] = idx % self.m;
            idx /= self.m;
        }
        out
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &k| acc * self.m + k)
    }

    /// Linear index of a lattice cell, or `None` when it lies outside the grid.
    pub fn linear_index_signed(&self, multi: &[i64]) -> Option<usize> {
        let mut acc = 0usize;
        for &k in multi {
            if k < 0 || k as usize >= self.m {
                return None;
            }
            acc = acc * self.m + k as usize;
        }
        Some(acc)
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(i, &k)| self.bbox.lo[i] + (k as f64 + 0.5) * h[i])
            .collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.node_count()).map(move |i| self.node(i))
    }

    /// Index of the cell containing `x`, clamped to the grid.
    pub fn locate(&self, x: &[f64]) -> usize {
        let h = self.spacing();
        let multi: Vec<usize> = x
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let k = ((v - self.bbox.lo[i]) / h[i]).floor();
                k.clamp(0.0, (self.m - 1) as f64) as usize
            })
            .collect();
        self.linear_index(&multi)
    }
}

/// Scalar samples on the nodes of a [`UniformGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScalarField {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
    /// `true` marks nodes outside the domain of interest.
    pub mask: Option<Vec<bool>>,
}

impl GridScalarField {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values, mask: None })
    }

    pub fn constant(grid: UniformGrid, c: f64) -> Self {
        let n = grid.node_count();
        Self {
            grid,
            values: vec![c; n],
            mask: None,
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: UniformGrid, f: F) -> Self {
        let values = grid.nodes().map(|x| f(&x)).collect();
        Self {
            grid,
            values,
            mask: None,
        }
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: mask.len(),
            });
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn is_masked(&self, idx: usize) -> bool {
        self.mask.as_ref().is_some_and(|m| m[idx])
    }

    /// Value used by integrals: masked nodes contribute zero.
    pub fn value(&self, idx: usize) -> f64 {
        if self.is_masked(idx) {
            0.0
        } else {
            self.values[idx]
        }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            mask: self.mask.clone(),
        }
    }

    pub fn max(&self) -> f64 {
        (0..self.values.len())
            .filter(|&i| !self.is_masked(i))
            .map(|i| self.values[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Vector samples (one `n`-vector per node).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridVectorField {
    pub grid: UniformGrid,
    /// Node-major: component `c` of node `i` is `values[i * n + c]`.
    pub values: Vec<f64>,
    pub mask: Option<Vec<bool>>,
}

impl GridVectorField {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.node_count() * grid.dim();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(Self { grid, values, mask: None })
    }

    pub fn from_fn<F: Fn(&[f64]) -> Vec<f64>>(grid: UniformGrid, f: F) -> Self {
        let mut values = Vec::with_capacity(grid.node_count() * grid.dim());
        for x in grid.nodes() {
            values.extend(f(&x));
        }
        Self {
            grid,
            values,
            mask: None,
        }
    }

    pub fn at(&self, idx: usize) -> &[f64] {
        let n = self.grid.dim();
        &self.values[idx * n..(idx + 1) * n]
    }

    /// Pointwise squared Euclidean norm.
    pub fn norm_sq(&self) -> GridScalarField {
        let values = (0..self.grid.node_count())
            .map(|i| self.at(i).iter().map(|v| v * v).sum())
            .collect();
        GridScalarField {
            grid: self.grid.clone(),
            values,
            mask: self.mask.clone(),
        }
    }
}
