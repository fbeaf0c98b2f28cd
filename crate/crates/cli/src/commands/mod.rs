pub mod counterexample;
pub mod fem;
pub mod maximal;
pub mod reifenberg;
pub mod weights;

use crate::config::{require, ConfigError};
use mucklab::geometry::{make_ball_family, BallFamily, Cuboid, UniformGrid};

/// Largest node count accepted for sampled grids.
const MAX_NODES: usize = 1 << 24;

pub fn grid_box(dim: usize, half_width: f64, m: usize) -> mucklab::Result<UniformGrid> {
    UniformGrid::new(Cuboid::cube(dim, -half_width, half_width)?, m)
}

pub fn check_family(dim: usize, half_width: f64, grid: usize, stride: usize, r_min_cells: f64, q: f64, levels: usize) -> Result<(), ConfigError> {
    require(dim == 2 || dim == 3, "dim", "must be 2 or 3")?;
    require(half_width > 0.0, "half_width", "must be positive")?;
    require(grid >= 4 && (grid + 1).checked_pow(dim as u32).map_or(false, |c| c <= MAX_NODES), "grid", "needs at least 4 cells and at most 2^24 nodes")?;
    require(stride >= 1, "stride", "must be at least 1")?;
    require(r_min_cells >= 2.0, "r_min_cells", "must be at least 2")?;
    require(q > 1.0, "q", "must exceed 1")?;
    require(levels >= 1, "levels", "must be at least 1")?;
    let h = 2.0 * half_width / grid as f64;
    let diam = 2.0 * half_width * (dim as f64).sqrt();
    require(r_min_cells * h * q.powi(levels as i32 - 1) <= diam, "levels", "largest radius exceeds the box diameter")
}

pub fn build_family(grid: &UniformGrid, stride: usize, r_min_cells: f64, q: f64, levels: usize, seed: u64) -> mucklab::Result<BallFamily> {
    let mut family = make_ball_family(grid, &grid.bbox, stride, r_min_cells * grid.max_spacing(), q, levels)?;
    family.provenance.seed = seed;
    Ok(family)
}
