//! Grids, balls and deterministic quadrature.

mod family;
mod grid;
pub mod io;
mod quadrature;

pub use family::{make_ball_family, BallFamily, FamilyProvenance};
pub use grid::{GridScalarField, GridVectorField, UniformGrid};
pub use quadrature::{ball_average, grid_integrate, visit_region_cells, CellRef};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Axis-aligned box `[lo, hi]` in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cuboid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::InvalidArgument("box needs dimension >= 1".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidArgument("box needs lo < hi on every axis".into()));
        }
        Ok(Self { lo, hi })
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diam(&self) -> f64 {
        crate::numeric::dist(&self.lo, &self.hi)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Whether `other` lies inside `self` up to a relative slack.
    pub fn contains_box(&self, other: &Cuboid) -> bool {
        let tol = 1e-12 * self.diam();
        self.lo
            .iter()
            .zip(&other.lo)
            .all(|(a, b)| *b >= *a - tol)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| *b <= *a + tol)
    }

    /// Fraction of the cell `[lo, lo + h]` that lies inside this box.
    pub fn overlap_fraction(&self, lo: &[f64], h: &[f64]) -> f64 {
        let mut frac = 1.0;
        for i in 0..lo.len() {
            let a = lo[i].max(self.lo[i]);
            let b = (lo[i] + h[i]).min(self.hi[i]);
            if b <= a {
                return 0.0;
            }
            frac *= (b - a) / h[i];
        }
        frac
    }

    /// Scales the box about its center.
    pub fn scaled_about_center(&self, factor: f64) -> Cuboid {
        let c = self.center();
        Cuboid {
            lo: self.lo.iter().zip(&c).map(|(a, m)| m + factor * (a - m)).collect(),
            hi: self.hi.iter().zip(&c).map(|(b, m)| m + factor * (b - m)).collect(),
        }
    }

    fn intersects_ball(&self, ball: &Ball) -> bool {
        let d2: f64 = ball
            .center
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(c, (a, b))| {
                let p = c.clamp(*a, *b);
                (c - p) * (c - p)
            })
            .sum();
        d2 < ball.radius * ball.radius
    }
}

/// Euclidean ball `B_r(c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        crate::numeric::dist(&self.center, x) <= self.radius
    }

    pub fn volume(&self) -> f64 {
        crate::numeric::ball_volume(self.dim(), self.radius)
    }

    /// Whether `self` is contained in `outer`.
    pub fn is_inside(&self, outer: &Ball) -> bool {
        crate::numeric::dist(&self.center, &outer.center) + self.radius <= outer.radius * (1.0 + 1e-12)
    }

    pub fn is_origin_centered(&self) -> bool {
        crate::numeric::norm(&self.center) <= 1e-12 * self.radius
    }

    /// Fraction of the `2^n` corners of the cell `[lo, lo + h]` inside the ball.
    pub fn corner_fraction(&self, lo: &[f64], h: &[f64]) -> f64 {
        let n = lo.len();
        let r2 = self.radius * self.radius;
        // nearest and farthest points of the cell decide the easy cases
        let mut near = 0.0;
        let mut far = 0.0;
        for i in 0..n {
            let a = lo[i] - self.center[i];
            let b = a + h[i];
            let dn = if a > 0.0 {
                a
            } else if b < 0.0 {
                -b
            } else {
                0.0
            };
            let df = a.abs().max(b.abs());
            near += dn * dn;
            far += df * df;
        }
        if far <= r2 {
            return 1.0;
        }
        if near > r2 {
            return 0.0;
        }
        let corners = 1usize << n;
        let mut inside = 0usize;
        for mask in 0..corners {
            let mut d2 = 0.0;
            for i in 0..n {
                let x = lo[i] + if mask >> i & 1 == 1 { h[i] } else { 0.0 };
                let d = x - self.center[i];
                d2 += d * d;
            }
            if d2 <= r2 {
                inside += 1;
            }
        }
        inside as f64 / corners as f64
    }
}

/// Integration region for [`grid_integrate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Box(Cuboid),
    Ball(Ball),
    /// A ball clipped to a box.
    BallInBox(Ball, Cuboid),
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Box(b) => b.dim(),
            Region::Ball(b) | Region::BallInBox(b, _) => b.dim(),
        }
    }

    /// Fraction of the cell `[lo, lo + h]` assigned to this region.
    pub fn cell_fraction(&self, lo: &[f64], h: &[f64]) -> f64 {
        match self {
            Region::Box(b) => b.overlap_fraction(lo, h),
            Region::Ball(b) => b.corner_fraction(lo, h),
            Region::BallInBox(ball, b) => {
                let f = b.overlap_fraction(lo, h);
                if f == 0.0 {
                    0.0
                } else {
                    f * ball.corner_fraction(lo, h)
                }
            }
        }
    }

    /// Axis-aligned bounding box of the region.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Box(b) => (b.lo.clone(), b.hi.clone()),
            Region::Ball(b) => (
                b.center.iter().map(|c| c - b.radius).collect(),
                b.center.iter().map(|c| c + b.radius).collect(),
            ),
            Region::BallInBox(ball, b) => (
                ball.center.iter().zip(&b.lo).map(|(c, l)| (c - ball.radius).max(*l)).collect(),
                ball.center.iter().zip(&b.hi).map(|(c, u)| (c + ball.radius).min(*u)).collect(),
            ),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Box(b) => b.contains(x),
            Region::Ball(b) => b.contains(x),
            Region::BallInBox(ball, b) => ball.contains(x) && b.contains(x),
        }
    }

    pub(crate) fn intersects_box(&self, bx: &Cuboid) -> bool {
        match self {
            Region::Box(b) => b.lo.iter().zip(&bx.hi).all(|(a, c)| a < c) && bx.lo.iter().zip(&b.hi).all(|(a, c)| a < c),
            Region::Ball(b) => bx.intersects_ball(b),
            Region::BallInBox(ball, b) => {
                bx.intersects_ball(ball) && Region::Box(b.clone()).intersects_box(bx)
            }
        }
    }
}
