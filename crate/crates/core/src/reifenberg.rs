//! Reifenberg flatness of a sampled boundary.
//!
//! For a boundary point `x`, a scale `r` and a unit normal `ν` pointing into
//! the domain, the smallest admissible `δ` is
//! `max( max_{y ∉ Ω} ⟨y−x,ν⟩/r , max_{y ∈ Ω} −⟨y−x,ν⟩/r )`
//! over probes `y ∈ B_r(x)`. The estimator minimizes it over `ν`.

use crate::error::{Error, Result};
use crate::geometry::{Cuboid, UniformGrid};
use crate::numeric::{golden_section_min, norm};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub type InsideFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct BoundaryCloud {
    pub points: Vec<Vec<f64>>,
    pub inside: InsideFn,
    pub spacing: f64,
}

impl fmt::Debug for BoundaryCloud {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryCloud")
            .field("points", &self.points.len())
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl BoundaryCloud {
    pub fn new(points: Vec<Vec<f64>>, inside: InsideFn, spacing: f64) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidArgument("empty boundary cloud".into()));
        };
        let n = first.len();
        if !(2..=3).contains(&n) {
            return Err(Error::InvalidArgument(format!("boundary clouds must be 2-D or 3-D, got {n}")));
        }
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: p.len() });
        }
        if !(spacing > 0.0) {
            return Err(Error::InvalidArgument("sample spacing must be positive".into()));
        }
        Ok(Self { points, inside, spacing })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// `{x_n ≥ 0}` sampled on `[−extent, extent]^{n−1}`.
    pub fn half_space(n: usize, extent: f64, spacing: f64) -> Result<Self> {
        let k = (extent / spacing).round() as i64;
        let mut points = Vec::new();
        let coords = || (-k..=k).map(|i| i as f64 * spacing);
        if n == 2 {
            points.extend(coords().map(|a| vec![a, 0.0]));
        } else if n == 3 {
            for a in coords() {
                points.extend(coords().map(|b| vec![a, b, 0.0]));
            }
        }
        Self::new(points, Arc::new(move |y: &[f64]| y[n - 1] >= 0.0), spacing)
    }

    /// Boundary of `[0, side]²` with `per_side` samples per edge, corners first on each edge.
    pub fn square(side: f64, per_side: usize) -> Result<Self> {
        let h = side / per_side as f64;
        let mut points = Vec::with_capacity(4 * per_side);
        let corners = [[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]];
        for c in 0..4 {
            let (a, b) = (corners[c], corners[(c + 1) % 4]);
            for j in 0..per_side {
                let t = j as f64 / per_side as f64;
                points.push(vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        Self::new(points, Arc::new(move |y: &[f64]| (0.0..=side).contains(&y[0]) && (0.0..=side).contains(&y[1])), h)
    }

    /// Circle of radius `radius` about the origin with `count` samples.
    pub fn circle(radius: f64, count: usize) -> Result<Self> {
        let points = (0..count)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / count as f64;
                vec![radius * t.cos(), radius * t.sin()]
            })
            .collect();
        let spacing = 2.0 * PI * radius / count as f64;
        Self::new(points, Arc::new(move |y: &[f64]| norm(y) <= radius), spacing)
    }

    /// Inside oracle from a nodal mask on a uniform grid (nearest node).
    pub fn from_mask(points: Vec<Vec<f64>>, grid: UniformGrid, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.node_count() {
            return Err(Error::DimensionMismatch { expected: grid.node_count(), got: mask.len() });
        }
        let spacing = grid.max_spacing();
        let bbox: Cuboid = grid.bbox.clone();
        let inside = Arc::new(move |y: &[f64]| bbox.contains(y) && mask[grid.locate(y)]);
        Self::new(points, inside, spacing)
    }

    /// Rotation by `angle` about the origin (2-D).
    pub fn rotated(&self, angle: f64) -> Result<Self> {
        if self.dim() != 2 {
            return Err(Error::InvalidArgument("rotation is implemented in 2-D".into()));
        }
        let (c, s) = (angle.cos(), angle.sin());
        let points = self.points.iter().map(|p| vec![c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect();
        let inner = self.inside.clone();
        let inside = Arc::new(move |y: &[f64]| inner(&[c * y[0] + s * y[1], -s * y[0] + c * y[1]]));
        Self::new(points, inside, self.spacing)
    }

    /// Dilation by `s` about the origin.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::InvalidArgument("scale must be positive".into()));
        }
        let points = self.points.iter().map(|p| p.iter().map(|v| v * s).collect()).collect();
        let inner = self.inside.clone();
        let inside = Arc::new(move |y: &[f64]| inner(&y.iter().map(|v| v / s).collect::<Vec<_>>()));
        Self::new(points, inside, self.spacing * s)
    }

    /// Every sample sees both phases within `2·spacing` along some axis.
    pub fn is_consistent(&self) -> bool {
        let n = self.dim();
        let d = 2.0 * self.spacing;
        self.points.par_iter().all(|p| {
            let mut seen = (false, false);
            for i in 0..n {
                for s in [-d, 0.0, d] {
                    let mut y = p.clone();
                    y[i] += s;
                    if (self.inside)(&y) {
                        seen.0 = true;
                    } else {
                        seen.1 = true;
                    }
                }
            }
            seen.0 && seen.1
        })
    }
}

/// Probe-lattice cells per radius: `r/128` in 2-D and `r/24` in 3-D.
pub fn probe_resolution(n: usize) -> usize {
    if n == 2 {
        128
    } else {
        24
    }
}

pub const SEARCH_DIRECTIONS: usize = 512;

struct Probes {
    n: usize,
    /// `(y − x)/r` for every probe, flat.
    offsets: Vec<f64>,
    inside: Vec<bool>,
}

fn probes(cloud: &BoundaryCloud, x: &[f64], r: f64) -> Probes {
    let n = x.len();
    let k = probe_resolution(n) as i64;
    let mut offsets = Vec::new();
    let mut idx = vec![-k; n];
    loop {
        let o: Vec<f64> = idx.iter().map(|&i| i as f64 / k as f64).collect();
        if norm(&o) <= 1.0 {
            offsets.push(o);
        }
        let mut axis = n;
        let mut done = true;
        while axis > 0 {
            axis -= 1;
            if idx[axis] < k {
                idx[axis] += 1;
                done = false;
                break;
            }
            idx[axis] = -k;
        }
        if done {
            break;
        }
    }
    let inside = offsets
        .par_iter()
        .map(|o| {
            let y: Vec<f64> = x.iter().zip(o).map(|(a, b)| a + r * b).collect();
            (cloud.inside)(&y)
        })
        .collect();
    Probes { n, offsets: offsets.concat(), inside }
}

fn delta_for(p: &Probes, nu: &[f64]) -> f64 {
    let mut d: f64 = 0.0;
    for (o, &inside) in p.offsets.chunks_exact(p.n).zip(&p.inside) {
        let t: f64 = o.iter().zip(nu).map(|(a, b)| a * b).sum();
        d = d.max(if inside { -t } else { t });
    }
    d.min(1.0)
}

fn from_angles(theta: f64, phi: f64) -> Vec<f64> {
    vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Fibonacci directions on `S²`.
pub fn fibonacci_sphere(count: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let rho = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            vec![rho * t.cos(), rho * t.sin(), z]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flatness {
    pub delta: f64,
    /// Inward unit normal of the best plane.
    pub normal: Vec<f64>,
}

/// `δ(x, r)`: grid search over normals followed by golden-section refinement.
pub fn flatness_at(cloud: &BoundaryCloud, x: &[f64], r: f64) -> Result<Flatness> {
    let n = cloud.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if !(r > 4.0 * cloud.spacing) {
        return Err(Error::InvalidArgument(format!("scale {r} must exceed four sample spacings ({})", 4.0 * cloud.spacing)));
    }
    let p = probes(cloud, x, r);
    let best = if n == 2 {
        let step = 2.0 * PI / SEARCH_DIRECTIONS as f64;
        let f = |t: f64| delta_for(&p, &[t.cos(), t.sin()]);
        let grid: Vec<f64> = (0..SEARCH_DIRECTIONS).into_par_iter().map(|j| f(j as f64 * step)).collect();
        let (j, _) = crate::weights::argmax(&grid.iter().map(|v| -v).collect::<Vec<_>>());
        let (t, v) = golden_section_min(f, j as f64 * step - step, j as f64 * step + step, 60);
        if v <= grid[j] {
            Flatness { delta: v, normal: vec![t.cos(), t.sin()] }
        } else {
            let t = j as f64 * step;
            Flatness { delta: grid[j], normal: vec![t.cos(), t.sin()] }
        }
    } else {
        let dirs = fibonacci_sphere(SEARCH_DIRECTIONS);
        let grid: Vec<f64> = dirs.par_iter().map(|d| delta_for(&p, d)).collect();
        let (j, _) = crate::weights::argmax(&grid.iter().map(|v| -v).collect::<Vec<_>>());
        let d = &dirs[j];
        let (mut theta, mut phi) = (d[2].clamp(-1.0, 1.0).acos(), d[1].atan2(d[0]));
        let mut value = grid[j];
        let mut window = (4.0 * PI / SEARCH_DIRECTIONS as f64).sqrt();
        for _ in 0..4 {
            let (t, v) = golden_section_min(|t| delta_for(&p, &from_angles(t, phi)), theta - window, theta + window, 40);
            if v <= value {
                theta = t;
                value = v;
            }
            let (f, v) = golden_section_min(|f| delta_for(&p, &from_angles(theta, f)), phi - window, phi + window, 40);
            if v <= value {
                phi = f;
                value = v;
            }
            window *= 0.5;
        }
        Flatness { delta: value, normal: from_angles(theta, phi) }
    };
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub x: Vec<f64>,
    pub r: f64,
    pub delta: f64,
    pub normal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReifenbergEstimate {
    pub r0: f64,
    pub delta_hat: f64,
    /// `δ/(1−δ)` for the shifted coordinate system; infinite at `δ = 1`.
    pub delta_prime: f64,
    pub profile: Vec<ProfileEntry>,
    pub worst: (Vec<f64>, f64),
    /// Only sampled scales are covered; the supremum over all `r < R₀` is not bounded.
    pub sampled_scales: Vec<f64>,
}

/// Scales `4s·(R₀/4s)^{j/J}` for `j = 1..J`, ending at `R₀`.
pub fn profile_scales(spacing: f64, r0: f64, n_scales: usize) -> Vec<f64> {
    let lo = 4.0 * spacing;
    (1..=n_scales).map(|j| lo * (r0 / lo).powf(j as f64 / n_scales as f64)).collect()
}

/// `δ̂ = max δ(x, r)` over `n_centers` evenly strided cloud points and the
/// geometric scales of [`profile_scales`].
pub fn flatness_profile(cloud: &BoundaryCloud, r0: f64, n_centers: usize, n_scales: usize) -> Result<ReifenbergEstimate> {
    if !(r0 > 4.0 * cloud.spacing) || n_centers == 0 || n_scales == 0 {
        return Err(Error::InvalidArgument("need R0 above four sample spacings and at least one center and scale".into()));
    }
    let len = cloud.points.len();
    let centers: Vec<usize> = if n_centers >= len {
        (0..len).collect()
    } else {
        (0..n_centers).map(|i| i * len / n_centers).collect()
    };
    let scales = profile_scales(cloud.spacing, r0, n_scales);
    let pairs: Vec<(usize, f64)> = centers.iter().flat_map(|&c| scales.iter().map(move |&r| (c, r))).collect();
    let profile = pairs
        .iter()
        .map(|&(c, r)| {
            let f = flatness_at(cloud, &cloud.points[c], r)?;
            Ok(ProfileEntry { x: cloud.points[c].clone(), r, delta: f.delta, normal: f.normal })
        })
        .collect::<Result<Vec<_>>>()?;
    let (k, _) = crate::weights::argmax(&profile.iter().map(|e| e.delta).collect::<Vec<_>>());
    let delta_hat = profile[k].delta;
    Ok(ReifenbergEstimate {
        r0,
        delta_hat,
        delta_prime: if delta_hat < 1.0 { delta_hat / (1.0 - delta_hat) } else { f64::INFINITY },
        worst: (profile[k].x.clone(), profile[k].r),
        profile,
        sampled_scales: scales,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_space_is_flat() {
        let c = BoundaryCloud::half_space(2, 1.0, 0.01).unwrap();
        assert!(c.is_consistent());
        let f = flatness_at(&c, &[0.0, 0.0], 0.5).unwrap();
        assert!(f.delta <= 1e-6, "{f:?}");
        assert!((f.normal[1] - 1.0).abs() < 1e-6);
        let c3 = BoundaryCloud::half_space(3, 1.0, 0.05).unwrap();
        let f = flatness_at(&c3, &[0.0, 0.0, 0.0], 0.5).unwrap();
        assert!(f.delta <= 0.01, "{f:?}");
    }

    #[test]
    fn square_corner() {
        let c = BoundaryCloud::square(1.0, 200).unwrap();
        let f = flatness_at(&c, &[0.0, 0.0], 0.25).unwrap();
        // brute force over the exact wedge: the bisector normal gives sin(π/4)
        assert!((f.delta - 0.5f64.sqrt()).abs() < 0.05 * 0.5f64.sqrt(), "{f:?}");
        let edge = flatness_at(&c, &[0.5, 0.0], 0.25).unwrap();
        assert!(edge.delta < 0.01);
    }

    #[test]
    fn circle_tangent_deviation() {
        let c = BoundaryCloud::circle(1.0, 4000).unwrap();
        let r: f64 = 0.2;
        let f = flatness_at(&c, &[1.0, 0.0], r).unwrap();
        let oracle = (1.0 - (1.0 - r * r).sqrt()) / r;
        assert!((f.delta - oracle).abs() < 0.1 * oracle, "{f:?} {oracle}");
    }

    #[test]
    fn profile_examples() {
        let sq = BoundaryCloud::square(1.0, 200).unwrap();
        let est = flatness_profile(&sq, 0.5, 8, 3).unwrap();
        assert!((est.delta_hat - 0.5f64.sqrt()).abs() < 0.05);
        assert!((est.delta_prime - est.delta_hat / (1.0 - est.delta_hat)).abs() < 1e-15);
        let disk = BoundaryCloud::circle(1.0, 4000).unwrap();
        let est = flatness_profile(&disk, 0.2, 6, 4).unwrap();
        assert_eq!(est.worst.1, *est.sampled_scales.last().unwrap());
        assert!((est.delta_hat - 0.1003).abs() < 0.01);
    }

    #[test]
    fn rigid_motion_and_dilation() {
        let sq = BoundaryCloud::square(1.0, 200).unwrap();
        let base = flatness_profile(&sq, 0.5, 8, 3).unwrap().delta_hat;
        let rot = flatness_profile(&sq.rotated(PI / 6.0).unwrap(), 0.5, 8, 3).unwrap().delta_hat;
        assert!((rot / base - 1.0).abs() < 0.02, "{base} {rot}");
        let c = BoundaryCloud::circle(1.0, 4000).unwrap();
        let a = flatness_at(&c, &[0.0, 1.0], 0.2).unwrap().delta;
        let b = flatness_at(&c.scaled(3.0).unwrap(), &[0.0, 3.0], 0.6).unwrap().delta;
        assert!((a - b).abs() < 1e-9, "{a} {b}");
    }

    #[test]
    fn rejects_small_scales() {
        let c = BoundaryCloud::circle(1.0, 100).unwrap();
        assert!(flatness_at(&c, &[1.0, 0.0], 0.1).is_err());
    }
}
