use super::{Ball, Cuboid, UniformGrid};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// How a [`BallFamily`] was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyProvenance {
    pub grid: UniformGrid,
    pub domain: Cuboid,
    pub stride: usize,
    pub r_min: f64,
    pub q: f64,
    pub levels: usize,
    pub seed: u64,
}

/// Finite sample of balls standing in for "all balls" in sup-type definitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    pub balls: Vec<Ball>,
    pub provenance: FamilyProvenance,
}

impl BallFamily {
    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.provenance.grid
    }

    /// Appends extra balls (e.g. origin-centered ones); the result is still deterministic.
    pub fn with_extra(mut self, extra: impl IntoIterator<Item = Ball>) -> Self {
        self.balls.extend(extra);
        self
    }

    /// Keeps balls with radius below `r_max` and center inside `domain`.
    pub fn restricted(&self, r_max: f64, domain: &Cuboid) -> BallFamily {
        BallFamily {
            balls: self
                .balls
                .iter()
                .filter(|b| b.radius < r_max && domain.contains(&b.center))
                .cloned()
                .collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Centers on the sub-lattice `domain.lo + k·stride·h` (both ends included),
/// radii `r_min·q^j` for `j = 0..levels`. A stride of at least `m` collapses
/// the lattice to the single center of `domain`.
pub fn make_ball_family(
    grid: &UniformGrid,
    domain: &Cuboid,
    stride: usize,
    r_min: f64,
    q: f64,
    levels: usize,
) -> Result<BallFamily> {
    let n = grid.dim();
    if domain.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: domain.dim(),
        });
    }
    if stride == 0 || levels == 0 {
        return Err(Error::EmptyFamily);
    }
    if !(q > 1.0) {
        return Err(Error::InvalidArgument(format!("radius ratio q must exceed 1, got {q}")));
    }
    if r_min < 2.0 * grid.max_spacing() * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "r_min = {r_min} is below two grid spacings ({})",
            2.0 * grid.max_spacing()
        )));
    }
    let r_max = r_min * q.powi(levels as i32 - 1);
    if r_max > domain.diam() * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "largest radius {r_max} exceeds the domain diameter {}",
            domain.diam()
        )));
    }
    let h = grid.spacing();
    let axis_centers: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            if stride >= grid.m {
                return vec![0.5 * (domain.lo[i] + domain.hi[i])];
            }
            let step = stride as f64 * h[i];
            let count = ((domain.hi[i] - domain.lo[i]) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|k| domain.lo[i] + k as f64 * step).collect()
        })
        .collect();
    let radii: Vec<f64> = (0..levels).map(|j| r_min * q.powi(j as i32)).collect();

    let mut balls = Vec::new();
    let mut idx = vec![0usize; n];
    'outer: loop {
        let center: Vec<f64> = idx.iter().enumerate().map(|(i, &k)| axis_centers[i][k]).collect();
        for &r in &radii {
            balls.push(Ball { center: center.clone(), radius: r });
        }
        let mut axis = n;
        loop {
            if axis == 0 {
                break 'outer;
            }
            axis -= 1;
            if idx[axis] + 1 < axis_centers[axis].len() {
                idx[axis] += 1;
                break;
            }
            idx[axis] = 0;
        }
    }
    if balls.is_empty() {
        return Err(Error::EmptyFamily);
    }
    Ok(BallFamily {
        balls,
        provenance: FamilyProvenance {
            grid: grid.clone(),
            domain: domain.clone(),
            stride,
            r_min,
            q,
            levels,
            seed: 0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_center_family() {
        let g = UniformGrid::new(Cuboid::cube(2, 0.0, 1.0).unwrap(), 16).unwrap();
        let fam = make_ball_family(&g, &g.bbox, 16, 0.25, 2.0, 1).unwrap();
        assert_eq!(fam.len(), 1);
        assert_eq!(fam.balls[0].center, vec![0.5, 0.5]);
    }

    #[test]
    fn counted_family_and_determinism() {
        let g = UniformGrid::new(Cuboid::cube(2, -1.0, 1.0).unwrap(), 512).unwrap();
        let h = g.max_spacing();
        let a = make_ball_family(&g, &g.bbox, 32, 4.0 * h, 2.0, 6).unwrap();
        assert_eq!(a.len(), 17 * 17 * 6);
        let b = make_ball_family(&g, &g.bbox, 32, 4.0 * h, 2.0, 6).unwrap();
        assert_eq!(a, b);
        // the origin is one of the lattice centers
        assert!(a.balls.iter().any(|b| b.is_origin_centered()));
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = UniformGrid::new(Cuboid::cube(2, 0.0, 1.0).unwrap(), 16).unwrap();
        assert!(make_ball_family(&g, &g.bbox, 4, 0.01, 2.0, 3).is_err());
        assert!(make_ball_family(&g, &g.bbox, 4, 0.2, 2.0, 10).is_err());
        assert!(make_ball_family(&g, &g.bbox, 4, 0.2, 1.0, 2).is_err());
        assert!(matches!(make_ball_family(&g, &g.bbox, 4, 0.2, 2.0, 0), Err(Error::EmptyFamily)));
    }
}
