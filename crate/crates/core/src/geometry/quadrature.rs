use super::{Ball, GridScalarField, Region, UniformGrid};
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::weights::Weight;

/// One lattice cell seen by [`visit_region_cells`].
pub struct CellRef<'a> {
    /// Lower corner of the cell.
    pub lo: &'a [f64],
    pub center: &'a [f64],
    pub h: &'a [f64],
    /// Grid node of the cell, `None` for lattice cells outside the grid box.
    pub node: Option<usize>,
    /// Fraction of the cell assigned to the region.
    pub fraction: f64,
}

/// Visits every cell of the grid lattice that meets `region`, in lexicographic
/// order. With `clip` the visit stays inside the grid box; otherwise the
/// lattice is continued past it (useful for analytic weights).
pub fn visit_region_cells<F: FnMut(&CellRef)>(grid: &UniformGrid, region: &Region, clip: bool, mut visit: F) {
    let n = grid.dim();
    let h = grid.spacing();
    let (blo, bhi) = region.bounds();
    let mut k_lo = vec![0i64; n];
    let mut k_hi = vec![0i64; n];
    for i in 0..n {
        let a = ((blo[i] - grid.bbox.lo[i]) / h[i]).floor() as i64;
        let b = ((bhi[i] - grid.bbox.lo[i]) / h[i]).ceil() as i64 - 1;
        let (a, b) = if clip {
            (a.max(0), b.min(grid.m as i64 - 1))
        } else {
            (a, b)
        };
        if a > b {
            return;
        }
        k_lo[i] = a;
        k_hi[i] = b;
    }
    let mut k = k_lo.clone();
    let mut lo = vec![0.0; n];
    let mut center = vec![0.0; n];
    loop {
        for i in 0..n {
            lo[i] = grid.bbox.lo[i] + k[i] as f64 * h[i];
            center[i] = lo[i] + 0.5 * h[i];
        }
        let fraction = region.cell_fraction(&lo, &h);
        if fraction > 0.0 {
            let node = grid.linear_index_signed(&k);
            visit(&CellRef {
                lo: &lo,
                center: &center,
                h: &h,
                node,
                fraction,
            });
        }
        // odometer, last axis fastest
        let mut axis = n;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if k[axis] < k_hi[axis] {
                k[axis] += 1;
                break;
            }
            k[axis] = k_lo[axis];
        }
    }
}

fn check_region(field: &GridScalarField, region: &Region) -> Result<()> {
    let grid = &field.grid;
    if region.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: region.dim(),
        });
    }
    let covered = match region {
        Region::Box(b) => grid.bbox.contains_box(b),
        _ => region.intersects_box(&grid.bbox),
    };
    if covered {
        Ok(())
    } else {
        Err(Error::RegionNotCovered)
    }
}

fn cell_weight(weight: Option<&Weight>, cell: &CellRef) -> f64 {
    match weight {
        Some(w) => w.cell_mass(cell.lo, cell.h),
        None => cell.h.iter().product(),
    }
}

/// Midpoint-rule approximation of `∫_region f·w dx`.
///
/// Balls are clipped to the grid box; a box region must lie inside it.
pub fn grid_integrate(field: &GridScalarField, weight: Option<&Weight>, region: &Region) -> Result<f64> {
    check_region(field, region)?;
    let mut terms = Vec::new();
    visit_region_cells(&field.grid, region, true, |cell| {
        let node = cell.node.expect("clipped visit stays on the grid");
        terms.push(field.value(node) * cell_weight(weight, cell) * cell.fraction);
    });
    Ok(pairwise_sum(&terms))
}

/// `⟨f⟩_{w,B} = ∫_B f w / ∫_B w`, or the Lebesgue average when `weight` is `None`.
pub fn ball_average(field: &GridScalarField, weight: Option<&Weight>, ball: &Ball) -> Result<f64> {
    let region = Region::Ball(ball.clone());
    check_region(field, &region)?;
    let mut num = Vec::new();
    let mut den = Vec::new();
    visit_region_cells(&field.grid, &region, true, |cell| {
        let node = cell.node.expect("clipped visit stays on the grid");
        let m = cell_weight(weight, cell) * cell.fraction;
        num.push(field.value(node) * m);
        den.push(m);
    });
    let den = pairwise_sum(&den);
    if !(den > 0.0) {
        return Err(Error::DegenerateMass);
    }
    Ok(pairwise_sum(&num) / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Cuboid;
    use std::f64::consts::PI;

    fn grid(m: usize, lo: f64, hi: f64) -> UniformGrid {
        UniformGrid::new(Cuboid::cube(2, lo, hi).unwrap(), m).unwrap()
    }

    #[test]
    fn constant_over_unit_box_is_exact() {
        let g = grid(64, 0.0, 1.0);
        let f = GridScalarField::constant(g.clone(), 1.0);
        let v = grid_integrate(&f, None, &Region::Box(g.bbox.clone())).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn power_weight_over_unit_disk() {
        let g = grid(512, -1.0, 1.0);
        let f = GridScalarField::constant(g.clone(), 1.0);
        let ball = Region::Ball(Ball::new(vec![0.0, 0.0], 1.0).unwrap());
        let v = grid_integrate(&f, Some(&Weight::power(0.5)), &ball).unwrap();
        assert!((v - 2.0 * PI / 2.5).abs() < 1e-3, "{v}");
        let v = grid_integrate(&f, Some(&Weight::power(-0.5)), &ball).unwrap();
        assert!((v - 2.0 * PI / 1.5).abs() < 5e-3, "{v}");
    }

    #[test]
    fn region_outside_grid_is_rejected() {
        let g = grid(8, 0.0, 1.0);
        let f = GridScalarField::constant(g, 1.0);
        let far = Region::Ball(Ball::new(vec![5.0, 5.0], 1.0).unwrap());
        assert!(matches!(grid_integrate(&f, None, &far), Err(Error::RegionNotCovered)));
        let big = Region::Box(Cuboid::cube(2, -1.0, 1.0).unwrap());
        assert!(matches!(grid_integrate(&f, None, &big), Err(Error::RegionNotCovered)));
    }

    #[test]
    fn averages() {
        let g = grid(512, -1.0, 1.0);
        let unit = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
        let mu = GridScalarField::from_fn(g.clone(), |x| crate::numeric::norm(x).sqrt());
        let avg = ball_average(&mu, None, &unit).unwrap();
        assert!((avg - 0.8).abs() < 1e-3, "{avg}");

        let x1 = GridScalarField::from_fn(g.clone(), |x| x[0]);
        assert!(ball_average(&x1, None, &unit).unwrap().abs() < 1e-12);

        let c = GridScalarField::constant(g, 3.25);
        let b = Ball::new(vec![0.3, -0.2], 0.4).unwrap();
        for w in [None, Some(Weight::power(0.7)), Some(Weight::power(-0.9))] {
            let avg = ball_average(&c, w.as_ref(), &b).unwrap();
            assert!((avg - 3.25).abs() < 1e-14, "{avg}");
        }
    }

    #[test]
    fn midpoint_convergence_order() {
        // smooth integrand exp(x)cos(y) over a disk: refinement error should drop ~linearly
        let exact = {
            // reference on a fine grid
            let g = grid(2048, -1.0, 1.0);
            let f = GridScalarField::from_fn(g, |x| x[0].exp() * x[1].cos());
            grid_integrate(&f, None, &Region::Box(Cuboid::cube(2, -0.5, 0.75).unwrap())).unwrap()
        };
        let err = |m: usize| {
            let g = grid(m, -1.0, 1.0);
            let f = GridScalarField::from_fn(g, |x| x[0].exp() * x[1].cos());
            let v = grid_integrate(&f, None, &Region::Box(Cuboid::cube(2, -0.5, 0.75).unwrap())).unwrap();
            (v - exact).abs()
        };
        let (e1, e2) = (err(40), err(80));
        let order = (e1 / e2).log2();
        assert!(order >= 0.9, "order {order}");
    }
}
