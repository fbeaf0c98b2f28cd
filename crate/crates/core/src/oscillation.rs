//! Weighted BMO seminorms and the coefficient class test.
//!
//! The quotient for a ball `B = B_ρ(x)` is
//! `(1/μ(B)) ∫_B |f − ⟨f⟩_B|² μ⁻¹ dx` where `⟨f⟩_B` is the Lebesgue average.
//! Balls are clipped to the domain and centers are restricted to it.

use crate::error::{Error, Result};
use crate::geometry::{visit_region_cells, Ball, BallFamily, Cuboid, GridScalarField, Region, UniformGrid};
use crate::numeric::pairwise_sum;
use crate::weights::{argmax, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Symmetric `n×n` matrix per grid node, stored node-major and row-major inside a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixField {
    pub grid: UniformGrid,
    pub entries: Vec<f64>,
}

impl MatrixField {
    pub fn new(grid: UniformGrid, entries: Vec<f64>) -> Result<Self> {
        let n = grid.dim();
        let expected = grid.node_count() * n * n;
        if entries.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: entries.len(),
            });
        }
        Ok(Self { grid, entries })
    }

    /// `f(x)` must return the `n×n` entries in row-major order.
    pub fn from_fn<F: Fn(&[f64]) -> Vec<f64>>(grid: UniformGrid, f: F) -> Result<Self> {
        let mut entries = Vec::new();
        for x in grid.nodes() {
            entries.extend(f(&x));
        }
        Self::new(grid, entries)
    }

    /// `μ(x)·A₀` with a constant matrix `A₀`.
    pub fn weighted_constant(grid: UniformGrid, mu: &Weight, a0: &[f64]) -> Result<Self> {
        let n = grid.dim();
        if a0.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: a0.len(),
            });
        }
        Self::from_fn(grid, |x| {
            let m = mu.eval(x);
            a0.iter().map(|a| a * m).collect()
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn at(&self, node: usize) -> &[f64] {
        let nn = self.dim() * self.dim();
        &self.entries[node * nn..(node + 1) * nn]
    }

    pub fn entry(&self, i: usize, j: usize) -> GridScalarField {
        let n = self.dim();
        let values = (0..self.grid.node_count()).map(|k| self.at(k)[i * n + j]).collect();
        GridScalarField {
            grid: self.grid.clone(),
            values,
            mask: None,
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            entries: self.entries.iter().map(|a| a * lambda).collect(),
        }
    }

    /// First node whose matrix is not symmetric to relative tolerance `tol`.
    pub fn asymmetric_node(&self, tol: f64) -> Option<usize> {
        let n = self.dim();
        (0..self.grid.node_count()).find(|&k| {
            let a = self.at(k);
            let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (0..n).any(|i| (0..i).any(|j| (a[i * n + j] - a[j * n + i]).abs() > tol * scale.max(f64::MIN_POSITIVE)))
        })
    }
}

/// Sampled squared seminorm with the ball attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmoEstimate {
    pub value_sq: f64,
    pub r0: f64,
    pub witness: Ball,
    /// Entry seminorms `[a_ij]²` for matrix inputs.
    pub per_entry: Option<Vec<Vec<f64>>>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMembership {
    pub delta: f64,
    pub r0: f64,
    pub lambda: f64,
    pub elliptic_ok: bool,
    pub bmo_value_sq: f64,
    pub member: bool,
    pub witness: Ball,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwReport {
    pub l2_side: f64,
    pub l1_side: f64,
    pub ratio: f64,
}

/// Per-cell data of one ball: `(f, |cell ∩ B|, μ-mass, μ⁻¹-mass)`.
fn ball_cells(f: &GridScalarField, mu: &Weight, mu_inv: &Weight, ball: &Ball, domain: &Cuboid) -> Vec<[f64; 4]> {
    let region = Region::BallInBox(ball.clone(), domain.clone());
    let mut cells = Vec::new();
    visit_region_cells(&f.grid, &region, true, |cell| {
        let node = cell.node.expect("clipped visit stays on the grid");
        if f.is_masked(node) {
            return;
        }
        let vol: f64 = cell.h.iter().product();
        cells.push([
            f.values[node],
            cell.fraction * vol,
            cell.fraction * mu.cell_mass(cell.lo, cell.h),
            cell.fraction * mu_inv.cell_mass(cell.lo, cell.h),
        ]);
    });
    cells
}

fn lebesgue_mean(cells: &[[f64; 4]]) -> f64 {
    let vol = pairwise_sum(&cells.iter().map(|c| c[1]).collect::<Vec<_>>());
    pairwise_sum(&cells.iter().map(|c| c[0] * c[1]).collect::<Vec<_>>()) / vol
}

fn l2_quotient(cells: &[[f64; 4]]) -> f64 {
    if cells.is_empty() {
        return 0.0;
    }
    let mean = lebesgue_mean(cells);
    let mass = pairwise_sum(&cells.iter().map(|c| c[2]).collect::<Vec<_>>());
    let dev = pairwise_sum(&cells.iter().map(|c| (c[0] - mean).powi(2) * c[3]).collect::<Vec<_>>());
    dev / mass
}

fn l1_quotient(cells: &[[f64; 4]]) -> f64 {
    if cells.is_empty() {
        return 0.0;
    }
    let mean = lebesgue_mean(cells);
    let mass = pairwise_sum(&cells.iter().map(|c| c[2]).collect::<Vec<_>>());
    let dev = pairwise_sum(&cells.iter().map(|c| (c[0] - mean).abs() * c[1]).collect::<Vec<_>>());
    dev / mass
}

fn admissible_balls(family: &BallFamily, r0: f64, domain: &Cuboid) -> Result<Vec<Ball>> {
    let balls = family.restricted(r0, domain).balls;
    if balls.is_empty() {
        return Err(Error::EmptyFamily);
    }
    Ok(balls)
}

fn check_inverse_integrable(mu: &Weight, n: usize) -> Result<Weight> {
    mu.check_integrable(n)?;
    let inv = mu.powf(-1.0);
    inv.check_integrable(n)
        .map_err(|_| Error::NotIntegrable("mu^-1 is not locally integrable".into()))?;
    if !mu.is_positive() {
        return Err(Error::NotIntegrable("mu vanishes on a set of positive measure".into()));
    }
    Ok(inv)
}

/// Def-2.3 quotient for every admissible ball, in family order.
pub fn bmo_ball_quotients(f: &GridScalarField, mu: &Weight, domain: &Cuboid, r0: f64, family: &BallFamily) -> Result<Vec<(Ball, f64)>> {
    let inv = check_inverse_integrable(mu, f.grid.dim())?;
    let balls = admissible_balls(family, r0, domain)?;
    Ok(balls
        .into_par_iter()
        .map(|b| {
            let q = l2_quotient(&ball_cells(f, mu, &inv, &b, domain));
            (b, q)
        })
        .collect())
}

pub fn weighted_bmo_seminorm(f: &GridScalarField, mu: &Weight, domain: &Cuboid, r0: f64, family: &BallFamily) -> Result<BmoEstimate> {
    let quotients = bmo_ball_quotients(f, mu, domain, r0, family)?;
    let values: Vec<f64> = quotients.iter().map(|q| q.1).collect();
    let (best, value_sq) = argmax(&values);
    Ok(BmoEstimate {
        value_sq,
        r0,
        witness: quotients[best].0.clone(),
        per_entry: None,
        label: "sampled lower estimate".into(),
    })
}

/// `[A]² = Σ_{i,j} [a_ij]²`, each entry seminorm sampled separately.
pub fn matrix_weighted_bmo(a: &MatrixField, mu: &Weight, domain: &Cuboid, r0: f64, family: &BallFamily) -> Result<BmoEstimate> {
    let n = a.dim();
    let mut per_entry = vec![vec![0.0; n]; n];
    let mut best: Option<BmoEstimate> = None;
    for i in 0..n {
        for j in 0..n {
            let est = weighted_bmo_seminorm(&a.entry(i, j), mu, domain, r0, family)?;
            per_entry[i][j] = est.value_sq;
            if best.as_ref().map_or(true, |b| est.value_sq > b.value_sq) {
                best = Some(est);
            }
        }
    }
    let flat: Vec<f64> = per_entry.iter().flatten().copied().collect();
    let best = best.expect("n >= 1");
    Ok(BmoEstimate {
        value_sq: flat.iter().sum(),
        r0,
        witness: best.witness,
        per_entry: Some(per_entry),
        label: "sampled lower estimate".into(),
    })
}

/// Coordinate axes, normalized `e_i ± e_j`, and eight seeded random unit vectors.
pub fn probe_directions(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        dirs.push(e);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in i + 1..n {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[i] = s;
                e[j] = sign * s;
                dirs.push(e);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while dirs.len() < n + n * (n - 1) + 8 {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = crate::numeric::norm(&v);
        if norm > 1e-3 && norm <= 1.0 {
            dirs.push(v.iter().map(|x| x / norm).collect());
        }
    }
    dirs
}

fn quadratic_form(a: &[f64], xi: &[f64]) -> f64 {
    let n = xi.len();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += xi[i] * a[i * n + j] * xi[j];
        }
    }
    q
}

/// Checks `Λμ|ξ|² ≤ ⟨Aξ,ξ⟩ ≤ Λ⁻¹μ|ξ|²` on the probe set at every node.
///
/// Returns `Err(NotElliptic)` when the form is negative somewhere, `Ok(false)`
/// when it is positive but violates one of the bounds.
pub fn ellipticity_ok(a: &MatrixField, mu: &Weight, lambda: f64, seed: u64) -> Result<bool> {
    let dirs = probe_directions(a.dim(), seed);
    let tol = 1e-12;
    let mut ok = true;
    for node in 0..a.grid.node_count() {
        let x = a.grid.node(node);
        let m = mu.eval(&x);
        for xi in &dirs {
            let q = quadratic_form(a.at(node), xi);
            if q < 0.0 || (q == 0.0 && m > 0.0) {
                return Err(Error::NotElliptic { node });
            }
            if q < lambda * m * (1.0 - tol) || q > m / lambda * (1.0 + tol) {
                ok = false;
            }
        }
    }
    Ok(ok)
}

pub const DEFAULT_PROBE_SEED: u64 = 0x5eed;

pub fn coefficient_class_check(
    a: &MatrixField,
    mu: &Weight,
    lambda: f64,
    delta: f64,
    r0: f64,
    domain: &Cuboid,
    family: &BallFamily,
) -> Result<ClassMembership> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidArgument(format!("Lambda must lie in (0, 1], got {lambda}")));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    if let Some(node) = a.asymmetric_node(1e-12) {
        return Err(Error::Asymmetric { node });
    }
    let elliptic_ok = ellipticity_ok(a, mu, lambda, DEFAULT_PROBE_SEED)?;
    let bmo = matrix_weighted_bmo(a, mu, domain, r0, family)?;
    Ok(ClassMembership {
        delta,
        r0,
        lambda,
        elliptic_ok,
        bmo_value_sq: bmo.value_sq,
        member: elliptic_ok && bmo.value_sq < delta,
        witness: bmo.witness,
    })
}

/// Compares the Def-2.3 `L²(μ⁻¹)` quotient against the `L¹` quotient
/// `(1/μ(B))∫_B |f − ⟨f⟩_B| dx`, both sampled over the whole family.
pub fn mw_ratio(f: &GridScalarField, mu: &Weight, family: &BallFamily) -> Result<MwReport> {
    let inv = check_inverse_integrable(mu, f.grid.dim())?;
    let domain = f.grid.bbox.clone();
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let sides: Vec<(f64, f64)> = family
        .balls
        .par_iter()
        .map(|b| {
            let cells = ball_cells(f, mu, &inv, b, &domain);
            (l2_quotient(&cells), l1_quotient(&cells))
        })
        .collect();
    let l2_side = sides.iter().map(|s| s.0).fold(0.0, f64::max);
    let l1_side = sides.iter().map(|s| s.1).fold(0.0, f64::max);
    let ratio = if l1_side == 0.0 { 0.0 } else { l2_side / l1_side };
    Ok(MwReport { l2_side, l1_side, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_ball_family;

    fn setup(m: usize) -> (UniformGrid, BallFamily) {
        let g = UniformGrid::new(Cuboid::cube(2, -1.0, 1.0).unwrap(), m).unwrap();
        let h = g.max_spacing();
        let fam = make_ball_family(&g, &g.bbox, m / 8, 4.0 * h, 2.0, 4).unwrap();
        (g, fam)
    }

    #[test]
    fn constant_has_zero_oscillation() {
        let (g, fam) = setup(64);
        let f = GridScalarField::constant(g.clone(), 2.5);
        let est = weighted_bmo_seminorm(&f, &Weight::power(0.3), &g.bbox, 1.0, &fam).unwrap();
        assert!(est.value_sq < 1e-28);
    }

    #[test]
    fn linear_function_scales_quadratically() {
        // f = x1, mu = 1: quotient over B_rho equals rho^2/4 exactly for disks
        let g = UniformGrid::new(Cuboid::cube(2, -1.0, 1.0).unwrap(), 256).unwrap();
        let f = GridScalarField::from_fn(g.clone(), |x| x[0]);
        let q = |rho: f64| {
            let fam = BallFamily {
                balls: vec![Ball::new(vec![0.0, 0.0], rho).unwrap()],
                provenance: setup(64).1.provenance,
            };
            weighted_bmo_seminorm(&f, &Weight::lebesgue(), &g.bbox, 1.0, &fam).unwrap().value_sq
        };
        let ratio = q(0.8) / q(0.4);
        assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
        assert!((q(0.8) - 0.16).abs() < 2e-3);
    }

    #[test]
    fn translation_and_homogeneity() {
        let (g, fam) = setup(64);
        let mu = Weight::power(0.4);
        let f = GridScalarField::from_fn(g.clone(), |x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let base = weighted_bmo_seminorm(&f, &mu, &g.bbox, 1.0, &fam).unwrap().value_sq;
        let shifted = weighted_bmo_seminorm(&f.map(|v| v + 7.0), &mu, &g.bbox, 1.0, &fam).unwrap().value_sq;
        assert!((base - shifted).abs() < 1e-10 * base);
        let scaled = weighted_bmo_seminorm(&f.map(|v| 3.0 * v), &mu, &g.bbox, 1.0, &fam).unwrap().value_sq;
        assert!((scaled - 9.0 * base).abs() < 1e-12 * scaled);
    }

    #[test]
    fn joint_scaling_leaves_quotient_unchanged() {
        let (g, fam) = setup(64);
        let mu = Weight::power(0.3);
        let a = GridScalarField::from_fn(g.clone(), |x| mu.eval(x));
        let lambda = 4.0;
        let base = weighted_bmo_seminorm(&a, &mu, &g.bbox, 1.0, &fam).unwrap().value_sq;
        let scaled = weighted_bmo_seminorm(&a.map(|v| v / lambda), &mu.scaled(1.0 / lambda), &g.bbox, 1.0, &fam)
            .unwrap()
            .value_sq;
        assert_eq!(base, scaled);
    }

    #[test]
    fn matrix_entry_structure() {
        let (g, fam) = setup(64);
        let mu = Weight::power(0.2);
        let scalar = weighted_bmo_seminorm(&GridScalarField::from_fn(g.clone(), |x| mu.eval(x)), &mu, &g.bbox, 1.0, &fam)
            .unwrap()
            .value_sq;
        let a = MatrixField::weighted_constant(g.clone(), &mu, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let est = matrix_weighted_bmo(&a, &mu, &g.bbox, 1.0, &fam).unwrap();
        assert!((est.value_sq - 2.0 * scalar).abs() < 1e-14 * scalar);
        let d = MatrixField::weighted_constant(g.clone(), &mu, &[1.0, 0.0, 0.0, 2.0]).unwrap();
        let est = matrix_weighted_bmo(&d, &mu, &g.bbox, 1.0, &fam).unwrap();
        assert!((est.value_sq - 5.0 * scalar).abs() < 1e-12 * scalar);
        let pe = est.per_entry.unwrap();
        assert!(est.value_sq >= pe.iter().flatten().fold(0.0f64, |m, v| m.max(*v)));
    }

    #[test]
    fn class_membership() {
        let (g, fam) = setup(64);
        let small = Weight::power(0.05);
        let a = MatrixField::weighted_constant(g.clone(), &small, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let c = coefficient_class_check(&a, &small, 1.0, 0.1, 1.0, &g.bbox, &fam).unwrap();
        assert!(c.member && c.elliptic_ok);

        let big = Weight::power(1.0);
        let a = MatrixField::weighted_constant(g.clone(), &big, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let c = coefficient_class_check(&a, &big, 1.0, 1e-4, 1.0, &g.bbox, &fam).unwrap();
        assert!(!c.member);

        let a = MatrixField::weighted_constant(g.clone(), &small, &[1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(matches!(
            coefficient_class_check(&a, &small, 1.0, 0.1, 1.0, &g.bbox, &fam),
            Err(Error::NotElliptic { .. })
        ));

        let a = MatrixField::weighted_constant(g.clone(), &small, &[1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(matches!(
            coefficient_class_check(&a, &small, 1.0, 0.1, 1.0, &g.bbox, &fam),
            Err(Error::Asymmetric { .. })
        ));

        // positive but too anisotropic for Lambda = 1
        let a = MatrixField::weighted_constant(g.clone(), &small, &[1.0, 0.0, 0.0, 3.0]).unwrap();
        let c = coefficient_class_check(&a, &small, 1.0, 10.0, 1.0, &g.bbox, &fam).unwrap();
        assert!(!c.elliptic_ok && !c.member);
    }

    #[test]
    fn inverse_weight_must_be_integrable() {
        let (g, fam) = setup(32);
        let f = GridScalarField::constant(g.clone(), 1.0);
        assert!(matches!(
            weighted_bmo_seminorm(&f, &Weight::power(2.0), &g.bbox, 1.0, &fam),
            Err(Error::NotIntegrable(_))
        ));
    }

    #[test]
    fn mw_sides() {
        let (g, fam) = setup(64);
        let r = mw_ratio(&GridScalarField::constant(g.clone(), 1.0), &Weight::lebesgue(), &fam).unwrap();
        assert_eq!(r.ratio, 0.0);
        let checker = GridScalarField::from_fn(g.clone(), |x| {
            if ((x[0] * 8.0).floor() + (x[1] * 8.0).floor()) as i64 % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        });
        let r = mw_ratio(&checker, &Weight::lebesgue(), &fam).unwrap();
        assert!(r.l1_side > 0.0 && r.l2_side > 0.0 && r.ratio.is_finite());
    }

    #[test]
    fn probe_set_size() {
        let d = probe_directions(3, 1);
        assert_eq!(d.len(), 3 + 6 + 8);
        assert!(d.iter().all(|v| (crate::numeric::norm(v) - 1.0).abs() < 1e-12));
    }
}
