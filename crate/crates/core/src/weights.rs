//! Muckenhoupt weight analytics.
//!
//! Suprema over all balls are replaced by maxima over a [`BallFamily`], so the
//! characteristics computed here are sampled lower estimates. For power weights
//! `|x|^α` the explicit envelopes [`power_ap_bound`] and [`oscillation_bound`]
//! give certified upper bounds to compare against.

use crate::error::{Error, Result};
use crate::geometry::{visit_region_cells, Ball, BallFamily, FamilyProvenance, GridScalarField, Region, UniformGrid};
use crate::numeric::{pairwise_sum, unit_sphere_area};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Dyadic refinement depth for cells that contain the singular point of a power weight.
pub const DEFAULT_SINGULAR_DEPTH: usize = 12;

/// `scale · |x|^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerWeight {
    pub alpha: f64,
    pub scale: f64,
}

/// Nonnegative density on `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    Power(PowerWeight),
    /// Piecewise constant on the cells of its grid.
    Tabulated(GridScalarField),
}

impl Weight {
    pub fn power(alpha: f64) -> Self {
        Weight::Power(PowerWeight { alpha, scale: 1.0 })
    }

    /// Lebesgue measure.
    pub fn lebesgue() -> Self {
        Self::power(0.0)
    }

    pub fn is_lebesgue(&self) -> bool {
        matches!(self, Weight::Power(p) if p.alpha == 0.0 && p.scale == 1.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Weight::Power(p) => {
                if p.alpha == 0.0 {
                    p.scale
                } else {
                    p.scale * crate::numeric::norm(x).powf(p.alpha)
                }
            }
            Weight::Tabulated(f) => f.values[f.grid.locate(x)],
        }
    }

    /// `λ·w`.
    pub fn scaled(&self, lambda: f64) -> Weight {
        match self {
            Weight::Power(p) => Weight::Power(PowerWeight {
                alpha: p.alpha,
                scale: p.scale * lambda,
            }),
            Weight::Tabulated(f) => Weight::Tabulated(f.map(|v| v * lambda)),
        }
    }

    /// `w^t`.
    pub fn powf(&self, t: f64) -> Weight {
        match self {
            Weight::Power(p) => Weight::Power(PowerWeight {
                alpha: p.alpha * t,
                scale: p.scale.powf(t),
            }),
            Weight::Tabulated(f) => Weight::Tabulated(f.map(|v| v.powf(t))),
        }
    }

    /// Whether ball integrals may use the lattice beyond a grid box.
    pub fn is_analytic(&self) -> bool {
        matches!(self, Weight::Power(_))
    }

    /// Whether `w` is locally integrable in `R^n`.
    pub fn check_integrable(&self, n: usize) -> Result<()> {
        match self {
            Weight::Power(p) if p.alpha <= -(n as f64) => Err(Error::NotIntegrable(format!(
                "|x|^{} is not locally integrable in R^{n}",
                p.alpha
            ))),
            Weight::Tabulated(f) if f.values.iter().any(|v| !v.is_finite() || *v < 0.0) => {
                Err(Error::NotIntegrable("tabulated weight has negative or non-finite entries".into()))
            }
            _ => Ok(()),
        }
    }

    /// Whether `w > 0` away from its singular set.
    pub fn is_positive(&self) -> bool {
        match self {
            Weight::Power(p) => p.scale > 0.0,
            Weight::Tabulated(f) => f.values.iter().all(|&v| v > 0.0),
        }
    }

    /// `∫_cell w` for the cell `[lo, lo + h]`.
    pub fn cell_mass(&self, lo: &[f64], h: &[f64]) -> f64 {
        self.cell_mass_with_depth(lo, h, DEFAULT_SINGULAR_DEPTH)
    }

    pub fn cell_mass_with_depth(&self, lo: &[f64], h: &[f64], depth: usize) -> f64 {
        match self {
            Weight::Power(p) => p.scale * power_cell_mass(p.alpha, lo, h, depth),
            Weight::Tabulated(_) => {
                let center: Vec<f64> = lo.iter().zip(h).map(|(a, b)| a + 0.5 * b).collect();
                self.eval(&center) * h.iter().product::<f64>()
            }
        }
    }

    /// Exact `∫_{B_r(0)} w` for power weights.
    pub fn centered_ball_mass(&self, n: usize, r: f64) -> Option<f64> {
        match self {
            Weight::Power(p) if p.alpha > -(n as f64) => Some(p.scale * unit_sphere_area(n) * r.powf(n as f64 + p.alpha) / (n as f64 + p.alpha)),
            _ => None,
        }
    }

    /// Exact `⨍_{B_r(0)} w` for power weights.
    pub fn centered_ball_average(&self, n: usize, r: f64) -> Option<f64> {
        match self {
            Weight::Power(p) if p.alpha > -(n as f64) => {
                Some(p.scale * n as f64 / (n as f64 + p.alpha) * if p.alpha == 0.0 { 1.0 } else { r.powf(p.alpha) })
            }
            _ => None,
        }
    }
}

fn cell_touches_origin(lo: &[f64], h: &[f64]) -> bool {
    lo.iter().zip(h).all(|(a, b)| *a <= 0.0 && 0.0 <= a + b)
}

/// `∫_cell |x|^alpha` with dyadic refinement around the origin. The innermost
/// cell is replaced by the origin-centered ball of equal volume.
fn power_cell_mass(alpha: f64, lo: &[f64], h: &[f64], depth: usize) -> f64 {
    let vol: f64 = h.iter().product();
    if alpha == 0.0 {
        return vol;
    }
    if !cell_touches_origin(lo, h) {
        let r2: f64 = lo.iter().zip(h).map(|(a, b)| (a + 0.5 * b).powi(2)).sum();
        return vol * r2.powf(0.5 * alpha);
    }
    let n = lo.len();
    if depth == 0 {
        let omega = unit_sphere_area(n);
        let rho = (n as f64 * vol / omega).powf(1.0 / n as f64);
        return omega * rho.powf(n as f64 + alpha) / (n as f64 + alpha);
    }
    let half: Vec<f64> = h.iter().map(|v| 0.5 * v).collect();
    let mut parts = Vec::with_capacity(1 << n);
    let mut child = vec![0.0; n];
    for mask in 0..(1usize << n) {
        for i in 0..n {
            child[i] = lo[i] + if mask >> i & 1 == 1 { half[i] } else { 0.0 };
        }
        parts.push(power_cell_mass(alpha, &child, &half, depth - 1));
    }
    pairwise_sum(&parts)
}

/// Exact `∫_{B_r(0)} |x|^α dx = ω_n r^{n+α}/(n+α)`, `ω_n = |S^{n-1}|`.
pub fn centered_ball_weight_mass(alpha: f64, n: usize, r: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if alpha <= -(n as f64) {
        return Err(Error::NotIntegrable(format!("|x|^{alpha} in R^{n}")));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    Ok(Weight::power(alpha).centered_ball_mass(n, r).expect("power weight"))
}

/// Explicit envelope `max{2^n 5^{|α|}, 2^{4n}/((n+α)(n−α))}` for `[|x|^α]_{A_2}`.
pub fn power_ap_bound(n: usize, alpha: f64) -> Result<f64> {
    let nf = n as f64;
    if alpha.abs() >= nf {
        return Err(Error::OutsideApRange(format!("|alpha| = {} must be below n = {n}", alpha.abs())));
    }
    let type_one = 2f64.powi(n as i32) * 5f64.powf(alpha.abs());
    let type_two = 2f64.powi(4 * n as i32) / ((nf + alpha) * (nf - alpha));
    Ok(type_one.max(type_two))
}

/// Explicit bound `2|α|4^{2n+1}/(2n−1)` on the mean oscillation ratio of `|x|^α`.
pub fn oscillation_bound(n: usize, alpha: f64) -> f64 {
    2.0 * alpha.abs() * 4f64.powi(2 * n as i32 + 1) / (2.0 * n as f64 - 1.0)
}

/// Lattice-cell volume and masses of several weights over one ball.
///
/// Analytic weights use the lattice continued beyond the grid box; if any
/// weight is tabulated the ball is clipped to the box.
pub(crate) fn ball_masses(weights: &[&Weight], ball: &Ball, grid: &UniformGrid) -> (f64, Vec<f64>) {
    let clip = weights.iter().any(|w| !w.is_analytic());
    let region = Region::Ball(ball.clone());
    let mut vol = Vec::new();
    let mut masses = vec![Vec::new(); weights.len()];
    visit_region_cells(grid, &region, clip, |cell| {
        vol.push(cell.fraction * cell.h.iter().product::<f64>());
        for (k, w) in weights.iter().enumerate() {
            masses[k].push(cell.fraction * w.cell_mass(cell.lo, cell.h));
        }
    });
    (pairwise_sum(&vol), masses.iter().map(|m| pairwise_sum(m)).collect())
}

/// `⨍_B w` for each weight: closed form for origin-centered balls when every
/// weight is a power weight, lattice quadrature otherwise.
pub(crate) fn ball_averages(weights: &[&Weight], ball: &Ball, grid: &UniformGrid) -> Vec<f64> {
    let n = ball.dim();
    if ball.is_origin_centered() {
        let closed: Option<Vec<f64>> = weights.iter().map(|w| w.centered_ball_average(n, ball.radius)).collect();
        if let Some(v) = closed {
            return v;
        }
    }
    let (vol, masses) = ball_masses(weights, ball, grid);
    masses.into_iter().map(|m| m / vol).collect()
}

/// Sampled `[w]_{A_p}` with the ball that attains it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApEstimate {
    pub p: f64,
    pub value: f64,
    pub witness: Ball,
    pub family: FamilyProvenance,
    pub label: String,
}

fn check_ap_range(w: &Weight, n: usize, p: f64) -> Result<()> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("A_p needs p > 1, got {p}")));
    }
    if !w.is_positive() {
        return Err(Error::OutsideApRange("weight vanishes on a set of positive measure".into()));
    }
    if let Weight::Power(pw) = w {
        let nf = n as f64;
        if pw.alpha <= -nf || pw.alpha >= nf * (p - 1.0) {
            return Err(Error::OutsideApRange(format!(
                "|x|^{} needs -n < alpha < n(p-1) = {}",
                pw.alpha,
                nf * (p - 1.0)
            )));
        }
    }
    Ok(())
}

/// `⟨w⟩_B ⟨w^{-1/(p-1)}⟩_B^{p-1}` for every ball of the family, in family order.
pub fn ap_ball_values(w: &Weight, family: &BallFamily, p: f64) -> Result<Vec<f64>> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let n = family.grid().dim();
    check_ap_range(w, n, p)?;
    let dual = w.powf(-1.0 / (p - 1.0));
    let grid = family.grid();
    Ok(family
        .balls
        .par_iter()
        .map(|b| {
            let avg = ball_averages(&[w, &dual], b, grid);
            avg[0] * avg[1].powf(p - 1.0)
        })
        .collect())
}

/// Sampled lower estimate of `[w]_{A_p}` over `family`.
pub fn ap_characteristic(w: &Weight, family: &BallFamily, p: f64) -> Result<ApEstimate> {
    let values = ap_ball_values(w, family, p)?;
    let (best, value) = argmax(&values);
    Ok(ApEstimate {
        p,
        value,
        witness: family.balls[best].clone(),
        family: family.provenance.clone(),
        label: "sampled lower estimate".into(),
    })
}

/// First index attaining the maximum.
pub(crate) fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    (best, values[best])
}

/// Doubling inequality `μ(B) ≤ [μ]_{A_p} (|B|/|E|)^p μ(E)` for balls `E ⊂ B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    /// Right side with the exponent orientation `(|E|/|B|)^p`.
    pub rhs_as_printed: f64,
    pub pass_as_printed: bool,
}

pub fn doubling_check(w: &Weight, ball: &Ball, subset: &Ball, p: f64, ap_value: f64, grid: &UniformGrid) -> Result<DoublingReport> {
    if !subset.is_inside(ball) {
        return Err(Error::InvalidArgument("subset ball is not contained in the ball".into()));
    }
    let mass = |b: &Ball| {
        if b.is_origin_centered() {
            if let Some(m) = w.centered_ball_mass(b.dim(), b.radius) {
                return m;
            }
        }
        ball_masses(&[w], b, grid).1[0]
    };
    let mu_b = mass(ball);
    let mu_e = mass(subset);
    let vol_ratio = (ball.radius / subset.radius).powi(ball.dim() as i32);
    let rhs = ap_value * vol_ratio.powf(p) * mu_e;
    let rhs_as_printed = ap_value * vol_ratio.powf(-p) * mu_e;
    let tol = 1e-9;
    Ok(DoublingReport {
        lhs: mu_b,
        rhs,
        pass: mu_b <= rhs * (1.0 + tol),
        rhs_as_printed,
        pass_as_printed: mu_b <= rhs_as_printed * (1.0 + tol),
    })
}

/// Reverse Hölder exponent and the quantities derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReverseHolderEstimate {
    pub gamma: f64,
    pub constant: f64,
    /// `β = γ/(2+γ)`.
    pub beta: f64,
    /// `τ(q) = q·tau_factor` with `tau_factor = γ/(1+γ)`.
    pub tau_factor: f64,
    /// Density exponent `ϱ = γ/(1+γ)` in `μ(E) ≤ C(|E|/|B|)^ϱ μ(B)`.
    pub rho: f64,
    /// Set when no tested `γ` stayed below the cap.
    pub flagged: bool,
    /// `(γ, sampled constant)` for every tested exponent.
    pub per_gamma: Vec<(f64, f64)>,
}

pub const DEFAULT_RH_CAP: f64 = 10.0;

/// Sampled constant `max_B (⨍_B w^{1+γ})^{1/(1+γ)} / ⨍_B w`.
pub fn reverse_holder_constant(w: &Weight, family: &BallFamily, gamma: f64) -> Result<f64> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let n = family.grid().dim();
    let lifted = w.powf(1.0 + gamma);
    if lifted.check_integrable(n).is_err() {
        return Ok(f64::INFINITY);
    }
    let grid = family.grid();
    let ratios: Vec<f64> = family
        .balls
        .par_iter()
        .map(|b| {
            let avg = ball_averages(&[w, &lifted], b, grid);
            avg[1].powf(1.0 / (1.0 + gamma)) / avg[0]
        })
        .collect();
    Ok(argmax(&ratios).1)
}

pub fn reverse_holder_estimate(w: &Weight, family: &BallFamily, gammas: &[f64], cap: f64) -> Result<ReverseHolderEstimate> {
    if gammas.is_empty() || gammas.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::InvalidArgument("gammas must be positive".into()));
    }
    if gammas.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::InvalidArgument("gammas must be ascending".into()));
    }
    w.check_integrable(family.grid().dim())?;
    let mut per_gamma = Vec::with_capacity(gammas.len());
    for &g in gammas {
        per_gamma.push((g, reverse_holder_constant(w, family, g)?));
    }
    let chosen = per_gamma.iter().rev().find(|(_, c)| *c <= cap).copied();
    let (gamma, constant, flagged) = match chosen {
        Some((g, c)) => (g, c, false),
        None => (per_gamma[0].0, per_gamma[0].1, true),
    };
    Ok(ReverseHolderEstimate {
        gamma,
        constant,
        beta: gamma / (2.0 + gamma),
        tau_factor: gamma / (1.0 + gamma),
        rho: gamma / (1.0 + gamma),
        flagged,
        per_gamma,
    })
}

/// Closed form of `∫_{B_r(0)} |w − ⟨w⟩| / ∫_{B_r(0)} w` for `w = |x|^α`,
/// independent of `r`. The integrand changes sign at `s* = (n/(n+α))^{1/α}`.
pub fn centered_oscillation_ratio(n: usize, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    let c = nf / (nf + alpha);
    let s_star = c.powf(1.0 / alpha);
    let f = |a: f64, b: f64| (b.powf(nf + alpha) - a.powf(nf + alpha)) / (nf + alpha);
    let g = |a: f64, b: f64| (b.powf(nf) - a.powf(nf)) / nf;
    let inner = (f(0.0, s_star) - c * g(0.0, s_star)).abs();
    let outer = (f(s_star, 1.0) - c * g(s_star, 1.0)).abs();
    (inner + outer) * (nf + alpha)
}

/// `∫_B |w − ⟨w⟩_B| dx / ∫_B w dx`.
pub fn oscillation_ratio(w: &Weight, ball: &Ball, grid: &UniformGrid) -> Result<f64> {
    let n = ball.dim();
    w.check_integrable(n)?;
    if let Weight::Power(p) = w {
        if ball.is_origin_centered() {
            return Ok(centered_oscillation_ratio(n, p.alpha));
        }
    }
    let clip = !w.is_analytic();
    let region = Region::Ball(ball.clone());
    let mut cells: Vec<(f64, f64)> = Vec::new();
    visit_region_cells(grid, &region, clip, |cell| {
        let vol = cell.h.iter().product::<f64>();
        cells.push((cell.fraction * vol, w.cell_mass(cell.lo, cell.h) / vol));
    });
    let vol = pairwise_sum(&cells.iter().map(|c| c.0).collect::<Vec<_>>());
    let mass = pairwise_sum(&cells.iter().map(|c| c.0 * c.1).collect::<Vec<_>>());
    if !(mass > 0.0) {
        return Err(Error::DegenerateMass);
    }
    let mean = mass / vol;
    let dev = pairwise_sum(&cells.iter().map(|c| c.0 * (c.1 - mean).abs()).collect::<Vec<_>>());
    Ok(dev / mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_ball_family, Cuboid};
    use std::f64::consts::PI;

    fn grid2(m: usize) -> UniformGrid {
        UniformGrid::new(Cuboid::cube(2, -1.0, 1.0).unwrap(), m).unwrap()
    }

    fn family(m: usize, stride: usize, levels: usize) -> BallFamily {
        let g = grid2(m);
        let h = g.max_spacing();
        make_ball_family(&g, &g.bbox, stride, 4.0 * h, 2.0, levels).unwrap()
    }

    #[test]
    fn closed_forms() {
        assert!((centered_ball_weight_mass(0.0, 2, 1.0).unwrap() - PI).abs() < 1e-14);
        assert!((centered_ball_weight_mass(0.5, 2, 1.0).unwrap() - 2.0 * PI / 2.5).abs() < 1e-14);
        assert!((centered_ball_weight_mass(-1.0, 3, 2.0).unwrap() - 8.0 * PI).abs() < 1e-12);
        assert!(centered_ball_weight_mass(-2.0, 2, 1.0).is_err());
    }

    #[test]
    fn power_bound_values() {
        assert!((power_ap_bound(2, 0.0).unwrap() - 64.0).abs() < 1e-12);
        assert!((power_ap_bound(2, 0.5).unwrap() - 256.0 / 3.75).abs() < 1e-12);
        assert!((power_ap_bound(2, 0.5).unwrap() - 68.267).abs() < 1e-3);
        assert!((power_ap_bound(3, 1.0).unwrap() - 512.0).abs() < 1e-12);
        assert!(power_ap_bound(2, 2.0).is_err());
        assert!(power_ap_bound(2, -2.5).is_err());
    }

    #[test]
    fn lebesgue_characteristic_is_one() {
        let fam = family(64, 8, 3);
        let est = ap_characteristic(&Weight::lebesgue(), &fam, 2.0).unwrap();
        assert_eq!(est.value, 1.0);
        let est = ap_characteristic(&Weight::lebesgue(), &fam, 3.0).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn power_characteristic_envelope() {
        let fam = family(128, 16, 4);
        let est = ap_characteristic(&Weight::power(0.5), &fam, 2.0).unwrap();
        assert!(est.value >= 4.0 / 3.75 - 1e-12, "{}", est.value);
        assert!(est.value <= 68.27);
        assert!(fam.balls.contains(&est.witness));
    }

    #[test]
    fn outside_ap_range() {
        let fam = family(32, 8, 2);
        assert!(matches!(ap_characteristic(&Weight::power(2.5), &fam, 2.0), Err(Error::OutsideApRange(_))));
        assert!(matches!(ap_characteristic(&Weight::power(-2.0), &fam, 2.0), Err(Error::OutsideApRange(_))));
        assert!(ap_characteristic(&Weight::power(2.5), &fam, 3.0).is_ok());
        assert!(ap_characteristic(&Weight::power(0.5), &fam, 1.0).is_err());
    }

    #[test]
    fn characteristic_is_scale_invariant() {
        let fam = family(64, 8, 3);
        let a = ap_characteristic(&Weight::power(-0.7), &fam, 2.0).unwrap().value;
        let b = ap_characteristic(&Weight::power(-0.7).scaled(7.3), &fam, 2.0).unwrap().value;
        assert!((a - b).abs() <= 1e-12 * a, "{a} {b}");
    }

    #[test]
    fn adding_balls_never_decreases_characteristic() {
        let fam = family(64, 16, 2);
        let bigger = fam.clone().with_extra([Ball::new(vec![0.1, 0.05], 0.3).unwrap()]);
        let a = ap_characteristic(&Weight::power(0.8), &fam, 2.0).unwrap().value;
        let b = ap_characteristic(&Weight::power(0.8), &bigger, 2.0).unwrap().value;
        assert!(b >= a);
    }

    #[test]
    fn doubling_cases() {
        let g = grid2(128);
        let b = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
        let e = Ball::new(vec![0.0, 0.0], 0.5).unwrap();
        // equal sets
        let r = doubling_check(&Weight::power(0.5), &b, &b, 2.0, 1.07, &g).unwrap();
        assert!(r.pass);
        // Lebesgue: mu(B)/mu(E) = 4 <= 16
        let r = doubling_check(&Weight::lebesgue(), &b, &e, 2.0, 1.0, &g).unwrap();
        assert!((r.lhs / (r.rhs / 16.0) - 4.0).abs() < 1e-12);
        assert!(r.pass);
        assert!(!r.pass_as_printed);
        // |x|^0.5: mu(B)/mu(E) = 2^2.5
        let r = doubling_check(&Weight::power(0.5), &b, &e, 2.0, 1.0667, &g).unwrap();
        let mu_e = r.rhs / (1.0667 * 16.0);
        assert!((r.lhs / mu_e - 2f64.powf(2.5)).abs() < 1e-12);
        assert!(r.pass);
        let off = Ball::new(vec![0.8, 0.0], 0.5).unwrap();
        assert!(doubling_check(&Weight::lebesgue(), &b, &off, 2.0, 1.0, &g).is_err());
    }

    #[test]
    fn reverse_holder_lebesgue_and_power() {
        let fam = family(64, 8, 3);
        let est = reverse_holder_estimate(&Weight::lebesgue(), &fam, &[0.5, 1.0, 2.0], DEFAULT_RH_CAP).unwrap();
        assert_eq!(est.gamma, 2.0);
        assert!(est.per_gamma.iter().all(|(_, c)| (*c - 1.0).abs() < 1e-12));
        assert!((est.beta - 0.5).abs() < 1e-15);

        // centered ball ratio for alpha = 0.5, gamma = 1
        let centered = BallFamily {
            balls: vec![Ball::new(vec![0.0, 0.0], 1.0).unwrap()],
            provenance: fam.provenance.clone(),
        };
        let c = reverse_holder_constant(&Weight::power(0.5), &centered, 1.0).unwrap();
        assert!((c - (2f64 / 3.0).sqrt() / 0.8).abs() < 1e-12, "{c}");
        assert!((c - 1.0206).abs() < 1e-4);

        let near_edge = reverse_holder_estimate(&Weight::power(1.9), &fam, &[1.0], DEFAULT_RH_CAP).unwrap();
        assert!(near_edge.constant.is_finite() && near_edge.constant > 1.0);
    }

    #[test]
    fn reverse_holder_ratio_is_scale_invariant() {
        let fam = family(64, 8, 3);
        let a = reverse_holder_constant(&Weight::power(-0.6), &fam, 0.5).unwrap();
        let b = reverse_holder_constant(&Weight::power(-0.6).scaled(0.37), &fam, 0.5).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn oscillation_of_constant_is_zero() {
        let g = grid2(64);
        let b = Ball::new(vec![0.3, 0.1], 0.4).unwrap();
        assert_eq!(oscillation_ratio(&Weight::lebesgue().scaled(3.0), &b, &g).unwrap(), 0.0);
    }

    #[test]
    fn off_center_oscillation_below_bound() {
        let g = grid2(128);
        let b = Ball::new(vec![0.5, -0.25], 0.2).unwrap();
        let r = oscillation_ratio(&Weight::power(0.2), &b, &g).unwrap();
        assert!(r > 0.0 && r <= oscillation_bound(2, 0.2));
    }
}
