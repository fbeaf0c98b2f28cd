use super::{build_family, check_family, grid_box};
use crate::config::{require, ConfigError};
use crate::plot::{Chart, Series};
use crate::runner::{num, Experiment, Output, Table};
use clap::Args;
use mucklab::oscillation::{coefficient_class_check, weighted_bmo_seminorm, MatrixField};
use mucklab::weights::{
    ap_ball_values, ap_characteristic, oscillation_bound, oscillation_ratio, power_ap_bound, reverse_holder_estimate, Weight,
};
use mucklab::geometry::GridScalarField;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Sampled A_p characteristic and mean oscillation of a power weight.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ApFlags {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApConfig {
    pub dim: usize,
    pub alpha: f64,
    pub p: f64,
    /// Grid box `[-half_width, half_width]^dim`.
    pub half_width: f64,
    pub grid: usize,
    pub stride: usize,
    /// Smallest radius in grid spacings.
    pub r_min_cells: f64,
    pub q: f64,
    pub levels: usize,
    pub seed: u64,
}

impl Default for ApConfig {
    fn default() -> Self {
        Self { dim: 2, alpha: 0.5, p: 2.0, half_width: 1.0, grid: 512, stride: 32, r_min_cells: 4.0, q: 2.0, levels: 6, seed: 0 }
    }
}

/// `[|x|^α]_{A_p}` on any origin-centered ball.
pub fn centered_ap(n: usize, alpha: f64, p: f64) -> f64 {
    let nf = n as f64;
    nf / (nf + alpha) * (nf / (nf - alpha / (p - 1.0))).powf(p - 1.0)
}

impl Experiment for ApConfig {
    const GRID_KEY: Option<&'static str> = Some("grid");
    const TOL_KEY: Option<&'static str> = None;

    fn validate(&self) -> Result<(), ConfigError> {
        require(self.p > 1.0, "p", "must exceed 1")?;
        let n = self.dim as f64;
        require(self.alpha > -n && self.alpha < n * (self.p - 1.0), "alpha", "must lie in (-dim, dim(p-1))")?;
        check_family(self.dim, self.half_width, self.grid, self.stride, self.r_min_cells, self.q, self.levels)
    }

    fn run(&self) -> anyhow::Result<Output> {
        let grid = grid_box(self.dim, self.half_width, self.grid)?;
        let family = build_family(&grid, self.stride, self.r_min_cells, self.q, self.levels, self.seed)?;
        let w = Weight::power(self.alpha);
        let estimate = ap_characteristic(&w, &family, self.p)?;
        let values = ap_ball_values(&w, &family, self.p)?;
        let osc: Vec<f64> = family.balls.par_iter().map(|b| oscillation_ratio(&w, b, &grid)).collect::<mucklab::Result<_>>()?;
        let centered = centered_ap(self.dim, self.alpha, self.p);
        let upper = if self.p == 2.0 { power_ap_bound(self.dim, self.alpha).ok() } else { None };
        let osc_bound = oscillation_bound(self.dim, self.alpha);
        let osc_max = osc.iter().cloned().fold(0.0, f64::max);
        let centered_osc: Vec<_> = family
            .balls
            .iter()
            .zip(&osc)
            .filter(|(b, _)| b.is_origin_centered())
            .map(|(b, v)| json!({"radius": b.radius, "ratio": v}))
            .collect();

        let mut table = Table::new("balls", &["center", "radius", "ap_value", "oscillation_ratio"]);
        for ((b, v), o) in family.balls.iter().zip(&values).zip(&osc) {
            let c: Vec<String> = b.center.iter().map(|x| num(*x).to_string()).collect();
            table.push(vec![json!(c.join(" ")), num(b.radius), num(*v), num(*o)]);
        }
        let chart = Chart {
            title: format!("sampled A_{} ball values, |x|^{}", self.p, self.alpha),
            x_label: "radius".into(),
            y_label: "A_p quotient".into(),
            log_x: true,
            series: vec![
                Series::scatter("balls", family.balls.iter().zip(&values).map(|(b, v)| (b.radius, *v)).collect()),
                Series::line("centered", vec![(family.provenance.r_min, centered), (family.balls.iter().map(|b| b.radius).fold(0.0, f64::max), centered)]),
            ],
            ..Default::default()
        };
        let result = json!({
            "estimate": estimate,
            "family_size": family.len(),
            "centered_value": centered,
            "envelope_upper": upper,
            "within_envelope": upper.map(|u| estimate.value >= centered - 1e-3 && estimate.value <= u),
            "oscillation": {
                "bound": osc_bound,
                "max_ratio": osc_max,
                "all_within": osc.iter().all(|v| *v <= osc_bound),
                "centered": centered_osc,
            },
        });
        Ok(Output { result, tables: vec![table], plots: vec![("ap".into(), chart)] })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RhFlags {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    #[arg(long)]
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RhConfig {
    pub dim: usize,
    pub alpha: f64,
    pub gammas: Vec<f64>,
    pub cap: f64,
    pub half_width: f64,
    pub grid: usize,
    pub stride: usize,
    pub r_min_cells: f64,
    pub q: f64,
    pub levels: usize,
    pub seed: u64,
}

impl Default for RhConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            alpha: 0.5,
            gammas: vec![0.05, 0.1, 0.2, 0.5, 1.0],
            cap: mucklab::weights::DEFAULT_RH_CAP,
            half_width: 1.0,
            grid: 256,
            stride: 16,
            r_min_cells: 4.0,
            q: 2.0,
            levels: 5,
            seed: 0,
        }
    }
}

impl Experiment for RhConfig {
    const GRID_KEY: Option<&'static str> = Some("grid");
    const TOL_KEY: Option<&'static str> = None;

    fn validate(&self) -> Result<(), ConfigError> {
        require(!self.gammas.is_empty() && self.gammas.iter().all(|g| *g > 0.0), "gammas", "need at least one positive exponent")?;
        require(self.cap > 1.0, "cap", "must exceed 1")?;
        require(self.alpha > -(self.dim as f64), "alpha", "must exceed -dim")?;
        check_family(self.dim, self.half_width, self.grid, self.stride, self.r_min_cells, self.q, self.levels)
    }

    fn run(&self) -> anyhow::Result<Output> {
        let grid = grid_box(self.dim, self.half_width, self.grid)?;
        let family = build_family(&grid, self.stride, self.r_min_cells, self.q, self.levels, self.seed)?;
        let est = reverse_holder_estimate(&Weight::power(self.alpha), &family, &self.gammas, self.cap)?;
        let mut table = Table::new("reverse_holder", &["gamma", "constant"]);
        for (g, c) in &est.per_gamma {
            table.push(vec![num(*g), num(*c)]);
        }
        let chart = Chart {
            title: format!("reverse Hölder constants, |x|^{}", self.alpha),
            x_label: "gamma".into(),
            y_label: "sampled constant".into(),
            series: vec![Series::line("constant", est.per_gamma.clone()), Series::line("cap", self.gammas.iter().map(|g| (*g, self.cap)).collect())],
            ..Default::default()
        };
        Ok(Output { result: json!({"estimate": est, "family_size": family.len()}), tables: vec![table], plots: vec![("rh".into(), chart)] })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BmoFlags {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alphas: Option<Vec<f64>>,
    #[arg(long)]
    pub r0: Option<f64>,
}

/// Weighted BMO of the coefficient `A = μI` for `μ = |x|^α`, swept over `α`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BmoConfig {
    pub dim: usize,
    pub alphas: Vec<f64>,
    pub r0: f64,
    /// Largest admissible spread of `[A]²/α` across the sweep.
    pub spread_limit: f64,
    pub half_width: f64,
    pub grid: usize,
    pub stride: usize,
    pub r_min_cells: f64,
    pub q: f64,
    pub levels: usize,
    pub seed: u64,
}

impl Default for BmoConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            alphas: vec![0.05, 0.1, 0.2, 0.4],
            r0: 0.5,
            spread_limit: 4.0,
            half_width: 1.0,
            grid: 256,
            stride: 16,
            r_min_cells: 4.0,
            q: 2.0,
            levels: 5,
            seed: 0,
        }
    }
}

impl Experiment for BmoConfig {
    const GRID_KEY: Option<&'static str> = Some("grid");
    const TOL_KEY: Option<&'static str> = None;

    fn validate(&self) -> Result<(), ConfigError> {
        // the tabulated coefficient is evaluated at the origin node, so α must be positive
        require(
            !self.alphas.is_empty() && self.alphas.iter().all(|a| *a > 0.0 && *a < self.dim as f64),
            "alphas",
            "need values in (0, dim)",
        )?;
        require(self.r0 > 0.0, "r0", "must be positive")?;
        require(self.spread_limit >= 1.0, "spread_limit", "must be at least 1")?;
        check_family(self.dim, self.half_width, self.grid, self.stride, self.r_min_cells, self.q, self.levels)
    }

    fn run(&self) -> anyhow::Result<Output> {
        let grid = grid_box(self.dim, self.half_width, self.grid)?;
        let family = build_family(&grid, self.stride, self.r_min_cells, self.q, self.levels, self.seed)?;
        let mut rows = Vec::new();
        let mut table = Table::new("bmo", &["alpha", "value_sq", "value_sq_over_alpha"]);
        let mut points = Vec::new();
        for &alpha in &self.alphas {
            let mu = Weight::power(alpha);
            let f = GridScalarField::from_fn(grid.clone(), |x| mu.eval(x));
            let est = weighted_bmo_seminorm(&f, &mu, &grid.bbox, self.r0, &family)?;
            let slope = est.value_sq / alpha;
            table.push(vec![num(alpha), num(est.value_sq), num(slope)]);
            points.push((alpha, est.value_sq));
            rows.push(json!({"alpha": alpha, "estimate": est, "value_sq_over_alpha": slope}));
        }
        let slopes: Vec<f64> = points.iter().map(|(a, v)| v / a).collect();
        let (lo, hi) = slopes.iter().fold((f64::INFINITY, 0.0f64), |(l, h), s| (l.min(*s), h.max(*s)));
        let spread = hi / lo;
        let chart = Chart {
            title: "weighted BMO of |x|^α I".into(),
            x_label: "alpha".into(),
            y_label: "[A]^2".into(),
            log_x: true,
            log_y: true,
            series: vec![Series::line("sampled", points)],
        };
        let result = json!({
            "per_alpha": rows,
            "family_size": family.len(),
            "slope_spread": spread,
            "bounded_slope": spread <= self.spread_limit,
        });
        Ok(Output { result, tables: vec![table], plots: vec![("bmo".into(), chart)] })
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassFlags {
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub r0: Option<f64>,
}

/// Membership of `A = μ·A₀` in the `(δ, R₀)` coefficient class.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassConfig {
    pub dim: usize,
    pub alpha: f64,
    /// Row-major constant matrix; identity when empty.
    pub a0: Vec<f64>,
    pub lambda: f64,
    pub delta: f64,
    pub r0: f64,
    pub half_width: f64,
    pub grid: usize,
    pub stride: usize,
    pub r_min_cells: f64,
    pub q: f64,
    pub levels: usize,
    pub seed: u64,
}

impl Default for ClassConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            alpha: 0.2,
            a0: Vec::new(),
            lambda: 1.0,
            delta: 0.1,
            r0: 0.5,
            half_width: 1.0,
            grid: 128,
            stride: 8,
            r_min_cells: 4.0,
            q: 2.0,
            levels: 5,
            seed: 0,
        }
    }
}

impl Experiment for ClassConfig {
    const GRID_KEY: Option<&'static str> = Some("grid");
    const TOL_KEY: Option<&'static str> = None;

    fn validate(&self) -> Result<(), ConfigError> {
        require(self.alpha > 0.0 && self.alpha < self.dim as f64, "alpha", "must lie in (0, dim)")?;
        require(self.a0.is_empty() || self.a0.len() == self.dim * self.dim, "a0", "needs dim² entries")?;
        require(self.lambda > 0.0 && self.lambda <= 1.0, "lambda", "must lie in (0, 1]")?;
        require(self.delta > 0.0, "delta", "must be positive")?;
        require(self.r0 > 0.0, "r0", "must be positive")?;
        check_family(self.dim, self.half_width, self.grid, self.stride, self.r_min_cells, self.q, self.levels)
    }

    fn run(&self) -> anyhow::Result<Output> {
        let n = self.dim;
        let grid = grid_box(n, self.half_width, self.grid)?;
        let family = build_family(&grid, self.stride, self.r_min_cells, self.q, self.levels, self.seed)?;
        let mu = Weight::power(self.alpha);
        let a0 = if self.a0.is_empty() { (0..n * n).map(|k| if k % (n + 1) == 0 { 1.0 } else { 0.0 }).collect() } else { self.a0.clone() };
        let a = MatrixField::weighted_constant(grid.clone(), &mu, &a0)?;
        let membership = coefficient_class_check(&a, &mu, self.lambda, self.delta, self.r0, &grid.bbox, &family)?;
        Ok(Output { result: json!({"membership": membership, "family_size": family.len()}), ..Default::default() })
    }
}
