use super::grid_box;
use crate::config::{require, ConfigError};
use crate::plot::{Chart, Series};
use crate::runner::{num, Experiment, Output, Table};
use clap::Args;
use mucklab::fem::{gradsq_on_grid, random_smooth_field, solve, triangulate_box, weighted_field, EllipticProblem, SolverOptions};
use mucklab::geometry::{GridScalarField, UniformGrid};
use mucklab::maximal::{
    goodlambda_normalized, ladder_sandwich, strong_pp_ratio, weak11_ratio, weighted_maximal, GoodLambdaParams, RadiusLadder,
};
use mucklab::numeric::norm;
use mucklab::weights::Weight;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MaximalInput {
    /// Unit value at the node nearest the box center.
    Spike,
    /// Indicator of the centered ball of half the box radius.
    Indicator,
    Checkerboard,
    /// Seeded uniform values in `[0, 1)`.
    Random,
}

fn input_field(kind: MaximalInput, grid: &UniformGrid, seed: u64) -> GridScalarField {
    let c = grid.bbox.center();
    let half = 0.5 * (grid.bbox.hi[0] - grid.bbox.lo[0]);
    match kind {
        MaximalInput::Spike => {
            let mut f = GridScalarField::constant(grid.clone(), 0.0);
            let i = grid.locate(&c);
            f.values[i] = 1.0;
            f
        }
        MaximalInput::Indicator => GridScalarField::from_fn(grid.clone(), |x| if mucklab::numeric::dist(x, &c) < 0.5 * half { 1.0 } else { 0.0 }),
        MaximalInput::Checkerboard => {
            let m = grid.m;
            let mut f = GridScalarField::constant(grid.clone(), 0.0);
            for i in 0..grid.node_count() {
                let k: usize = grid.multi_index(i).iter().map(|j| j * 8 / (m + 1)).sum();
                f.values[i] = (k % 2) as f64;
            }
            f
        }
        MaximalInput::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..grid.node_count()).map(|_| rng.gen::<f64>()).collect();
            GridScalarField::new(grid.clone(), values).expect("sized to the grid")
        }
    }
}

/// Weighted maximal operator: constants, weak (1,1) and strong (p,p) ratios across grids.
#[derive(Debug, Clone, Args, Serialize)]
pub struct MaximalFlags {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub input: Option<MaximalInput>,
    #[arg(long, value_delimiter = ',')]
    pub grids: Option<Vec<usize>>,
    #[arg(long)]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaximalConfig {
    pub dim: usize,
    pub alpha: f64,
    pub input: MaximalInput,
    pub grids: Vec<usize>,
    /// Ratio of the geometric radius ladder.
    pub ladder_q: f64,
    pub p: f64,
    pub half_width: f64,
    /// Allowed relative change of the weak (1,1) ratio between successive grids.
    pub stability: f64,
    pub seed: u64,
}

impl Default for MaximalConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            alpha: 0.0,
            input: MaximalInput::Spike,
            grids: vec![64, 128],
            ladder_q: 1.25,
            p: 2.0,
            half_width: 1.0,
            stability: 0.25,
            seed: 0,
        }
    }
}

impl Experiment for MaximalConfig {
    const GRID_KEY: Option<&'static str> = Some("grids");
    const GRID_IS_LIST: bool = true;
    const TOL_KEY: Option<&'static str> = None;

    fn validate(&self) -> Result<(), ConfigError> {
        require(self.dim == 2 || self.dim == 3, "dim", "must be 2 or 3")?;
        require(self.alpha > -(self.dim as f64), "alpha", "must exceed -dim")?;
        require(!self.grids.is_empty() && self.grids.iter().all(|m| *m >= 2 && (*m + 1).pow(self.dim as u32) <= 1 << 22), "grids", "need resolutions in [2, 2^22 nodes]")?;
        require(self.ladder_q > 1.0, "ladder_q", "must exceed 1")?;
        require(self.p > 1.0, "p", "must exceed 1")?;
        require(self.half_width > 0.0, "half_width", "must be positive")?;
        require(self.stability > 0.0, "stability", "must be positive")
    }

    fn run(&self) -> anyhow::Result<Output> {
        let mu = Weight::power(self.alpha);
        let ladder = RadiusLadder::Geometric { q: self.ladder_q };
        let mut table = Table::new("maximal", &["m", "constant_exact", "weak11", "strong_pp"]);
        let mut rows = Vec::new();
        let mut weak = Vec::new();
        for &m in &self.grids {
            let grid = grid_box(self.dim, self.half_width, m)?;
            let one = GridScalarField::constant(grid.clone(), 1.0);
            let m_one = weighted_maximal(&one, &mu, &ladder, None)?;
            let constant_exact = m_one.values.iter().all(|v| *v == 1.0);
            let f = input_field(self.input, &grid, self.seed);
            let w = weak11_ratio(&f, &mu, &ladder, &[])?;
            let s = strong_pp_ratio(&f, &mu, &ladder, self.p)?;
            table.push(vec![json!(m), json!(constant_exact), num(w), num(s)]);
            rows.push(json!({"m": m, "constant_exact": constant_exact, "weak11": w, "strong_pp": s}));
            weak.push((m as f64, w));
        }
        let changes: Vec<f64> = weak.windows(2).map(|w| (w[1].1 / w[0].1 - 1.0).abs()).collect();
        let max_change = changes.iter().cloned().fold(0.0, f64::max);
        let chart = Chart {
            title: format!("maximal operator ratios, {:?} input", self.input).to_lowercase(),
            x_label: "grid resolution m".into(),
            y_label: "ratio".into(),
            log_x: true,
            series: vec![Series::line("weak (1,1)", weak.clone())],
            ..Default::default()
        };
        let result = json!({
            "per_grid": rows,
            "constant_exact": rows.iter().all(|r| r["constant_exact"] == json!(true)),
            "weak11_max_change": max_change,
            "weak11_stable": weak.iter().all(|w| w.1.is_finite()) && max_change <= self.stability,
        });
        Ok(Output { result, tables: vec![table], plots: vec![("maximal".into(), chart)] })
    }
}

/// Layer-cake sandwich on seeded random fields.
#[derive(Debug, Clone, Args, Serialize)]
pub struct LadderFlags {
    #[arg(long)]
    pub fields: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub varpi: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub ps: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderConfig {
    pub dim: usize,
    pub grid: usize,
    pub half_width: f64,
    pub fields: usize,
    pub theta: f64,
    pub varpi: f64,
    pub ps: Vec<f64>,
    pub alpha: f64,
    pub j_max: Option<usize>,
    pub seed: u64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self { dim: 2, grid: 64, half_width: 1.0, fields: 100, theta: 1.0, varpi: 2.0, ps: vec![1.5, 2.0, 3.0], alpha: 0.5, j_max: None, seed: 0 }
    }
}

/// Field number `k` of the sandwich corpus: `|G|` for a seeded smooth `G`,
/// scaled by a random power of two so the ladder sees many levels.
pub fn corpus_field(grid: &UniformGrid, seed: u64, k: usize) -> GridScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(k as u64));
    let amp = 2f64.powf(rng.gen_range(-2.0..10.0));
    let modes = rng.gen_range(1..=5);
    let g = random_smooth_field(grid.dim(), rng.gen(), modes);
    GridScalarField::from_fn(grid.clone(), |x| amp * norm(&g(x)))
}

impl Experiment for LadderConfig {
    const GRID_KEY: Option<&'static str> = Some("grid");
    const TOL_KEY: Option<&'static str> = None;

    fn validate(&self) -> Result<(), ConfigError> {
        require(self.dim == 2 || self.dim == 3, "dim", "must be 2 or 3")?;
        require(self.grid >= 2 && (self.grid + 1).pow(self.dim as u32) <= 1 << 22, "grid", "needs between 2 and 2^22 nodes")?;
        require(self.fields > 0, "fields", "must be positive")?;
        require(self.theta > 0.0, "theta", "must be positive")?;
        require(self.varpi > 1.0, "varpi", "must exceed 1")?;
        require(!self.ps.is_empty() && self.ps.iter().all(|p| *p >= 1.0), "ps", "need exponents of at least 1")?;
        require(self.alpha > -(self.dim as f64), "alpha", "must exceed -dim")?;
        require(self.half_width > 0.0, "half_width", "must be positive")
    }

    fn run(&self) -> anyhow::Result<Output> {
        let grid = grid_box(self.dim, self.half_width, self.grid)?;
        let mu = Weight::power(self.alpha);
        let mut table = Table::new("sandwich", &["field", "p", "s", "norm_p", "mu_u", "c_lower", "c_upper", "pass", "naive_lower_pass"]);
        let mut per_p = Vec::new();
        let mut series = Vec::new();
        let fields: Vec<GridScalarField> = (0..self.fields).map(|k| corpus_field(&grid, self.seed, k)).collect();
        for &p in &self.ps {
            let (mut pass, mut naive) = (0usize, 0usize);
            let (mut lower, mut upper) = (f64::INFINITY, f64::INFINITY);
            let mut pts = Vec::new();
            for (k, f) in fields.iter().enumerate() {
                let r = ladder_sandwich(f, self.theta, self.varpi, p, &mu, &grid.bbox, self.j_max)?;
                pass += r.pass as usize;
                naive += r.naive_lower_pass as usize;
                lower = lower.min(r.lower_margin);
                upper = upper.min(r.upper_margin);
                pts.push((r.norm_p, r.ladder.s));
                table.push(vec![
                    json!(k),
                    num(p),
                    num(r.ladder.s),
                    num(r.norm_p),
                    num(r.mu_u),
                    num(r.c_lower),
                    num(r.c_upper),
                    json!(r.pass),
                    json!(r.naive_lower_pass),
                ]);
            }
            series.push(Series::scatter(format!("p = {p}"), pts));
            per_p.push(json!({
                "p": p,
                "pass_rate": pass as f64 / self.fields as f64,
                "naive_lower_pass_rate": naive as f64 / self.fields as f64,
                "min_lower_margin": lower,
                "min_upper_margin": upper,
            }));
        }
        let chart = Chart {
            title: "distribution ladder S against the L^p norm".into(),
            x_label: "norm^p".into(),
            y_label: "S".into(),
            log_x: true,
            log_y: true,
            series,
        };
        let all_pass = per_p.iter().all(|r| r["pass_rate"] == json!(1.0));
        Ok(Output { result: json!({"per_p": per_p, "all_pass": all_pass}), tables: vec![table], plots: vec![("ladder".into(), chart)] })
    }
}

/// Good-λ ladder on a solved weighted problem.
#[derive(Debug, Clone, Args, Serialize)]
pub struct GoodLambdaFlags {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub mesh: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub varpis: Option<Vec<f64>>,
    #[arg(long)]
    pub k_max: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GoodLambdaConfig {
    /// `μ = |x|^α` on `[-1, 1]²`.
    pub alpha: f64,
    /// Mesh resolution of the solve.
    pub mesh: usize,
    /// Resolution of the grid carrying `|∇u|²` and `|F/μ|²`.
    pub grid: usize,
    pub varpis: Vec<f64>,
    pub delta: f64,
    pub m0: f64,
    pub epsilon: f64,
    pub k_max: usize,
    pub r0: f64,
    pub ladder_q: f64,
    /// Modes of the smooth field `G` in `F = μG`.
    pub modes: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for GoodLambdaConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            mesh: 64,
            grid: 128,
            varpis: vec![2.0, 4.0],
            delta: 0.1,
            m0: 1.0,
            epsilon: 0.05,
            k_max: 3,
            r0: 0.25,
            ladder_q: 1.25,
            modes: 3,
            tol: mucklab::fem::DEFAULT_CG_TOL,
            seed: 0,
        }
    }
}

impl Experiment for GoodLambdaConfig {
    const GRID_KEY: Option<&'static str> = Some("grid");
    const TOL_KEY: Option<&'static str> = Some("tol");

    fn validate(&self) -> Result<(), ConfigError> {
        require(self.alpha > -2.0 && self.alpha < 2.0, "alpha", "must lie in (-2, 2)")?;
        require(self.mesh >= 2 && self.mesh <= 1024, "mesh", "must lie in [2, 1024]")?;
        require(self.grid >= 8 && self.grid <= 2048, "grid", "must lie in [8, 2048]")?;
        require(!self.varpis.is_empty() && self.varpis.iter().all(|v| *v > 1.0), "varpis", "need values above 1")?;
        require(self.delta > 0.0 && self.delta < 0.25, "delta", "must lie in (0, 1/4)")?;
        require(self.m0 > 0.0, "m0", "must be positive")?;
        require(self.epsilon > 0.0, "epsilon", "must be positive")?;
        require(self.k_max >= 1, "k_max", "must be at least 1")?;
        require(self.r0 > 0.0, "r0", "must be positive")?;
        require(self.ladder_q > 1.0, "ladder_q", "must exceed 1")?;
        require(self.modes >= 1, "modes", "must be at least 1")?;
        require(self.tol > 0.0 && self.tol < 1.0, "tol", "must lie in (0, 1)")
    }

    fn run(&self) -> anyhow::Result<Output> {
        let domain = mucklab::geometry::Cuboid::cube(2, -1.0, 1.0)?;
        let mu = Weight::power(self.alpha);
        let g = random_smooth_field(2, self.seed, self.modes);
        let problem = EllipticProblem::weighted_identity(triangulate_box(&domain, self.mesh)?, mu.clone(), weighted_field(mu.clone(), g.clone()));
        let sol = solve(&problem, &SolverOptions { tol: self.tol, max_iter: None })?;
        let grid = UniformGrid::new(domain.clone(), self.grid)?;
        let gradsq = gradsq_on_grid(&problem.mesh, &sol, &grid)?;
        let datasq = GridScalarField::from_fn(grid.clone(), |x| g(x).iter().map(|v| v * v).sum());
        let ladder = RadiusLadder::Geometric { q: self.ladder_q };
        let mut reports = Vec::new();
        let mut table = Table::new("goodlambda", &["varpi", "k", "lhs", "rhs", "margin", "rhs_calibrated", "margin_calibrated"]);
        let mut series = Vec::new();
        for &varpi in &self.varpis {
            let params = GoodLambdaParams { varpi, delta: self.delta, m0: self.m0, epsilon: self.epsilon, k_max: self.k_max, r0: self.r0 };
            let (n_scale, report) = goodlambda_normalized(&gradsq, &datasq, &mu, &domain, &params, &ladder)?;
            for row in &report.per_k {
                table.push(vec![num(varpi), json!(row.k), num(row.lhs), num(row.rhs), num(row.margin), num(row.rhs_calibrated), num(row.margin_calibrated)]);
            }
            series.push(Series::line(format!("varpi = {varpi}"), report.per_k.iter().map(|r| (r.k as f64, r.lhs)).collect()));
            let geometric = report.lhs_non_increasing && report.fitted_rate <= report.eps1_calibrated;
            reports.push(json!({"normalization": n_scale, "report": report, "geometric_decay": geometric}));
        }
        let chart = Chart {
            title: format!("good-λ level masses, μ = |x|^{}", self.alpha),
            x_label: "k".into(),
            y_label: "μ({M > ϖ^2k})".into(),
            log_y: true,
            series,
            ..Default::default()
        };
        let result = json!({
            "solve": {"iterations": sol.iterations, "residual": sol.residual},
            "per_varpi": reports,
            "all_geometric": reports.iter().all(|r| r["geometric_decay"] == json!(true)),
        });
        Ok(Output { result, tables: vec![table], plots: vec![("goodlambda".into(), chart)] })
    }
}
