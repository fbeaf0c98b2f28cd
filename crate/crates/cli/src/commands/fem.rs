use crate::config::{bad, require, ConfigError};
use crate::plot::{Chart, Series};
use crate::runner::{num, Experiment, Output, Table};
use anyhow::Context;
use clap::Args;
use mucklab::fem::{
    caccioppoli_check, element_masses, energy_ratio, h1_seminorm_error, poincare_check, random_smooth_field, regularity_constant,
    regularity_table, sine_product_gradient, solve, triangulate_box, triangulate_disk, triangulate_lshape, weighted_field, Centering,
    Coefficient, DiscreteSolution, EllipticProblem, SimplicialMesh, SolverOptions, VectorFn, DEFAULT_CG_TOL,
};
use mucklab::geometry::Cuboid;
use mucklab::weights::Weight;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Box,
    Lshape,
    Disk,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub kind: DomainKind,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub radius: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { kind: DomainKind::Box, lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0], radius: 1.0 }
    }
}

impl DomainConfig {
    fn dim(&self) -> usize {
        match self.kind {
            DomainKind::Box => self.lo.len(),
            _ => 2,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        match self.kind {
            DomainKind::Box => {
                require(self.lo.len() == self.hi.len(), "domain.hi", "must match the length of domain.lo")?;
                require(self.lo.len() == 2 || self.lo.len() == 3, "domain.lo", "box must be 2- or 3-dimensional")?;
                require(self.lo.iter().zip(&self.hi).all(|(a, b)| a < b), "domain.hi", "must exceed domain.lo in every coordinate")
            }
            DomainKind::Lshape => Ok(()),
            DomainKind::Disk => require(self.radius > 0.0, "domain.radius", "must be positive"),
        }
    }

    /// `m` cells per side for boxes and the L-shape, `m` rings for the disk.
    fn mesh(&self, m: usize) -> mucklab::Result<SimplicialMesh> {
        match self.kind {
            DomainKind::Box => triangulate_box(&Cuboid::new(self.lo.clone(), self.hi.clone())?, m),
            DomainKind::Lshape => triangulate_lshape(m),
            DomainKind::Disk => triangulate_disk(self.radius, m),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub m: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { m: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    Power,
    Lebesgue,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightConfig {
    pub kind: WeightKind,
    pub alpha: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self { kind: WeightKind::Power, alpha: 0.5 }
    }
}

impl WeightConfig {
    fn weight(&self) -> Weight {
        match self.kind {
            WeightKind::Power => Weight::power(self.alpha),
            WeightKind::Lebesgue => Weight::lebesgue(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixForm {
    #[serde(rename = "muI")]
    MuI,
    #[serde(rename = "entries")]
    Entries,
}

/// `A = μI`, or `A = μA₀` with the row-major constant `A₀ = entries`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatrixConfig {
    pub form: MatrixForm,
    pub entries: Vec<f64>,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self { form: MatrixForm::MuI, entries: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    /// `F = value`.
    Constant,
    /// Seeded smooth field.
    Random,
    /// `μ·G` for a seeded smooth `G`.
    WeightedRandom,
    /// `F = μ∇u*` with `u* = Π sin(πx_i)`; needs the unit box.
    Manufactured,
    /// Samples `x₁ … x_n, F₁ … F_n` per CSV row, evaluated at the nearest sample.
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub kind: DataKind,
    pub value: Vec<f64>,
    pub modes: usize,
    pub seed: u64,
    pub path: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { kind: DataKind::Random, value: Vec::new(), modes: 3, seed: 0, path: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub maxit: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: DEFAULT_CG_TOL, maxit: None }
    }
}

impl SolverConfig {
    fn options(&self) -> SolverOptions {
        SolverOptions { tol: self.tol, max_iter: self.maxit }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        require(self.tol > 0.0 && self.tol < 1.0, "solver.tol", "must lie in (0, 1)")?;
        require(self.maxit != Some(0), "solver.maxit", "must be positive")
    }
}

/// Nearest-sample lookup on a bucket grid.
struct SampledField {
    n: usize,
    points: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    cell: f64,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl SampledField {
    fn read(path: &PathBuf, n: usize) -> anyhow::Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
        let (mut points, mut values) = (Vec::new(), Vec::new());
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row: Vec<f64> = rec.iter().map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().with_context(|| format!("{} row {}", path.display(), line + 1))?;
            anyhow::ensure!(row.len() == 2 * n, "{} row {}: expected {} columns, got {}", path.display(), line + 1, 2 * n, row.len());
            points.push(row[..n].to_vec());
            values.push(row[n..].to_vec());
        }
        anyhow::ensure!(!points.is_empty(), "{} has no samples", path.display());
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
            p.iter().fold((l, h), |(l, h), v| (l.min(*v), h.max(*v)))
        });
        let cell = ((hi - lo).max(1e-12) / (points.len() as f64).powf(1.0 / n as f64)).max(1e-12);
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(p.iter().map(|v| (v / cell).floor() as i64).collect()).or_default().push(i);
        }
        Ok(Self { n, points, values, cell, buckets })
    }

    fn nearest(&self, x: &[f64]) -> &[f64] {
        let key: Vec<i64> = x.iter().map(|v| (v / self.cell).floor() as i64).collect();
        let mut best: Option<(f64, usize)> = None;
        for ring in 0i64.. {
            // a hit in ring k is final once ring k+1 has been scanned
            if let Some((d, _)) = best {
                if d.sqrt() < (ring - 1) as f64 * self.cell {
                    break;
                }
            }
            let side = 2 * ring + 1;
            for idx in 0..side.pow(self.n as u32) {
                let mut off = Vec::with_capacity(self.n);
                let mut r = idx;
                for _ in 0..self.n {
                    off.push(r % side - ring);
                    r /= side;
                }
                if off.iter().map(|o| o.abs()).max() != Some(ring) {
                    continue;
                }
                let k: Vec<i64> = key.iter().zip(&off).map(|(a, b)| a + b).collect();
                for &i in self.buckets.get(&k).map(|v| v.as_slice()).unwrap_or(&[]) {
                    let d: f64 = self.points[i].iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    if best.map_or(true, |(bd, bi)| d < bd || (d == bd && i < bi)) {
                        best = Some((d, i));
                    }
                }
            }
            if ring >= 8 && best.is_none() {
                // far from every sample: a linear scan is cheaper than more rings
                best = self.points.iter().enumerate().map(|(i, p)| (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i)).min_by(|a, b| a.0.total_cmp(&b.0));
                break;
            }
        }
        &self.values[best.expect("at least one sample").1]
    }
}

impl DataConfig {
    fn validate(&self, n: usize) -> Result<(), ConfigError> {
        match self.kind {
            DataKind::Constant => require(self.value.len() == n, "F.value", "needs one entry per dimension"),
            DataKind::Random | DataKind::WeightedRandom => require(self.modes >= 1, "F.modes", "must be at least 1"),
            DataKind::Manufactured => Ok(()),
            DataKind::Csv => require(self.path.is_some(), "F.path", "is required for CSV data"),
        }
    }

    fn field(&self, n: usize, mu: &Weight) -> anyhow::Result<VectorFn> {
        Ok(match self.kind {
            DataKind::Constant => {
                let v = self.value.clone();
                Arc::new(move |_: &[f64]| v.clone())
            }
            DataKind::Random => random_smooth_field(n, self.seed, self.modes),
            DataKind::WeightedRandom => weighted_field(mu.clone(), random_smooth_field(n, self.seed, self.modes)),
            DataKind::Manufactured => weighted_field(mu.clone(), sine_product_gradient(n)),
            DataKind::Csv => {
                let s = Arc::new(SampledField::read(self.path.as_ref().expect("validated"), n)?);
                Arc::new(move |x: &[f64]| s.nearest(x).to_vec())
            }
        })
    }
}

/// Single weighted Dirichlet solve.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveFlags {
    #[arg(long = "alpha", allow_hyphen_values = true)]
    #[serde(rename = "weight.alpha")]
    pub alpha: Option<f64>,
    #[arg(long = "lambda")]
    #[serde(rename = "Lambda")]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub domain: DomainConfig,
    pub mesh: MeshConfig,
    pub weight: WeightConfig,
    pub matrix: MatrixConfig,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "F")]
    pub data: DataConfig,
    pub p: f64,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            domain: DomainConfig::default(),
            mesh: MeshConfig::default(),
            weight: WeightConfig::default(),
            matrix: MatrixConfig::default(),
            lambda: 1.0,
            data: DataConfig::default(),
            p: 2.0,
            solver: SolverConfig::default(),
            seed: 0,
        }
    }
}

fn check_weight(w: &WeightConfig, n: usize, key: &str) -> Result<(), ConfigError> {
    // A₂ range: the energy space needs μ and μ⁻¹ locally integrable
    require(w.kind == WeightKind::Lebesgue || w.alpha.abs() < n as f64, key, "power weight needs |alpha| < dim")
}

impl Experiment for SolveConfig {
    const GRID_KEY: Option<&'static str> = Some("mesh.m");
    const TOL_KEY: Option<&'static str> = Some("solver.tol");

    fn validate(&self) -> Result<(), ConfigError> {
        self.domain.validate()?;
        let n = self.domain.dim();
        require(self.mesh.m >= 1 && self.mesh.m <= if n == 2 { 1024 } else { 64 }, "mesh.m", "out of range (2D at most 1024, 3D at most 64)")?;
        check_weight(&self.weight, n, "weight.alpha")?;
        if self.matrix.form == MatrixForm::Entries {
            require(self.matrix.entries.len() == n * n, "matrix.entries", "needs dim² entries")?;
        }
        require(self.lambda > 0.0 && self.lambda <= 1.0, "Lambda", "must lie in (0, 1]")?;
        self.data.validate(n)?;
        if self.data.kind == DataKind::Manufactured {
            let unit = self.domain.kind == DomainKind::Box && self.domain.lo.iter().all(|v| *v == 0.0) && self.domain.hi.iter().all(|v| *v == 1.0);
            if !unit {
                return Err(bad("F.kind", "manufactured data needs domain = unit box"));
            }
        }
        require(self.p > 1.0, "p", "must exceed 1")?;
        self.solver.validate()
    }

    fn run(&self) -> anyhow::Result<Output> {
        let n = self.domain.dim();
        let mesh = self.domain.mesh(self.mesh.m)?;
        let mu = self.weight.weight();
        let coefficient = match self.matrix.form {
            MatrixForm::MuI => Coefficient::identity(n),
            MatrixForm::Entries => Coefficient::Product(self.matrix.entries.clone()),
        };
        let f = self.data.field(n, &mu)?;
        let problem = EllipticProblem { mesh, coefficient, mu: mu.clone(), lambda: self.lambda, f, dirichlet: None };
        let sol = solve(&problem, &self.solver.options())?;
        let (gn, dn, c) = regularity_constant(&problem, &sol, self.p)?;
        let energy = energy_ratio(&problem, &sol)?;
        let h1 = (self.data.kind == DataKind::Manufactured).then(|| h1_seminorm_error(&problem.mesh, &sol, &mu, &sine_product_gradient(n)));
        let mesh = &problem.mesh;
        let mut nodal = Table::new("solution", &["vertex", "x", "value"]);
        for v in 0..mesh.vertex_count() {
            let x: Vec<String> = mesh.vertex(v).iter().map(|c| num(*c).to_string()).collect();
            nodal.push(vec![json!(v), json!(x.join(" ")), num(sol.values[v])]);
        }
        let mut grads = Table::new("gradients", &["element", "gradient"]);
        for e in 0..mesh.element_count() {
            let g: Vec<String> = sol.gradient(e).iter().map(|c| num(*c).to_string()).collect();
            grads.push(vec![json!(e), json!(g.join(" "))]);
        }
        let result = json!({
            "mesh": {"vertices": mesh.vertex_count(), "elements": mesh.element_count(), "h": mesh.max_diameter()},
            "iterations": sol.iterations,
            "residual": sol.residual,
            "p": self.p,
            "gradient_norm": gn,
            "data_norm": dn,
            "constant": c,
            "energy_ratio": energy,
            "h1_error": h1,
        });
        Ok(Output { result, tables: vec![nodal, grads], plots: Vec::new() })
    }
}

/// Discrete `W^{1,p}` constants over a family of data and meshes.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ConstantFlags {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub meshes: Option<Vec<usize>>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantConfig {
    /// `μ = |x|^α` on `[-1, 1]²`, `A = μI`.
    pub alpha: f64,
    pub p: f64,
    pub meshes: Vec<usize>,
    pub samples: usize,
    pub modes: usize,
    /// Largest admissible `C(h/2)/C(h)` (and its inverse).
    pub ratio_limit: f64,
    /// Largest admissible max/min over the whole family.
    pub spread_limit: f64,
    /// Limit for `‖∇u_h‖_{L²μ}/‖F/μ‖_{L²μ}`.
    pub energy_limit: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for ConstantConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            p: 4.0,
            meshes: vec![32, 64, 128],
            samples: 10,
            modes: 3,
            ratio_limit: 1.2,
            spread_limit: 10.0,
            energy_limit: 1.05,
            tol: DEFAULT_CG_TOL,
            seed: 0,
        }
    }
}

impl Experiment for ConstantConfig {
    const GRID_KEY: Option<&'static str> = Some("meshes");
    const GRID_IS_LIST: bool = true;
    const TOL_KEY: Option<&'static str> = Some("tol");

    fn validate(&self) -> Result<(), ConfigError> {
        require(self.alpha.abs() < 2.0, "alpha", "must lie in (-2, 2)")?;
        require(self.p > 1.0, "p", "must exceed 1")?;
        require(!self.meshes.is_empty() && self.meshes.iter().all(|m| *m >= 2 && *m <= 1024), "meshes", "need resolutions in [2, 1024]")?;
        require(self.samples >= 1, "samples", "must be at least 1")?;
        require(self.modes >= 1, "modes", "must be at least 1")?;
        require(self.ratio_limit >= 1.0, "ratio_limit", "must be at least 1")?;
        require(self.spread_limit >= 1.0, "spread_limit", "must be at least 1")?;
        require(self.energy_limit > 0.0, "energy_limit", "must be positive")?;
        require(self.tol > 0.0 && self.tol < 1.0, "tol", "must lie in (0, 1)")
    }

    fn run(&self) -> anyhow::Result<Output> {
        let domain = Cuboid::cube(2, -1.0, 1.0)?;
        let mu = Weight::power(self.alpha);
        let opts = SolverOptions { tol: self.tol, max_iter: None };
        let build = |m: usize, k: usize| -> mucklab::Result<EllipticProblem> {
            let f = random_smooth_field(2, self.seed.wrapping_add(k as u64), self.modes);
            Ok(EllipticProblem::weighted_identity(triangulate_box(&domain, m)?, mu.clone(), f))
        };
        let rows = regularity_table(build, &self.meshes, self.samples, self.p, &opts)?;
        // energy ratios come from separate p = 2 evaluations of the same solves
        let mut energies = Vec::new();
        for &m in &self.meshes {
            for k in 0..self.samples {
                let problem = build(m, k)?;
                let sol = solve(&problem, &opts)?;
                energies.push(energy_ratio(&problem, &sol)?);
            }
        }
        let mut table = Table::new("constants", &["m", "sample", "gradient_norm", "data_norm", "constant", "energy_ratio", "iterations"]);
        for (r, e) in rows.iter().zip(&energies) {
            table.push(vec![json!(r.m), json!(r.sample), num(r.gradient_norm), num(r.data_norm), num(r.constant), num(*e), json!(r.iterations)]);
        }
        let s = self.samples;
        let at = |i: usize, k: usize| rows[i * s + k].constant;
        let mut ratios = Vec::new();
        let mut series = Vec::new();
        for k in 0..s {
            series.push(Series::line(format!("F{k}"), (0..self.meshes.len()).map(|i| (self.meshes[i] as f64, at(i, k))).collect()));
            for i in 1..self.meshes.len() {
                ratios.push(json!({"sample": k, "from": self.meshes[i - 1], "to": self.meshes[i], "ratio": at(i, k) / at(i - 1, k)}));
            }
        }
        let ratio_vals: Vec<f64> = ratios.iter().map(|r| r["ratio"].as_f64().unwrap_or(f64::NAN)).collect();
        let max_ratio = ratio_vals.iter().cloned().fold(0.0, f64::max);
        let min_ratio = ratio_vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let (lo, hi) = rows.iter().fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(r.constant), h.max(r.constant)));
        let max_energy = energies.iter().cloned().fold(0.0, f64::max);
        let chart = Chart {
            title: format!("discrete W^(1,{}) constants, μ = |x|^{}", self.p, self.alpha),
            x_label: "mesh resolution m".into(),
            y_label: "C_p(h)".into(),
            log_x: true,
            series,
            ..Default::default()
        };
        let result = json!({
            "rows": rows,
            "successive_ratios": ratios,
            "max_ratio": max_ratio,
            "min_ratio": min_ratio,
            "ratios_within_limit": max_ratio <= self.ratio_limit,
            "ratios_within_limit_both_ways": max_ratio <= self.ratio_limit && (ratio_vals.is_empty() || 1.0 / min_ratio <= self.ratio_limit),
            "family_spread": hi / lo,
            "spread_within_limit": hi / lo <= self.spread_limit,
            "energy_ratios": energies,
            "max_energy_ratio": max_energy,
            "energy_within_limit": max_energy <= self.energy_limit,
        });
        Ok(Output { result, tables: vec![table], plots: vec![("constant".into(), chart)] })
    }
}

/// Caccioppoli comparison against a constant-coefficient solution.
#[derive(Debug, Clone, Args, Serialize)]
pub struct CaccioppoliFlags {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub meshes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaccioppoliConfig {
    pub alpha: f64,
    pub meshes: Vec<usize>,
    pub region_lo: Vec<f64>,
    pub region_hi: Vec<f64>,
    /// Row-major `A₀`; empty means `⟨μ⟩·I` over the region.
    pub a0: Vec<f64>,
    pub modes: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for CaccioppoliConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            meshes: vec![32, 64],
            region_lo: vec![-0.5, -0.5],
            region_hi: vec![0.5, 0.5],
            a0: Vec::new(),
            modes: 3,
            tol: DEFAULT_CG_TOL,
            seed: 0,
        }
    }
}

impl Experiment for CaccioppoliConfig {
    const GRID_KEY: Option<&'static str> = Some("meshes");
    const GRID_IS_LIST: bool = true;
    const TOL_KEY: Option<&'static str> = Some("tol");

    fn validate(&self) -> Result<(), ConfigError> {
        require(self.alpha.abs() < 2.0, "alpha", "must lie in (-2, 2)")?;
        require(!self.meshes.is_empty() && self.meshes.iter().all(|m| *m >= 4 && *m <= 512), "meshes", "need resolutions in [4, 512]")?;
        require(self.region_lo.len() == 2, "region_lo", "needs two coordinates")?;
        require(self.region_hi.len() == 2, "region_hi", "needs two coordinates")?;
        require(
            self.region_lo.iter().zip(&self.region_hi).all(|(a, b)| -1.0 < *a && a < b && *b < 1.0),
            "region_hi",
            "region must be a nonempty box strictly inside [-1, 1]²",
        )?;
        require(self.a0.is_empty() || self.a0.len() == 4, "a0", "needs four entries")?;
        require(self.modes >= 1, "modes", "must be at least 1")?;
        require(self.tol > 0.0 && self.tol < 1.0, "tol", "must lie in (0, 1)")
    }

    fn run(&self) -> anyhow::Result<Output> {
        let domain = Cuboid::cube(2, -1.0, 1.0)?;
        let region = Cuboid::new(self.region_lo.clone(), self.region_hi.clone())?;
        let mu = Weight::power(self.alpha);
        let opts = SolverOptions { tol: self.tol, max_iter: None };
        let mut per_mesh = Vec::new();
        let mut table = Table::new("caccioppoli", &["m", "lhs", "data_term", "w_term", "sup_phi_grad_v_sq", "coefficient_term", "bracket", "ratio"]);
        for &m in &self.meshes {
            let mesh = triangulate_box(&domain, m)?;
            let problem = EllipticProblem::weighted_identity(mesh, mu.clone(), random_smooth_field(2, self.seed, self.modes));
            let u = solve(&problem, &opts)?;
            let a0 = if self.a0.is_empty() {
                let masses = element_masses(&problem.mesh, &mu, 1.0);
                let (mut mass, mut vol) = (0.0, 0.0);
                for e in 0..problem.mesh.element_count() {
                    if region.contains(&problem.mesh.centroid(e)) {
                        mass += masses[e];
                        vol += problem.mesh.volume(e);
                    }
                }
                let avg = mass / vol;
                vec![avg, 0.0, 0.0, avg]
            } else {
                self.a0.clone()
            };
            let r = caccioppoli_check(&problem, &u, &region, &a0, &opts)?;
            table.push(vec![json!(m), num(r.lhs), num(r.data_term), num(r.w_term), num(r.sup_phi_grad_v_sq), num(r.coefficient_term), num(r.bracket), num(r.ratio)]);
            per_mesh.push(json!({"m": m, "a0": a0, "report": r}));
        }
        Ok(Output { result: json!({"per_mesh": per_mesh}), tables: vec![table], plots: Vec::new() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PoincareInput {
    /// `u = x₁`.
    X1,
    /// `u = |x|²`.
    Radial,
    /// Solution of the weighted problem with seeded smooth data.
    Solution,
}

/// Weighted Poincaré quotient on a disk mesh.
#[derive(Debug, Clone, Args, Serialize)]
pub struct PoincareFlags {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub input: Option<PoincareInput>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoincareConfig {
    pub alpha: f64,
    /// Rings of the disk mesh.
    pub rings: usize,
    pub radius: f64,
    pub center: Vec<f64>,
    pub r: f64,
    pub sigma: f64,
    pub centering: Centering,
    pub input: PoincareInput,
    pub modes: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for PoincareConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            rings: 32,
            radius: 1.0,
            center: vec![0.0, 0.0],
            r: 0.5,
            sigma: 1.0,
            centering: Centering::Mu,
            input: PoincareInput::X1,
            modes: 3,
            tol: DEFAULT_CG_TOL,
            seed: 0,
        }
    }
}

impl Experiment for PoincareConfig {
    const GRID_KEY: Option<&'static str> = Some("rings");
    const TOL_KEY: Option<&'static str> = Some("tol");

    fn validate(&self) -> Result<(), ConfigError> {
        require(self.alpha.abs() < 2.0, "alpha", "must lie in (-2, 2)")?;
        require(self.rings >= 2 && self.rings <= 512, "rings", "must lie in [2, 512]")?;
        require(self.radius > 0.0, "radius", "must be positive")?;
        require(self.center.len() == 2, "center", "needs two coordinates")?;
        require(self.r > 0.0, "r", "must be positive")?;
        require(self.sigma >= 1.0, "sigma", "must be at least 1")?;
        require(self.modes >= 1, "modes", "must be at least 1")?;
        require(self.tol > 0.0 && self.tol < 1.0, "tol", "must lie in (0, 1)")
    }

    fn run(&self) -> anyhow::Result<Output> {
        let mesh = triangulate_disk(self.radius, self.rings)?;
        let mu = Weight::power(self.alpha);
        let sol = match self.input {
            PoincareInput::Solution => {
                let problem = EllipticProblem::weighted_identity(mesh.clone(), mu.clone(), random_smooth_field(2, self.seed, self.modes));
                solve(&problem, &SolverOptions { tol: self.tol, max_iter: None })?
            }
            kind => {
                let values = (0..mesh.vertex_count())
                    .map(|v| {
                        let x = mesh.vertex(v);
                        if kind == PoincareInput::X1 { x[0] } else { x[0] * x[0] + x[1] * x[1] }
                    })
                    .collect();
                DiscreteSolution::from_nodal(&mesh, values, 0, 0.0)
            }
        };
        let report = poincare_check(&mesh, &sol, &mu, &self.center, self.r, self.sigma, self.centering)?;
        Ok(Output { result: json!({"report": report, "elements": mesh.element_count()}), ..Default::default() })
    }
}
