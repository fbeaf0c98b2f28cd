use crate::config::{require, ConfigError};
use crate::plot::{Chart, Series};
use crate::runner::{num, Experiment, Output, Table};
use clap::Args;
use mucklab::reifenberg::{flatness_at, flatness_profile, BoundaryCloud};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    HalfSpace,
    Square,
    Circle,
}

/// Flatness profile of a sampled boundary.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ReifenbergFlags {
    #[arg(long, value_enum)]
    pub shape: Option<Shape>,
    #[arg(long)]
    pub r0: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    #[arg(long)]
    pub point_r: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReifenbergConfig {
    pub shape: Shape,
    /// Dimension of the half-space.
    pub dim: usize,
    pub extent: f64,
    pub spacing: f64,
    pub side: f64,
    pub per_side: usize,
    pub radius: f64,
    pub count: usize,
    pub rotate: f64,
    pub scale: f64,
    pub r0: f64,
    pub centers: usize,
    pub scales: usize,
    /// Optional single evaluation `δ(point, point_r)`.
    pub point: Option<Vec<f64>>,
    pub point_r: Option<f64>,
    pub seed: u64,
}

impl Default for ReifenbergConfig {
    fn default() -> Self {
        Self {
            shape: Shape::Square,
            dim: 2,
            extent: 1.0,
            spacing: 0.01,
            side: 1.0,
            per_side: 200,
            radius: 1.0,
            count: 4000,
            rotate: 0.0,
            scale: 1.0,
            r0: 0.5,
            centers: 8,
            scales: 3,
            point: None,
            point_r: None,
            seed: 0,
        }
    }
}

impl ReifenbergConfig {
    fn cloud(&self) -> mucklab::Result<BoundaryCloud> {
        let base = match self.shape {
            Shape::HalfSpace => BoundaryCloud::half_space(self.dim, self.extent, self.spacing)?,
            Shape::Square => BoundaryCloud::square(self.side, self.per_side)?,
            Shape::Circle => BoundaryCloud::circle(self.radius, self.count)?,
        };
        let rotated = if self.rotate != 0.0 { base.rotated(self.rotate)? } else { base };
        if self.scale != 1.0 {
            rotated.scaled(self.scale)
        } else {
            Ok(rotated)
        }
    }
}

impl Experiment for ReifenbergConfig {
    const GRID_KEY: Option<&'static str> = None;
    const TOL_KEY: Option<&'static str> = None;

    fn validate(&self) -> Result<(), ConfigError> {
        match self.shape {
            Shape::HalfSpace => {
                require(self.dim == 2 || self.dim == 3, "dim", "must be 2 or 3")?;
                require(self.extent > 0.0, "extent", "must be positive")?;
                require(self.spacing > 0.0 && self.extent / self.spacing <= if self.dim == 2 { 1e6 } else { 400.0 }, "spacing", "must be positive and not too fine")?;
            }
            Shape::Square => {
                require(self.side > 0.0, "side", "must be positive")?;
                require(self.per_side >= 2, "per_side", "must be at least 2")?;
            }
            Shape::Circle => {
                require(self.radius > 0.0, "radius", "must be positive")?;
                require(self.count >= 8, "count", "must be at least 8")?;
            }
        }
        require(self.rotate == 0.0 || self.shape != Shape::HalfSpace || self.dim == 2, "rotate", "rotation is planar")?;
        require(self.scale > 0.0, "scale", "must be positive")?;
        require(self.r0 > 0.0, "r0", "must be positive")?;
        require(self.centers >= 1, "centers", "must be at least 1")?;
        require(self.scales >= 1, "scales", "must be at least 1")?;
        require(self.point.is_some() == self.point_r.is_some(), "point_r", "point and point_r go together")?;
        if let Some(p) = &self.point {
            let n = if self.shape == Shape::HalfSpace { self.dim } else { 2 };
            require(p.len() == n, "point", "needs one coordinate per dimension")?;
            require(self.point_r.unwrap_or(0.0) > 0.0, "point_r", "must be positive")?;
        }
        Ok(())
    }

    fn run(&self) -> anyhow::Result<Output> {
        let cloud = self.cloud()?;
        let est = flatness_profile(&cloud, self.r0, self.centers, self.scales)?;
        let probe = match (&self.point, self.point_r) {
            (Some(x), Some(r)) => Some(flatness_at(&cloud, x, r)?),
            _ => None,
        };
        let mut table = Table::new("profile", &["x", "r", "delta"]);
        for e in &est.profile {
            let x: Vec<String> = e.x.iter().map(|c| num(*c).to_string()).collect();
            table.push(vec![json!(x.join(" ")), num(e.r), num(e.delta)]);
        }
        let mut by_scale: Vec<(f64, f64)> = est
            .sampled_scales
            .iter()
            .map(|&r| (r, est.profile.iter().filter(|e| e.r == r).map(|e| e.delta).fold(0.0, f64::max)))
            .collect();
        by_scale.sort_by(|a, b| a.0.total_cmp(&b.0));
        let chart = Chart {
            title: "sampled flatness".into(),
            x_label: "r".into(),
            y_label: "max δ(x, r)".into(),
            log_x: true,
            series: vec![Series::line("max over centers", by_scale)],
            ..Default::default()
        };
        let result = json!({
            "points": cloud.points.len(),
            "spacing": cloud.spacing,
            "estimate": est,
            "probe": probe,
        });
        Ok(Output { result, tables: vec![table], plots: vec![("reifenberg".into(), chart)] })
    }
}
