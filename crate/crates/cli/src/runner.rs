use crate::config::{self, bad, ConfigError};
use crate::plot::Chart;
use anyhow::Context;
use clap::Args;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Flags accepted by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Shared {
    /// JSON config file; flags given on the command line override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for report.json, CSV tables and SVG plots.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Grid or mesh resolution of the command.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Solver tolerance of the command.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            }))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Default)]
pub struct Output {
    pub result: Value,
    pub tables: Vec<Table>,
    pub plots: Vec<(String, Chart)>,
}

/// One experiment: a config record that validates itself and runs.
pub trait Experiment: Serialize + DeserializeOwned {
    /// Dotted config keys that receive `--grid` and `--tol`, when the command has them.
    const GRID_KEY: Option<&'static str>;
    /// `--grid m` becomes the one-element list `[m]`.
    const GRID_IS_LIST: bool = false;
    const TOL_KEY: Option<&'static str>;

    fn validate(&self) -> Result<(), ConfigError>;
    fn run(&self) -> anyhow::Result<Output>;
}

fn merged<E: Experiment, F: Serialize>(shared: &Shared, flags: &F) -> Result<E, ConfigError> {
    let mut map = match &shared.config {
        Some(path) => config::load_file(path)?,
        None => Map::new(),
    };
    config::overlay(&mut map, flags)?;
    if let Some(seed) = shared.seed {
        map.insert("seed".into(), Value::from(seed));
    }
    if let Some(grid) = shared.grid {
        let key = E::GRID_KEY.ok_or_else(|| bad("--grid", "this command has no grid or mesh resolution"))?;
        let value = if E::GRID_IS_LIST { Value::from(vec![grid]) } else { Value::from(grid) };
        config::set_path(&mut map, key, value)?;
    }
    if let Some(tol) = shared.tol {
        let key = E::TOL_KEY.ok_or_else(|| bad("--tol", "this command has no tolerance"))?;
        config::set_path(&mut map, key, Value::from(tol))?;
    }
    let cfg: E = config::parse(map)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Resolves the config, runs the experiment and writes the report and artifacts.
pub fn execute<E: Experiment, F: Serialize>(command: &str, shared: &Shared, flags: &F) -> anyhow::Result<()> {
    let cfg: E = merged(shared, flags)?;
    let canonical = serde_json::to_value(&cfg)?;
    let config_hash = hex::encode(Sha256::digest(serde_json::to_string(&canonical)?.as_bytes()));
    let out = cfg.run()?;
    let report = json!({
        "command": command,
        "version": mucklab::VERSION,
        "config_hash": config_hash,
        "config": canonical,
        "result": out.result,
    });
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(dir) = &shared.out {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        std::fs::write(dir.join("report.json"), &text)?;
        for t in &out.tables {
            t.write(&dir.join(format!("{}.csv", t.name)))?;
        }
        for (name, chart) in &out.plots {
            std::fs::write(dir.join(format!("{name}.svg")), chart.render())?;
        }
    }
    print!("{text}");
    Ok(())
}

/// Number for tables: shortest round-trip form, `null` for non-finite values.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}
