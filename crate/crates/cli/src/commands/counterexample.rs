use crate::config::{require, ConfigError};
use crate::plot::{Chart, Series};
use crate::runner::{num, Experiment, Output, Table};
use clap::Args;
use mucklab::counterexample::{annulus_scan, test_corpus, threshold, weak_residual, BallQuadrature, ExplicitField, DEFAULT_CORPUS_SEED, DEFAULT_PANELS};
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Explicit solution `u = x₁|x|^{−2α}`: weak identity and integrability threshold.
#[derive(Debug, Clone, Args, Serialize)]
pub struct CounterexampleFlags {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleConfig {
    pub n: usize,
    pub alpha: f64,
    pub p: Vec<f64>,
    pub k_min: usize,
    pub k_max: usize,
    pub corpus_seed: u64,
    pub radial: usize,
    pub angular: usize,
    pub panels: usize,
    pub seed: u64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            n: 3,
            alpha: 0.25,
            p: vec![10.0, 11.0, 12.0],
            k_min: 0,
            k_max: 20,
            corpus_seed: DEFAULT_CORPUS_SEED,
            radial: 12,
            angular: 16,
            panels: DEFAULT_PANELS,
            seed: 0,
        }
    }
}

impl Experiment for CounterexampleConfig {
    const GRID_KEY: Option<&'static str> = Some("angular");
    const TOL_KEY: Option<&'static str> = None;

    fn validate(&self) -> Result<(), ConfigError> {
        require(self.n >= 3, "n", "must be at least 3")?;
        require(self.alpha > 0.0, "alpha", "must be positive")?;
        require(2.0 * (self.alpha + 1.0) < self.n as f64, "alpha", "needs 2(alpha+1) < n")?;
        require(!self.p.is_empty() && self.p.iter().all(|p| *p >= 1.0 && p.is_finite()), "p", "need finite exponents of at least 1")?;
        require(self.k_min < self.k_max && self.k_max <= 40, "k_max", "need k_min < k_max <= 40")?;
        require(self.radial >= 2 && self.radial <= 64, "radial", "must lie in [2, 64]")?;
        require(self.angular >= 2 && self.angular <= 64, "angular", "must lie in [2, 64]")?;
        require(self.panels >= 1 && self.panels <= 40, "panels", "must lie in [1, 40]")
    }

    fn run(&self) -> anyhow::Result<Output> {
        let field = ExplicitField::new(self.n, self.alpha)?;
        let p_star = threshold(self.n, self.alpha)?;
        let quad = BallQuadrature::unit_ball(self.n, self.radial, self.angular, self.panels);
        let corpus = test_corpus(self.n, self.corpus_seed);
        let mut residuals = Vec::new();
        let mut res_table = Table::new("residuals", &["member", "odd_in_x1", "lhs", "rhs", "rhs_as_printed", "normalized_lhs", "relative_error"]);
        let (mut max_norm, mut max_rel, mut max_rel_printed) = (0.0f64, 0.0f64, 0.0f64);
        for (i, phi) in corpus.iter().enumerate() {
            let r = weak_residual(&field, phi, &quad)?;
            max_norm = max_norm.max(r.normalized_lhs);
            if phi.odd_in_x1 {
                if let Some(e) = r.relative_error {
                    max_rel = max_rel.max(e);
                }
                if r.rhs_as_printed != 0.0 {
                    max_rel_printed = max_rel_printed.max((r.lhs - r.rhs_as_printed).abs() / r.rhs_as_printed.abs());
                }
            }
            res_table.push(vec![
                json!(i),
                json!(phi.odd_in_x1),
                num(r.lhs),
                num(r.rhs),
                num(r.rhs_as_printed),
                num(r.normalized_lhs),
                r.relative_error.map(num).unwrap_or(serde_json::Value::Null),
            ]);
            residuals.push(json!({"member": i, "odd_in_x1": phi.odd_in_x1, "report": r}));
        }
        let mut annuli = Vec::new();
        let mut ann_table = Table::new("annuli", &["p", "k", "I_k", "ratio"]);
        let mut series = Vec::new();
        for &p in &self.p {
            let scan = annulus_scan(&field, p, self.k_min..=self.k_max)?;
            for t in &scan.terms {
                ann_table.push(vec![num(p), json!(t.k), num(t.integral), t.ratio.map(num).unwrap_or(serde_json::Value::Null)]);
            }
            series.push(Series::line(format!("p = {p}"), scan.terms.iter().map(|t| (t.k as f64, t.integral)).collect()));
            annuli.push(json!({
                "p": p,
                "verdict": scan.verdict,
                "exponent": scan.exponent,
                "expected_ratio": scan.expected_ratio,
                "fitted_exponent": scan.fitted_exponent,
                "annuli": scan.terms.iter().map(|t| json!({"k": t.k, "I_k": t.integral, "ratio": t.ratio})).collect::<Vec<_>>(),
            }));
        }
        let chart = Chart {
            title: format!("dyadic annulus integrals, n = {}, α = {}", self.n, self.alpha),
            x_label: "k".into(),
            y_label: "I_k".into(),
            log_y: true,
            series,
            ..Default::default()
        };
        let result = json!({
            "n": self.n,
            "alpha": self.alpha,
            "p_star": p_star,
            "residuals": residuals,
            "max_normalized_lhs": max_norm,
            "max_relative_error_odd": max_rel,
            "max_relative_error_odd_as_printed": max_rel_printed,
            "scans": annuli,
        });
        Ok(Output { result, tables: vec![res_table, ann_table], plots: vec![("annuli".into(), chart)] })
    }
}
