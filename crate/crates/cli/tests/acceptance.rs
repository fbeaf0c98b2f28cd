//! Acceptance suite. Drives the `mucklab` binary, checks every report against
//! oracles computed here, and prints one line per criterion.
//!
//! Every invocation runs twice, with `--threads 8` and `--threads 1`; the first
//! run feeds the checks and the pair feeds the determinism criterion.

use mucklab::geometry::{Cuboid, GridScalarField, UniformGrid};
use mucklab::maximal::{cell_masses, weighted_maximal, RadiusLadder};
use mucklab::weights::Weight;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

/// Criteria that cannot pass as stated; see the project notes.
const EXPECTED_FAILURES: &[usize] = &[5];

struct Lab {
    bin: PathBuf,
    root: tempfile::TempDir,
    pairs: Vec<(String, PathBuf, PathBuf)>,
}

struct Run {
    report: Value,
    seconds: f64,
}

impl Lab {
    fn new() -> Self {
        Self { bin: PathBuf::from(env!("CARGO_BIN_EXE_mucklab")), root: tempfile::tempdir().expect("temp dir"), pairs: Vec::new() }
    }

    fn write_config(&self, name: &str, config: &Value) -> String {
        let path = self.root.path().join(format!("{name}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
        path.display().to_string()
    }

    fn run(&mut self, tag: &str, args: &[&str]) -> Result<Run, String> {
        let mut first = None;
        let mut dirs = Vec::new();
        for threads in [8, 1] {
            let dir = self.root.path().join(format!("{tag}-t{threads}"));
            let start = Instant::now();
            let out = Command::new(&self.bin)
                .args(args)
                .arg("--threads")
                .arg(threads.to_string())
                .arg("--out")
                .arg(&dir)
                .output()
                .map_err(|e| format!("cannot start {}: {e}", self.bin.display()))?;
            let seconds = start.elapsed().as_secs_f64();
            if !out.status.success() {
                return Err(format!("`mucklab {}` failed ({}): {}", args.join(" "), out.status, String::from_utf8_lossy(&out.stderr).trim()));
            }
            if first.is_none() {
                let text = std::fs::read_to_string(dir.join("report.json")).map_err(|e| e.to_string())?;
                let report: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
                first = Some(Run { report, seconds });
            }
            dirs.push(dir);
        }
        self.pairs.push((tag.to_string(), dirs[0].clone(), dirs[1].clone()));
        Ok(first.unwrap())
    }
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

type Check = Result<(bool, String), String>;

// Counterexample identity on the seeded corpus.
fn identity(lab: &mut Lab) -> Check {
    let a = lab.run("counterexample-025", &["counterexample", "--n", "3", "--alpha", "0.25", "--p", "10,11,12"])?;
    let b = lab.run("counterexample-035", &["counterexample", "--n", "3", "--alpha", "0.35", "--p", "10"])?;
    let members = a.report["result"]["residuals"].as_array().map_or(0, |v| v.len());
    let lhs = f(&a.report["result"]["max_normalized_lhs"]);
    let odd: Vec<f64> = b.report["result"]["residuals"]
        .as_array()
        .ok_or("missing residuals")?
        .iter()
        .filter(|r| r["odd_in_x1"] == json!(true))
        .map(|r| f(&r["report"]["relative_error"]))
        .collect();
    let rel = odd.iter().cloned().fold(0.0, f64::max);
    let seconds = a.seconds.max(b.seconds);
    let pass = members == 20 && lhs <= 1e-3 && !odd.is_empty() && odd.iter().all(|e| *e <= 0.01) && seconds <= 60.0;
    Ok((pass, format!("{members} members, max |LHS| {lhs:.1e}, {} odd members with max rel. error {rel:.1e}, {seconds:.1}s", odd.len())))
}

// Threshold p* and the dyadic annulus exponents.
fn threshold(lab: &mut Lab) -> Check {
    let (n, alpha) = (3.0, 0.25);
    let p_star = (2.0 * alpha + n + 2.0) / (2.0 * alpha);
    let run = lab.run("threshold", &["counterexample", "--n", "3", "--alpha", "0.25", "--p", "10,11,12"])?;
    let r = &run.report["result"];
    let scans = r["scans"].as_array().ok_or("missing scans")?;
    let scan = |p: f64| scans.iter().find(|s| f(&s["p"]) == p).ok_or(format!("no scan at p = {p}"));
    let (s10, s12) = (scan(10.0)?, scan(12.0)?);
    let (e10, e12) = (f(&s10["fitted_exponent"]), f(&s12["fitted_exponent"]));
    let pass = within(f(&r["p_star"]), p_star, 1e-12)
        && s10["verdict"] == json!("finite")
        && s12["verdict"] == json!("infinite")
        && within(e10, 0.5, 0.01)
        && within(e12, -0.5, 0.01)
        && run.seconds <= 10.0;
    Ok((pass, format!("p* = {}, exponents {e10:+.4} (p=10, {}) and {e12:+.4} (p=12, {}), {:.1}s", f(&r["p_star"]), s10["verdict"], s12["verdict"], run.seconds)))
}

const AP_ALPHAS: [f64; 4] = [-1.0, -0.5, 0.5, 1.0];

fn ap_runs(lab: &mut Lab) -> Result<Vec<(f64, Run)>, String> {
    AP_ALPHAS
        .iter()
        .map(|&a| {
            let s = a.to_string();
            lab.run(&format!("ap{s}"), &["ap", "--dim", "2", "--p", "2", "--alpha", &s, "--grid", "512"]).map(|r| (a, r))
        })
        .collect()
}

// Sampled A₂ characteristic inside the explicit envelope.
fn envelope(runs: &[(f64, Run)]) -> Check {
    let n = 2.0f64;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut seconds = 0.0;
    for (a, run) in runs {
        let lower = n * n / (n * n - a * a) - 1e-3;
        let upper = (2f64.powf(n) * 5f64.powf(a.abs())).max(2f64.powf(4.0 * n) / ((n + a) * (n - a)));
        let value = f(&run.report["result"]["estimate"]["value"]);
        let size = run.report["result"]["family_size"].as_u64().unwrap_or(0);
        pass &= value >= lower && value <= upper && size >= 1700;
        seconds += run.seconds;
        parts.push(format!("α={a}: {value:.4} in [{lower:.4}, {upper:.1}]"));
    }
    let size = runs[0].1.report["result"]["family_size"].clone();
    pass &= seconds <= 120.0;
    Ok((pass, format!("{}; {size} balls, {seconds:.1}s", parts.join(", "))))
}

/// `∫_{B₁}|w − ⟨w⟩| / ∫_{B₁} w` for `w = |x|^α` in the plane by the midpoint rule in the radius.
fn radial_oscillation(alpha: f64) -> f64 {
    let steps = 4_000_000;
    let h = 1.0 / steps as f64;
    let (mut mass, mut vol) = (0.0, 0.0);
    for i in 0..steps {
        let s = (i as f64 + 0.5) * h;
        mass += s.powf(alpha) * s;
        vol += s;
    }
    let mean = mass / vol;
    let mut dev = 0.0;
    for i in 0..steps {
        let s = (i as f64 + 0.5) * h;
        dev += (s.powf(alpha) - mean).abs() * s;
    }
    dev / mass
}

// Oscillation bound on every ball, centered balls against the radial oracle.
fn oscillation(runs: &[(f64, Run)]) -> Check {
    let n = 2.0;
    let mut pass = true;
    let mut parts = Vec::new();
    for (a, run) in runs {
        let osc = &run.report["result"]["oscillation"];
        let bound = 2.0 * a.abs() * 4f64.powf(2.0 * n + 1.0) / (2.0 * n - 1.0);
        let max = f(&osc["max_ratio"]);
        let oracle = radial_oscillation(*a);
        let centered = osc["centered"].as_array().ok_or("missing centered balls")?;
        let err = centered.iter().map(|c| (f(&c["ratio"]) - oracle).abs()).fold(0.0, f64::max);
        pass &= max <= bound && !centered.is_empty() && err <= 1e-6;
        parts.push(format!("α={a}: max {max:.3} ≤ {bound:.1}, centered {oracle:.6} (err {err:.0e})"));
    }
    Ok((pass, parts.join(", ")))
}

// Weighted BMO slope across the α sweep.
fn bmo_slope(lab: &mut Lab) -> Check {
    let run = lab.run("bmo", &["bmo", "--alphas", "0.05,0.1,0.2,0.4"])?;
    let rows = run.report["result"]["per_alpha"].as_array().ok_or("missing per_alpha")?;
    let slopes: Vec<f64> = rows.iter().map(|r| f(&r["estimate"]["value_sq"]) / f(&r["alpha"])).collect();
    let spread = slopes.iter().cloned().fold(0.0, f64::max) / slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let shown: Vec<String> = slopes.iter().map(|s| format!("{s:.4}")).collect();
    Ok((spread <= 4.0, format!("value_sq/α = [{}], spread {spread:.2} (limit 4; value_sq grows like α²)", shown.join(", "))))
}

// Layer-cake sandwich on the random corpus.
fn sandwich(lab: &mut Lab) -> Check {
    let run = lab.run("ladder", &["ladder", "--fields", "100", "--theta", "1", "--varpi", "2", "--ps", "1.5,2,3"])?;
    let per_p = run.report["result"]["per_p"].as_array().ok_or("missing per_p")?;
    let rates: Vec<String> = per_p.iter().map(|r| format!("p={}: {}", r["p"], r["pass_rate"])).collect();
    let pass = per_p.len() == 3 && per_p.iter().all(|r| f(&r["pass_rate"]) == 1.0);
    Ok((pass, format!("pass rates {}", rates.join(", "))))
}

/// `max(|f(x)|, sup_r Σ_{|y−x|≤r} |f| m / Σ m)` over every lattice radius, by direct summation.
fn exhaustive_maximal(m: usize, f: &[f64], mass: &[f64]) -> Vec<f64> {
    let mut d2: Vec<usize> = (0..m).flat_map(|i| (0..m).map(move |j| i * i + j * j)).filter(|d| *d > 0).collect();
    d2.sort_unstable();
    d2.dedup();
    (0..m * m)
        .map(|x| {
            let (xi, xj) = ((x / m) as i64, (x % m) as i64);
            let mut best = f[x].abs();
            for &r2 in &d2 {
                let (mut num, mut den) = (0.0, 0.0);
                for y in 0..m * m {
                    let (di, dj) = ((y / m) as i64 - xi, (y % m) as i64 - xj);
                    if (di * di + dj * dj) as usize <= r2 {
                        num += f[y].abs() * mass[y];
                        den += mass[y];
                    }
                }
                best = best.max(num / den);
            }
            best
        })
        .collect()
}

// Maximal operator: constants, exhaustive ladder, weak (1,1) stability.
fn maximal(lab: &mut Lab) -> Check {
    let m = 32;
    let grid = UniformGrid::new(Cuboid::cube(2, -1.0, 1.0).map_err(|e| e.to_string())?, m).map_err(|e| e.to_string())?;
    let mu = Weight::power(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut values: Vec<f64> = (0..m * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    values[m * m / 2 + 3] = 40.0;
    let field = GridScalarField::new(grid.clone(), values.clone()).map_err(|e| e.to_string())?;
    let fast = weighted_maximal(&field, &mu, &RadiusLadder::AllDistinct, None).map_err(|e| e.to_string())?;
    let slow = exhaustive_maximal(m, &values, &cell_masses(&grid, &mu));
    let gap = fast.values.iter().zip(&slow).map(|(a, b)| (a - b).abs() / b.abs().max(1e-300)).fold(0.0, f64::max);

    let run = lab.run("maximal", &["maximal", "--input", "spike"])?;
    let r = &run.report["result"];
    let grids = r["per_grid"].as_array().ok_or("missing per_grid")?;
    let w: Vec<f64> = grids.iter().map(|g| f(&g["weak11"])).collect();
    let ms: Vec<u64> = grids.iter().map(|g| g["m"].as_u64().unwrap_or(0)).collect();
    let change = if w.len() == 2 { (w[1] - w[0]).abs() / w[0] } else { f64::NAN };
    let pass = r["constant_exact"] == json!(true) && gap <= 1e-12 && ms == [64, 128] && w.iter().all(|v| v.is_finite()) && change <= 0.25;
    Ok((pass, format!("constants exact: {}, 32² exhaustive gap {gap:.0e}, weak (1,1) {:.4} → {:.4} ({:.1}%)", r["constant_exact"], w[0], w[1], 100.0 * change)))
}

fn solve_config(domain: Value, m: usize, weight: Value, data: Value) -> Value {
    json!({
        "domain": domain,
        "mesh": {"m": m},
        "weight": weight,
        "matrix": {"form": "muI"},
        "Lambda": 1.0,
        "F": data,
        "solver": {"tol": 1e-10},
    })
}

// Energy estimate on every A = μI, Λ = 1 solve of the suite.
fn energy(lab: &mut Lab, constant: &Value, manufactured: &[Value]) -> Check {
    let mut ratios: Vec<f64> = constant["result"]["energy_ratios"].as_array().ok_or("missing energy_ratios")?.iter().map(f).collect();
    ratios.extend(manufactured.iter().map(|r| f(&r["result"]["energy_ratio"])));
    let domains = [
        ("box", json!({"kind": "box", "lo": [-1.0, -1.0], "hi": [1.0, 1.0]})),
        ("lshape", json!({"kind": "lshape"})),
        ("disk", json!({"kind": "disk", "radius": 1.0})),
    ];
    for (name, domain) in &domains {
        for alpha in [-1.0, -0.5, 0.5, 1.5] {
            let cfg = solve_config(domain.clone(), 48, json!({"kind": "power", "alpha": alpha}), json!({"kind": "weighted_random", "modes": 4, "seed": 11}));
            let path = lab.write_config(&format!("energy-{name}{alpha}"), &cfg);
            let run = lab.run(&format!("energy-{name}{alpha}"), &["solve", "--config", &path])?;
            ratios.push(f(&run.report["result"]["energy_ratio"]));
        }
    }
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let pass = ratios.iter().all(|r| r.is_finite() && *r <= 1.05);
    Ok((pass, format!("{} solves, max ‖∇u‖/‖F/μ‖ = {max:.4}", ratios.len())))
}

// Discrete W^{1,4} constants under refinement.
fn stability(run: &Run) -> Check {
    let r = &run.report["result"];
    let ratios: Vec<f64> = r["successive_ratios"].as_array().ok_or("missing ratios")?.iter().map(|x| f(&x["ratio"])).collect();
    let constants: Vec<f64> = r["rows"].as_array().ok_or("missing rows")?.iter().map(|x| f(&x["constant"])).collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let spread = constants.iter().cloned().fold(0.0, f64::max) / constants.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass = ratios.len() == 20 && constants.len() == 30 && max_ratio <= 1.2 && spread <= 10.0 && run.seconds <= 600.0;
    Ok((pass, format!("{} constants, max successive ratio {max_ratio:.4}, family max/min {spread:.2}, {:.1}s", constants.len(), run.seconds)))
}

// Manufactured solution convergence in H¹.
fn convergence(lab: &mut Lab) -> Result<(Check, Vec<Value>), String> {
    let meshes = [32usize, 64, 128];
    let mut errors = Vec::new();
    let mut reports = Vec::new();
    for m in meshes {
        let cfg = solve_config(json!({"kind": "box", "lo": [0.0, 0.0], "hi": [1.0, 1.0]}), m, json!({"kind": "lebesgue"}), json!({"kind": "manufactured"}));
        let path = lab.write_config(&format!("manufactured{m}"), &cfg);
        let run = lab.run(&format!("manufactured{m}"), &["solve", "--config", &path])?;
        errors.push(f(&run.report["result"]["h1_error"]));
        reports.push(run.report);
    }
    // least-squares slope of log e against log h
    let xs: Vec<f64> = meshes.iter().map(|m| -(*m as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let pass = (0.9..=1.1).contains(&slope);
    let shown: Vec<String> = errors.iter().map(|e| format!("{e:.3e}")).collect();
    Ok((Ok((pass, format!("H¹ errors [{}], order {slope:.4}", shown.join(", ")))), reports))
}

// Flatness of three reference boundaries.
fn flatness(lab: &mut Lab) -> Check {
    let half = lab.run("half-space", &["reifenberg", "--shape", "half-space"])?;
    let square = lab.run("square", &["reifenberg", "--shape", "square", "--point", "1,1", "--point-r", "0.25"])?;
    let circle = lab.run("circle", &["reifenberg", "--shape", "circle", "--r0", "0.2", "--point", "1,0", "--point-r", "0.2"])?;
    let h = f(&half.report["result"]["estimate"]["delta_hat"]);
    let s = f(&square.report["result"]["estimate"]["delta_hat"]);
    let corner = f(&square.report["result"]["probe"]["delta"]);
    let c = f(&circle.report["result"]["probe"]["delta"]);
    let target = 0.5f64.sqrt();
    let pass = h <= 0.01 && within(s, target, 0.05 * target) && within(corner, target, 0.05 * target) && within(c, 0.1, 0.01);
    Ok((pass, format!("half-space {h:.1e}, square δ̂ {s:.4} (corner probe {corner:.4}), circle δ(x, 0.2) {c:.4}")))
}

// Good-λ level masses on the solved instance.
fn good_lambda(lab: &mut Lab) -> Check {
    let run = lab.run("goodlambda", &["goodlambda", "--alpha", "0.2", "--varpis", "2,4"])?;
    let per = run.report["result"]["per_varpi"].as_array().ok_or("missing per_varpi")?;
    let mut pass = per.len() == 2;
    let mut parts = Vec::new();
    for v in per {
        let rep = &v["report"];
        let lhs: Vec<f64> = rep["per_k"].as_array().ok_or("missing per_k")?.iter().map(|r| f(&r["lhs"])).collect();
        let eps = f(&rep["eps1_calibrated"]);
        let non_increasing = lhs.windows(2).all(|w| w[1] <= w[0]);
        // geometric rate: worst successive ratio, zero once the sets are empty
        let rate = lhs.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).fold(0.0, f64::max);
        pass &= lhs.len() == 3 && non_increasing && rate <= eps && rep["hypothesis_met"] == json!(true);
        let shown: Vec<String> = lhs.iter().map(|x| format!("{x:.2e}")).collect();
        parts.push(format!("ϖ={}: [{}] rate {rate:.2e} ≤ ε₁ {eps:.2e}", rep["varpi"], shown.join(", ")));
    }
    Ok((pass, parts.join("; ")))
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).map(|d| d.filter_map(|e| e.ok()).map(|e| e.path()).collect()).unwrap_or_default();
    v.sort();
    v
}

// Byte-identical artifacts across thread counts.
fn determinism(lab: &Lab) -> Check {
    let mut compared = 0;
    let mut differing = Vec::new();
    for (tag, a, b) in &lab.pairs {
        let (fa, fb) = (files(a), files(b));
        let names = |v: &[PathBuf]| v.iter().map(|p| p.file_name().unwrap().to_owned()).collect::<Vec<_>>();
        if names(&fa) != names(&fb) || fa.is_empty() {
            differing.push(tag.clone());
            continue;
        }
        for (x, y) in fa.iter().zip(&fb) {
            compared += 1;
            if std::fs::read(x).ok() != std::fs::read(y).ok() {
                differing.push(format!("{tag}/{}", x.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    let pass = differing.is_empty() && compared > 0;
    let detail = if pass { format!("{} runs, {compared} artifacts identical", lab.pairs.len()) } else { format!("differences in {}", differing.join(", ")) };
    Ok((pass, detail))
}

fn main() {
    let mut lab = Lab::new();
    let mut results: Vec<(usize, &str, Check)> = Vec::new();
    results.push((1, "counterexample identity", identity(&mut lab)));
    results.push((2, "sharp threshold", threshold(&mut lab)));
    match ap_runs(&mut lab) {
        Ok(runs) => {
            results.push((3, "A₂ envelope", envelope(&runs)));
            results.push((4, "oscillation bound", oscillation(&runs)));
        }
        Err(e) => {
            results.push((3, "A₂ envelope", Err(e.clone())));
            results.push((4, "oscillation bound", Err(e)));
        }
    }
    results.push((5, "BMO bounded slope", bmo_slope(&mut lab)));
    results.push((6, "layer-cake sandwich", sandwich(&mut lab)));
    results.push((7, "maximal operator", maximal(&mut lab)));
    let constant = lab.run("constant", &["constant", "--alpha", "0.5", "--p", "4", "--meshes", "32,64,128", "--samples", "10"]);
    let (conv, manufactured) = match convergence(&mut lab) {
        Ok((c, r)) => (c, r),
        Err(e) => (Err(e), Vec::new()),
    };
    results.push((
        8,
        "energy estimate",
        match &constant {
            Ok(run) => energy(&mut lab, &run.report, &manufactured),
            Err(e) => Err(e.clone()),
        },
    ));
    results.push((
        9,
        "W^{1,p} stability",
        match &constant {
            Ok(run) => stability(run),
            Err(e) => Err(e.clone()),
        },
    ));
    results.push((10, "manufactured convergence", conv));
    results.push((11, "Reifenberg flatness", flatness(&mut lab)));
    results.push((12, "good-λ ladder", good_lambda(&mut lab)));
    results.push((13, "determinism", determinism(&lab)));

    let mut unexpected = 0;
    println!();
    for (id, name, outcome) in &results {
        let expected_fail = EXPECTED_FAILURES.contains(id);
        let (status, detail) = match outcome {
            Ok((true, d)) if expected_fail => ("PASS (expected failure now passes)", d.clone()),
            Ok((true, d)) => ("PASS", d.clone()),
            Ok((false, d)) if expected_fail => ("FAIL (documented)", d.clone()),
            Ok((false, d)) => ("FAIL", d.clone()),
            Err(e) => ("ERROR", e.clone()),
        };
        if status == "ERROR" || (status == "FAIL") {
            unexpected += 1;
        }
        println!("criterion {id:>2} {status:<4} {name}: {detail}");
    }
    let passed = results.iter().filter(|r| matches!(r.2, Ok((true, _)))).count();
    println!("\nacceptance: {passed}/{} criteria pass, {unexpected} unexpected failures", results.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
