mod commands;
mod config;
mod plot;
mod runner;

use clap::{Parser, Subcommand};
use commands::{counterexample as ce, fem, maximal as mx, reifenberg as rf, weights as wt};
use config::ConfigError;
use runner::{execute, Shared};
use std::process::ExitCode;

/// Experiments on Muckenhoupt weights, weighted BMO, weighted maximal
/// functions and degenerate elliptic equations.
#[derive(Debug, Parser)]
#[command(name = "mucklab", version, about)]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sampled A_p characteristic and oscillation of |x|^alpha.
    Ap(wt::ApFlags),
    /// Reverse Hölder exponent of |x|^alpha.
    Rh(wt::RhFlags),
    /// Weighted BMO of mu·I over an alpha sweep.
    Bmo(wt::BmoFlags),
    /// Coefficient class membership of mu·A0.
    Classcheck(wt::ClassFlags),
    /// Weighted maximal operator ratios across grids.
    Maximal(mx::MaximalFlags),
    /// Layer-cake sandwich on seeded random fields.
    Ladder(mx::LadderFlags),
    /// Good-lambda level masses of a solved problem.
    Goodlambda(mx::GoodLambdaFlags),
    /// One weighted Dirichlet solve.
    Solve(fem::SolveFlags),
    /// Discrete W^{1,p} constants over data and meshes.
    Constant(fem::ConstantFlags),
    /// Caccioppoli comparison against a constant-coefficient solution.
    Caccioppoli(fem::CaccioppoliFlags),
    /// Weighted Poincaré quotient on a disk.
    Poincare(fem::PoincareFlags),
    /// Explicit solution: weak identity and integrability threshold.
    Counterexample(ce::CounterexampleFlags),
    /// Flatness profile of a sampled boundary.
    Reifenberg(rf::ReifenbergFlags),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.shared.threads {
        if t == 0 {
            return Err(config::bad("--threads", "must be at least 1").into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let s = &cli.shared;
    match &cli.command {
        Command::Ap(f) => execute::<wt::ApConfig, _>("ap", s, f),
        Command::Rh(f) => execute::<wt::RhConfig, _>("rh", s, f),
        Command::Bmo(f) => execute::<wt::BmoConfig, _>("bmo", s, f),
        Command::Classcheck(f) => execute::<wt::ClassConfig, _>("classcheck", s, f),
        Command::Maximal(f) => execute::<mx::MaximalConfig, _>("maximal", s, f),
        Command::Ladder(f) => execute::<mx::LadderConfig, _>("ladder", s, f),
        Command::Goodlambda(f) => execute::<mx::GoodLambdaConfig, _>("goodlambda", s, f),
        Command::Solve(f) => execute::<fem::SolveConfig, _>("solve", s, f),
        Command::Constant(f) => execute::<fem::ConstantConfig, _>("constant", s, f),
        Command::Caccioppoli(f) => execute::<fem::CaccioppoliConfig, _>("caccioppoli", s, f),
        Command::Poincare(f) => execute::<fem::PoincareConfig, _>("poincare", s, f),
        Command::Counterexample(f) => execute::<ce::CounterexampleConfig, _>("counterexample", s, f),
        Command::Reifenberg(f) => execute::<rf::ReifenbergConfig, _>("reifenberg", s, f),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<ConfigError>() {
            Some(c) => {
                eprintln!("error: {c}");
                ExitCode::from(2)
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
