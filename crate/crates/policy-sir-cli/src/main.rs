//! Scenario runner for policy-controlled SIR experiments.
//!
//! Exit codes: 0 success, 2 parse/validation error, 3 infeasible
//! optimization, 4 search-space guard (override with --allow-large-search).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use policy_sir::{compare_runs, load_report, load_scenario, run, Mode, RunOptions};

#[derive(Parser)]
#[command(
    name = "policy-sir",
    about = "Simulate, optimize, and play policy games on the discrete SIR model",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output path prefix; defaults to the scenario's `output`, then to the
    /// scenario file name without extension.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads for the optimizer search (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Run searches beyond the built-in schedule-count guard.
    #[arg(long)]
    allow_large_search: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate fixed schedules (or no control) and write trajectories.
    Simulate(RunArgs),
    /// Search for the minimum-cost schedule.
    Optimize(RunArgs),
    /// Play the multi-layer per-interval policy game.
    Game(RunArgs),
    /// Diff two run reports region by region.
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
    },
}

fn default_prefix(path: &Path) -> String {
    path.with_extension("").display().to_string()
}

fn execute(args: &RunArgs, expected: Mode) -> policy_sir::Result<()> {
    if let Some(threads) = args.threads {
        // ignore double-initialization within one process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let scenario = load_scenario(&args.scenario)?;
    if scenario.mode != expected {
        return Err(policy_sir::Error::ScenarioValidation {
            field: "mode".into(),
            message: format!(
                "scenario declares mode `{}` but the `{expected}` command was invoked",
                scenario.mode
            ),
        });
    }
    let out_prefix = args
        .out
        .clone()
        .or_else(|| scenario.output.clone())
        .unwrap_or_else(|| default_prefix(&args.scenario));
    let options = RunOptions {
        out_prefix: out_prefix.clone(),
        allow_large_search: args.allow_large_search,
    };
    let report = run(&scenario, &options)?;
    for region in &report.regions {
        println!(
            "{}: s_final = {:.6}, r_final = {:.6}, peak_i = {:.6}, waves = {}",
            region.id, region.s_final, region.r_final, region.peak_infected, region.waves
        );
    }
    if let Some(search) = &report.search {
        println!(
            "search: {} schedules explored, feasible = {}",
            search.explored, search.feasible
        );
    }
    println!("report: {out_prefix}.report.json");
    Ok(())
}

fn compare(report_a: &Path, report_b: &Path) -> policy_sir::Result<()> {
    let a = load_report(report_a)?;
    let b = load_report(report_b)?;
    let diff = compare_runs(&a, &b)?;
    println!("{}", serde_json::to_string_pretty(&diff)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => execute(args, Mode::Simulate),
        Command::Optimize(args) => execute(args, Mode::Optimize),
        Command::Game(args) => execute(args, Mode::Game),
        Command::Compare { report_a, report_b } => compare(report_a, report_b),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
