use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use vecoffload::config::{self, ExperimentConfig, Overrides, PlotToggles};
use vecoffload::{emit_outputs, parse_config, report, run_experiment};
use vecoffload_core::env::{ScenarioConfig, ScenarioKind};
use vecoffload_core::policy::PolicyKind;

#[derive(Parser)]
#[command(name = "vecoffload", version, about = "Run vehicular offloading bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV tables and plots.
    Run(RunArgs),
    /// Re-aggregate an existing results.csv.
    Report(ReportArgs),
    /// List the built-in scenarios.
    Scenarios,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML). Without it the synthetic scenario runs
    /// with all policies.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds: `N` for 0..N, `A..B`, or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    /// Policy to run; repeat for several. Replaces the config's policies.
    #[arg(long = "policy")]
    policies: Vec<String>,
    #[arg(long)]
    horizon: Option<u32>,
}

#[derive(Args)]
struct ReportArgs {
    /// results.csv written by `run`.
    results: PathBuf,
    /// Output directory; defaults to the directory of the results file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the summary table only.
    #[arg(long)]
    no_plots: bool,
}

fn run(args: RunArgs) -> anyhow::Result<bool> {
    let mut cfg = match &args.config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::for_scenario(ScenarioConfig::synthetic_table1(), &PolicyKind::ALL, (0..10).collect()),
    };
    cfg.apply(&Overrides {
        out: args.out,
        seeds: args.seeds,
        policies: args.policies,
        horizon: args.horizon,
    })?;
    let out = run_experiment(&cfg)?;
    let written = emit_outputs(&out, &cfg)?;
    for s in out.summary() {
        println!(
            "{:<24} runs={:<4} R_T={:.6e} ± {:.3e}  avg_delay={:.6e}",
            s.policy, s.runs, s.mean_regret, s.std_regret, s.mean_avg_delay
        );
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    for f in &out.failures {
        eprintln!("run {} seed {} failed: {}", f.label, f.seed, f.diagnosis);
    }
    Ok(out.failures.is_empty())
}

fn report_cmd(args: ReportArgs) -> anyhow::Result<()> {
    let dir = args
        .out
        .or_else(|| args.results.parent().map(|p| p.to_path_buf()))
        .unwrap_or_else(config::default_output_dir);
    let plots = if args.no_plots {
        PlotToggles::NONE
    } else {
        PlotToggles {
            regret_vs_t: true,
            avg_delay_vs_t: true,
            beta_sweep: true,
            threshold_sweep: true,
        }
    };
    let written = report(&args.results, &dir, plots).with_context(|| format!("report on {}", args.results.display()))?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn scenarios() {
    for name in ScenarioKind::NAMES {
        let s = ScenarioConfig::builtin(name).expect("built-in scenario");
        println!("{name:<20} horizon={:<6} beta0={}", s.horizon, s.beta0);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Report(args) => report_cmd(args).map(|_| true),
        Command::Scenarios => {
            scenarios();
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
