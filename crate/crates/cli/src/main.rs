//! Command-line front end: run experiments, plot regret curves, solve a
//! model one-shot, and dump benchmark environments to the model format.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cmdp_lab::envs::{make_media_streaming, MediaStreamingParams};
use cmdp_lab::harness::{run_experiment, ExperimentConfig};
use cmdp_lab::lp::{solve_constrained_lp, ConstrainedOutcome};
use cmdp_lab::planning::{evaluate_policy, solve_unconstrained, Signal};
use cmdp_lab::plot::emit_plots;
use cmdp_lab::TabularCmdp;

#[derive(Parser)]
#[command(
    name = "cmdp-lab",
    about = "Constrained-MDP online-learning laboratory",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment (learner plus enabled baselines, all seeds).
    Run(RunArgs),
    /// Render SVG regret charts from an experiment output directory.
    Plot(PlotArgs),
    /// One-shot planning on a model file: unconstrained optimum and the
    /// budget-constrained LP optimum.
    Solve(SolveArgs),
    /// Construct a benchmark environment and write it in the model format.
    Env(EnvArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON). Omitted fields use benchmark defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides config and $CMDP_LAB_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use seeds 1..=N instead of the config's seed list.
    #[arg(long)]
    seeds: Option<u64>,
    /// Episode count override.
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// Directory containing per-seed ledger CSVs.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output path prefix; one SVG per metric is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Model file (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Also write the constrained-optimal policy to this path (JSON).
    #[arg(long)]
    policy: Option<PathBuf>,
}

#[derive(Args)]
struct EnvArgs {
    /// Where to write the constructed model (JSON).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    buffer_capacity: usize,
    #[arg(long, default_value_t = 0.9)]
    mu_fast: f64,
    #[arg(long, default_value_t = 0.1)]
    mu_slow: f64,
    #[arg(long, default_value_t = 0.4)]
    departure_rate: f64,
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    #[arg(long, default_value_t = 5.0)]
    threshold: f64,
    #[arg(long, default_value_t = 5)]
    initial_buffer: usize,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Plot(args) => plot(args),
        Command::Solve(args) => solve(args),
        Command::Env(args) => env(args),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::read_json(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = args.seeds {
        if n == 0 {
            bail!("--seeds must be at least 1");
        }
        config.experiment.seeds = (1..=n).collect();
    }
    if let Some(k) = args.episodes {
        config.experiment.episodes = k;
        config.validate()?;
    }
    let output = run_experiment(&config, args.out.as_deref())?;
    if output.resumed_tasks > 0 {
        println!("resumed {} run(s) from checkpoints", output.resumed_tasks);
    }
    println!(
        "wrote {} ledger file(s) and {} under {}",
        output.ledger_files.len(),
        output.summary_file.file_name().unwrap().to_string_lossy(),
        output.out_dir.display()
    );
    Ok(())
}

fn plot(args: PlotArgs) -> Result<()> {
    let written = emit_plots(&args.input, &args.out)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let model = TabularCmdp::read_json(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let s1 = model.initial_state();

    let (greedy, v) = solve_unconstrained(&model, model.reward())?;
    let greedy_cost = evaluate_policy(&greedy, &model, Signal::Cost)?.episode_value(s1);
    println!(
        "unconstrained optimum: value {:.6}, cost {:.6}",
        v.episode_value(s1),
        greedy_cost
    );

    match solve_constrained_lp(&model)? {
        ConstrainedOutcome::Optimal(solution) => {
            let cost = evaluate_policy(&solution.policy, &model, Signal::Cost)?.episode_value(s1);
            println!(
                "constrained optimum:   value {:.6}, cost {:.6} (budget {})",
                solution.value,
                cost,
                model.threshold()
            );
            if let Some(path) = &args.policy {
                std::fs::write(path, serde_json::to_string_pretty(&solution.policy)?)
                    .with_context(|| format!("writing policy {}", path.display()))?;
                println!("wrote {}", path.display());
            }
        }
        ConstrainedOutcome::Infeasible => {
            println!(
                "constrained optimum:   infeasible at budget {}",
                model.threshold()
            );
            if args.policy.is_some() {
                bail!("no policy to write: the budget admits no policy");
            }
        }
    }
    Ok(())
}

fn env(args: EnvArgs) -> Result<()> {
    let params = MediaStreamingParams {
        buffer_capacity: args.buffer_capacity,
        mu_fast: args.mu_fast,
        mu_slow: args.mu_slow,
        departure_rate: args.departure_rate,
        horizon: args.horizon,
        threshold: args.threshold,
        initial_buffer: args.initial_buffer,
    };
    let model = make_media_streaming(&params)?;
    model.write_json(&args.out)?;
    println!(
        "wrote {} ({} states, {} actions, horizon {})",
        args.out.display(),
        model.num_states(),
        model.num_actions(),
        model.horizon()
    );
    Ok(())
}
