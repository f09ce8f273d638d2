mod commands;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;

#[derive(Parser, Debug)]
#[command(name = "ssrl", version, about = "Self-supervised RL with a ranking buffer, plus a tabular theorem checker")]
struct Cli {
    /// Random seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key=value training config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSVs, checkpoints and traces.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    /// Environment name (taxi, cartpole, multiroom, pointreach, chain:<n>).
    #[arg(long)]
    env: Option<String>,
    /// Total env-step budget.
    #[arg(long)]
    total_steps: Option<u64>,
    /// Force the policy head (categorical or gaussian).
    #[arg(long)]
    head: Option<String>,
    /// Extra config entries, repeatable: --set learning_rate=5e-4
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one policy and write metrics.csv and policy.bin.
    Train {
        #[command(flatten)]
        overrides: Overrides,
        /// Export best/worst buffered episodes every K iterations.
        #[arg(long)]
        trace_every: Option<usize>,
    },
    /// Run a checkpoint greedily and report its episodic rewards.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
    },
    /// Train once per seed and summarise rolling-100 returns as percentile bands.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// Inclusive seed range, e.g. 0..9 or a single seed.
        #[arg(long, default_value = "0..9")]
        seeds: String,
        /// Parallel trainer threads.
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Env-step spacing of summary rows (default: budget / 20).
        #[arg(long)]
        checkpoint_every: Option<u64>,
        /// Rolling-100 return counted as solved (default: the config's target_return).
        #[arg(long)]
        solved: Option<f64>,
    },
    /// Check the ranking-buffer policy-improvement theorem on a tabular MDP file.
    Verify {
        #[arg(long)]
        mdp: PathBuf,
        /// `uniform` or a file with one action-probability row per state.
        #[arg(long, default_value = "uniform")]
        policy: String,
        #[arg(long, default_value_t = 50)]
        rollouts: usize,
        /// Keep only this top fraction of rollouts, via a ranking buffer.
        #[arg(long)]
        filter_top: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Train with tracing on and write only the best/worst episode traces.
    Trace {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 100)]
        every: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let ctx = commands::Context { seed: cli.seed, config: cli.config, out_dir: cli.out_dir };
    let result = match cli.command {
        Command::Train { overrides, trace_every } => commands::train(&ctx, &overrides, trace_every),
        Command::Eval { checkpoint, env, episodes } => commands::eval(&ctx, &checkpoint, &env, episodes),
        Command::Sweep { overrides, seeds, threads, checkpoint_every, solved } => {
            sweep::run(&ctx, &overrides, &seeds, threads, checkpoint_every, solved)
        }
        Command::Verify { mdp, policy, rollouts, filter_top, tol } => {
            commands::verify(&ctx, &mdp, &policy, rollouts, filter_top, tol)
        }
        Command::Trace { overrides, every } => commands::trace(&ctx, &overrides, every),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Verification(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Verification(m) => m.clone(),
            Failure::Runtime(e) => format!("{e:#}"),
        }
    }
}
