mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use evasion_core::harness::task::Task;
use evasion_core::missile::GuidanceLaw;

use crate::config::ConfigError;

#[derive(Parser, Debug)]
#[command(name = "evasion", version, about = "Train and evaluate missile-evasion policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for episode batches.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct StrategyArgs {
    /// Multi-stage bundle manifest.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Single-policy strategy as NAME=CHECKPOINT; repeatable.
    #[arg(long = "policy", value_name = "NAME=PATH")]
    pub policies: Vec<String>,
    /// Scripted strategy; repeatable.
    #[arg(long, value_enum)]
    pub scripted: Vec<Scripted>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scripted {
    /// Wings level, throttle trimmed.
    Noop,
    /// 85 deg bank level turn.
    Turn,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    RollAtRange,
    RollCondition,
    Law,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one policy and write its checkpoint and learning curve.
    Train {
        #[arg(long)]
        task: Task,
        #[arg(long)]
        episodes: Option<u64>,
        /// Checkpoint to initialize from (required for short-distance).
        #[arg(long)]
        warm_start: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a bundle manifest from three checkpoints.
    Bundle {
        #[arg(long)]
        large: PathBuf,
        #[arg(long)]
        small: PathBuf,
        #[arg(long)]
        short: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Success-ratio sweep of one or more strategies.
    Eval {
        #[command(flatten)]
        strategies: StrategyArgs,
        /// `desk`, `full` or a grid TOML file.
        #[arg(long)]
        grid: Option<String>,
        /// Run every strategy on identical scenarios.
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        paired: Option<bool>,
        #[arg(long)]
        law: Option<GuidanceLaw>,
        #[command(flatten)]
        common: Common,
    },
    /// Record one seeded scenario as a trajectory CSV.
    Replay {
        #[command(flatten)]
        strategies: StrategyArgs,
        /// Scenario seed (defaults to --seed).
        #[arg(long, conflicts_with = "validation")]
        scenario: Option<u64>,
        /// Fly the fixed 21 km tail-chase steep-turn test instead.
        #[arg(long)]
        validation: bool,
        #[arg(long)]
        law: Option<GuidanceLaw>,
        #[command(flatten)]
        common: Common,
    },
    /// Diagnostic studies.
    Study {
        #[arg(value_enum)]
        kind: Study,
        #[command(flatten)]
        strategies: StrategyArgs,
        /// Scenarios per condition.
        #[arg(long)]
        scenarios: Option<usize>,
        #[arg(long)]
        law: Option<GuidanceLaw>,
        #[command(flatten)]
        common: Common,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let config = err.chain().any(|e| {
        e.downcast_ref::<ConfigError>().is_some()
            || matches!(
                e.downcast_ref::<evasion_core::Error>(),
                Some(evasion_core::Error::Config(_))
            )
    });
    if config {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Train {
            task,
            episodes,
            warm_start,
            common,
        } => commands::train(task, episodes, warm_start, &common),
        Command::Bundle {
            large,
            small,
            short,
            common,
        } => commands::bundle(&large, &small, &short, &common),
        Command::Eval {
            strategies,
            grid,
            paired,
            law,
            common,
        } => commands::eval(&strategies, grid, paired, law, &common),
        Command::Replay {
            strategies,
            scenario,
            validation,
            law,
            common,
        } => commands::replay(&strategies, scenario, validation, law, &common),
        Command::Study {
            kind,
            strategies,
            scenarios,
            law,
            common,
        } => commands::study(kind, &strategies, scenarios, law, &common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
