use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use rollergrasp_cli::commands::{self, PolicyKind};
use rollergrasp_cli::config::RunConfig;
use rollergrasp_core::eval::SuiteName;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "ROLLERGRASP_OUT";

#[derive(Parser)]
#[command(name = "rollergrasp", version, about = "Roller-grasper simulation, control and imitation learning")]
struct Cli {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: config `out_dir`, then $ROLLERGRASP_OUT, then ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Handcrafted,
    Learned,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    S,
    D,
    N,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out the handcrafted controller and save the trajectories.
    GenExpert,
    /// Behaviour cloning (plus optional DAgger) on trajectory files.
    Train {
        /// Trajectory files or directories containing them.
        #[arg(required = true)]
        demos: Vec<PathBuf>,
        #[arg(long)]
        dagger_rounds: Option<usize>,
    },
    /// Run evaluation suites and write the reports.
    Eval {
        #[arg(long, value_enum, ignore_case = true, default_value = "handcrafted")]
        policy: PolicyArg,
        #[arg(long, value_enum, ignore_case = true)]
        suite: Option<SuiteArg>,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Print a per-step trace of a trajectory file.
    Replay { trajectory: PathBuf },
}

fn output_dir(cli_out: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    cli_out
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut stdout = std::io::stdout().lock();
    if let Command::Replay { trajectory } = &cli.command {
        commands::replay(trajectory, &mut stdout)?;
        return Ok(ExitCode::SUCCESS);
    }
    let mut cfg = load_config(cli.config.as_deref(), cli.seed)?;
    let out = output_dir(cli.out, &cfg);
    match cli.command {
        Command::GenExpert => {
            commands::gen_expert(&cfg, &out, &mut stdout)?;
        }
        Command::Train { demos, dagger_rounds } => {
            let rounds = dagger_rounds.unwrap_or(cfg.learner.dagger_rounds);
            let outcome = commands::train(&cfg, &demos, rounds, &out, &mut stdout)?;
            if !outcome.converged {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Eval { policy, suite, weights, trials } => {
            if let Some(t) = trials {
                cfg.trials = t;
                cfg.validate()?;
            }
            let policies = match policy {
                PolicyArg::Handcrafted => vec![PolicyKind::Handcrafted],
                PolicyArg::Learned => vec![PolicyKind::Learned],
                PolicyArg::Both => vec![PolicyKind::Handcrafted, PolicyKind::Learned],
            };
            let suites = match suite {
                None => cfg.suites.clone(),
                Some(SuiteArg::S) => vec![SuiteName::S],
                Some(SuiteArg::D) => vec![SuiteName::D],
                Some(SuiteArg::N) => vec![SuiteName::N],
                Some(SuiteArg::All) => vec![SuiteName::S, SuiteName::D, SuiteName::N],
            };
            commands::eval(&cfg, &policies, &suites, weights.as_deref(), &out, &mut stdout)?;
        }
        Command::Replay { .. } => unreachable!("handled above"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
