use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use podrbf::config::RunConfig;
use podrbf::stages::{Context, Stage, StageError};

/// POD-RBF surrogate construction and optimization of optimal control problems.
#[derive(Debug, Parser)]
#[command(name = "podrbf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, short, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for snapshot generation (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Omit wall-clock timings so reports are byte-identical across runs.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Sampling seed, overriding `sampling.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Draw the training design and write samples.csv.
    Sample,
    /// Integrate the model at every sample and write the snapshot matrix.
    Snapshot,
    /// Fit the POD basis and RBF network.
    Train,
    /// Measure surrogate error on a fresh test design.
    Evaluate,
    /// Optimize through the surrogate and/or the original model.
    Optimize,
    /// Run the iterative domain refinement loop.
    Refine,
    /// Run every stage in order.
    Pipeline,
}

fn load(cli: &Cli) -> Result<Context, StageError> {
    let fail = |source| StageError {
        stage: Stage::Config,
        source,
    };
    let path = cli.config.as_deref().ok_or_else(|| {
        fail(podrbf::error::CliError::Config(
            "no configuration given; pass --config PATH".into(),
        ))
    })?;
    let mut cfg = RunConfig::load(path).map_err(fail)?;
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.sampling.seed = seed;
    }
    Context::new(cfg, cli.deterministic).map_err(fail)
}

fn run(cli: &Cli) -> Result<(), StageError> {
    let ctx = load(cli)?;
    match cli.command {
        Command::Sample => ctx.run(Stage::Sample),
        Command::Snapshot => ctx.run(Stage::Snapshot),
        Command::Train => ctx.run(Stage::Train),
        Command::Evaluate => ctx.run(Stage::Evaluate),
        Command::Optimize => ctx.run(Stage::Optimize),
        Command::Refine => ctx.run(Stage::Refine),
        Command::Pipeline => ctx.pipeline(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };

    let result = match cli.jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => {
                eprintln!("error: cannot start {n} worker threads: {e}");
                return ExitCode::from(1);
            }
        },
        None => run(&cli),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
