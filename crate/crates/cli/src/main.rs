mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ArtifactPaths, ConfigError, RunConfig};

#[derive(Parser)]
#[command(
    name = "ivfbench",
    version,
    about = "Inverted-file vector search benchmark with adaptive probe budgets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file
    #[arg(long, default_value = "config.toml")]
    config: PathBuf,
    /// Overrides every seed in the config from this one value
    #[arg(long)]
    seed: Option<u64>,
    /// Directory that receives artifacts and resolves relative paths
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset
    Gen(CommonArgs),
    /// Train the quantizer and build the inverted index
    Build(CommonArgs),
    /// Write per-cluster statistics and fit the coherence power law
    Stats(CommonArgs),
    /// Run the full pipeline and emit the recall-cost report
    Bench(CommonArgs),
    /// Interpolate recall targets over an existing curves CSV
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Curves CSV to analyze instead of the configured path
        #[arg(long)]
        curves: Option<PathBuf>,
    },
}

fn setup(args: &CommonArgs) -> anyhow::Result<(RunConfig, ArtifactPaths)> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.override_seed(seed);
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| anyhow::anyhow!("cannot create output directory {}: {e}", args.out.display()))?;
    let paths = ArtifactPaths::resolve(&args.out, &config.paths);
    Ok((config, paths))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen(args) => {
            let (config, paths) = setup(&args)?;
            commands::cmd_gen(&config, &paths)
        }
        Command::Build(args) => {
            let (config, paths) = setup(&args)?;
            commands::cmd_build(&config, &paths)
        }
        Command::Stats(args) => {
            let (config, paths) = setup(&args)?;
            commands::cmd_stats(&config, &paths)
        }
        Command::Bench(args) => {
            let (config, paths) = setup(&args)?;
            commands::cmd_bench(&config, &paths)
        }
        Command::Analyze { common, curves } => {
            let (config, paths) = setup(&common)?;
            commands::cmd_analyze(&config, &paths, curves.as_deref())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use adaptive_ivf::Error;
    if err.downcast_ref::<ConfigError>().is_some() {
        return 1;
    }
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e {
            Error::Io(_)
            | Error::Format(_)
            | Error::DimensionMismatch { .. }
            | Error::ZeroNormRow { .. }
            | Error::InsufficientPairs { .. } => 2,
            Error::InvalidParameter(_)
            | Error::EmptyInput(_)
            | Error::ProbesOutOfRange { .. }
            | Error::UnreachableRecall { .. } => 1,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    2
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
