use std::path::PathBuf;

use clap::Parser;
use polylab_cli::{execute, Command, Options};

/// Exponent calculus, truncation, mountain-pass solves and identity checks
/// for polyharmonic problems.
#[derive(Debug, Parser)]
#[command(name = "polylab", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Parent directory for run directories.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let opts = Options {
        config: args.config,
        out: args.out,
        seed: args.seed,
        jobs: args.jobs,
    };
    let result = execute(args.command, &opts);
    if let Some(dir) = &result.run_dir {
        println!("{}", dir.display());
    }
    if let Some(msg) = &result.message {
        eprintln!("polylab {}: {msg}", args.command.name());
    }
    std::process::exit(result.exit_code);
}
