use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use distkit::cli;
use distkit::config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "distkit",
    version,
    about = "Distinguishability analysis from output-trajectory data"
)]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, env = "DISTKIT_THREADS", default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured sample sets and write trajectory CSVs.
    Simulate,
    /// Two-sample test between two trajectory CSV files.
    Test { set_a: PathBuf, set_b: PathBuf },
    /// Sweep the test over a grid of initial states.
    Sweep,
    /// Empirical observability Gramian at the configured initial state.
    Gramian,
    /// Kernel width from the median meta-heuristic (file pairs A1 B1 A2 B2 ..., or --config).
    Sigma { files: Vec<PathBuf> },
}

fn load_config(args: &Args) -> distkit::Result<Option<ExperimentConfig>> {
    let Some(path) = &args.config else {
        return Ok(None);
    };
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(Some(cfg))
}

fn require(cfg: Option<ExperimentConfig>) -> distkit::Result<ExperimentConfig> {
    cfg.ok_or_else(|| distkit::Error::Config("this command needs --config".into()))
}

fn run(args: Args) -> distkit::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build_global()
        .map_err(|e| distkit::Error::invalid(e.to_string()))?;
    let cfg = load_config(&args)?;
    match &args.command {
        Command::Simulate => {
            for path in cli::cmd_simulate(&require(cfg)?, &args.out)? {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Test { set_a, set_b } => {
            let report = cli::cmd_test(set_a, set_b, cfg.as_ref(), args.seed)?;
            eprintln!("{}", report.summary());
            println!("{}", serde_json::to_string_pretty(&report)?);
            if args.config.is_some() {
                cli::write_test_report(&report, &args.out)?;
            }
        }
        Command::Sweep => {
            let result = cli::cmd_sweep(&require(cfg)?, &args.out)?;
            let class = distkit::sweep::indistinguishability_class(&result).len();
            eprintln!(
                "{} cells, sigma = {:.6}, {} in the empirical class; wrote {}",
                result.records.len(),
                result.sigma,
                class,
                args.out.display()
            );
        }
        Command::Gramian => {
            let result = cli::cmd_gramian(&require(cfg)?, Some(&args.out))?;
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
        Command::Sigma { files } => {
            let report = if files.is_empty() {
                cli::cmd_sigma_config(&require(cfg)?)?
            } else {
                cli::cmd_sigma_files(files)?
            };
            println!("{}", serde_json::to_string(&report)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
