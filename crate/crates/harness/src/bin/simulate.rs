use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use nfbeam_harness::{config_hash, run_experiment, ExperimentConfig, HarnessError, OUT_DIR_ENV};

/// Runs one experiment config and writes its results.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Cli {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Output directory. Overrides the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's `rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Shrink every codebook axis by 4 for smoke runs.
    #[arg(long)]
    quick: bool,
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(HarnessError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    if cli.quick {
        cfg.make_quick();
    }
    let out = match cli.out.or_else(|| cfg.output_dir.clone()) {
        Some(dir) => dir,
        None => {
            let root = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("results"), PathBuf::from);
            let hash = config_hash(&cfg);
            root.join(format!("{}-{}", cfg.kind().as_str(), &hash["sha256:".len()..][..12]))
        }
    };
    let manifest = run_experiment(&cfg, &out)?;
    println!("{}", out.display());
    for f in &manifest.files {
        println!("  {}  {}", &f.sha256[..12], f.path);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let body = serde_json::json!({ "error": { "kind": "usage", "message": e.to_string().trim_end() } });
            eprintln!("{body}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
