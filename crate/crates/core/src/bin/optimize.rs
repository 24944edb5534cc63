//! Runs one shape optimization from a JSON configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rso::driver::{run, Config, Mode};

#[derive(Parser, Debug)]
#[command(name = "optimize", about = "Robust level-set shape optimization under random loads")]
struct Args {
    /// JSON configuration; missing keys take defaults, `"preset": "desk"` selects the reduced problem.
    #[arg(long)]
    config: PathBuf,
    /// fixed-mesh-full, fixed-mesh-adaptive-sampling, adaptive-mesh-full or fully-adaptive.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for history.csv, config.json and VTK files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_iters: Option<usize>,
}

fn configure(args: &Args) -> rso::Result<Config> {
    let mut cfg = Config::load(&args.config)?.with_env_overrides(std::env::vars())?;
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    if let Some(n) = args.max_iters {
        cfg.max_iters = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let outcome = configure(&args).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(history) => {
            let reason = history.stop_reason.map_or("none", |r| r.as_str());
            println!(
                "stopped after {} iterations ({reason}); CI = {:.4e}",
                history.rows.len(),
                history.ci()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("optimize: {e}");
            ExitCode::from(2)
        }
    }
}
