use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nlslab::experiment::{list_experiments, parse_config, run_experiment};

/// Run a named NLS experiment from a TOML config.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// Experiment config (TOML).
    #[arg(long, required_unless_present = "list_experiments")]
    config: Option<PathBuf>,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "NLSLAB_THREADS")]
    threads: Option<usize>,
    /// Print the available experiments and exit.
    #[arg(long)]
    list_experiments: bool,
    /// Parse and validate the config, print it with defaults filled, and exit.
    #[arg(long)]
    validate_only: bool,
}

fn main() -> ExitCode {
    env_logger::init();
    let args = Args::parse();
    if args.list_experiments {
        for (name, description, criteria) in list_experiments() {
            let ids: Vec<String> = criteria.iter().map(|c| c.to_string()).collect();
            println!("{name:<20} criteria {:<10} {description}", ids.join(","));
        }
        return ExitCode::SUCCESS;
    }
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let path = args.config.expect("clap enforces --config");
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    if let Some(dir) = args.out_dir {
        cfg.output_dir = dir;
    }
    if args.validate_only {
        match cfg.to_toml() {
            Ok(t) => print!("{t}"),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
        return ExitCode::SUCCESS;
    }
    log::info!("running {} into {}", cfg.experiment, cfg.output_dir.display());
    match run_experiment(&cfg) {
        Ok(manifest) => {
            for c in &manifest.criteria {
                println!("{}", c.line());
            }
            for (k, v) in &manifest.supplementary {
                println!("  {k} = {v:.6e}");
            }
            println!(
                "wall clock {:.1} s, artifacts in {}",
                manifest.wall_clock_seconds,
                cfg.output_dir.display()
            );
            if manifest.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
