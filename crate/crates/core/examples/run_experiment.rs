//! Runs a named experiment from a config file (or the built-in defaults) and
//! prints its manifest.
//!
//! cargo run --release --example run_experiment -- configs/boundstate-branch.toml

use nlslab::experiment::{parse_config, run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = match std::env::args().nth(1) {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::defaults(ExperimentKind::BoundstateBranch),
    };
    cfg.output_dir = std::env::temp_dir().join(format!("nlslab-{}", cfg.experiment));
    let manifest = run_experiment(&cfg)?;
    for c in &manifest.criteria {
        println!("{}", c.line());
    }
    println!("artifacts in {}:", cfg.output_dir.display());
    for a in &manifest.artifacts {
        println!("  {a}");
    }
    Ok(())
}
