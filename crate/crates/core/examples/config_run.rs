//! Drives an experiment from a JSON config, as the CLI does, and writes the
//! CSV traces.
//!
//! `cargo run --release --example config_run -- examples/configs/leader_phi234.json out/`

use std::path::{Path, PathBuf};

use unisoft_lab::harness::{run_experiment, ExperimentConfig};
use unisoft_lab::io::load_json;

fn main() -> unisoft_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| "examples/configs/lsvi_phi1.json".into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/example-runs".into()));
    let cfg: ExperimentConfig = load_json(&config)?;
    let exp = cfg.resolve(config.parent().unwrap_or(Path::new(".")))?;
    let res = run_experiment(&exp, None, Some(&out))?;
    for r in &res.runs {
        println!("seed {:>3}: cum regret {:>9.3}, kappa_hat {:?}", r.seed, r.trace.final_regret(), r.plateau.kappa_hat);
    }
    println!("wrote {}", out.display());
    Ok(())
}
