//! Runs an experiment described by a JSON config file, by default the
//! shipped `config/baseline.json` with fewer paths.
//!
//! cargo run --release --example config_experiment [config.json]

use std::path::PathBuf;

use travel_signal::harness::{run_experiment, ExperimentConfig};
use travel_signal::schemes::SchemeConfig;

fn main() -> travel_signal::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config/baseline.json"));
    let mut config = ExperimentConfig::load(&path)?;
    config.paths = 20;

    for scheme in [config.scheme.clone(), SchemeConfig::MeanCvar { alpha: 0.3 }] {
        config.scheme = scheme;
        let res = run_experiment(&config)?;
        let last = res.stats.rows.last().expect("T >= 1");
        let avg: f64 = res.stats.rows.iter().map(|r| r.mean).sum::<f64>() / res.stats.rows.len() as f64;
        println!(
            "{:<16} r = {:?}: mean cost over t {:.4}, at t = {} {:.4} ± {:.4}",
            config.scheme.name(),
            config.r.values(),
            avg,
            config.t,
            last.mean,
            last.std
        );
    }
    Ok(())
}
