//! Small-scale versions of the two comparison figures, written to
//! `target/figures`.
//!
//! cargo run --release --example reproduce_figures [paths]

use std::path::Path;

use travel_signal::harness::reproduce_figure;
use travel_signal::output::write_outputs;

fn main() -> travel_signal::Result<()> {
    let paths: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../target/figures");

    let fig2 = reproduce_figure(2, &[1, 3, 5], paths, 2024)?;
    write_outputs(&fig2.stats, &fig2.traces, &root.join("figure2"), "Social cost over time")?;

    let fig3 = reproduce_figure(3, &[2, 3, 4, 5], paths, 2024)?;
    write_outputs(&fig3.stats, &fig3.traces, &root.join("figure3"), "Time-averaged social cost")?;

    println!("{:<18} {:>2} {:>9} {:>9}", "scheme", "r", "mean", "std");
    for row in &fig3.stats.rows {
        println!("{:<18} {:>2} {:>9.4} {:>9.4}", row.scheme, row.r, row.mean, row.std);
    }
    println!("plots in {}", root.display());
    Ok(())
}
