use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use travel_signal::dro::{optimize_dro, optimize_mean_only};
use travel_signal::full_info::optimize_full_info_with;
use travel_signal::full_info::FullInfoOptions;
use travel_signal::harness::{reproduce_figure, run_experiment, ExperimentConfig};
use travel_signal::output::write_outputs;
use travel_signal::schemes::supported_box;
use travel_signal::{Error, HistoryWindow, Result};

#[derive(Parser)]
#[command(name = "travel-signal", version, about = "Interval travel-time signalling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scheme over many sample paths.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Compute one optimised signal for a recorded history.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        state: PathBuf,
    },
    /// Regenerate the per-period (2) or per-window (3) comparison.
    Reproduce {
        #[arg(long)]
        figure: u8,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
        r: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        paths: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    Dro,
    Mean,
}

/// Realised travel times, one list per route with the oldest period first,
/// and optionally the population weights for full-information mode.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    history: Vec<Vec<f64>>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            paths,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = paths {
                cfg.paths = p;
            }
            cfg.validate()?;
            let res = run_experiment(&cfg)?;
            let title = format!("{} (N = {}, {} paths)", cfg.scheme.name(), cfg.n, cfg.paths);
            for p in write_outputs(&res.stats, &res.traces, &out, &title)? {
                println!("{}", p.display());
            }
            if res.stats.failed_paths > 0 {
                eprintln!("{} replications failed and were dropped", res.stats.failed_paths);
            }
        }
        Command::Optimize { config, mode, state } => {
            let cfg = ExperimentConfig::load(&config)?;
            let text = std::fs::read_to_string(&state).map_err(|e| Error::Config(format!("{}: {e}", state.display())))?;
            let st: StateFile = serde_json::from_str(&text)?;
            let r = *cfg.r.values().first().expect("validated");
            let h = HistoryWindow::from_entries(st.history, r)?;
            let bx = supported_box(&h, r, cfg.box_mode)?;
            let opt = match mode {
                Mode::Full => {
                    let weights = match st.weights {
                        Some(w) => w,
                        None => cfg.moment_info()?.e().iter().copied().collect(),
                    };
                    optimize_full_info_with(&bx, &weights, &cfg.types, &cfg.costs, &FullInfoOptions::default())?
                }
                Mode::Dro => optimize_dro(&bx, &cfg.moment_info()?, &cfg.types, &cfg.costs, cfg.n)?,
                Mode::Mean => {
                    let e: Vec<f64> = cfg.moment_info()?.e().iter().copied().collect();
                    optimize_mean_only(&bx, &e, &cfg.types, &cfg.costs, cfg.n)?
                }
            };
            let report = serde_json::json!({
                "signal": opt.signal,
                "value": opt.value,
                "feasible_assignments": opt.feasible_assignments,
                "certified": opt.certified,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Reproduce {
            figure,
            r,
            out,
            paths,
            seed,
        } => {
            let res = reproduce_figure(figure, &r, paths, seed)?;
            let title = match figure {
                2 => "Social cost over time".to_string(),
                _ => "Time-averaged social cost by window length".to_string(),
            };
            for p in write_outputs(&res.stats, &res.traces, &out, &title)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors are input errors (exit 1), not clap's default 2.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
