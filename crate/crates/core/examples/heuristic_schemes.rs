//! Every heuristic signal generator applied to the same travel-time history.
//!
//! cargo run --example heuristic_schemes

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use travel_signal::schemes::*;
use travel_signal::{validate_r_supported, HistoryWindow, SignalVector};

fn show(name: &str, s: &SignalVector, h: &HistoryWindow, r: usize) {
    let supported = validate_r_supported(s, h, r).unwrap_or(false);
    println!(
        "{name:<14} route 1 [{:6.3}, {:6.3}]  route 2 [{:6.3}, {:6.3}]  {}",
        s.lo(0),
        s.hi(0),
        s.lo(1),
        s.hi(1),
        if supported { "supported" } else { "" }
    );
}

fn main() -> travel_signal::Result<()> {
    // oldest period first
    let h = HistoryWindow::from_entries(
        vec![vec![2.4, 3.9, 2.9, 5.1, 3.3], vec![6.1, 5.4, 5.8, 5.0, 6.6]],
        5,
    )?;
    let r = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    show("most_recent", &scheme_most_recent(&h)?, &h, 1);
    show("r_extreme", &scheme_r_extreme(&h, r)?, &h, r);
    show("mean_std", &scheme_mean_std(&h, r)?, &h, r);
    show("mean_var 0.25", &scheme_mean_var(&h, r, 0.25)?, &h, r);
    show("mean_cvar 0.25", &scheme_mean_cvar(&h, r, 0.25)?, &h, r);
    show("delta_gamma", &scheme_delta_gamma(&h, &[1.0, 0.5], &mut rng)?, &h, r);
    let prev = scheme_r_extreme(&h, r)?;
    show("exp_smoothing", &scheme_exp_smoothing(&prev, &[3.3, 6.6], 0.7, 0.7)?, &h, r);

    let samples = h.window(0, r);
    println!();
    println!("route 1 window {samples:?}");
    println!("VaR 0.5 = {:.3}, CVaR 0.5 = {:.3}", var_alpha(&samples, 0.5)?, cvar_alpha(&samples, 0.5)?);
    Ok(())
}
