//! The best supported signal when next period's population is known, checked
//! against a brute-force grid.
//!
//! cargo run --example full_info_optimize

use travel_signal::full_info::{enumerate_assignments, grid_oracle, optimize_full_info};
use travel_signal::model::baseline_costs;
use travel_signal::schemes::{scheme_r_extreme, supported_box, BoxMode};
use travel_signal::{Game, HistoryWindow, PopulationMeasure, TypeSet};

fn main() -> travel_signal::Result<()> {
    let game = Game::baseline();
    let types = TypeSet::baseline();
    let h = HistoryWindow::from_entries(vec![vec![2.6, 9.2, 3.4], vec![6.2, 5.0, 5.9]], 3)?;
    let bx = supported_box(&h, 3, BoxMode::Extreme)?;
    let pop = PopulationMeasure::from_weights(vec![0.25, 0.15, 0.2, 0.22, 0.18], 30)?;

    let opt = optimize_full_info(&bx, &pop, &types, &baseline_costs(), 30)?;
    println!("optimal signal {:?}", opt.signal.to_flat());
    println!("expected social cost {:.6}", opt.value);
    println!(
        "{} of {} assignments of the fixed types are realisable",
        opt.feasible_assignments,
        enumerate_assignments(&TypeSet::new(types.fixed().iter().map(|&(_, omega)| travel_signal::DriverType::Deterministic { omega }).collect())?, 2)?.len()
    );

    let extreme = scheme_r_extreme(&h, 3)?;
    println!("r-extreme signal costs {:.6}", game.expected_social_cost(&extreme, &pop.weights));

    let (_, grid) = grid_oracle(&bx, &pop, &types, &baseline_costs(), 30, 201)?;
    println!("grid search (201 points per axis) {grid:.6}");
    Ok(())
}
