//! Robust signalling when only the first two moments of the population are
//! known: the inner worst case, its certificate, a sampled lower bound, and
//! the robust optimum.
//!
//! cargo run --release --example dro_optimize

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use travel_signal::dro::*;
use travel_signal::full_info::PartitionAssignment;
use travel_signal::harness::sample_population;
use travel_signal::model::baseline_costs;
use travel_signal::schemes::{supported_box, BoxMode};
use travel_signal::{HistoryWindow, TypeSet};

fn main() -> travel_signal::Result<()> {
    let types = TypeSet::baseline();
    let costs = baseline_costs();

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let samples: Vec<Vec<f64>> = (0..10_000)
        .map(|_| sample_population(&mut rng, 0.15, 30, &types).map(|p| p.weights))
        .collect::<travel_signal::Result<_>>()?;
    let est = estimate_moments(&samples)?;
    let m = est.moments;
    println!("E = {:.4?}", m.e().as_slice());

    // types 1 and 5 on route 2, the rest on route 1
    let x = PartitionAssignment::new(2, vec![1, 0, 0, 0, 1])?;
    let wc = worst_case_cost(&x, &m, &costs, &types)?;
    println!("worst case for the assignment {:.6}", wc.value);
    println!(
        "certificate: coupling error {:.1e}, smallest block eigenvalue {:.1e}",
        wc.blocks.coupling_error(&m),
        wc.blocks.min_eigenvalue()
    );
    let lower = atom_oracle(&x, &m, &costs, &types, 10_000, 7)?;
    println!("sampled lower bound {:.6} from {} feasible laws", lower.value, lower.feasible);

    let h = HistoryWindow::from_entries(vec![vec![2.6, 9.2, 3.4], vec![6.2, 5.0, 5.9]], 3)?;
    let bx = supported_box(&h, 3, BoxMode::Extreme)?;
    let robust = optimize_dro(&bx, &m, &types, &costs, 30)?;
    let mean_only = optimize_mean_only(&bx, m.e().as_slice(), &types, &costs, 30)?;
    println!("robust signal {:?} worst case {:.6}", robust.signal.to_flat(), robust.value);
    let mean_worst = worst_case_for_signal(&mean_only.signal, &m, &costs, &types)?.value;
    println!("mean-only signal {:?} worst case {:.6}", mean_only.signal.to_flat(), mean_worst);
    Ok(())
}
