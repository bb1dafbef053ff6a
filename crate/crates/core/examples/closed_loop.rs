//! Twenty periods of the repeated game under the r-extreme scheme.
//!
//! cargo run --example closed_loop

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use travel_signal::harness::sample_population;
use travel_signal::schemes::{HeuristicScheme, SchemeConfig};
use travel_signal::{step_dynamics, Game, SignalVector, TrafficState};

fn main() -> travel_signal::Result<()> {
    let game = Game::baseline();
    let r = 3;
    let mut scheme = HeuristicScheme::new(SchemeConfig::RExtreme {}, r, 0)?;
    let mut state = TrafficState::initial(SignalVector::baseline_initial(), r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    println!(" t  signal (lo1, hi1 | lo2, hi2)        counts   cost");
    for _ in 0..20 {
        let pop = sample_population(&mut rng, 0.15, game.n, &game.types)?;
        let next = step_dynamics(&game, &state, &mut scheme, &pop, &mut rng)?;
        let s = &next.last_signal;
        println!(
            "{:>2}  ({:5.2}, {:5.2} | {:5.2}, {:5.2})   {:>2} / {:>2}   {:.3}",
            state.t,
            s.lo(0),
            s.hi(0),
            s.lo(1),
            s.hi(1),
            next.last_counts[0],
            next.last_counts[1],
            game.social_cost_of_counts(&next.last_counts)
        );
        state = next;
    }
    Ok(())
}
