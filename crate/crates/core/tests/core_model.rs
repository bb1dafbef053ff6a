mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use travel_signal::model::{
    advance, expected_split, baseline_costs, ConstantScheme, Game, PopulationMeasure, TrafficState,
};
use travel_signal::{
    choose_route, eval_cost, expected_counts, preference_fractions, realize_counts, social_cost,
    step_dynamics, DriverType, SignalVector, TypeSet,
};

/// Smallest |score gap| between any two routes, relative to the signal size.
fn min_relative_gap(omega: f64, s: &SignalVector) -> f64 {
    let scale = s.to_flat().iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let mut gap = f64::INFINITY;
    for i in 0..s.routes() {
        for j in 0..i {
            let g = omega * (s.lo(i) - s.lo(j)) + (1.0 - omega) * (s.hi(i) - s.hi(j));
            gap = gap.min(g.abs() / scale);
        }
    }
    gap
}

#[test]
fn baseline_example_choices() {
    let s = SignalVector::baseline_initial();
    // ω = 0: hi decides, 0.9 < 1.0
    assert_eq!(choose_route(0.0, &s), 1);
    // ω = 1: lo decides, 0.5 < 0.6
    assert_eq!(choose_route(1.0, &s), 0);
    // ω = 0.5: 0.75 = 0.75, lowest index wins
    assert_eq!(choose_route(0.5, &s), 0);
}

#[test]
fn baseline_expected_counts() {
    let types = TypeSet::baseline();
    let pop = PopulationMeasure::uniform(5, 30);
    let counts = expected_counts(&SignalVector::baseline_initial(), &pop, &types, 30);
    // Uniform[0,1] types cross at ω = 0.5 and split evenly.
    assert!((counts[0] - 18.0).abs() < 1e-12, "{counts:?}");
    assert!((counts[1] - 12.0).abs() < 1e-12);
    let c = social_cost(&baseline_costs(), &[0.6, 0.4]).unwrap();
    // independent arithmetic: 0.6·2(1 + 3.6·0.6⁴) + 0.4·5(1 + 0.8·0.4²)
    let oracle = 0.6 * 2.0 * (1.0 + 3.6 * 0.6f64.powi(4)) + 0.4 * 5.0 * (1.0 + 0.8 * 0.16);
    assert!((c - oracle).abs() < 1e-12);
}

#[test]
fn eval_cost_rejects_outside_unit_interval() {
    let c = &baseline_costs()[0];
    assert!(eval_cost(c, -1e-9).is_err());
    assert!(eval_cost(c, 1.0 + 1e-9).is_err());
    assert!(eval_cost(c, 1.0).is_ok());
}

#[test]
fn realized_frequencies_match_preferences() {
    let s = SignalVector::new(vec![(1.0, 3.0), (1.5, 2.0)]).unwrap();
    let d = DriverType::UniformRandom { lo: 0.1, hi: 0.9 };
    let types = TypeSet::new(vec![d]).unwrap();
    let pop = PopulationMeasure::from_weights(vec![1.0], 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 100_000;
    let mut on_first = 0u64;
    for _ in 0..draws {
        on_first += realize_counts(&s, &pop, &types, &mut rng)[0];
    }
    let p = preference_fractions(&s, &d)[0];
    let freq = on_first as f64 / draws as f64;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    assert!((freq - p).abs() <= 3.0 * se, "{freq} vs {p}");
}

proptest! {
    #![proptest_config(config(CASES))]

    #[test]
    fn conservation_after_every_step(
        types in types(5),
        sig in signal(3),
        seed in any::<u64>(),
        n in 1usize..60,
        steps in 1usize..6,
    ) {
        let costs = vec![baseline_costs()[0].clone(), baseline_costs()[1].clone(), baseline_costs()[0].clone()];
        let game = Game::new(n, costs, types.clone()).unwrap();
        let pop = PopulationMeasure::uniform(types.len(), n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = TrafficState::initial(sig.clone(), 3).unwrap();
        let mut scheme = ConstantScheme(sig.clone());
        for _ in 0..steps {
            state = step_dynamics(&game, &state, &mut scheme, &pop, &mut rng).unwrap();
            prop_assert_eq!(state.last_counts.iter().sum::<u64>(), n as u64);
        }
        let again = advance(&game, &state, sig, &pop, &mut rng).unwrap();
        prop_assert_eq!(again.last_counts.iter().sum::<u64>(), n as u64);
    }

    #[test]
    fn social_cost_is_between_route_costs(costs in costs(3), split in simplex_split(3)) {
        let c = social_cost(&costs, &split).unwrap();
        let each: Vec<f64> = costs.iter().zip(&split).map(|(f, &p)| eval_cost(f, p).unwrap()).collect();
        let lo = each.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = each.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-12 * (1.0 + hi.abs());
        prop_assert!(c >= lo - tol && c <= hi + tol);
    }

    #[test]
    fn argmin_is_shift_and_scale_invariant(
        omega in 0.0f64..=1.0,
        sig in signal(3),
        shift in -5.0f64..5.0,
        scale in 0.01f64..100.0,
    ) {
        prop_assume!(min_relative_gap(omega, &sig) > 1e-9);
        let base = choose_route(omega, &sig);
        let shifted: Vec<f64> = sig.to_flat().iter().map(|x| x + shift + 5.0).collect();
        let scaled: Vec<f64> = sig.to_flat().iter().map(|x| x * scale).collect();
        prop_assert_eq!(choose_route(omega, &SignalVector::from_flat(&shifted).unwrap()), base);
        prop_assert_eq!(choose_route(omega, &SignalVector::from_flat(&scaled).unwrap()), base);
    }

    #[test]
    fn preference_fractions_sum_to_one(sig in signal(4), d in driver_type()) {
        let f = preference_fractions(&sig, &d);
        prop_assert_eq!(f.iter().sum::<f64>(), 1.0);
        prop_assert!(f.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn expected_split_is_affine_in_weights(
        types in types(5),
        sig in signal(2),
        raw_a in prop::collection::vec(0.05f64..1.0, 5),
        raw_b in prop::collection::vec(0.05f64..1.0, 5),
        lambda in 0.0f64..=1.0,
    ) {
        let k = types.len();
        let norm = |v: &[f64]| {
            let s: f64 = v[..k].iter().sum();
            v[..k].iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let (a, b) = (norm(&raw_a), norm(&raw_b));
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
        let (sa, sb, sm) = (
            expected_split(&sig, &a, &types),
            expected_split(&sig, &b, &types),
            expected_split(&sig, &mix, &types),
        );
        for m in 0..2 {
            prop_assert!((sm[m] - (lambda * sa[m] + (1.0 - lambda) * sb[m])).abs() < 1e-12);
        }
    }

    #[test]
    fn largest_remainder_counts_sum_to_n(w in weights(5), n in 1usize..200) {
        let p = PopulationMeasure::from_weights(w.clone(), n).unwrap();
        prop_assert_eq!(p.counts.iter().sum::<u64>(), n as u64);
        for (c, x) in p.counts.iter().zip(&w) {
            prop_assert!((*c as f64 - x * n as f64).abs() < 1.0 + 1e-9);
        }
    }
}
