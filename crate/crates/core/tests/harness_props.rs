mod common;

use std::collections::HashSet;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use travel_signal::full_info::optimize_full_info;
use travel_signal::harness::{
    derive_seed, mean_std, run_experiment, run_replication, sample_population, AggregateMode,
    AggregateStats, ExperimentConfig, SimulationTrace, WindowSpec,
};
use travel_signal::model::{advance, baseline_costs, Game};
use travel_signal::output::{read_trace_csv, steps_from_rows, write_aggregate_csv, write_trace_csv};
use travel_signal::schemes::{scheme_r_extreme, supported_box, BoxMode, SchemeConfig};
use travel_signal::{social_cost, SignalVector, TrafficState, TypeSet};

fn heuristic() -> impl Strategy<Value = SchemeConfig> {
    prop_oneof![
        Just(SchemeConfig::MostRecent {}),
        Just(SchemeConfig::RExtreme {}),
        (0.0f64..3.0, 0.0f64..3.0).prop_map(|(a, b)| SchemeConfig::DeltaGamma { delta: vec![a, b] }),
        (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(q1, q2)| SchemeConfig::ExpSmoothing { q1, q2 }),
        Just(SchemeConfig::MeanStd {}),
        (0.05f64..0.95).prop_map(|alpha| SchemeConfig::MeanVar { alpha }),
        (0.05f64..0.95).prop_map(|alpha| SchemeConfig::MeanCvar { alpha }),
    ]
}

fn small_config(scheme: SchemeConfig, r: usize, t: usize, kappa: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig::baseline(scheme, WindowSpec::Single(r));
    c.t = t;
    c.kappa = kappa;
    c
}

fn cost_bounds(c: &ExperimentConfig) -> (f64, f64) {
    let lo = c.costs.iter().map(|f| f.value(0.0)).fold(f64::INFINITY, f64::min);
    let hi = c.costs.iter().map(|f| f.value(1.0)).fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn check_trace(c: &ExperimentConfig, tr: &SimulationTrace) -> Result<(), TestCaseError> {
    let (lo, hi) = cost_bounds(c);
    prop_assert_eq!(tr.steps.len(), c.t);
    for (i, s) in tr.steps.iter().enumerate() {
        prop_assert_eq!(s.t, i + 1);
        prop_assert_eq!(s.counts.iter().sum::<u64>(), c.n as u64);
        let split: Vec<f64> = s.counts.iter().map(|&k| k as f64 / c.n as f64).collect();
        let want = social_cost(&c.costs, &split).unwrap();
        prop_assert!((s.social_cost - want).abs() <= 1e-12 * (1.0 + want));
        prop_assert!(s.social_cost >= lo - 1e-12 && s.social_cost <= hi + 1e-12);
        for m in 0..c.m {
            prop_assert_eq!(s.travel_times[m], c.costs[m].value(split[m]));
        }
    }
    prop_assert_eq!(&tr.steps[0].signal, &c.s1);
    Ok(())
}

proptest! {
    #![proptest_config(config(CASES))]

    #[test]
    fn population_counts_sum_to_n(kappa in 0.0f64..=0.2, n in 1usize..200, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = sample_population(&mut rng, kappa, n, &TypeSet::baseline()).unwrap();
        prop_assert_eq!(p.counts.iter().sum::<u64>(), n as u64);
        prop_assert!((p.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let (lo, hi) = (0.2 - kappa, 0.2 + kappa);
        // normalising by a total in [1 − 5κ, 1 + 5κ] keeps each weight in range
        for &w in &p.weights {
            prop_assert!(w >= lo / (1.0 + 5.0 * kappa) - 1e-12 && w <= hi / (1.0 - 5.0 * kappa).max(1e-12) + 1e-12);
        }
    }

    #[test]
    fn traces_conserve_drivers_and_cost(
        scheme in heuristic(),
        r in 1usize..6,
        t in 1usize..12,
        kappa in 0.0f64..=0.2,
        seed in any::<u64>(),
    ) {
        let c = small_config(scheme, r, t, kappa);
        let tr = run_replication(&c, r, seed).unwrap();
        check_trace(&c, &tr)?;
        prop_assert!(tr.failed_steps.is_empty());
    }

    #[test]
    fn same_seed_same_trace_other_seed_other_trace(
        scheme in heuristic(),
        r in 1usize..6,
        seed in any::<u64>(),
        other in any::<u64>(),
    ) {
        let c = small_config(scheme, r, 8, 0.15);
        let a = run_replication(&c, r, seed).unwrap();
        prop_assert_eq!(&a, &run_replication(&c, r, seed).unwrap());
        if other != seed {
            // Point signals can make the dynamics deterministic, so use a
            // scheme whose broadcasts are continuous random draws.
            let d = small_config(SchemeConfig::DeltaGamma { delta: vec![1.0, 1.0] }, r, 3, 0.15);
            let x = run_replication(&d, r, seed).unwrap();
            let y = run_replication(&d, r, other).unwrap();
            prop_assert_ne!(&x.steps[1].signal, &y.steps[1].signal);
        }
    }

    #[test]
    fn trace_csv_round_trips(
        scheme in heuristic(),
        r in 1usize..6,
        t in 1usize..8,
        seed in any::<u64>(),
        reps in 1usize..4,
    ) {
        let c = small_config(scheme, r, t, 0.15);
        let traces: Vec<SimulationTrace> = (0..reps)
            .map(|i| {
                let mut tr = run_replication(&c, r, derive_seed(seed, i as u64)).unwrap();
                tr.replication = i;
                tr
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(&path, &traces).unwrap();
        let rows = read_trace_csv(&path).unwrap();
        prop_assert_eq!(rows.len(), reps * t * c.m);
        let back = steps_from_rows(&rows).unwrap();
        prop_assert_eq!(back.len(), reps);
        for tr in &traces {
            prop_assert_eq!(&back[&tr.replication], &tr.steps);
        }
    }
}

#[test]
fn derived_seeds_do_not_collide() {
    let seeds: HashSet<u64> = (0..100_000u64).map(|i| derive_seed(2024, i)).collect();
    assert_eq!(seeds.len(), 100_000);
    assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
}

#[test]
fn first_period_matches_the_hand_computed_cost() {
    let game = Game::baseline();
    let s1 = SignalVector::baseline_initial();
    // 0.6·2(1 + 3.6·0.6⁴) + 0.4·5(1 + 0.8·0.4²)
    let want = 0.6 * 2.0 * (1.0 + 3.6 * 0.6f64.powi(4)) + 0.4 * 5.0 * (1.0 + 0.8 * 0.4f64.powi(2));
    assert!((want - 4.015872).abs() < 1e-12);
    assert!((game.expected_social_cost(&s1, &[0.2; 5]) - want).abs() < 1e-12);

    // realised first-period costs average to the expectation over the
    // driver draws (κ = 0 so the population is fixed)
    let c = small_config(SchemeConfig::RExtreme {}, 1, 1, 0.0);
    let xs: Vec<f64> = (0..4000)
        .map(|i| run_replication(&c, 1, derive_seed(9, i)).unwrap().steps[0].social_cost)
        .collect();
    let (mean, std) = mean_std(&xs);
    // Jensen: realised counts scatter around the expected split, so only a
    // band is meaningful, not equality
    let se = std / (xs.len() as f64).sqrt();
    assert!(mean >= want - 3.0 * se, "{mean} vs {want} (se {se})");
    assert!(mean <= want + 0.5, "{mean} vs {want}");
}

#[test]
fn per_period_mode_has_t_rows_and_bounded_means() {
    let mut c = small_config(SchemeConfig::MeanCvar { alpha: 0.3 }, 3, 20, 0.15);
    c.paths = 30;
    let res = run_experiment(&c).unwrap();
    assert_eq!(res.stats.mode, AggregateMode::PerPeriod);
    assert_eq!(res.stats.rows.len(), c.t);
    let (lo, hi) = cost_bounds(&c);
    for (i, row) in res.stats.rows.iter().enumerate() {
        assert_eq!(row.t, Some(i + 1));
        assert_eq!(row.paths, 30);
        assert!(row.std >= 0.0);
        assert!(row.mean >= lo && row.mean <= hi);
    }
    assert_eq!(res.traces.len(), 30);
}

#[test]
fn identical_paths_have_zero_spread() {
    let (m, s) = mean_std(&[4.2, 4.2]);
    assert_eq!((m, s), (4.2, 0.0));
    // κ = 0 and dominating costs make every path identical
    let mut c = small_config(SchemeConfig::RExtreme {}, 2, 5, 0.0);
    c.costs = vec![
        travel_signal::CostFunction::new(vec![1.0, 1.0]).unwrap(),
        travel_signal::CostFunction::new(vec![3.0]).unwrap(),
    ];
    c.types = TypeSet::new(vec![travel_signal::DriverType::Deterministic { omega: 0.5 }]).unwrap();
    c.paths = 2;
    let res = run_experiment(&c).unwrap();
    assert!(res.stats.rows.iter().all(|row| row.std == 0.0));
}

#[test]
fn window_mode_is_bit_reproducible() {
    for scheme in [SchemeConfig::RExtreme {}, SchemeConfig::RSupportedFull {}, SchemeConfig::RSupportedDro {}] {
        let mut c = ExperimentConfig::baseline(scheme, WindowSpec::List(vec![2, 3]));
        c.t = 10;
        c.paths = 6;
        let a = run_experiment(&c).unwrap().stats;
        let b = run_experiment(&c).unwrap().stats;
        assert_eq!(a.mode, AggregateMode::PerWindow);
        assert_eq!(a.rows.len(), 2);
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.mean.to_bits(), y.mean.to_bits());
            assert_eq!(x.std.to_bits(), y.std.to_bits());
        }
    }
}

#[test]
fn full_information_is_prescient_along_extreme_paths() {
    let game = Game::baseline();
    let s1 = SignalVector::baseline_initial();
    for r in [2usize, 4] {
        let mut full = Vec::new();
        let mut extreme = Vec::new();
        for path in 0..40u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(77, path));
            let mut state = TrafficState::initial(s1.clone(), r).unwrap();
            for t in 1..=10 {
                let pop = sample_population(&mut rng, 0.15, 30, &game.types).unwrap();
                let signal = if t == 1 {
                    s1.clone()
                } else {
                    let bx = supported_box(&state.history, r, BoxMode::Extreme).unwrap();
                    let opt = optimize_full_info(&bx, &pop, &game.types, &baseline_costs(), 30).unwrap();
                    let s = scheme_r_extreme(&state.history, r).unwrap();
                    let expected = game.expected_social_cost(&s, &pop.weights);
                    assert!(opt.value <= expected + 1e-9, "t = {t}: {} > {expected}", opt.value);
                    full.push(opt.value);
                    s
                };
                state = advance(&game, &state, signal, &pop, &mut rng).unwrap();
                if t > 1 {
                    extreme.push(game.social_cost_of_counts(&state.last_counts));
                }
            }
        }
        let (mf, sf) = mean_std(&full);
        let (me, se) = mean_std(&extreme);
        let band = 3.0 * (sf * sf / full.len() as f64 + se * se / extreme.len() as f64).sqrt();
        assert!(mf <= me + band, "r = {r}: {mf} vs realised {me} ± {band}");
    }
}

#[test]
fn empty_outputs_are_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("agg.csv");
    write_aggregate_csv(&p, &AggregateStats::empty(AggregateMode::PerPeriod)).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap(), "scheme,r,t,mean_cost,std_cost,paths\n");
    write_aggregate_csv(&p, &AggregateStats::empty(AggregateMode::PerWindow)).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap(), "scheme,r,mean_avg_cost,std_avg_cost,paths\n");
    let t = dir.path().join("trace.csv");
    write_trace_csv(&t, &[]).unwrap();
    assert_eq!(
        std::fs::read_to_string(&t).unwrap(),
        "replication,t,route,signal_lo,signal_hi,count,travel_time,social_cost\n"
    );
}

#[test]
fn three_periods_give_three_rows_per_route() {
    let c = small_config(SchemeConfig::RExtreme {}, 2, 3, 0.15);
    let tr = run_replication(&c, 2, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("trace.csv");
    write_trace_csv(&p, &[tr]).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * c.m);
    assert!(text.lines().nth(1).unwrap().starts_with("0,1,1,0.5,1.0,"));
    // idempotent overwrite
    let again = run_replication(&c, 2, 5).unwrap();
    write_trace_csv(&p, &[again]).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap(), text);
}
