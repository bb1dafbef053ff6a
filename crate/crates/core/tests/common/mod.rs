#![allow(dead_code)]

use proptest::prelude::*;
use travel_signal::model::{CostFunction, DriverType, TypeSet};
use travel_signal::schemes::SupportedBox;
use travel_signal::SignalVector;

pub const CASES: u32 = 1000;

pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

/// Polynomial with nonnegative coefficients: convex, nonnegative, increasing.
pub fn cost_fn() -> impl Strategy<Value = CostFunction> {
    (0.1f64..6.0, prop::collection::vec(0.0f64..8.0, 1..5))
        .prop_map(|(c0, rest)| {
            let mut coeffs = vec![c0];
            coeffs.extend(rest);
            CostFunction::new(coeffs).expect("nonnegative coefficients")
        })
}

pub fn costs(m: usize) -> impl Strategy<Value = Vec<CostFunction>> {
    prop::collection::vec(cost_fn(), m)
}

pub fn driver_type() -> impl Strategy<Value = DriverType> {
    prop_oneof![
        3 => (0.0f64..=1.0).prop_map(|omega| DriverType::Deterministic { omega }),
        1 => (0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b)| {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            DriverType::UniformRandom { lo, hi }
        }),
    ]
}

pub fn types(max: usize) -> impl Strategy<Value = TypeSet> {
    prop::collection::vec(driver_type(), 1..=max).prop_map(|v| TypeSet::new(v).expect("valid"))
}

/// Weights on the simplex, strictly positive.
pub fn weights(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, k).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

pub fn signal(m: usize) -> impl Strategy<Value = SignalVector> {
    prop::collection::vec((0.0f64..10.0, 0.0f64..5.0), m)
        .prop_map(|v| SignalVector::new(v.into_iter().map(|(lo, w)| (lo, lo + w)).collect()).unwrap())
}

/// Box from per-route (min, max) of a random window.
pub fn extreme_box(m: usize) -> impl Strategy<Value = SupportedBox> {
    prop::collection::vec((0.5f64..10.0, 0.0f64..4.0), m)
        .prop_map(|v| SupportedBox::extreme(v.into_iter().map(|(a, w)| (a, a + w)).collect()).unwrap())
}

pub fn simplex_split(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, m).prop_map(|v| {
        let s: f64 = v.iter().sum();
        if s <= 0.0 {
            let mut e = vec![0.0; v.len()];
            e[0] = 1.0;
            e
        } else {
            v.into_iter().map(|x| x / s).collect()
        }
    })
}
