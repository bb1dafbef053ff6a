//! Interval travel-time signalling for a repeated route-choice game.
//!
//! Drivers of type `ω` pick the route minimising `ω·lo + (1−ω)·hi` over the
//! broadcast intervals. This crate simulates the closed loop, provides the
//! usual heuristic signal generators, and computes optimised signals that stay
//! inside the min/max of recent travel times, either with the population
//! known ([`full_info`]) or robustly over all populations matching two moments
//! ([`dro`]).

pub mod dc;
pub mod dro;
pub mod error;
pub mod full_info;
pub mod geometry;
pub mod harness;
pub mod model;
pub mod output;
pub mod poly;
pub mod schemes;

pub use error::{Error, Result};
pub use model::{
    choose_route, eval_cost, expected_counts, preference_fractions, realize_counts, social_cost,
    step_dynamics, validate_r_supported, CostFunction, DriverType, Game, HistoryWindow,
    PopulationMeasure, SignalScheme, SignalVector, TrafficState, TypeSet,
};
