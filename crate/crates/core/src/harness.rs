//! Monte-Carlo experiments: population sampling, replications, aggregation.
//!
//! Every replication draws from three independent ChaCha8 streams
//! (population, driver choices, scheme randomness), all derived from the
//! replication seed. Replication `i` of an experiment with master seed `s`
//! uses seed `splitmix64(s + i·0x9E3779B97F4A7C15)`. Because the population
//! stream does not depend on the scheme, two schemes run with the same master
//! seed face the same population sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dro::{estimate_moments, DroScheme, MeanOnlyScheme, MomentInfo};
use crate::error::{Error, Result};
use crate::full_info::FullInfoScheme;
use crate::model::{
    advance, baseline_costs, CostFunction, Game, PopulationMeasure, SchemeContext, SignalScheme,
    SignalVector, TrafficState, TypeSet,
};
use crate::schemes::{supported_box, BoxMode, HeuristicScheme, SchemeConfig};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_mul(GOLDEN)))
}

const POPULATION_STREAM: u64 = 1;
const DRIVER_STREAM: u64 = 2;
const SCHEME_STREAM: u64 = 3;
const MOMENT_STREAM: u64 = 4;

fn stream(seed: u64, which: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ which.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

/// A single window length (per-period aggregation) or a list of them
/// (time-averaged aggregation per window length).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WindowSpec {
    Single(usize),
    List(Vec<usize>),
}

impl WindowSpec {
    pub fn values(&self) -> Vec<usize> {
        match self {
            WindowSpec::Single(r) => vec![*r],
            WindowSpec::List(rs) => rs.clone(),
        }
    }

    pub fn is_list(&self) -> bool {
        matches!(self, WindowSpec::List(_))
    }
}

fn default_moment_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub costs: Vec<CostFunction>,
    pub types: TypeSet,
    pub s1: SignalVector,
    pub kappa: f64,
    pub r: WindowSpec,
    #[serde(rename = "T")]
    pub t: usize,
    pub paths: usize,
    pub seed: u64,
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub box_mode: BoxMode,
    /// Sampler draws used to estimate `(E, Q)` when `moments` is absent.
    #[serde(default = "default_moment_samples")]
    pub moment_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentInfo>,
}

impl ExperimentConfig {
    /// Two routes, 30 drivers, five types, `κ = 0.15`, `T = 20`, 100 paths.
    pub fn baseline(scheme: SchemeConfig, r: WindowSpec) -> Self {
        ExperimentConfig {
            n: 30,
            m: 2,
            costs: baseline_costs(),
            types: TypeSet::baseline(),
            s1: SignalVector::baseline_initial(),
            kappa: 0.15,
            r,
            t: 20,
            paths: 100,
            seed: 2024,
            scheme,
            box_mode: BoxMode::Extreme,
            moment_samples: default_moment_samples(),
            moments: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n == 0 {
            return bad("N must be at least 1".into());
        }
        if self.t == 0 {
            return bad("T must be at least 1".into());
        }
        if self.paths == 0 {
            return bad("paths must be at least 1".into());
        }
        if self.m == 0 || self.costs.len() != self.m || self.s1.routes() != self.m {
            return bad(format!(
                "M = {} but {} cost functions and {} signal intervals",
                self.m,
                self.costs.len(),
                self.s1.routes()
            ));
        }
        let k = self.types.len();
        if !(self.kappa >= 0.0 && self.kappa <= 1.0 / k as f64) {
            return bad(format!("kappa {} must lie in [0, 1/{k}]", self.kappa));
        }
        let rs = self.r.values();
        if rs.is_empty() || rs.contains(&0) {
            return bad("every window length r must be at least 1".into());
        }
        self.scheme.validate()?;
        if let Some(m) = &self.moments {
            if m.dim() != k {
                return bad(format!("moments have dimension {}, expected {k}", m.dim()));
            }
        } else if self.moment_samples < 2 {
            return bad("moment_samples must be at least 2".into());
        }
        Ok(())
    }

    pub fn game(&self) -> Result<Game> {
        Game::new(self.n, self.costs.clone(), self.types.clone())
    }

    /// Configured moments, or moments estimated from `moment_samples` draws
    /// of a stream derived from the master seed.
    pub fn moment_info(&self) -> Result<MomentInfo> {
        if let Some(m) = &self.moments {
            return Ok(m.clone());
        }
        let mut rng = stream(self.seed, MOMENT_STREAM);
        let samples: Vec<Vec<f64>> = (0..self.moment_samples)
            .map(|_| sample_weights(&mut rng, self.kappa, self.types.len()))
            .collect();
        Ok(estimate_moments(&samples)?.moments)
    }
}

fn sample_weights<R: Rng + ?Sized>(rng: &mut R, kappa: f64, k: usize) -> Vec<f64> {
    let centre = 1.0 / k as f64;
    let raw: Vec<f64> = (0..k)
        .map(|_| {
            if kappa > 0.0 {
                rng.gen_range(centre - kappa..=centre + kappa)
            } else {
                centre
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Raw weights `Uniform(1/|Ω| − κ, 1/|Ω| + κ)`, normalised, then rounded to
/// counts by largest remainder.
pub fn sample_population<R: Rng + ?Sized>(
    rng: &mut R,
    kappa: f64,
    n: usize,
    types: &TypeSet,
) -> Result<PopulationMeasure> {
    let k = types.len();
    if !(kappa >= 0.0 && kappa <= 1.0 / k as f64) {
        return Err(Error::Precondition(format!("kappa {kappa} must lie in [0, 1/{k}]")));
    }
    PopulationMeasure::from_weights(sample_weights(rng, kappa, k), n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub t: usize,
    pub signal: SignalVector,
    pub counts: Vec<u64>,
    pub travel_times: Vec<f64>,
    pub social_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub scheme: String,
    pub r: usize,
    pub replication: usize,
    pub seed: u64,
    pub steps: Vec<TraceStep>,
    /// Periods whose scheme failed; the fallback signal was broadcast.
    pub failed_steps: Vec<usize>,
}

impl SimulationTrace {
    pub fn mean_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.social_cost).sum::<f64>() / self.steps.len() as f64
    }
}

/// Builds the signal generator named by `config.scheme` for window `r`.
pub fn build_scheme(
    config: &ExperimentConfig,
    r: usize,
    seed: u64,
    moments: Option<&MomentInfo>,
) -> Result<Box<dyn SignalScheme + Send>> {
    let need = || {
        moments
            .cloned()
            .ok_or_else(|| Error::Precondition("moment information is required".into()))
    };
    Ok(match &config.scheme {
        SchemeConfig::RSupportedFull {} => Box::new(FullInfoScheme::new(r, config.box_mode)),
        SchemeConfig::RSupportedDro {} => Box::new(DroScheme {
            r,
            mode: config.box_mode,
            moments: need()?,
            options: Default::default(),
        }),
        SchemeConfig::MeanOnly {} => Box::new(MeanOnlyScheme {
            r,
            mode: config.box_mode,
            mean: need()?.e().iter().copied().collect(),
        }),
        other => Box::new(HeuristicScheme::new(other.clone(), r, seed)?),
    })
}

/// One sample path of `config.t` periods with window length `r`.
pub fn run_replication(config: &ExperimentConfig, r: usize, seed: u64) -> Result<SimulationTrace> {
    let moments = if config.scheme.is_optimizer() {
        Some(config.moment_info()?)
    } else {
        None
    };
    run_replication_with(config, r, seed, moments.as_ref())
}

fn run_replication_with(
    config: &ExperimentConfig,
    r: usize,
    seed: u64,
    moments: Option<&MomentInfo>,
) -> Result<SimulationTrace> {
    config.validate()?;
    let game = config.game()?;
    let mut scheme = build_scheme(config, r, splitmix64(seed ^ SCHEME_STREAM), moments)?;
    let mut pop_rng = stream(seed, POPULATION_STREAM);
    let mut driver_rng = stream(seed, DRIVER_STREAM);
    let mut state = TrafficState::initial(config.s1.clone(), r)?;
    let mut steps = Vec::with_capacity(config.t);
    let mut failed_steps = Vec::new();
    for t in 1..=config.t {
        let pop = sample_population(&mut pop_rng, config.kappa, config.n, &game.types)?;
        let signal = if state.history.is_empty() {
            config.s1.clone()
        } else {
            let ctx = SchemeContext {
                game: &game,
                state: &state,
                population: &pop,
            };
            match scheme.signal(&ctx) {
                Ok(s) => s,
                Err(Error::IterationLimit {
                    incumbent: Some((s, _)),
                    ..
                }) => {
                    failed_steps.push(t);
                    s
                }
                Err(e) if !e.is_input_error() => {
                    failed_steps.push(t);
                    supported_box(&state.history, r, config.box_mode)?.corner()
                }
                Err(e) => return Err(e),
            }
        };
        state = advance(&game, &state, signal.clone(), &pop, &mut driver_rng)?;
        let travel_times: Vec<f64> = (0..game.routes())
            .map(|m| state.history.latest(m).expect("just pushed"))
            .collect();
        steps.push(TraceStep {
            t,
            signal,
            social_cost: game.social_cost_of_counts(&state.last_counts),
            counts: state.last_counts.clone(),
            travel_times,
        });
    }
    Ok(SimulationTrace {
        scheme: config.scheme.name().to_string(),
        r,
        replication: 0,
        seed,
        steps,
        failed_steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMode {
    /// One row per period.
    PerPeriod,
    /// One row per window length, over per-path time averages.
    PerWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scheme: String,
    pub r: usize,
    /// `None` in per-window mode.
    pub t: Option<usize>,
    pub mean: f64,
    /// Sample standard deviation across paths (zero for a single path).
    pub std: f64,
    pub paths: usize,
}

impl AggregateRow {
    pub fn std_error(&self) -> f64 {
        self.std / (self.paths as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub mode: AggregateMode,
    pub rows: Vec<AggregateRow>,
    /// Replications that returned an error and were dropped.
    pub failed_paths: usize,
}

impl AggregateStats {
    pub fn empty(mode: AggregateMode) -> Self {
        AggregateStats {
            mode,
            rows: Vec::new(),
            failed_paths: 0,
        }
    }

    pub fn merge(&mut self, other: AggregateStats) {
        self.rows.extend(other.rows);
        self.failed_paths += other.failed_paths;
    }

    pub fn find(&self, scheme: &str, r: usize, t: Option<usize>) -> Option<&AggregateRow> {
        self.rows
            .iter()
            .find(|row| row.scheme == scheme && row.r == r && row.t == t)
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub stats: AggregateStats,
    pub traces: Vec<SimulationTrace>,
}

/// Runs `paths` replications for every window length in `config.r`.
/// Replications run in parallel; results are reduced in replication order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let moments = if config.scheme.is_optimizer() {
        Some(config.moment_info()?)
    } else {
        None
    };
    let rs = config.r.values();
    let jobs: Vec<(usize, usize)> = rs
        .iter()
        .flat_map(|&r| (0..config.paths).map(move |i| (r, i)))
        .collect();
    let outcomes: Vec<(usize, Result<SimulationTrace>)> = jobs
        .par_iter()
        .map(|&(r, i)| {
            let seed = derive_seed(config.seed, i as u64);
            let trace = run_replication_with(config, r, seed, moments.as_ref()).map(|mut tr| {
                tr.replication = i;
                tr
            });
            (r, trace)
        })
        .collect();
    let mode = if config.r.is_list() {
        AggregateMode::PerWindow
    } else {
        AggregateMode::PerPeriod
    };
    let mut stats = AggregateStats::empty(mode);
    let mut traces = Vec::new();
    for (r, outcome) in outcomes {
        match outcome {
            Ok(tr) => traces.push(tr),
            Err(e) if e.is_input_error() => return Err(e),
            Err(_) => {
                let _ = r;
                stats.failed_paths += 1;
            }
        }
    }
    let name = config.scheme.name().to_string();
    for &r in &rs {
        let paths: Vec<&SimulationTrace> = traces.iter().filter(|tr| tr.r == r).collect();
        if paths.is_empty() {
            continue;
        }
        match mode {
            AggregateMode::PerPeriod => {
                for t in 1..=config.t {
                    let xs: Vec<f64> = paths.iter().map(|tr| tr.steps[t - 1].social_cost).collect();
                    let (mean, std) = mean_std(&xs);
                    stats.rows.push(AggregateRow {
                        scheme: name.clone(),
                        r,
                        t: Some(t),
                        mean,
                        std,
                        paths: xs.len(),
                    });
                }
            }
            AggregateMode::PerWindow => {
                let xs: Vec<f64> = paths.iter().map(|tr| tr.mean_cost()).collect();
                let (mean, std) = mean_std(&xs);
                stats.rows.push(AggregateRow {
                    scheme: name.clone(),
                    r,
                    t: None,
                    mean,
                    std,
                    paths: xs.len(),
                });
            }
        }
    }
    Ok(ExperimentResult { stats, traces })
}

/// The four schemes compared in the reproduction figures.
pub fn figure_schemes() -> Vec<SchemeConfig> {
    vec![
        SchemeConfig::RSupportedFull {},
        SchemeConfig::RSupportedDro {},
        SchemeConfig::MeanOnly {},
        SchemeConfig::RExtreme {},
    ]
}

/// Per-period curves (`figure = 2`, `T = 20`) or time averages over
/// `T = 10` periods per window length (`figure = 3`) for [`figure_schemes`].
pub fn reproduce_figure(
    figure: u8,
    rs: &[usize],
    paths: usize,
    seed: u64,
) -> Result<ExperimentResult> {
    let (mode_list, horizon) = match figure {
        2 => (false, 20),
        3 => (true, 10),
        _ => return Err(Error::Config(format!("figure {figure} is not 2 or 3"))),
    };
    if rs.is_empty() {
        return Err(Error::Config("at least one window length is needed".into()));
    }
    let mut stats = AggregateStats::empty(if mode_list {
        AggregateMode::PerWindow
    } else {
        AggregateMode::PerPeriod
    });
    let mut traces = Vec::new();
    for scheme in figure_schemes() {
        let windows: Vec<WindowSpec> = if mode_list {
            vec![WindowSpec::List(rs.to_vec())]
        } else {
            rs.iter().map(|&r| WindowSpec::Single(r)).collect()
        };
        for r in windows {
            let mut config = ExperimentConfig::baseline(scheme.clone(), r);
            config.t = horizon;
            config.paths = paths;
            config.seed = seed;
            let res = run_experiment(&config)?;
            stats.merge(res.stats);
            traces.extend(res.traces);
        }
    }
    Ok(ExperimentResult { stats, traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DriverType;

    #[test]
    fn zero_kappa_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = sample_population(&mut rng, 0.0, 30, &TypeSet::baseline()).unwrap();
        assert_eq!(p.counts, vec![6; 5]);
    }

    #[test]
    fn fixed_point_after_two_periods() {
        let mut c = ExperimentConfig::baseline(SchemeConfig::MostRecent {}, WindowSpec::Single(1));
        // With the figure costs a lone type flips routes every period, so
        // use costs where route 1 is always faster.
        c.costs = vec![
            CostFunction::new(vec![1.0, 1.0]).unwrap(),
            CostFunction::new(vec![3.0]).unwrap(),
        ];
        c.types = TypeSet::new(vec![DriverType::Deterministic { omega: 0.5 }]).unwrap();
        c.kappa = 0.0;
        c.t = 10;
        let tr = run_replication(&c, 1, 7).unwrap();
        for s in &tr.steps[2..] {
            assert_eq!(s.counts, tr.steps[1].counts);
        }
    }

    #[test]
    fn replications_are_deterministic() {
        let c = ExperimentConfig::baseline(SchemeConfig::RExtreme {}, WindowSpec::Single(3));
        assert_eq!(run_replication(&c, 3, 11).unwrap(), run_replication(&c, 3, 11).unwrap());
    }

    #[test]
    fn config_round_trip() {
        let c = ExperimentConfig::baseline(SchemeConfig::RSupportedDro {}, WindowSpec::List(vec![2, 3]));
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        let extra = text.replacen('{', "{\"bogus\":1,", 1);
        assert!(ExperimentConfig::from_json(&extra).is_err());
    }
}
