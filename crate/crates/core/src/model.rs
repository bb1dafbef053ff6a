//! The static game: cost functions, driver types, signals, and the one-step
//! closed loop from a broadcast signal to realised route loads.
//!
//! Route indices are 0-based in the API. Files and CLI output use 1-based
//! routes.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;

const GRID: usize = 1001;

/// Convex, nonnegative polynomial travel time of the load fraction on a route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CostFunctionRepr", into = "CostFunctionRepr")]
pub struct CostFunction {
    poly: Polynomial,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostFunctionRepr {
    coefficients: Vec<f64>,
}

impl TryFrom<CostFunctionRepr> for CostFunction {
    type Error = Error;
    fn try_from(r: CostFunctionRepr) -> Result<Self> {
        CostFunction::new(r.coefficients)
    }
}

impl From<CostFunction> for CostFunctionRepr {
    fn from(c: CostFunction) -> Self {
        CostFunctionRepr {
            coefficients: c.poly.coeffs().to_vec(),
        }
    }
}

impl CostFunction {
    /// Coefficients in ascending powers of the load fraction.
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("cost coefficients must be finite".into()));
        }
        let poly = Polynomial::new(coefficients);
        let d2 = poly.derivative().derivative();
        for k in 0..GRID {
            let p = k as f64 / (GRID - 1) as f64;
            if d2.eval(p) < -1e-12 {
                return Err(Error::Invalid(format!("cost function is not convex at p = {p}")));
            }
            if poly.eval(p) < 0.0 {
                return Err(Error::Invalid(format!("cost function is negative at p = {p}")));
            }
        }
        Ok(CostFunction { poly })
    }

    /// BPR-style curve `t0 · (1 + alpha · p^power)`.
    pub fn bpr(t0: f64, alpha: f64, power: u32) -> Result<Self> {
        let mut coeffs = vec![0.0; power as usize + 1];
        coeffs[0] = t0;
        coeffs[power as usize] += t0 * alpha;
        CostFunction::new(coeffs)
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }

    pub fn coefficients(&self) -> &[f64] {
        self.poly.coeffs()
    }

    /// Evaluates without the domain check.
    pub fn value(&self, p: f64) -> f64 {
        self.poly.eval(p)
    }

    pub fn slope(&self, p: f64) -> f64 {
        self.poly.derivative().eval(p)
    }
}

/// The two cost curves of the baseline experiments.
pub fn baseline_costs() -> Vec<CostFunction> {
    vec![
        CostFunction::bpr(2.0, 3.6, 4).expect("valid"),
        CostFunction::bpr(5.0, 0.8, 2).expect("valid"),
    ]
}

pub fn eval_cost(c: &CostFunction, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("load fraction {p} outside [0, 1]")));
    }
    Ok(c.value(p))
}

pub(crate) fn check_simplex(split: &[f64], what: &str) -> Result<()> {
    if split.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::Domain(format!("{what} has a negative or NaN entry")));
    }
    let total: f64 = split.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

/// Load-weighted mean travel time.
pub fn social_cost(costs: &[CostFunction], split: &[f64]) -> Result<f64> {
    if costs.len() != split.len() {
        return Err(Error::Domain(format!(
            "split has {} entries for {} routes",
            split.len(),
            costs.len()
        )));
    }
    check_simplex(split, "split")?;
    Ok(social_cost_unchecked(costs, split))
}

pub(crate) fn social_cost_unchecked(costs: &[CostFunction], split: &[f64]) -> f64 {
    costs.iter().zip(split).map(|(c, &p)| p * c.value(p)).sum()
}

/// Social cost of integer route counts.
pub fn social_cost_of_counts(costs: &[CostFunction], counts: &[u64], n: usize) -> f64 {
    let split: Vec<f64> = counts.iter().map(|&k| k as f64 / n as f64).collect();
    social_cost_unchecked(costs, &split)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriverType {
    Deterministic { omega: f64 },
    #[serde(rename = "uniform")]
    UniformRandom { lo: f64, hi: f64 },
}

impl DriverType {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DriverType::Deterministic { omega } if !(0.0..=1.0).contains(&omega) => {
                Err(Error::Invalid(format!("type weight {omega} outside [0, 1]")))
            }
            DriverType::UniformRandom { lo, hi } if !(0.0 <= lo && lo <= hi && hi <= 1.0) => {
                Err(Error::Invalid(format!("uniform type [{lo}, {hi}] not inside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    /// `Some(ω)` when the type always acts on the same weight.
    pub fn fixed_omega(&self) -> Option<f64> {
        match *self {
            DriverType::Deterministic { omega } => Some(omega),
            DriverType::UniformRandom { lo, hi } if lo == hi => Some(lo),
            DriverType::UniformRandom { .. } => None,
        }
    }

    pub fn mean_omega(&self) -> f64 {
        match *self {
            DriverType::Deterministic { omega } => omega,
            DriverType::UniformRandom { lo, hi } => 0.5 * (lo + hi),
        }
    }
}

/// Ordered, finite type space. Duplicate entries are distinct types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<DriverType>", into = "Vec<DriverType>")]
pub struct TypeSet {
    types: Vec<DriverType>,
}

impl TryFrom<Vec<DriverType>> for TypeSet {
    type Error = Error;
    fn try_from(v: Vec<DriverType>) -> Result<Self> {
        TypeSet::new(v)
    }
}

impl From<TypeSet> for Vec<DriverType> {
    fn from(t: TypeSet) -> Self {
        t.types
    }
}

impl TypeSet {
    pub fn new(types: Vec<DriverType>) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::Invalid("type set is empty".into()));
        }
        for t in &types {
            t.validate()?;
        }
        Ok(TypeSet { types })
    }

    /// `{0, 0.5, 1, U(0,1), U(0,1)}`.
    pub fn baseline() -> Self {
        TypeSet::new(vec![
            DriverType::Deterministic { omega: 0.0 },
            DriverType::Deterministic { omega: 0.5 },
            DriverType::Deterministic { omega: 1.0 },
            DriverType::UniformRandom { lo: 0.0, hi: 1.0 },
            DriverType::UniformRandom { lo: 0.0, hi: 1.0 },
        ])
        .expect("valid")
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn get(&self, i: usize) -> DriverType {
        self.types[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &DriverType> {
        self.types.iter()
    }

    /// Indices of the types with a fixed weight, paired with that weight.
    pub fn fixed(&self) -> Vec<(usize, f64)> {
        self.types
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.fixed_omega().map(|w| (i, w)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMeasure {
    pub weights: Vec<f64>,
    pub counts: Vec<u64>,
}

impl PopulationMeasure {
    /// Counts by largest-remainder rounding of `n · weights`; ties in the
    /// remainder go to the lower index.
    pub fn from_weights(weights: Vec<f64>, n: usize) -> Result<Self> {
        check_simplex(&weights, "population weights")?;
        let raw: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
        let mut counts: Vec<u64> = raw.iter().map(|x| x.floor() as u64).collect();
        let assigned: u64 = counts.iter().sum();
        let mut rest = (n as u64).saturating_sub(assigned);
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = raw[a] - raw[a].floor();
            let rb = raw[b] - raw[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if rest == 0 {
                break;
            }
            counts[i] += 1;
            rest -= 1;
        }
        Ok(PopulationMeasure { weights, counts })
    }

    pub fn uniform(types: usize, n: usize) -> Self {
        PopulationMeasure::from_weights(vec![1.0 / types as f64; types], n).expect("valid")
    }

    pub fn validate(&self, types: &TypeSet, n: usize) -> Result<()> {
        if self.weights.len() != types.len() || self.counts.len() != types.len() {
            return Err(Error::Invalid(format!(
                "population has {} weights and {} counts for {} types",
                self.weights.len(),
                self.counts.len(),
                types.len()
            )));
        }
        check_simplex(&self.weights, "population weights")?;
        let total: u64 = self.counts.iter().sum();
        if total != n as u64 {
            return Err(Error::Invalid(format!("population counts sum to {total}, not {n}")));
        }
        for (w, &c) in self.weights.iter().zip(&self.counts) {
            if (c as f64 / n as f64 - w).abs() > 1.0 / n as f64 + 1e-12 {
                return Err(Error::Invalid("population counts inconsistent with weights".into()));
            }
        }
        Ok(())
    }
}

/// Per-route intervals `(lo, hi)`. Serialises as the flat list
/// `[lo_1, hi_1, lo_2, hi_2, ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SignalVector {
    intervals: Vec<(f64, f64)>,
}

impl TryFrom<Vec<f64>> for SignalVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SignalVector::from_flat(&v)
    }
}

impl From<SignalVector> for Vec<f64> {
    fn from(s: SignalVector) -> Self {
        s.to_flat()
    }
}

impl SignalVector {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Invalid("signal has no routes".into()));
        }
        for (m, &(lo, hi)) in intervals.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return Err(Error::Invalid(format!(
                    "route {} interval ({lo}, {hi}) is not a finite nonnegative interval",
                    m + 1
                )));
            }
        }
        Ok(SignalVector { intervals })
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() % 2 != 0 {
            return Err(Error::Invalid("flat signal needs an even number of entries".into()));
        }
        SignalVector::new(flat.chunks(2).map(|c| (c[0], c[1])).collect())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.intervals.iter().flat_map(|&(l, h)| [l, h]).collect()
    }

    /// `(0.5, 1, 0.6, 0.9)`.
    pub fn baseline_initial() -> Self {
        SignalVector::new(vec![(0.5, 1.0), (0.6, 0.9)]).expect("valid")
    }

    pub fn routes(&self) -> usize {
        self.intervals.len()
    }

    pub fn lo(&self, m: usize) -> f64 {
        self.intervals[m].0
    }

    pub fn hi(&self, m: usize) -> f64 {
        self.intervals[m].1
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }
}

/// Last `capacity` realised travel times per route, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryWindow {
    capacity: usize,
    routes: Vec<VecDeque<f64>>,
}

impl HistoryWindow {
    pub fn new(routes: usize, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Invalid("window length must be at least 1".into()));
        }
        Ok(HistoryWindow {
            capacity,
            routes: vec![VecDeque::with_capacity(capacity); routes],
        })
    }

    /// Builds a window from explicit per-route sequences, keeping the newest
    /// `capacity` entries.
    pub fn from_entries(entries: Vec<Vec<f64>>, capacity: usize) -> Result<Self> {
        let mut h = HistoryWindow::new(entries.len(), capacity)?;
        let len = entries.iter().map(Vec::len).max().unwrap_or(0);
        if entries.iter().any(|e| e.len() != len) {
            return Err(Error::Invalid("route histories have different lengths".into()));
        }
        for j in 0..len {
            let row: Vec<f64> = entries.iter().map(|e| e[j]).collect();
            h.push(&row)?;
        }
        Ok(h)
    }

    pub fn push(&mut self, costs: &[f64]) -> Result<()> {
        if costs.len() != self.routes.len() {
            return Err(Error::Invalid("history row has the wrong route count".into()));
        }
        if costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Invalid("travel times must be finite and nonnegative".into()));
        }
        for (q, &c) in self.routes.iter_mut().zip(costs) {
            if q.len() == self.capacity {
                q.pop_front();
            }
            q.push_back(c);
        }
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn routes(&self) -> usize {
        self.routes.len()
    }

    /// Entries currently stored (the same for every route).
    pub fn len(&self) -> usize {
        self.routes.first().map_or(0, VecDeque::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The newest `min(r, len)` entries of route `m`, oldest first.
    pub fn window(&self, m: usize, r: usize) -> Vec<f64> {
        let q = &self.routes[m];
        let k = r.min(q.len());
        q.iter().skip(q.len() - k).copied().collect()
    }

    pub fn latest(&self, m: usize) -> Option<f64> {
        self.routes[m].back().copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficState {
    /// Index of the next period to be played, starting at 1.
    pub t: usize,
    pub history: HistoryWindow,
    pub last_signal: SignalVector,
    /// Counts realised in period `t − 1`; empty before the first period.
    pub last_counts: Vec<u64>,
}

impl TrafficState {
    /// State before period 1. `s1` is broadcast in period 1 whatever the
    /// scheme, since there is no history yet.
    pub fn initial(s1: SignalVector, window: usize) -> Result<Self> {
        let history = HistoryWindow::new(s1.routes(), window)?;
        Ok(TrafficState {
            t: 1,
            history,
            last_signal: s1,
            last_counts: Vec::new(),
        })
    }
}

/// Costs, types and driver count shared by every period.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    pub n: usize,
    pub costs: Vec<CostFunction>,
    pub types: TypeSet,
}

impl Game {
    pub fn new(n: usize, costs: Vec<CostFunction>, types: TypeSet) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("driver count must be positive".into()));
        }
        if costs.is_empty() {
            return Err(Error::Invalid("at least one route is required".into()));
        }
        Ok(Game { n, costs, types })
    }

    /// N = 30 drivers, the two curves of [`baseline_costs`] and [`TypeSet::baseline`].
    pub fn baseline() -> Self {
        Game::new(30, baseline_costs(), TypeSet::baseline()).expect("valid")
    }

    pub fn routes(&self) -> usize {
        self.costs.len()
    }

    pub fn social_cost_of_counts(&self, counts: &[u64]) -> f64 {
        social_cost_of_counts(&self.costs, counts, self.n)
    }

    /// Social cost at the expected load split induced by `s`.
    pub fn expected_social_cost(&self, s: &SignalVector, weights: &[f64]) -> f64 {
        let split = expected_split(s, weights, &self.types);
        social_cost_unchecked(&self.costs, &split)
    }
}

/// Lowest-index argmin of `ω·lo + (1−ω)·hi`.
pub fn choose_route(omega: f64, s: &SignalVector) -> usize {
    let mut best = 0;
    for m in 1..s.routes() {
        let gap = omega * (s.lo(m) - s.lo(best)) + (1.0 - omega) * (s.hi(m) - s.hi(best));
        if gap < 0.0 {
            best = m;
        }
    }
    best
}

/// Share of a type's drivers choosing each route.
pub fn preference_fractions(s: &SignalVector, d: &DriverType) -> Vec<f64> {
    let routes = s.routes();
    let (lo, hi) = match *d {
        DriverType::UniformRandom { lo, hi } if lo < hi => (lo, hi),
        _ => {
            let mut out = vec![0.0; routes];
            out[choose_route(d.mean_omega(), s)] = 1.0;
            return out;
        }
    };
    let mut lengths = vec![0.0; routes];
    for (m, len) in lengths.iter_mut().enumerate() {
        let (mut a, mut b) = (lo, hi);
        for j in 0..routes {
            if j == m || a > b {
                continue;
            }
            // score_m − score_j = dh + ω·(dl − dh)
            let dl = s.lo(m) - s.lo(j);
            let dh = s.hi(m) - s.hi(j);
            let slope = dl - dh;
            if slope == 0.0 {
                let wins = if j < m { dh < 0.0 } else { dh <= 0.0 };
                if !wins {
                    a = f64::INFINITY;
                }
            } else {
                let root = -dh / slope;
                if slope > 0.0 {
                    b = b.min(root);
                } else {
                    a = a.max(root);
                }
            }
        }
        if b > a {
            *len = b - a;
        }
    }
    let total: f64 = lengths.iter().sum();
    if total <= 0.0 {
        let mut out = vec![0.0; routes];
        out[choose_route(d.mean_omega(), s)] = 1.0;
        return out;
    }
    let mut out: Vec<f64> = lengths.iter().map(|l| l / total).collect();
    // Put the rounding residue on the largest share so the sum is exactly 1.
    let residue = 1.0 - out.iter().sum::<f64>();
    if residue != 0.0 {
        let k = (0..routes).max_by(|&x, &y| out[x].total_cmp(&out[y])).unwrap_or(0);
        out[k] += residue;
    }
    out
}

/// Expected load fractions for population weights `weights`.
pub fn expected_split(s: &SignalVector, weights: &[f64], types: &TypeSet) -> Vec<f64> {
    let mut split = vec![0.0; s.routes()];
    for (w, d) in weights.iter().zip(types.iter()) {
        if *w == 0.0 {
            continue;
        }
        for (acc, f) in split.iter_mut().zip(preference_fractions(s, d)) {
            *acc += w * f;
        }
    }
    split
}

pub fn expected_counts(
    s: &SignalVector,
    pop: &PopulationMeasure,
    types: &TypeSet,
    n: usize,
) -> Vec<f64> {
    expected_split(s, &pop.weights, types)
        .into_iter()
        .map(|f| f * n as f64)
        .collect()
}

/// Routes every driver; uniform-type drivers draw a fresh weight each call.
pub fn realize_counts<R: Rng + ?Sized>(
    s: &SignalVector,
    pop: &PopulationMeasure,
    types: &TypeSet,
    rng: &mut R,
) -> Vec<u64> {
    let mut counts = vec![0u64; s.routes()];
    for (&k, d) in pop.counts.iter().zip(types.iter()) {
        match d.fixed_omega() {
            Some(omega) => counts[choose_route(omega, s)] += k,
            None => {
                let DriverType::UniformRandom { lo, hi } = *d else {
                    unreachable!()
                };
                for _ in 0..k {
                    counts[choose_route(rng.gen_range(lo..hi), s)] += 1;
                }
            }
        }
    }
    counts
}

/// Whether every route interval sits inside the min/max of the route's last
/// `r` realised travel times. Strict `lo < hi` is only required when the
/// window itself is not a single value.
pub fn validate_r_supported(s: &SignalVector, h: &HistoryWindow, r: usize) -> Result<bool> {
    if r == 0 || h.len() < r {
        return Err(Error::Precondition(format!(
            "window holds {} entries, {r} required",
            h.len()
        )));
    }
    if s.routes() != h.routes() {
        return Err(Error::Precondition("signal and history route counts differ".into()));
    }
    for m in 0..s.routes() {
        let w = h.window(m, r);
        let min = w.iter().copied().fold(f64::INFINITY, f64::min);
        let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = (s.lo(m), s.hi(m));
        if lo < min || hi > max || lo > hi || (min < max && lo == hi) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// What a signal generator sees when it is asked for the next broadcast.
pub struct SchemeContext<'a> {
    pub game: &'a Game,
    pub state: &'a TrafficState,
    /// The population about to respond. Only full-information schemes read it.
    pub population: &'a PopulationMeasure,
}

pub trait SignalScheme {
    fn name(&self) -> &str;
    /// Signal for period `ctx.state.t ≥ 2`; period 1 always broadcasts the
    /// initial signal.
    fn signal(&mut self, ctx: &SchemeContext<'_>) -> Result<SignalVector>;
}

/// Broadcasts the same signal forever.
#[derive(Debug, Clone)]
pub struct ConstantScheme(pub SignalVector);

impl SignalScheme for ConstantScheme {
    fn name(&self) -> &str {
        "constant"
    }
    fn signal(&mut self, _ctx: &SchemeContext<'_>) -> Result<SignalVector> {
        Ok(self.0.clone())
    }
}

/// Applies a broadcast: realises counts, records travel times, advances `t`.
pub fn advance<R: Rng + ?Sized>(
    game: &Game,
    state: &TrafficState,
    signal: SignalVector,
    pop: &PopulationMeasure,
    rng: &mut R,
) -> Result<TrafficState> {
    if signal.routes() != game.routes() {
        return Err(Error::Invalid("signal route count differs from the game".into()));
    }
    let counts = realize_counts(&signal, pop, &game.types, rng);
    let costs: Vec<f64> = game
        .costs
        .iter()
        .zip(&counts)
        .map(|(c, &k)| c.value(k as f64 / game.n as f64))
        .collect();
    let mut history = state.history.clone();
    history.push(&costs)?;
    Ok(TrafficState {
        t: state.t + 1,
        history,
        last_signal: signal,
        last_counts: counts,
    })
}

/// One closed-loop period: ask the scheme (or reuse the initial signal at
/// `t = 1`), then [`advance`].
pub fn step_dynamics<R: Rng + ?Sized>(
    game: &Game,
    state: &TrafficState,
    scheme: &mut dyn SignalScheme,
    pop: &PopulationMeasure,
    rng: &mut R,
) -> Result<TrafficState> {
    let signal = if state.history.is_empty() {
        state.last_signal.clone()
    } else {
        scheme.signal(&SchemeContext {
            game,
            state,
            population: pop,
        })?
    };
    advance(game, state, signal, pop, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn baseline_cost_values() {
        let c = baseline_costs();
        assert_eq!(eval_cost(&c[0], 0.0).unwrap(), 2.0);
        assert!((eval_cost(&c[0], 1.0).unwrap() - 9.2).abs() < 1e-12);
        assert!((eval_cost(&c[1], 0.5).unwrap() - 6.0).abs() < 1e-12);
        assert!(eval_cost(&c[0], 1.5).is_err());
    }

    #[test]
    fn social_cost_examples() {
        let c = baseline_costs();
        assert!((social_cost(&c, &[1.0, 0.0]).unwrap() - 9.2).abs() < 1e-12);
        assert!((social_cost(&c, &[0.0, 1.0]).unwrap() - 9.0).abs() < 1e-12);
        assert!((social_cost(&c, &[0.5, 0.5]).unwrap() - 4.225).abs() < 1e-12);
        assert!(social_cost(&c, &[0.6, 0.6]).is_err());
    }

    #[test]
    fn nonconvex_cost_rejected() {
        assert!(CostFunction::new(vec![1.0, 0.0, -1.0]).is_err());
        assert!(CostFunction::new(vec![-0.1, 1.0]).is_err());
    }

    #[test]
    fn route_choice_on_initial_signal() {
        let s = SignalVector::baseline_initial();
        assert_eq!(choose_route(1.0, &s), 0);
        assert_eq!(choose_route(0.0, &s), 1);
        assert_eq!(choose_route(0.5, &s), 0);
    }

    #[test]
    fn uniform_fractions() {
        let s = SignalVector::baseline_initial();
        let u = DriverType::UniformRandom { lo: 0.0, hi: 1.0 };
        let f = preference_fractions(&s, &u);
        assert!((f[0] - 0.5).abs() < 1e-12 && (f[1] - 0.5).abs() < 1e-12);
        let same = SignalVector::new(vec![(1.0, 2.0), (1.0, 2.0)]).unwrap();
        assert_eq!(preference_fractions(&same, &u), vec![1.0, 0.0]);
    }

    #[test]
    fn expected_counts_on_baseline_setup() {
        let types = TypeSet::baseline();
        let pop = PopulationMeasure::uniform(5, 30);
        let e = expected_counts(&SignalVector::baseline_initial(), &pop, &types, 30);
        assert!((e[0] - 18.0).abs() < 1e-9 && (e[1] - 12.0).abs() < 1e-9);
    }

    #[test]
    fn largest_remainder_rounding() {
        let p = PopulationMeasure::from_weights(vec![0.34, 0.33, 0.33], 10).unwrap();
        assert_eq!(p.counts.iter().sum::<u64>(), 10);
        assert_eq!(p.counts, vec![4, 3, 3]);
    }

    #[test]
    fn r_supported_examples() {
        let h = HistoryWindow::from_entries(vec![vec![4.0, 5.5, 4.8]; 2], 3).unwrap();
        let ok = SignalVector::new(vec![(4.2, 5.0); 2]).unwrap();
        let bad = SignalVector::new(vec![(3.9, 5.0); 2]).unwrap();
        assert!(validate_r_supported(&ok, &h, 3).unwrap());
        assert!(!validate_r_supported(&bad, &h, 3).unwrap());
        let flat = HistoryWindow::from_entries(vec![vec![5.0; 3]; 2], 3).unwrap();
        let point = SignalVector::new(vec![(5.0, 5.0); 2]).unwrap();
        assert!(validate_r_supported(&point, &flat, 3).unwrap());
        assert!(validate_r_supported(&point, &flat, 4).is_err());
    }

    #[test]
    fn window_keeps_newest() {
        let mut h = HistoryWindow::new(1, 2).unwrap();
        for c in [1.0, 2.0, 3.0] {
            h.push(&[c]).unwrap();
        }
        assert_eq!(h.window(0, 5), vec![2.0, 3.0]);
        assert_eq!(h.window(0, 1), vec![3.0]);
    }

    #[test]
    fn steps_conserve_drivers() {
        let game = Game::baseline();
        let pop = PopulationMeasure::uniform(5, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut scheme = ConstantScheme(SignalVector::baseline_initial());
        let mut state = TrafficState::initial(SignalVector::baseline_initial(), 3).unwrap();
        for _ in 0..2 {
            state = step_dynamics(&game, &state, &mut scheme, &pop, &mut rng).unwrap();
            assert_eq!(state.last_counts.iter().sum::<u64>(), 30);
        }
        assert_eq!(state.t, 3);
    }

    #[test]
    fn signal_serialises_flat() {
        let s = SignalVector::baseline_initial();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, "[0.5,1.0,0.6,0.9]");
        let back: SignalVector = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
