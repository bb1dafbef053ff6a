//! Best supported signal when the next population is known.
//!
//! The search runs over assignments of the fixed-weight types to routes.
//! Each assignment is checked with a big-M feasibility LP. For two routes the
//! remaining freedom is one-dimensional (the direction of the score
//! difference, see [`crate::geometry`]), and the load on route 1 moves
//! monotonically along it, so the inner problem is a convex–concave
//! minimisation of the social cost over an interval of loads.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::dc::{ccp_interval, dc_decompose};
use crate::error::{Error, Result};
use crate::geometry::{self, DirectionPiece, Pt};
use crate::model::{
    choose_route, expected_split, social_cost_unchecked, CostFunction, DriverType,
    PopulationMeasure, SchemeContext, SignalScheme, SignalVector, TypeSet,
};
use crate::poly::Polynomial;
use crate::schemes::{supported_box, BoxMode, SupportedBox};

pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Margin that turns "strictly preferred" into a closed constraint.
pub const STRICT_MARGIN: f64 = 1e-7;

/// Which route every type is sent to.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartitionAssignment {
    routes: usize,
    choice: Vec<usize>,
}

impl PartitionAssignment {
    pub fn new(routes: usize, choice: Vec<usize>) -> Result<Self> {
        if choice.iter().any(|&m| m >= routes) {
            return Err(Error::Invalid("assignment names a route that does not exist".into()));
        }
        Ok(PartitionAssignment { routes, choice })
    }

    pub fn routes(&self) -> usize {
        self.routes
    }

    pub fn route_of(&self, omega: usize) -> usize {
        self.choice[omega]
    }

    pub fn choices(&self) -> &[usize] {
        &self.choice
    }

    /// Indicator `x[ω][m]`.
    pub fn x(&self, omega: usize, m: usize) -> bool {
        self.choice[omega] == m
    }

    /// Binary matrix with one row per type.
    pub fn matrix(&self) -> Vec<Vec<u8>> {
        self.choice
            .iter()
            .map(|&c| (0..self.routes).map(|m| u8::from(m == c)).collect())
            .collect()
    }
}

/// `m^types`, saturating.
pub fn assignment_count(types: usize, m: usize) -> u128 {
    let mut n: u128 = 1;
    for _ in 0..types {
        n = n.saturating_mul(m as u128);
    }
    n
}

pub(crate) fn lexicographic(types: usize, m: usize) -> Vec<Vec<usize>> {
    let total = assignment_count(types, m) as usize;
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![0usize; types];
    for _ in 0..total {
        out.push(cur.clone());
        for k in (0..types).rev() {
            cur[k] += 1;
            if cur[k] < m {
                break;
            }
            cur[k] = 0;
        }
    }
    out
}

/// All `M^|Ω|` assignments in lexicographic order (first type most
/// significant).
pub fn enumerate_assignments(types: &TypeSet, m: usize) -> Result<Vec<PartitionAssignment>> {
    enumerate_assignments_capped(types.len(), m, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_assignments_capped(
    types: usize,
    m: usize,
    cap: u128,
) -> Result<Vec<PartitionAssignment>> {
    let count = assignment_count(types, m);
    if count > cap {
        return Err(Error::TooManyAssignments { count, cap });
    }
    Ok(lexicographic(types, m)
        .into_iter()
        .map(|choice| PartitionAssignment { routes: m, choice })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityWitness {
    pub signal: SignalVector,
    /// `Z·(1 − x[ω][m]) − margin − (score_m − score_j)` for every fixed type
    /// `ω` and ordered route pair `(m, j)`, in that nesting order.
    pub slacks: Vec<f64>,
    /// Common extra margin by which the assigned routes win.
    pub margin: f64,
}

/// The big-M constant: twice the largest travel time that can occur.
pub fn big_m_constant(costs: &[CostFunction], bx: &SupportedBox) -> f64 {
    let c = costs
        .iter()
        .map(|c| c.value(0.0).max(c.value(1.0)))
        .fold(0.0, f64::max);
    2.0 * c.max(bx.max_entry()).max(1.0)
}

fn score_diff_terms(omega: f64, m: usize, j: usize) -> [(usize, f64); 4] {
    // score_m − score_j over variables lo_k = 2k, hi_k = 2k + 1
    [
        (2 * m, omega),
        (2 * m + 1, 1.0 - omega),
        (2 * j, -omega),
        (2 * j + 1, -(1.0 - omega)),
    ]
}

/// Big-M LP with some types pinned to routes; maximises the common margin.
pub(crate) fn feasibility_lp(
    pinned: &[(usize, f64, usize)],
    bx: &SupportedBox,
    z: f64,
) -> Result<Option<FeasibilityWitness>> {
    let routes = bx.routes();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let mut vars = Vec::with_capacity(2 * routes);
    for m in 0..routes {
        vars.push(lp.add_var(0.0, bx.lo_range[m]));
        vars.push(lp.add_var(0.0, bx.hi_range[m]));
    }
    let delta = lp.add_var(1.0, (0.0, bx.max_entry().max(1.0)));
    for m in 0..routes {
        lp.add_constraint([(vars[2 * m], 1.0), (vars[2 * m + 1], -1.0)], ComparisonOp::Le, 0.0);
    }
    for &(_, omega, k) in pinned {
        for m in 0..routes {
            for j in 0..routes {
                if j == m {
                    continue;
                }
                let eps = if j < m { STRICT_MARGIN } else { 0.0 };
                let x = if m == k { 1.0 } else { 0.0 };
                let mut expr: Vec<_> = score_diff_terms(omega, m, j)
                    .iter()
                    .map(|&(v, c)| (vars[v], c))
                    .collect();
                if m == k {
                    expr.push((delta, 1.0));
                }
                lp.add_constraint(expr, ComparisonOp::Le, z * (1.0 - x) - eps);
            }
        }
    }
    let solution = match lp.solve() {
        Ok(outcome) => outcome
            .into_solution()
            .map_err(|_| Error::Lp("feasibility LP was interrupted".into()))?,
        Err(microlp::Error::Infeasible) => return Ok(None),
        Err(e) => return Err(Error::Lp(e.to_string())),
    };
    let raw: Vec<(f64, f64)> = (0..routes)
        .map(|m| {
            let lo = solution.var_value(vars[2 * m]).max(0.0);
            (lo, solution.var_value(vars[2 * m + 1]).max(lo))
        })
        .collect();
    let signal = bx.project(&SignalVector::new(raw)?);
    let mut slacks = Vec::with_capacity(pinned.len() * routes * routes.saturating_sub(1));
    for &(_, omega, k) in pinned {
        if choose_route(omega, &signal) != k {
            return Ok(None);
        }
        for m in 0..routes {
            for j in 0..routes {
                if j == m {
                    continue;
                }
                let eps = if j < m { STRICT_MARGIN } else { 0.0 };
                let x = if m == k { 1.0 } else { 0.0 };
                let g = omega * (signal.lo(m) - signal.lo(j))
                    + (1.0 - omega) * (signal.hi(m) - signal.hi(j));
                slacks.push(z * (1.0 - x) - eps - g);
            }
        }
    }
    Ok(Some(FeasibilityWitness {
        signal,
        slacks,
        margin: solution.var_value(delta).max(0.0),
    }))
}

/// A signal in `bx` under which every fixed-weight type strictly prefers its
/// assigned route (lowest index winning ties), or `None` if there is none.
/// Rows for uniform types are ignored.
pub fn assignment_feasibility(
    x: &PartitionAssignment,
    bx: &SupportedBox,
    types: &TypeSet,
    costs: &[CostFunction],
) -> Result<Option<FeasibilityWitness>> {
    if x.routes() != bx.routes() || x.choices().len() != types.len() {
        return Err(Error::Precondition("assignment does not match box or types".into()));
    }
    let pinned: Vec<(usize, f64, usize)> = types
        .fixed()
        .into_iter()
        .map(|(i, w)| (i, w, x.route_of(i)))
        .collect();
    feasibility_lp(&pinned, bx, big_m_constant(costs, bx))
}

/// Two-route signals sharing one assignment of the fixed types and one
/// monotone run of directions (or the zero difference).
#[derive(Debug, Clone)]
pub(crate) struct Family {
    pub choice: Vec<Option<usize>>,
    pub region: Vec<Pt>,
    /// `None` for the zero difference, where every type takes route 1.
    pub piece: Option<DirectionPiece>,
}

const T_MIN: f64 = -0.5;
const T_MAX: f64 = 1.5;

impl Family {
    /// Parameter range worth searching. Outside `[0, 1]` nothing changes, so
    /// infinite ends are cut at `[−0.5, 1.5]`.
    pub fn t_range(&self) -> (f64, f64) {
        match self.piece {
            None => (0.0, 0.0),
            Some(p) => (p.t_lo.clamp(T_MIN, T_MAX), p.t_hi.clamp(T_MIN, T_MAX)),
        }
    }

    /// Share of each type on route 1 at parameter `t`.
    pub fn route1_shares(&self, types: &TypeSet, t: f64) -> Vec<f64> {
        types
            .iter()
            .zip(&self.choice)
            .map(|(d, c)| match (c, self.piece) {
                (Some(route), _) => f64::from(*route == 0),
                (None, None) => 1.0,
                (None, Some(p)) => {
                    let DriverType::UniformRandom { lo, hi } = *d else {
                        unreachable!("fixed types carry a choice")
                    };
                    let share = if p.sigma > 0 { (t - lo) / (hi - lo) } else { (hi - t) / (hi - lo) };
                    share.clamp(0.0, 1.0)
                }
            })
            .collect()
    }

    pub fn route1_load(&self, types: &TypeSet, weights: &[f64], t: f64) -> f64 {
        self.route1_shares(types, t)
            .iter()
            .zip(weights)
            .map(|(s, w)| s * w)
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// A concrete signal realising parameter `t` that keeps every fixed type
    /// on its assigned route.
    pub fn signal_at(&self, bx: &SupportedBox, types: &TypeSet, t: f64) -> Option<SignalVector> {
        let Some(p) = self.piece else {
            return geometry::signal_for_difference(bx, 0.0, 0.0, 1e-9);
        };
        let replays = |s: &SignalVector| {
            types.iter().zip(&self.choice).all(|(d, c)| match (c, d.fixed_omega()) {
                (Some(route), Some(w)) => choose_route(w, s) == *route,
                _ => true,
            })
        };
        let t = t.clamp(p.t_lo, p.t_hi);
        let at = |u: f64| -> Option<SignalVector> {
            let d = p.direction(u);
            let (l0, l1) = geometry::ray_segment(&self.region, d)?;
            let mut first = None;
            for frac in [0.5, 0.9, 0.1, 0.99, 0.01] {
                let lam = l0 + frac * (l1 - l0);
                if let Some(s) = geometry::signal_for_difference(bx, lam * d[0], lam * d[1], 1e-9) {
                    if replays(&s) {
                        return Some(s);
                    }
                    first.get_or_insert(s);
                }
            }
            first
        };
        let inward = |step: f64| {
            let nudge = |x: f64| step * x.abs().max(1.0);
            let mut u = t;
            if p.t_lo.is_finite() && p.t_hi.is_finite() && p.t_hi - p.t_lo > 4.0 * nudge(u) {
                u = u.clamp(p.t_lo + nudge(p.t_lo), p.t_hi - nudge(p.t_hi));
            } else if p.t_lo.is_finite() && !p.t_hi.is_finite() {
                u = u.max(p.t_lo + nudge(p.t_lo));
            } else if !p.t_lo.is_finite() && p.t_hi.is_finite() {
                u = u.min(p.t_hi - nudge(p.t_hi));
            }
            u
        };
        // Near a tie the ray can graze the region; step further inside until
        // the realised signal replays the assignment, then bisect back.
        let mut fallback = None;
        let mut bad = t;
        for step in [1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3] {
            let u = inward(step);
            match at(u) {
                Some(s) if replays(&s) => {
                    let (mut lo, mut hi, mut best) = (bad, u, s);
                    for _ in 0..40 {
                        let mid = 0.5 * (lo + hi);
                        match at(mid) {
                            Some(s) if replays(&s) => {
                                hi = mid;
                                best = s;
                            }
                            _ => lo = mid,
                        }
                    }
                    return Some(best);
                }
                Some(s) => {
                    fallback.get_or_insert(s);
                    bad = u;
                }
                None => bad = u,
            }
        }
        fallback
    }
}

/// Families of signals for one assignment of the fixed types.
pub(crate) fn families_for(
    bx: &SupportedBox,
    types: &TypeSet,
    choice: &[Option<usize>],
) -> Vec<Family> {
    let mut region = geometry::difference_polygon(bx);
    for (d, c) in types.iter().zip(choice) {
        let (Some(route), Some(w)) = (c, d.fixed_omega()) else {
            continue;
        };
        region = if *route == 0 {
            geometry::clip(&region, [w, 1.0 - w], 0.0)
        } else {
            geometry::clip(&region, [-w, -(1.0 - w)], -STRICT_MARGIN)
        };
        if region.is_empty() {
            return Vec::new();
        }
    }
    let mut out: Vec<Family> = geometry::direction_pieces(&region)
        .into_iter()
        .map(|p| Family {
            choice: choice.to_vec(),
            region: region.clone(),
            piece: Some(p),
        })
        .collect();
    let all_first = choice.iter().all(|c| c.map_or(true, |r| r == 0));
    if all_first && geometry::contains(&region, [0.0, 0.0], 1e-12) {
        out.push(Family {
            choice: choice.to_vec(),
            region,
            piece: None,
        });
    }
    out
}

/// Parameter in `[ta, tb]` where the monotone `load` reaches `target`.
pub(crate) fn invert_monotone(load: impl Fn(f64) -> f64, ta: f64, tb: f64, target: f64) -> f64 {
    let increasing = load(tb) >= load(ta);
    let (mut a, mut b) = (ta, tb);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let below = load(m) < target;
        if below == increasing {
            a = m;
        } else {
            b = m;
        }
    }
    let cands = [a, b, 0.5 * (a + b)];
    cands
        .into_iter()
        .min_by(|x, y| (load(*x) - target).abs().total_cmp(&(load(*y) - target).abs()))
        .unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchMode {
    /// Enumerate up to the cap, branch and bound beyond it.
    #[default]
    Auto,
    Enumerate,
    BranchAndBound,
}

#[derive(Debug, Clone)]
pub struct FullInfoOptions {
    pub mode: SearchMode,
    pub enumeration_cap: u128,
    pub tol_value: f64,
    pub tol_grad: f64,
    pub max_iter: usize,
    /// Interior starting points for the convex–concave iteration.
    pub starts: usize,
}

impl Default for FullInfoOptions {
    fn default() -> Self {
        FullInfoOptions {
            mode: SearchMode::Auto,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            tol_value: 1e-8,
            tol_grad: 1e-6,
            max_iter: 500,
            starts: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub signal: SignalVector,
    /// Expected social cost at `signal`.
    pub value: f64,
    /// Fixed-type assignments that passed the feasibility LP.
    pub feasible_assignments: usize,
    /// Whether the inner solve met its stationarity tolerance.
    pub certified: bool,
}

struct Candidate {
    signal: SignalVector,
    value: f64,
    certified: bool,
}

struct Solver<'a> {
    bx: &'a SupportedBox,
    weights: &'a [f64],
    types: &'a TypeSet,
    costs: &'a [CostFunction],
    opts: &'a FullInfoOptions,
    z: f64,
    dc: Option<(Polynomial, Polynomial)>,
}

impl<'a> Solver<'a> {
    fn evaluate(&self, s: &SignalVector) -> f64 {
        social_cost_unchecked(self.costs, &expected_split(s, self.weights, self.types))
    }

    fn pinned(&self, choice: &[Option<usize>]) -> Vec<(usize, f64, usize)> {
        choice
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|r| (i, self.types.get(i).fixed_omega().unwrap(), r)))
            .collect()
    }

    /// Best signal for a complete assignment of the fixed types, or `None`
    /// when the assignment is infeasible.
    fn solve_assignment(&self, choice: &[Option<usize>]) -> Result<Option<Candidate>> {
        let Some(witness) = feasibility_lp(&self.pinned(choice), self.bx, self.z)? else {
            return Ok(None);
        };
        let mut best = Candidate {
            value: self.evaluate(&witness.signal),
            signal: witness.signal.clone(),
            certified: true,
        };
        let has_uniform = choice.iter().any(Option::is_none);
        if let Some((g, h)) = &self.dc {
            for fam in families_for(self.bx, self.types, choice) {
                if let Some(c) = self.solve_family(&fam, g, h)? {
                    if c.value < best.value {
                        best = c;
                    }
                }
            }
        } else if has_uniform {
            let (s, v) = pattern_search(witness.signal, &|s| self.evaluate(s), self.bx);
            best = Candidate {
                signal: s,
                value: v,
                certified: false,
            };
        }
        Ok(Some(best))
    }

    fn solve_family(&self, fam: &Family, g: &Polynomial, h: &Polynomial) -> Result<Option<Candidate>> {
        let (ta, tb) = fam.t_range();
        let load = |t: f64| fam.route1_load(self.types, self.weights, t);
        let (pa, pb) = (load(ta), load(tb));
        let (lo, hi) = if pa <= pb { (pa, pb) } else { (pb, pa) };
        let f = g.sub(h);
        let mut starts = vec![lo, hi, f.minimize_on(lo, hi).0];
        for k in 1..=self.opts.starts {
            starts.push(lo + (hi - lo) * k as f64 / (self.opts.starts + 1) as f64);
        }
        let mut best: Option<(f64, f64, bool)> = None;
        for x0 in starts {
            let r = ccp_interval(
                g,
                h,
                lo,
                hi,
                x0,
                self.opts.tol_value,
                self.opts.tol_grad,
                self.opts.max_iter,
            );
            if best.map_or(true, |b| r.value < b.1) {
                best = Some((r.x, r.value, r.converged));
            }
        }
        let (mut p_star, v_star, converged) = best.expect("at least one start");
        // Tighten the stationary point beyond the CCP stopping tolerance.
        let span = 1e-3 * (hi - lo) + 1e-9;
        let (xp, vp) = f.minimize_on((p_star - span).max(lo), (p_star + span).min(hi));
        if vp < v_star {
            p_star = xp;
        }
        let t = if fam.piece.is_none() {
            0.0
        } else {
            invert_monotone(load, ta, tb, p_star)
        };
        let Some(signal) = fam.signal_at(self.bx, self.types, t) else {
            return Ok(None);
        };
        Ok(Some(Candidate {
            value: self.evaluate(&signal),
            signal,
            certified: converged,
        }))
    }

    fn fixed_indices(&self) -> Vec<usize> {
        self.types.fixed().into_iter().map(|(i, _)| i).collect()
    }

    fn enumerate(&self, best: &mut Candidate) -> Result<usize> {
        let fixed = self.fixed_indices();
        let routes = self.bx.routes();
        let mut feasible = 0;
        for combo in lexicographic(fixed.len(), routes) {
            let mut choice = vec![None; self.types.len()];
            for (&i, &r) in fixed.iter().zip(&combo) {
                choice[i] = Some(r);
            }
            if let Some(c) = self.solve_assignment(&choice)? {
                feasible += 1;
                if c.value < best.value {
                    *best = c;
                }
            }
        }
        Ok(feasible)
    }

    fn branch_and_bound(&self, best: &mut Candidate) -> Result<usize> {
        let fixed = self.fixed_indices();
        let mut choice = vec![None; self.types.len()];
        let mut leaves = 0;
        self.descend(&fixed, 0, &mut choice, best, &mut leaves)?;
        Ok(leaves)
    }

    fn descend(
        &self,
        fixed: &[usize],
        depth: usize,
        choice: &mut Vec<Option<usize>>,
        best: &mut Candidate,
        leaves: &mut usize,
    ) -> Result<()> {
        if depth == fixed.len() {
            if let Some(c) = self.solve_assignment(choice)? {
                *leaves += 1;
                if c.value < best.value {
                    *best = c;
                }
            }
            return Ok(());
        }
        let i = fixed[depth];
        for r in 0..self.bx.routes() {
            choice[i] = Some(r);
            let bound = self.lagrangian_bound(choice);
            if bound < best.value - 1e-12
                && feasibility_lp(&self.pinned(choice), self.bx, self.z)?.is_some()
            {
                self.descend(fixed, depth + 1, choice, best, leaves)?;
            }
        }
        choice[i] = None;
        Ok(())
    }

    /// Lower bound on the social cost with the pinned types' loads fixed and
    /// everyone else free, from the Lagrangian dual of `Σ p_m = 1`.
    fn lagrangian_bound(&self, choice: &[Option<usize>]) -> f64 {
        let routes = self.bx.routes();
        let mut base = vec![0.0; routes];
        let mut free = 0.0;
        for (c, w) in choice.iter().zip(self.weights) {
            match c {
                Some(r) => base[*r] += w,
                None => free += w,
            }
        }
        let terms: Vec<Polynomial> = self
            .costs
            .iter()
            .map(|c| Polynomial::x().mul(c.polynomial()))
            .collect();
        let dual = |lambda: f64| {
            lambda
                + terms
                    .iter()
                    .zip(&base)
                    .map(|(t, &b)| {
                        let q = t.sub(&Polynomial::new(vec![0.0, lambda]));
                        q.minimize_on(b.min(1.0), (b + free).min(1.0)).1
                    })
                    .sum::<f64>()
        };
        let span = terms
            .iter()
            .map(|t| t.derivative().maximize_on(0.0, 1.0).1.abs() + t.derivative().eval(0.0).abs())
            .fold(1.0, f64::max);
        // The dual is concave in λ; golden-section search for its maximum.
        let (mut a, mut b) = (-span, span);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut best = dual(0.0).max(dual(a)).max(dual(b));
        for _ in 0..80 {
            let x1 = b - phi * (b - a);
            let x2 = a + phi * (b - a);
            let (f1, f2) = (dual(x1), dual(x2));
            best = best.max(f1).max(f2);
            if f1 < f2 {
                a = x1;
            } else {
                b = x2;
            }
        }
        best - 1e-9
    }
}

/// Compass search over the box, halving the step until it is negligible.
fn pattern_search(
    start: SignalVector,
    f: &dyn Fn(&SignalVector) -> f64,
    bx: &SupportedBox,
) -> (SignalVector, f64) {
    let mut x = start.to_flat();
    let mut fx = f(&start);
    let span = bx.max_entry().max(1e-9);
    let mut step = 0.25 * span;
    let to_signal = |v: &[f64]| bx.project(&SignalVector::from_flat(&clamp_pairs(v)).expect("valid"));
    while step > 1e-9 * span {
        let mut improved = false;
        for k in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[k] += dir * step;
                let s = to_signal(&y);
                let fy = f(&s);
                if fy < fx - 1e-15 {
                    x = s.to_flat();
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (to_signal(&x), fx)
}

fn clamp_pairs(v: &[f64]) -> Vec<f64> {
    v.chunks(2)
        .flat_map(|c| {
            let lo = c[0].max(0.0);
            [lo, c[1].max(lo)]
        })
        .collect()
}

/// Minimises the expected next-step social cost over supported signals for a
/// known population.
pub fn optimize_full_info(
    bx: &SupportedBox,
    pop: &PopulationMeasure,
    types: &TypeSet,
    costs: &[CostFunction],
    n: usize,
) -> Result<Optimum> {
    let _ = n;
    optimize_full_info_with(bx, &pop.weights, types, costs, &FullInfoOptions::default())
}

/// [`optimize_full_info`] for arbitrary population weights and options.
pub fn optimize_full_info_with(
    bx: &SupportedBox,
    weights: &[f64],
    types: &TypeSet,
    costs: &[CostFunction],
    opts: &FullInfoOptions,
) -> Result<Optimum> {
    if bx.routes() != costs.len() {
        return Err(Error::Precondition("box and cost functions disagree on routes".into()));
    }
    if weights.len() != types.len() {
        return Err(Error::Precondition("weights and types disagree in length".into()));
    }
    crate::model::check_simplex(weights, "population weights")?;
    let dc = if bx.routes() == 2 {
        dc_decompose(costs, 2)?.univariate()
    } else {
        None
    };
    let solver = Solver {
        bx,
        weights,
        types,
        costs,
        opts,
        z: big_m_constant(costs, bx),
        dc,
    };
    let corner = bx.corner();
    let mut best = Candidate {
        value: solver.evaluate(&corner),
        signal: corner,
        certified: true,
    };
    let count = assignment_count(types.fixed().len(), bx.routes());
    let branch = match opts.mode {
        SearchMode::Auto => count > opts.enumeration_cap,
        SearchMode::Enumerate => {
            if count > opts.enumeration_cap {
                return Err(Error::TooManyAssignments {
                    count,
                    cap: opts.enumeration_cap,
                });
            }
            false
        }
        SearchMode::BranchAndBound => true,
    };
    let feasible = if branch {
        solver.branch_and_bound(&mut best)?
    } else {
        solver.enumerate(&mut best)?
    };
    if !best.certified && bx.routes() == 2 {
        return Err(Error::IterationLimit {
            iterations: opts.max_iter,
            incumbent: Some((best.signal, best.value)),
        });
    }
    Ok(Optimum {
        signal: best.signal,
        value: best.value,
        feasible_assignments: feasible,
        certified: best.certified,
    })
}

/// Best point of a uniform grid over the two-route score differences
/// `(lo_1 − lo_2, hi_1 − hi_2)`. Each grid point that some box signal
/// realises is mapped back to such a signal and evaluated.
pub fn grid_oracle(
    bx: &SupportedBox,
    pop: &PopulationMeasure,
    types: &TypeSet,
    costs: &[CostFunction],
    n: usize,
    resolution: usize,
) -> Result<(SignalVector, f64)> {
    let _ = n;
    if bx.routes() != 2 || costs.len() != 2 {
        return Err(Error::Precondition("the grid oracle handles two routes".into()));
    }
    if resolution < 2 {
        return Err(Error::Precondition("grid resolution must be at least 2".into()));
    }
    let (l1, l2, h1, h2) = (bx.lo_range[0], bx.lo_range[1], bx.hi_range[0], bx.hi_range[1]);
    let a_rng = (l1.0 - l2.1, l1.1 - l2.0);
    let b_rng = (h1.0 - h2.1, h1.1 - h2.0);
    let at = |r: (f64, f64), k: usize| r.0 + (r.1 - r.0) * (k as f64 / (resolution - 1) as f64);
    let mut best: Option<(SignalVector, f64)> = None;
    for i in 0..resolution {
        let a = at(a_rng, i);
        for j in 0..resolution {
            let b = at(b_rng, j);
            let Some(s) = geometry::signal_for_difference(bx, a, b, 1e-12) else {
                continue;
            };
            let v = social_cost_unchecked(costs, &expected_split(&s, &pop.weights, types));
            if best.as_ref().map_or(true, |(_, bv)| v < *bv) {
                best = Some((s, v));
            }
        }
    }
    best.ok_or_else(|| Error::Domain("no grid point is realisable".into()))
}

/// Optimised scheme that is told the responding population.
#[derive(Debug, Clone)]
pub struct FullInfoScheme {
    pub r: usize,
    pub mode: BoxMode,
    pub options: FullInfoOptions,
}

impl FullInfoScheme {
    pub fn new(r: usize, mode: BoxMode) -> Self {
        FullInfoScheme {
            r,
            mode,
            options: FullInfoOptions::default(),
        }
    }
}

impl SignalScheme for FullInfoScheme {
    fn name(&self) -> &str {
        "r_supported_full"
    }

    fn signal(&mut self, ctx: &SchemeContext<'_>) -> Result<SignalVector> {
        let bx = supported_box(&ctx.state.history, self.r, self.mode)?;
        let n = ctx.game.n as f64;
        let weights: Vec<f64> = ctx.population.counts.iter().map(|&c| c as f64 / n).collect();
        Ok(optimize_full_info_with(&bx, &weights, &ctx.game.types, &ctx.game.costs, &self.options)?.signal)
    }
}
