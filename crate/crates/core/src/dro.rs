//! Worst-case expected social cost over all population laws with a given
//! mean `E` and second moment `Q`, and the signal minimising it.
//!
//! A law is represented by scenario blocks `(W_ω, w_ω, q_ω)` whose sum is
//! `[[Q, E], [Eᵀ, 1]]`. Block `ω` stands for a scenario of mass `q_ω` and
//! mean population `w_ω / q_ω`, and contributes `q_ω · C(Fᵀ w_ω / q_ω)` where
//! `F` holds the route shares of each type under the signal.
//!
//! Only the loads `Fᵀ μ` enter the objective, so the problem is solved over
//! load scenarios with mean `Fᵀ E` and covariance at most `Fᵀ Σ F`
//! (`Σ = Q − E Eᵀ`) and lifted back to blocks afterwards. For two routes the
//! load problem is a one-dimensional moment problem, solved exactly as a
//! linear program with column generation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::full_info::{
    assignment_count, big_m_constant, families_for, optimize_full_info_with, FullInfoOptions,
    Optimum, PartitionAssignment,
};
use crate::model::{
    preference_fractions, social_cost_unchecked, CostFunction, SchemeContext, SignalScheme,
    SignalVector, TypeSet,
};
use crate::poly::Polynomial;
use crate::schemes::{supported_box, BoxMode, SupportedBox};

/// First and second moments of the random population vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MomentRepr", into = "MomentRepr")]
pub struct MomentInfo {
    e: DVector<f64>,
    q: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MomentRepr {
    #[serde(rename = "E")]
    e: Vec<f64>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
}

impl TryFrom<MomentRepr> for MomentInfo {
    type Error = Error;
    fn try_from(r: MomentRepr) -> Result<Self> {
        MomentInfo::new(r.e, r.q)
    }
}

impl From<MomentInfo> for MomentRepr {
    fn from(m: MomentInfo) -> Self {
        let k = m.e.len();
        MomentRepr {
            e: m.e.iter().copied().collect(),
            q: (0..k).map(|i| (0..k).map(|j| m.q[(i, j)]).collect()).collect(),
        }
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Eigenvalue clipping onto the PSD cone.
fn psd_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose()
}

/// Relative eigenvalue below which a covariance direction counts as rounding
/// noise.
const RANK_CUT: f64 = 1e-9;

/// Pseudo-inverse of a symmetric PSD matrix, dropping eigenvalues below a
/// relative cutoff.
fn symmetric_pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let cut = RANK_CUT * eig.eigenvalues.amax();
    let inv = eig.eigenvalues.map(|l| if l > cut { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

impl MomentInfo {
    pub fn new(e: Vec<f64>, q: Vec<Vec<f64>>) -> Result<Self> {
        let k = e.len();
        if q.len() != k || q.iter().any(|row| row.len() != k) {
            return Err(Error::Invalid(format!("Q must be {k} by {k}")));
        }
        let m = MomentInfo {
            e: DVector::from_vec(e),
            q: DMatrix::from_fn(k, k, |i, j| q[i][j]),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn from_parts(e: DVector<f64>, q: DMatrix<f64>) -> Result<Self> {
        let m = MomentInfo { e, q };
        m.validate()?;
        Ok(m)
    }

    /// The point mass at `e`.
    pub fn point(e: &[f64]) -> Result<Self> {
        let e = DVector::from_column_slice(e);
        let q = &e * e.transpose();
        MomentInfo::from_parts(e, q)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.e.len();
        if k == 0 || self.q.nrows() != k || self.q.ncols() != k {
            return Err(Error::Invalid("moment dimensions disagree".into()));
        }
        if self.e.iter().chain(self.q.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Invalid("moments must be finite".into()));
        }
        if (self.e.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("E sums to {}, not 1", self.e.sum())));
        }
        if self.e.iter().any(|&x| !(-1e-12..=1.0 + 1e-12).contains(&x)) {
            return Err(Error::Invalid("E has an entry outside [0, 1]".into()));
        }
        if (&self.q - self.q.transpose()).amax() > 1e-12 {
            return Err(Error::Invalid("Q is not symmetric".into()));
        }
        if min_eigenvalue(&self.q) < -1e-9 {
            return Err(Error::Invalid("Q is not positive semidefinite".into()));
        }
        if min_eigenvalue(&self.covariance()) < -1e-9 {
            return Err(Error::Invalid("Q − E Eᵀ is not positive semidefinite".into()));
        }
        Ok(())
    }

    pub fn e(&self) -> &DVector<f64> {
        &self.e
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.e.len()
    }

    /// `Q − E Eᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.q - &self.e * self.e.transpose()
    }

    /// Whether the only law with these moments is the point mass at `E`.
    pub fn is_point_mass(&self, tol: f64) -> bool {
        self.covariance().amax() <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub moments: MomentInfo,
    /// Frobenius distance moved by the PSD repair of the sample covariance.
    pub projection_distance: f64,
}

/// Sample mean and sample second moment of population weight vectors.
pub fn estimate_moments(samples: &[Vec<f64>]) -> Result<MomentEstimate> {
    if samples.len() < 2 {
        return Err(Error::Precondition("at least two samples are needed".into()));
    }
    let k = samples[0].len();
    if k == 0 || samples.iter().any(|s| s.len() != k) {
        return Err(Error::Precondition("samples have different lengths".into()));
    }
    let n = samples.len() as f64;
    let mut e = DVector::zeros(k);
    let mut q = DMatrix::zeros(k, k);
    for s in samples {
        let v = DVector::from_column_slice(s);
        e += &v;
        q += &v * v.transpose();
    }
    e /= n;
    q /= n;
    let q = (&q + q.transpose()) * 0.5;
    let cov = &q - &e * e.transpose();
    let fixed = psd_part(&cov);
    let projection_distance = (&fixed - &cov).norm();
    let q = &e * e.transpose() + fixed;
    let q = (&q + q.transpose()) * 0.5;
    Ok(MomentEstimate {
        moments: MomentInfo::from_parts(e, q)?,
        projection_distance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub w_mat: DMatrix<f64>,
    pub w: DVector<f64>,
    pub q: f64,
}

/// One block per type. Unused blocks are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentBlocks {
    pub blocks: Vec<Block>,
}

impl MomentBlocks {
    /// Largest entrywise deviation of the block sum from `[[Q, E], [Eᵀ, 1]]`.
    pub fn coupling_error(&self, m: &MomentInfo) -> f64 {
        let k = m.dim();
        let mut w_sum = DMatrix::zeros(k, k);
        let mut v_sum = DVector::zeros(k);
        let mut q_sum = 0.0;
        for b in &self.blocks {
            w_sum += &b.w_mat;
            v_sum += &b.w;
            q_sum += b.q;
        }
        (w_sum - m.q())
            .amax()
            .max((v_sum - m.e()).amax())
            .max((q_sum - 1.0).abs())
    }

    /// Smallest eigenvalue over all bordered block matrices.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let k = b.w.len();
                let mut full = DMatrix::zeros(k + 1, k + 1);
                full.view_mut((0, 0), (k, k)).copy_from(&b.w_mat);
                for i in 0..k {
                    full[(i, k)] = b.w[i];
                    full[(k, i)] = b.w[i];
                }
                full[(k, k)] = b.q;
                min_eigenvalue(&full)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn verify(&self, m: &MomentInfo) -> Result<()> {
        let c = self.coupling_error(m);
        if c > 1e-8 {
            return Err(Error::Invalid(format!("blocks miss the moments by {c:e}")));
        }
        let e = self.min_eigenvalue();
        if e < -1e-9 {
            return Err(Error::Invalid(format!("a block has eigenvalue {e:e}")));
        }
        Ok(())
    }

    /// `Σ q_ω · C(Fᵀ w_ω / q_ω)` over blocks with positive mass.
    pub fn objective(&self, f: &DMatrix<f64>, costs: &[CostFunction]) -> f64 {
        self.blocks
            .iter()
            .filter(|b| b.q > 0.0)
            .map(|b| b.q * social_cost_unchecked(costs, &loads_of(f, &(&b.w / b.q))))
            .sum()
    }
}

fn loads_of(f: &DMatrix<f64>, mu: &DVector<f64>) -> Vec<f64> {
    (f.transpose() * mu).iter().map(|x| x.clamp(0.0, 1.0)).collect()
}

/// Route shares of every type under `s`, one row per type.
pub fn fraction_matrix(s: &SignalVector, types: &TypeSet) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = types.iter().map(|d| preference_fractions(s, d)).collect();
    DMatrix::from_fn(types.len(), s.routes(), |i, m| rows[i][m])
}

/// Binary share matrix of an assignment.
pub fn assignment_matrix(x: &PartitionAssignment) -> DMatrix<f64> {
    DMatrix::from_fn(x.choices().len(), x.routes(), |i, m| f64::from(u8::from(x.x(i, m))))
}

/// `C(ℓ, 1 − ℓ)` as a polynomial in the route-1 load.
fn two_route_cost(costs: &[CostFunction]) -> Polynomial {
    let x = Polynomial::x();
    let first = x.mul(costs[0].polynomial());
    let second = x.mul(costs[1].polynomial()).compose_affine(1.0, -1.0);
    first.add(&second)
}

/// `max E φ(X)` over laws on `[0, 1]` with mean `m`, variance at most `v`
/// and at most `max_atoms` support points.
fn line_moment_problem(phi: &Polynomial, m: f64, v: f64, max_atoms: usize) -> (f64, Vec<(f64, f64)>) {
    if max_atoms >= 3 {
        let lp = moment_lp(phi, m, v);
        (lp.value, lp.atoms)
    } else {
        two_point_search(phi, m, v)
    }
}

/// Solution of `max E φ(X)` over laws on `[0, 1]` with `E X = m`,
/// `E X² ≤ m² + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentLp {
    pub value: f64,
    /// `(x, probability)` of the support points.
    pub atoms: Vec<(f64, f64)>,
    pub converged: bool,
}

const SLACK: usize = usize::MAX;

/// Turns basic atoms into a law on `[0, 1]` with mean exactly `m` and
/// variance at most `v`. Atoms closer than `1e-4` are merged.
fn feasible_law(raw: Vec<(f64, f64)>, m: f64, v: f64) -> Vec<(f64, f64)> {
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for (x, p) in raw {
        match atoms.last_mut() {
            Some(last) if x - last.0 < 1e-4 => {
                let q = last.1 + p;
                last.0 = (last.0 * last.1 + x * p) / q;
                last.1 = q;
            }
            _ => atoms.push((x, p)),
        }
    }
    let mass: f64 = atoms.iter().map(|a| a.1).sum();
    if !(mass > 0.0) {
        return Vec::new();
    }
    for a in atoms.iter_mut() {
        a.1 /= mass;
    }
    let mean: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
    let var: f64 = atoms.iter().map(|a| a.1 * (a.0 - mean) * (a.0 - mean)).sum();
    let mut tau = if var > v { (v / var).sqrt() } else { 1.0 };
    // keep the recentred atoms inside [0, 1]
    for a in &atoms {
        let d = a.0 - mean;
        if d > 0.0 && m + tau * d > 1.0 {
            tau = tau.min((1.0 - m) / d);
        }
        if d < 0.0 && m + tau * d < 0.0 {
            tau = tau.min(m / -d);
        }
    }
    for a in atoms.iter_mut() {
        a.0 = (m + tau * (a.0 - mean)).clamp(0.0, 1.0);
    }
    atoms
}

/// Revised simplex on three rows with columns `(1, x, x²)` plus a slack,
/// pricing new columns over the whole interval by maximising
/// `φ(x) − y·(1, x, x²)`.
pub fn moment_lp(phi: &Polynomial, m: f64, v: f64) -> MomentLp {
    let m = m.clamp(0.0, 1.0);
    let v = v.max(0.0).min(m * (1.0 - m));
    let rhs = nalgebra::Vector3::new(1.0, m, m * m + v);
    if v <= 0.0 {
        return MomentLp {
            value: phi.eval(m),
            atoms: vec![(m, 1.0)],
            converged: true,
        };
    }
    let scale = 1.0 + phi.coeffs().iter().map(|c| c.abs()).sum::<f64>();
    let tol = 1e-12 * scale;
    let mut xs: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    xs.push(m);
    // a degenerate third basic column at whichever endpoint is farther
    let other = if m < 0.5 { 20 } else { 0 };
    let mut basis = [xs.len() - 1, SLACK, other];
    let column = |xs: &[f64], j: usize| -> (nalgebra::Vector3<f64>, f64) {
        if j == SLACK {
            (nalgebra::Vector3::new(0.0, 0.0, 1.0), 0.0)
        } else {
            let x = xs[j];
            (nalgebra::Vector3::new(1.0, x, x * x), phi.eval(x))
        }
    };
    let mut converged = false;
    let mut xb = nalgebra::Vector3::zeros();
    'outer: for _round in 0..200 {
        // simplex on the current columns, Bland's rule
        let mut pivots = 0;
        let y = loop {
            let bmat = nalgebra::Matrix3::from_columns(&[
                column(&xs, basis[0]).0,
                column(&xs, basis[1]).0,
                column(&xs, basis[2]).0,
            ]);
            let Some(binv) = bmat.try_inverse() else {
                break 'outer;
            };
            xb = binv * rhs;
            let cb = nalgebra::Vector3::new(
                column(&xs, basis[0]).1,
                column(&xs, basis[1]).1,
                column(&xs, basis[2]).1,
            );
            let y = binv.transpose() * cb;
            let mut entering = None;
            let candidates = (0..xs.len()).chain(std::iter::once(SLACK));
            for j in candidates {
                if basis.contains(&j) {
                    continue;
                }
                let (a, c) = column(&xs, j);
                if c - y.dot(&a) > tol {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                break y;
            };
            let d = binv * column(&xs, j).0;
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..3 {
                if d[i] > 1e-14 {
                    let ratio = xb[i].max(0.0) / d[i];
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - 1e-15 || (ratio <= lr + 1e-15 && basis[i] < basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((li, _)) = leave else {
                // unbounded cannot happen on a bounded feasible set
                break 'outer;
            };
            basis[li] = j;
            pivots += 1;
            if pivots > 500 {
                break 'outer;
            }
        };
        // price over the continuum
        let reduced = phi.sub(&Polynomial::new(vec![y[0], y[1], y[2]]));
        let (x_new, gain) = reduced.maximize_on(0.0, 1.0);
        if gain <= tol || xs.iter().any(|&x| (x - x_new).abs() <= 1e-15) {
            converged = true;
            break;
        }
        xs.push(x_new);
    }
    let mut raw: Vec<(f64, f64)> = (0..3)
        .filter(|&i| basis[i] != SLACK && xb[i] > 0.0)
        .map(|i| (xs[basis[i]], xb[i]))
        .collect();
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let atoms = feasible_law(raw, m, v);
    if atoms.is_empty() {
        return MomentLp {
            value: phi.eval(m),
            atoms: vec![(m, 1.0)],
            converged: false,
        };
    }
    let mut value: f64 = atoms.iter().map(|&(x, p)| p * phi.eval(x)).sum();
    let mut atoms = atoms;
    // Nearly coincident columns leave the basis ill-conditioned, so polish
    // two-point answers directly.
    let inner: Vec<&(f64, f64)> = atoms.iter().filter(|a| a.1 > 0.0).collect();
    if inner.len() == 2 && inner[0].0 < m && inner[1].0 > m {
        let start = (value, inner[0].0, inner[1].0);
        let (val, x1, x2) = refine_two_point(phi, m, v, start, 1e-3);
        if val > value {
            let p = (x2 - m) / (x2 - x1);
            value = val;
            atoms = vec![(x1, p), (x2, 1.0 - p)];
            converged = true;
        }
    }
    MomentLp {
        value,
        atoms,
        converged,
    }
}

/// Best law with at most two support points, found by grid search with
/// local refinement.
fn two_point_search(phi: &Polynomial, m: f64, v: f64) -> (f64, Vec<(f64, f64)>) {
    let m = m.clamp(0.0, 1.0);
    let v = v.max(0.0).min(m * (1.0 - m));
    let point = (phi.eval(m), vec![(m, 1.0)]);
    if v <= 0.0 || m <= 0.0 || m >= 1.0 {
        return point;
    }
    let eval = |x1: f64, x2: f64| -> Option<f64> {
        if !(x1 < m && x2 > m) {
            return None;
        }
        let p = (x2 - m) / (x2 - x1);
        let var = (m - x1) * (x2 - m);
        (var <= v * (1.0 + 1e-12)).then(|| p * phi.eval(x1) + (1.0 - p) * phi.eval(x2))
    };
    // For a given x1 the largest admissible x2.
    let x2_max = |x1: f64| (m + v / (m - x1)).min(1.0);
    let mut best = (point.0, m, m);
    let n = 200;
    for i in 0..n {
        let x1 = m * i as f64 / n as f64;
        let top = x2_max(x1);
        for j in 1..=n {
            let x2 = m + (top - m) * j as f64 / n as f64;
            if let Some(val) = eval(x1, x2) {
                if val > best.0 {
                    best = (val, x1, x2);
                }
            }
        }
    }
    if best.1 < m {
        let (val, x1, x2) = refine_two_point(phi, m, v, (best.0, best.1, best.2), m / n as f64);
        let p = (x2 - m) / (x2 - x1);
        return (val, vec![(x1, p), (x2, 1.0 - p)]);
    }
    point
}

/// Pattern search over two-point laws `x1 < m < x2` with variance at most `v`,
/// starting from `start = (value, x1, x2)`.
fn refine_two_point(
    phi: &Polynomial,
    m: f64,
    v: f64,
    start: (f64, f64, f64),
    mut step: f64,
) -> (f64, f64, f64) {
    let eval = |x1: f64, x2: f64| -> Option<f64> {
        if !(x1 < m && x2 > m) {
            return None;
        }
        let p = (x2 - m) / (x2 - x1);
        let var = (m - x1) * (x2 - m);
        (var <= v * (1.0 + 1e-12)).then(|| p * phi.eval(x1) + (1.0 - p) * phi.eval(x2))
    };
    let x2_max = |x1: f64| (m + v / (m - x1)).min(1.0);
    let mut best = start;
    while step > 1e-13 {
        let mut improved = false;
        for (d1, d2) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let x1 = (best.1 + d1 * step).clamp(0.0, m - 1e-15);
            let x2 = (best.2 + d2 * step).min(x2_max(x1));
            if let Some(val) = eval(x1, x2) {
                if val > best.0 {
                    best = (val, x1, x2);
                    improved = true;
                }
            }
            // also try the variance-tight partner
            if let Some(val) = eval(x1, x2_max(x1)) {
                if val > best.0 {
                    best = (val, x1, x2_max(x1));
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct InnerOptions {
    /// Random restarts of the augmented-Lagrangian solver (three or more
    /// routes).
    pub starts: usize,
    pub seed: u64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions { starts: 20, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstCase {
    pub value: f64,
    pub blocks: MomentBlocks,
    /// Load scenarios `(probability, loads)` behind the blocks.
    pub scenarios: Vec<(f64, Vec<f64>)>,
}

/// Worst-case load scenarios: at most `max_atoms` of them, loads in the route
/// simplex, mean `mean`, covariance at most `cov`.
fn worst_load_scenarios(
    costs: &[CostFunction],
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    max_atoms: usize,
    opts: &InnerOptions,
) -> (f64, Vec<(f64, DVector<f64>)>) {
    let point_value = social_cost_unchecked(costs, &clamp_loads(mean));
    let (_, scen) = solve_load_scenarios(costs, mean, cov, max_atoms, opts);
    // Solver tolerances leave the moment constraints slightly off; make them
    // exact and report the value of what is returned.
    let mut q: Vec<f64> = scen.iter().map(|s| s.0.max(0.0)).collect();
    let total: f64 = q.iter().sum();
    if !(total > 0.0) {
        return (point_value, vec![(1.0, mean.clone())]);
    }
    q.iter_mut().for_each(|x| *x /= total);
    let mut l: Vec<DVector<f64>> = scen.into_iter().map(|s| s.1).collect();
    repair(&q, &mut l, mean, cov);
    let value: f64 = q
        .iter()
        .zip(&l)
        .map(|(qj, lj)| qj * social_cost_unchecked(costs, &clamp_loads(lj)))
        .sum();
    if value < point_value {
        return (point_value, vec![(1.0, mean.clone())]);
    }
    (value, q.into_iter().zip(l).collect())
}

fn solve_load_scenarios(
    costs: &[CostFunction],
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    max_atoms: usize,
    opts: &InnerOptions,
) -> (f64, Vec<(f64, DVector<f64>)>) {
    let routes = costs.len();
    let point_value = social_cost_unchecked(costs, &clamp_loads(mean));
    if routes == 1 || max_atoms <= 1 || cov.amax() <= 1e-15 {
        return (point_value, vec![(1.0, mean.clone())]);
    }
    if routes == 2 {
        let (value, atoms) = line_moment_problem(&two_route_cost(costs), mean[0], cov[(0, 0)], max_atoms);
        let scen = atoms
            .into_iter()
            .map(|(x, p)| (p, DVector::from_vec(vec![x, 1.0 - x])))
            .collect();
        return (value, scen);
    }
    // The covariance bound keeps every scenario in `mean + range(cov)`; a
    // one-dimensional range is again a moment problem on a segment.
    let eig = SymmetricEigen::new((cov + cov.transpose()) * 0.5);
    let top = eig.eigenvalues.amax();
    let rank: Vec<usize> = (0..routes).filter(|&i| eig.eigenvalues[i] > RANK_CUT * top).collect();
    if rank.is_empty() {
        return (point_value, vec![(1.0, mean.clone())]);
    }
    if rank.len() == 1 {
        let v = eig.eigenvectors.column(rank[0]).into_owned();
        let (mut ylo, mut yhi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..routes {
            if v[i].abs() > 1e-15 {
                let (a, b) = (-mean[i] / v[i], (1.0 - mean[i]) / v[i]);
                ylo = ylo.max(a.min(b));
                yhi = yhi.min(a.max(b));
            }
        }
        let span = yhi - ylo;
        if !(span > 0.0) {
            return (point_value, vec![(1.0, mean.clone())]);
        }
        let load = |x: f64| mean + &v * (ylo + span * x);
        let phi = (0..routes).fold(Polynomial::zero(), |acc, m| {
            let term = Polynomial::x().mul(costs[m].polynomial());
            acc.add(&term.compose_affine(mean[m] + v[m] * ylo, v[m] * span))
        });
        let m_x = -ylo / span;
        let v_x = eig.eigenvalues[rank[0]] / (span * span);
        let (value, atoms) = line_moment_problem(&phi, m_x, v_x, max_atoms);
        if value < point_value {
            return (point_value, vec![(1.0, mean.clone())]);
        }
        return (value, atoms.into_iter().map(|(x, p)| (p, load(x))).collect());
    }
    let (value, scen) = augmented_lagrangian(costs, mean, cov, max_atoms, opts);
    if value < point_value {
        return (point_value, vec![(1.0, mean.clone())]);
    }
    (value, scen)
}

fn clamp_loads(l: &DVector<f64>) -> Vec<f64> {
    l.iter().map(|x| x.clamp(0.0, 1.0)).collect()
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

fn grad_cost(costs: &[CostFunction], l: &[f64]) -> Vec<f64> {
    costs
        .iter()
        .zip(l)
        .map(|(c, &x)| c.value(x) + x * c.slope(x))
        .collect()
}

/// Moves scenarios onto the exact mean, drops deviations outside the range of
/// `cov`, then shrinks them toward the mean until the covariance bound holds
/// exactly and loads stay in `[0, 1]`.
fn repair(q: &[f64], l: &mut [DVector<f64>], mean: &DVector<f64>, cov: &DMatrix<f64>) {
    let mut avg = DVector::zeros(mean.len());
    for (qj, lj) in q.iter().zip(l.iter()) {
        avg += lj * *qj;
    }
    let eig = SymmetricEigen::new((cov + cov.transpose()) * 0.5);
    let cut = RANK_CUT * eig.eigenvalues.amax().max(1e-300);
    let keep: Vec<usize> = (0..mean.len()).filter(|&i| eig.eigenvalues[i] > cut).collect();
    let basis = eig.eigenvectors.select_columns(&keep);
    let whiten = DMatrix::from_fn(keep.len(), mean.len(), |r, c| {
        eig.eigenvectors[(c, keep[r])] / eig.eigenvalues[keep[r]].sqrt()
    });
    let dev: Vec<DVector<f64>> = l
        .iter()
        .map(|lj| &basis * (basis.transpose() * (lj - &avg)))
        .collect();
    // largest eigenvalue of the whitened scenario covariance
    let mut s = DMatrix::zeros(keep.len(), keep.len());
    for (qj, d) in q.iter().zip(&dev) {
        let w = &whiten * d;
        s += &w * w.transpose() * *qj;
    }
    let ratio = if keep.is_empty() {
        0.0
    } else {
        SymmetricEigen::new(s).eigenvalues.amax()
    };
    let cap = if ratio > 1.0 { (1.0 - 1e-12) / ratio.sqrt() } else { 1.0 };
    let inside = |tau: f64| {
        dev.iter()
            .all(|d| (mean + d * tau).iter().all(|&x| (0.0..=1.0).contains(&x)))
    };
    let tau = if inside(cap) {
        cap
    } else {
        let (mut a, mut b) = (0.0, cap);
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if inside(mid) {
                a = mid;
            } else {
                b = mid;
            }
        }
        a
    };
    for (lj, d) in l.iter_mut().zip(&dev) {
        *lj = mean + d * tau;
    }
}

/// Projected augmented Lagrangian over scenario masses and loads with an
/// equality multiplier for the mean and a PSD multiplier for the covariance
/// bound. Multi-started; every start ends with a feasibility repair.
fn augmented_lagrangian(
    costs: &[CostFunction],
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    atoms: usize,
    opts: &InnerOptions,
) -> (f64, Vec<(f64, DVector<f64>)>) {
    let routes = mean.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let spread = SymmetricEigen::new(cov.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
        .sqrt();
    let mut best: (f64, Vec<(f64, DVector<f64>)>) = (f64::NEG_INFINITY, Vec::new());
    for _ in 0..opts.starts.max(1) {
        let mut q: Vec<f64> = (0..atoms).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
        let total: f64 = q.iter().sum();
        q.iter_mut().for_each(|x| *x /= total);
        let mut l: Vec<DVector<f64>> = (0..atoms)
            .map(|_| {
                let mut v: Vec<f64> = mean
                    .iter()
                    .map(|&x| x + 3.0 * spread * (2.0 * rng.gen::<f64>() - 1.0))
                    .collect();
                project_simplex(&mut v);
                DVector::from_vec(v)
            })
            .collect();
        let mut lambda = DVector::zeros(routes);
        let mut y = DMatrix::zeros(routes, routes);
        let mut rho = 10.0;
        let mut last_infeas = f64::INFINITY;
        let mut step = 1.0f64;
        for _outer in 0..20 {
            let objective = |q: &[f64], l: &[DVector<f64>]| -> (f64, DVector<f64>, DMatrix<f64>) {
                let mut g = -mean.clone();
                let mut s = DMatrix::zeros(routes, routes);
                let mut f = 0.0;
                for (qj, lj) in q.iter().zip(l) {
                    g += lj * *qj;
                    let d = lj - mean;
                    s += &d * d.transpose() * *qj;
                    f -= qj * social_cost_unchecked(costs, lj.as_slice());
                }
                let z = psd_part(&(&y + (&s - cov) * rho));
                let val = f
                    + lambda.dot(&g)
                    + 0.5 * rho * g.norm_squared()
                    + (z.norm_squared() - y.norm_squared()) / (2.0 * rho);
                (val, g, z)
            };
            let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
            for _inner in 0..60 {
                let (f0, g, z) = objective(&q, &l);
                let mult = &lambda + &g * rho;
                let mut gq = vec![0.0; atoms];
                let mut gl: Vec<DVector<f64>> = Vec::with_capacity(atoms);
                for j in 0..atoms {
                    let d = &l[j] - mean;
                    gq[j] = -social_cost_unchecked(costs, l[j].as_slice())
                        + l[j].dot(&mult)
                        + (d.transpose() * &z * &d)[(0, 0)];
                    let gc = DVector::from_vec(grad_cost(costs, l[j].as_slice()));
                    gl.push((-gc + &mult + &z * &d * 2.0) * q[j]);
                }
                let flat_x: Vec<f64> = q.iter().copied().chain(l.iter().flat_map(|v| v.iter().copied())).collect();
                let flat_g: Vec<f64> = gq.iter().copied().chain(gl.iter().flat_map(|v| v.iter().copied())).collect();
                // Barzilai–Borwein step from the previous iterate.
                step = match &prev {
                    Some((px, pg)) => {
                        let (mut ss, mut sy) = (0.0, 0.0);
                        for i in 0..flat_x.len() {
                            let (dx, dg) = (flat_x[i] - px[i], flat_g[i] - pg[i]);
                            ss += dx * dx;
                            sy += dx * dg;
                        }
                        if sy > 1e-300 { (ss / sy).clamp(1e-10, 1e6) } else { (step * 4.0).min(1e6) }
                    }
                    None => (step * 4.0).min(1.0),
                };
                prev = Some((flat_x, flat_g));
                let mut moved = false;
                while step > 1e-12 {
                    let mut q2: Vec<f64> = q.iter().zip(&gq).map(|(a, b)| a - step * b).collect();
                    project_simplex(&mut q2);
                    let l2: Vec<DVector<f64>> = l
                        .iter()
                        .zip(&gl)
                        .map(|(a, b)| {
                            let mut v: Vec<f64> = (a - b * step).iter().copied().collect();
                            project_simplex(&mut v);
                            DVector::from_vec(v)
                        })
                        .collect();
                    let decrease: f64 = q2
                        .iter()
                        .zip(&q)
                        .zip(&gq)
                        .map(|((a, b), g)| g * (a - b))
                        .sum::<f64>()
                        + l2.iter()
                            .zip(&l)
                            .zip(&gl)
                            .map(|((a, b), g)| g.dot(&(a - b)))
                            .sum::<f64>();
                    let (f1, _, _) = objective(&q2, &l2);
                    if f1 <= f0 + 1e-4 * decrease {
                        moved = (f0 - f1).abs() > 1e-11 * (1.0 + f0.abs());
                        q = q2;
                        l = l2;
                        break;
                    }
                    step *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            let (_, g, _) = objective(&q, &l);
            let mut s = DMatrix::zeros(routes, routes);
            for (qj, lj) in q.iter().zip(&l) {
                let d = lj - mean;
                s += &d * d.transpose() * *qj;
            }
            let viol = psd_part(&(&s - cov));
            let infeas = g.norm() + viol.norm();
            lambda += &g * rho;
            y = psd_part(&(&y + (&s - cov) * rho));
            if infeas > 0.25 * last_infeas {
                rho = (rho * 4.0).min(1e7);
            }
            last_infeas = infeas;
            if infeas < 1e-10 {
                break;
            }
        }
        repair(&q, &mut l, mean, cov);
        let value: f64 = q
            .iter()
            .zip(&l)
            .map(|(qj, lj)| qj * social_cost_unchecked(costs, &clamp_loads(lj)))
            .sum();
        if value > best.0 {
            best = (value, q.iter().copied().zip(l).collect());
        }
    }
    best
}

/// Lifts load scenarios to population scenarios and builds the blocks.
fn lift_blocks(
    f: &DMatrix<f64>,
    moments: &MomentInfo,
    scenarios: &[(f64, DVector<f64>)],
) -> MomentBlocks {
    let k = moments.dim();
    let sigma = moments.covariance();
    let e = moments.e();
    let mean_load = f.transpose() * e;
    let a = f.transpose() * &sigma * f;
    let lift = &sigma * f * symmetric_pinv(&a);
    let mus: Vec<(f64, DVector<f64>)> = scenarios
        .iter()
        .map(|(p, l)| (*p, e + &lift * (l - &mean_load)))
        .collect();
    let mut second = DMatrix::zeros(k, k);
    for (p, mu) in &mus {
        second += mu * mu.transpose() * *p;
    }
    let rest = psd_part(&(moments.q() - &second));
    let mut blocks: Vec<Block> = mus
        .iter()
        .map(|(p, mu)| Block {
            w_mat: (mu * mu.transpose() + &rest) * *p,
            w: mu * *p,
            q: *p,
        })
        .collect();
    while blocks.len() < k {
        blocks.push(Block {
            w_mat: DMatrix::zeros(k, k),
            w: DVector::zeros(k),
            q: 0.0,
        });
    }
    MomentBlocks { blocks }
}

/// Worst case for an arbitrary share matrix `f` (types × routes).
pub fn worst_case_for_fractions(
    f: &DMatrix<f64>,
    moments: &MomentInfo,
    costs: &[CostFunction],
    opts: &InnerOptions,
) -> Result<WorstCase> {
    if f.nrows() != moments.dim() || f.ncols() != costs.len() {
        return Err(Error::Precondition("share matrix does not match moments and routes".into()));
    }
    let mean_load = f.transpose() * moments.e();
    let cov = f.transpose() * moments.covariance() * f;
    let cov = (&cov + cov.transpose()) * 0.5;
    let (value, scen) = worst_load_scenarios(costs, &mean_load, &cov, moments.dim(), opts);
    let blocks = lift_blocks(f, moments, &scen);
    Ok(WorstCase {
        value,
        blocks,
        scenarios: scen
            .into_iter()
            .map(|(p, l)| (p, l.iter().copied().collect()))
            .collect(),
    })
}

/// Worst-case expected social cost when every type follows its row of `x`.
pub fn worst_case_cost(
    x: &PartitionAssignment,
    moments: &MomentInfo,
    costs: &[CostFunction],
    types: &TypeSet,
) -> Result<WorstCase> {
    if x.choices().len() != types.len() {
        return Err(Error::Precondition("assignment and types differ in length".into()));
    }
    worst_case_for_fractions(&assignment_matrix(x), moments, costs, &InnerOptions::default())
}

/// Worst case for the shares a concrete signal induces.
pub fn worst_case_for_signal(
    s: &SignalVector,
    moments: &MomentInfo,
    costs: &[CostFunction],
    types: &TypeSet,
) -> Result<WorstCase> {
    worst_case_for_fractions(&fraction_matrix(s, types), moments, costs, &InnerOptions::default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleBound {
    /// Best objective found, `−∞` when no candidate was feasible.
    pub value: f64,
    pub feasible: usize,
    pub trials: usize,
}

/// Random orthogonal matrix from the QR factors of a Gaussian matrix.
fn random_orthogonal(r: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(r, r, |_, _| {
        // Box–Muller
        let u1: f64 = rng.gen::<f64>().max(1e-300);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    });
    g.qr().q()
}

/// `r + 1` zero-mean points with identity covariance under equal weights.
fn simplex_points(r: usize) -> Vec<DVector<f64>> {
    let n = r + 1;
    // orthonormal basis of the complement of the all-ones vector
    let mut basis = DMatrix::zeros(n, r);
    for j in 0..r {
        let mut v = DVector::zeros(n);
        for i in 0..=j {
            v[i] = 1.0;
        }
        v[j + 1] = -((j + 1) as f64);
        let norm = v.norm();
        basis.set_column(j, &(v / norm));
    }
    (0..n)
        .map(|i| basis.row(i).transpose() * (n as f64).sqrt())
        .collect()
}

/// Best grouping of sorted atoms into at most `blocks` contiguous blocks.
fn group_value(atoms: &mut [(f64, Vec<f64>)], blocks: usize, costs: &[CostFunction]) -> f64 {
    atoms.sort_by(|a, b| a.1[0].total_cmp(&b.1[0]));
    let n = atoms.len();
    let block_value = |i: usize, j: usize| -> f64 {
        let p: f64 = atoms[i..j].iter().map(|a| a.0).sum();
        if p <= 0.0 {
            return 0.0;
        }
        let routes = atoms[i].1.len();
        let mean: Vec<f64> = (0..routes)
            .map(|m| (atoms[i..j].iter().map(|a| a.0 * a.1[m]).sum::<f64>() / p).clamp(0.0, 1.0))
            .collect();
        p * social_cost_unchecked(costs, &mean)
    };
    if n <= blocks {
        return block_value(0, n).max((0..n).map(|i| block_value(i, i + 1)).sum());
    }
    // best[b][j]: first j atoms in b blocks
    let mut best = vec![vec![f64::NEG_INFINITY; n + 1]; blocks + 1];
    best[0][0] = 0.0;
    for b in 1..=blocks {
        for j in 1..=n {
            for i in (b - 1)..j {
                if best[b - 1][i] > f64::NEG_INFINITY {
                    let v = best[b - 1][i] + block_value(i, j);
                    if v > best[b][j] {
                        best[b][j] = v;
                    }
                }
            }
        }
    }
    (1..=blocks).map(|b| best[b][n]).fold(f64::NEG_INFINITY, f64::max)
}

/// Lower bound on [`worst_case_cost`] from explicit laws over population
/// vectors that match `(E, Q)` exactly. Candidates put mass `1 − t` on `E`
/// and spread the rest along rotated principal directions of `Q − E Eᵀ`,
/// either as a regular simplex or as asymmetric two-point pairs. Atoms
/// outside the probability simplex are rejected; the rest are grouped into
/// at most `|Ω|` scenario blocks.
pub fn atom_oracle(
    x: &PartitionAssignment,
    moments: &MomentInfo,
    costs: &[CostFunction],
    types: &TypeSet,
    trials: usize,
    atoms: usize,
) -> Result<OracleBound> {
    atom_oracle_seeded(&assignment_matrix(x), moments, costs, types.len(), trials, atoms, 0x0ac1e)
}

pub fn atom_oracle_seeded(
    f: &DMatrix<f64>,
    moments: &MomentInfo,
    costs: &[CostFunction],
    blocks: usize,
    trials: usize,
    atoms: usize,
    seed: u64,
) -> Result<OracleBound> {
    let k = moments.dim();
    if trials == 0 {
        return Err(Error::Precondition("at least one trial is needed".into()));
    }
    if atoms < k + 2 {
        return Err(Error::Precondition(format!("{atoms} atoms, at least {} needed", k + 2)));
    }
    let e = moments.e();
    let eig = SymmetricEigen::new(moments.covariance());
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    let dirs: Vec<DVector<f64>> = (0..k)
        .filter(|&i| eig.eigenvalues[i] > 1e-12 * top.max(1e-300))
        .map(|i| eig.eigenvectors.column(i) * eig.eigenvalues[i].sqrt())
        .collect();
    let r = dirs.len();
    let eval_atoms = |support: Vec<(f64, DVector<f64>)>| -> Option<f64> {
        if support.len() > atoms {
            return None;
        }
        if support.iter().any(|(_, mu)| mu.iter().any(|&w| w < -1e-12)) {
            return None;
        }
        let mut loaded: Vec<(f64, Vec<f64>)> = support
            .iter()
            .map(|(p, mu)| (*p, loads_of(f, mu)))
            .collect();
        Some(group_value(&mut loaded, blocks, costs))
    };
    if r == 0 {
        let v = eval_atoms(vec![(1.0, e.clone())]);
        return Ok(OracleBound {
            value: v.unwrap_or(f64::NEG_INFINITY),
            feasible: usize::from(v.is_some()),
            trials,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    let mut feasible = 0;
    let simplex = simplex_points(r);
    for trial in 0..trials {
        let (u, t, pairs) = if trial == 0 {
            (DMatrix::identity(r, r), 1.0, true)
        } else if trial == 1 {
            (DMatrix::identity(r, r), 1.0, false)
        } else {
            let t = 1.0 - rng.gen::<f64>();
            (random_orthogonal(r, &mut rng), t, rng.gen::<bool>())
        };
        let rotated: Vec<DVector<f64>> = (0..r)
            .map(|j| (0..r).fold(DVector::zeros(k), |acc, i| acc + &dirs[i] * u[(i, j)]))
            .collect();
        let mut support = Vec::new();
        if t < 1.0 {
            support.push((1.0 - t, e.clone()));
        }
        if pairs && 2 * r + support.len() <= atoms {
            let c = (r as f64 / t).sqrt();
            for dir in &rotated {
                let a = if trial == 0 {
                    1.0
                } else {
                    (rng.gen::<f64>() * 2.0 - 1.0).exp()
                };
                let b = 1.0 / a;
                let w = t / r as f64;
                support.push((w * b / (a + b), e + dir * (a * c)));
                support.push((w * a / (a + b), e - dir * (b * c)));
            }
        } else {
            let c = (1.0 / t).sqrt();
            let w = t / (r + 1) as f64;
            for z in &simplex {
                let shift = (0..r).fold(DVector::zeros(k), |acc, i| acc + &rotated[i] * z[i]);
                support.push((w, e + shift * c));
            }
        }
        if let Some(v) = eval_atoms(support) {
            feasible += 1;
            best = best.max(v);
        }
    }
    Ok(OracleBound {
        value: best,
        feasible,
        trials,
    })
}

/// Minimises the worst-case expected social cost over supported signals.
pub fn optimize_dro(
    bx: &SupportedBox,
    moments: &MomentInfo,
    types: &TypeSet,
    costs: &[CostFunction],
    n: usize,
) -> Result<Optimum> {
    let _ = n;
    optimize_dro_with(bx, moments, types, costs, &InnerOptions::default())
}

pub fn optimize_dro_with(
    bx: &SupportedBox,
    moments: &MomentInfo,
    types: &TypeSet,
    costs: &[CostFunction],
    opts: &InnerOptions,
) -> Result<Optimum> {
    if moments.dim() != types.len() {
        return Err(Error::Precondition("moments and types differ in dimension".into()));
    }
    if bx.routes() != costs.len() {
        return Err(Error::Precondition("box and cost functions disagree on routes".into()));
    }
    if moments.is_point_mass(1e-14) {
        let e: Vec<f64> = moments.e().iter().copied().collect();
        return optimize_full_info_with(bx, &e, types, costs, &FullInfoOptions::default());
    }
    let value_of = |s: &SignalVector| -> Result<f64> {
        Ok(worst_case_for_fractions(&fraction_matrix(s, types), moments, costs, opts)?.value)
    };
    let corner = bx.corner();
    let mut best = (value_of(&corner)?, corner);
    let fixed: Vec<usize> = types.fixed().into_iter().map(|(i, _)| i).collect();
    let count = assignment_count(fixed.len(), bx.routes());
    if count > crate::full_info::DEFAULT_ENUMERATION_CAP {
        return Err(Error::TooManyAssignments {
            count,
            cap: crate::full_info::DEFAULT_ENUMERATION_CAP,
        });
    }
    let z = big_m_constant(costs, bx);
    let mut feasible = 0;
    let e = moments.e();
    let sigma = moments.covariance();
    let phi = (bx.routes() == 2).then(|| two_route_cost(costs));
    for combo in crate::full_info::lexicographic(fixed.len(), bx.routes()) {
        let mut choice = vec![None; types.len()];
        for (&i, &r) in fixed.iter().zip(&combo) {
            choice[i] = Some(r);
        }
        let pinned: Vec<(usize, f64, usize)> = fixed
            .iter()
            .zip(&combo)
            .map(|(&i, &r)| (i, types.get(i).fixed_omega().unwrap(), r))
            .collect();
        let Some(witness) = crate::full_info::feasibility_lp(&pinned, bx, z)? else {
            continue;
        };
        feasible += 1;
        let Some(phi) = &phi else {
            // three or more routes: compass search from the witness
            let (s, v) = compass_search(witness.signal, bx, &|s| value_of(s).unwrap_or(f64::INFINITY));
            if v < best.0 {
                best = (v, s);
            }
            continue;
        };
        let w = value_of(&witness.signal)?;
        if w < best.0 {
            best = (w, witness.signal.clone());
        }
        for fam in families_for(bx, types, &choice) {
            let scenario = |t: f64| -> f64 {
                let f = DVector::from_vec(fam.route1_shares(types, t));
                let m = f.dot(e);
                let v = (f.transpose() * &sigma * &f)[(0, 0)];
                if types.len() >= 3 {
                    moment_lp(phi, m, v).value
                } else {
                    two_point_search(phi, m, v).0
                }
            };
            let (ta, tb) = fam.t_range();
            let t_star = if fam.piece.is_none() {
                0.0
            } else {
                minimise_1d(&scenario, ta, tb)
            };
            if let Some(s) = fam.signal_at(bx, types, t_star) {
                let v = value_of(&s)?;
                if v < best.0 {
                    best = (v, s);
                }
            }
        }
    }
    Ok(Optimum {
        signal: best.1,
        value: best.0,
        feasible_assignments: feasible,
        // exact inner moment problem on two routes; sampled search otherwise
        certified: bx.routes() == 2,
    })
}

/// Grid of 17 points, then golden-section search around the best one.
fn minimise_1d(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return a;
    }
    let n = 16;
    let pts: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = pts.iter().map(|&t| f(t)).collect();
    let k = (0..=n).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    let (mut lo, mut hi) = (pts[k.saturating_sub(1)], pts[(k + 1).min(n)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..40 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let cands = [(pts[k], vals[k]), (x1, f1), (x2, f2)];
    cands
        .iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .map(|p| p.0)
        .unwrap()
}

fn compass_search(
    start: SignalVector,
    bx: &SupportedBox,
    f: &dyn Fn(&SignalVector) -> f64,
) -> (SignalVector, f64) {
    let mut x = start;
    let mut fx = f(&x);
    let span = bx.max_entry().max(1e-9);
    let mut step = 0.25 * span;
    while step > 1e-6 * span {
        let mut improved = false;
        for k in 0..2 * bx.routes() {
            for dir in [1.0, -1.0] {
                let mut flat = x.to_flat();
                flat[k] += dir * step;
                let pairs: Vec<f64> = flat
                    .chunks(2)
                    .flat_map(|c| {
                        let lo = c[0].max(0.0);
                        [lo, c[1].max(lo)]
                    })
                    .collect();
                let s = bx.project(&SignalVector::from_flat(&pairs).expect("valid"));
                let fs = f(&s);
                if fs < fx - 1e-15 {
                    x = s;
                    fx = fs;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// Full-information optimum with the population replaced by its mean.
pub fn optimize_mean_only(
    bx: &SupportedBox,
    e: &[f64],
    types: &TypeSet,
    costs: &[CostFunction],
    n: usize,
) -> Result<Optimum> {
    let _ = n;
    optimize_full_info_with(bx, e, types, costs, &FullInfoOptions::default())
}

/// Robust optimised scheme with fixed moment information.
#[derive(Debug, Clone)]
pub struct DroScheme {
    pub r: usize,
    pub mode: BoxMode,
    pub moments: MomentInfo,
    pub options: InnerOptions,
}

impl SignalScheme for DroScheme {
    fn name(&self) -> &str {
        "r_supported_dro"
    }

    fn signal(&mut self, ctx: &SchemeContext<'_>) -> Result<SignalVector> {
        let bx = supported_box(&ctx.state.history, self.r, self.mode)?;
        Ok(optimize_dro_with(&bx, &self.moments, &ctx.game.types, &ctx.game.costs, &self.options)?.signal)
    }
}

/// Optimised scheme that plans for the mean population.
#[derive(Debug, Clone)]
pub struct MeanOnlyScheme {
    pub r: usize,
    pub mode: BoxMode,
    pub mean: Vec<f64>,
}

impl SignalScheme for MeanOnlyScheme {
    fn name(&self) -> &str {
        "mean_only"
    }

    fn signal(&mut self, ctx: &SchemeContext<'_>) -> Result<SignalVector> {
        let bx = supported_box(&ctx.state.history, self.r, self.mode)?;
        Ok(optimize_mean_only(&bx, &self.mean, &ctx.game.types, &ctx.game.costs, ctx.game.n)?.signal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{baseline_costs, DriverType};

    #[test]
    fn basis_vectors_give_scaled_identity() {
        let k = 4;
        let samples: Vec<Vec<f64>> = (0..40)
            .map(|i| (0..k).map(|j| f64::from(u8::from(i % k == j))).collect())
            .collect();
        let est = estimate_moments(&samples).unwrap();
        for i in 0..k {
            assert!((est.moments.e()[i] - 0.25).abs() < 1e-12);
            for j in 0..k {
                let want = if i == j { 0.25 } else { 0.0 };
                assert!((est.moments.q()[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn moment_lp_point_mass_and_spread() {
        let phi = two_route_cost(&baseline_costs());
        let p = moment_lp(&phi, 0.6, 0.0);
        assert!((p.value - phi.eval(0.6)).abs() < 1e-12);
        let s = moment_lp(&phi, 0.6, 0.01);
        assert!(s.converged);
        assert!(s.value > phi.eval(0.6));
        let mean: f64 = s.atoms.iter().map(|a| a.0 * a.1).sum();
        let second: f64 = s.atoms.iter().map(|a| a.0 * a.0 * a.1).sum();
        assert!((mean - 0.6).abs() < 1e-10);
        assert!(second - 0.36 <= 0.01 + 1e-10);
    }

    #[test]
    fn simplex_points_are_isotropic() {
        for r in 1..5 {
            let pts = simplex_points(r);
            let mut cov = DMatrix::zeros(r, r);
            let mut mean = DVector::zeros(r);
            for p in &pts {
                cov += p * p.transpose() / (r + 1) as f64;
                mean += p;
            }
            assert!(mean.amax() < 1e-12);
            assert!((cov - DMatrix::identity(r, r)).amax() < 1e-12);
        }
    }

    #[test]
    fn two_atom_law_is_recovered() {
        let a = [0.5, 0.3, 0.2];
        let b = [0.1, 0.3, 0.6];
        let e: Vec<f64> = (0..3).map(|i| 0.5 * (a[i] + b[i])).collect();
        let q: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| 0.5 * (a[i] * a[j] + b[i] * b[j])).collect())
            .collect();
        let m = MomentInfo::new(e, q).unwrap();
        let x = PartitionAssignment::new(2, vec![0, 1, 0]).unwrap();
        let types = TypeSet::new(vec![DriverType::Deterministic { omega: 0.5 }; 3]).unwrap();
        let costs = baseline_costs();
        let load = |mu: &[f64]| mu[0] + mu[2];
        let c = |l: f64| social_cost_unchecked(&costs, &[l, 1.0 - l]);
        let known = 0.5 * c(load(&a)) + 0.5 * c(load(&b));
        let oracle = atom_oracle(&x, &m, &costs, &types, 50, 5).unwrap();
        assert!(oracle.value >= known - 1e-12, "{} {}", oracle.value, known);
        let wc = worst_case_cost(&x, &m, &costs, &types).unwrap();
        assert!(wc.value >= oracle.value - 1e-12);
        wc.blocks.verify(&m).unwrap();
    }
}
