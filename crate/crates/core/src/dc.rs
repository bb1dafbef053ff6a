//! Difference-of-convex split of the social cost over the reduced simplex.
//!
//! With `S = p_1 + … + p_{M−1}` the social cost is
//! `Σ_{i<M} p_i·c_i(p_i) + (1−S)·c_M(1−S)`, a sum of univariate polynomials.
//! Each one is convex or becomes convex after adding `ρ·x²`; that same
//! quadratic is then the matching concave part.

use crate::error::{Error, Result};
use crate::model::CostFunction;
use crate::poly::Polynomial;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcVar {
    /// Load fraction of route `i` (0-based, `i < M − 1`).
    Route(usize),
    /// Combined load `S` of the first `M − 1` routes.
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcComponent {
    pub var: DcVar,
    pub poly: Polynomial,
}

impl DcComponent {
    fn arg(&self, p: &[f64]) -> f64 {
        match self.var {
            DcVar::Route(i) => p[i],
            DcVar::Sum => p.iter().sum(),
        }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.poly.eval(self.arg(p))
    }
}

/// `objective(p) = Σ g(p) − Σ h(p)` for `p` the first `M − 1` load fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct DCDecomposition {
    pub routes: usize,
    pub g: Vec<DcComponent>,
    pub h: Vec<DcComponent>,
}

impl DCDecomposition {
    pub fn eval_g(&self, p: &[f64]) -> f64 {
        self.g.iter().fold(0.0, |a, c| a + c.eval(p))
    }

    pub fn eval_h(&self, p: &[f64]) -> f64 {
        self.h.iter().fold(0.0, |a, c| a + c.eval(p))
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.eval_g(p) - self.eval_h(p)
    }

    /// For two routes, `g` and `h` as polynomials in `p_1`.
    pub fn univariate(&self) -> Option<(Polynomial, Polynomial)> {
        if self.routes != 2 {
            return None;
        }
        let sum = |cs: &[DcComponent]| cs.iter().fold(Polynomial::zero(), |a, c| a.add(&c.poly));
        Some((sum(&self.g), sum(&self.h)))
    }
}

fn split_component(var: DcVar, f: Polynomial, g: &mut Vec<DcComponent>, h: &mut Vec<DcComponent>) {
    let d2 = f.derivative().derivative();
    let floor = d2.minimize_on(0.0, 1.0).1;
    if floor >= 0.0 {
        g.push(DcComponent { var, poly: f });
        return;
    }
    // Pad the curvature a little so rounding cannot leave g non-convex.
    let scale: f64 = d2.coeffs().iter().map(|c| c.abs()).sum();
    let rho = Polynomial::new(vec![0.0, 0.0, -0.5 * floor + 1e-9 * (1.0 + scale)]);
    g.push(DcComponent {
        var,
        poly: f.add(&rho),
    });
    h.push(DcComponent { var, poly: rho });
}

pub fn dc_decompose(costs: &[CostFunction], m: usize) -> Result<DCDecomposition> {
    if m == 0 || costs.len() != m {
        return Err(Error::Precondition(format!(
            "{} cost functions for {m} routes",
            costs.len()
        )));
    }
    let x = Polynomial::x();
    let mut g = Vec::new();
    let mut h = Vec::new();
    for (i, c) in costs[..m - 1].iter().enumerate() {
        split_component(DcVar::Route(i), x.mul(c.polynomial()), &mut g, &mut h);
    }
    // (1 − S)·c_M(1 − S)
    let last = x.mul(costs[m - 1].polynomial()).compose_affine(1.0, -1.0);
    split_component(DcVar::Sum, last, &mut g, &mut h);
    Ok(DCDecomposition { routes: m, g, h })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcpResult {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
    /// `|x − clamp(x − f'(x))|`, zero at a stationary point.
    pub residual: f64,
    pub converged: bool,
}

/// Convex–concave procedure for `g − h` on `[lo, hi]` with `g`, `h` convex.
/// Each step minimises `g(x) − h'(x_k)·x` over the interval by bisection on
/// the monotone derivative.
pub fn ccp_interval(
    g: &Polynomial,
    h: &Polynomial,
    lo: f64,
    hi: f64,
    x0: f64,
    tol_value: f64,
    tol_grad: f64,
    max_iter: usize,
) -> CcpResult {
    let dg = g.derivative();
    let dh = h.derivative();
    let f = |x: f64| g.eval(x) - h.eval(x);
    let residual = |x: f64| (x - (x - (dg.eval(x) - dh.eval(x))).clamp(lo, hi)).abs();
    let mut x = x0.clamp(lo, hi);
    let mut value = f(x);
    for it in 1..=max_iter {
        let c = dh.eval(x);
        let phi = |y: f64| dg.eval(y) - c;
        let next = if phi(lo) >= 0.0 {
            lo
        } else if phi(hi) <= 0.0 {
            hi
        } else {
            let (mut a, mut b) = (lo, hi);
            while b - a > 1e-15 * (1.0 + b.abs()) {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if phi(m) < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        let next_value = f(next);
        let delta = (next_value - value).abs();
        x = next;
        value = next_value;
        let r = residual(x);
        if delta <= tol_value && r <= tol_grad {
            return CcpResult {
                x,
                value,
                iterations: it,
                residual: r,
                converged: true,
            };
        }
    }
    CcpResult {
        x,
        value,
        iterations: max_iter,
        residual: residual(x),
        converged: false,
    }
}

/// Second differences of `f` on an `n`-point grid over `[lo, hi]` are all
/// at least `−tol`.
pub fn passes_grid_convexity(f: &Polynomial, lo: f64, hi: f64, n: usize, tol: f64) -> bool {
    let step = (hi - lo) / (n - 1) as f64;
    let v: Vec<f64> = (0..n).map(|k| f.eval(lo + step * k as f64)).collect();
    v.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -tol)
}
