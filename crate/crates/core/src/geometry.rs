//! Planar geometry for two-route signals.
//!
//! With two routes every driver decision depends on the signal only through
//! `(a, b) = (lo_1 − lo_2, hi_1 − hi_2)`: a type `ω` takes route 1 iff
//! `ω·a + (1−ω)·b ≤ 0`. The reachable `(a, b)` form a convex polygon, and
//! scaling `(a, b)` by a positive factor changes nobody's choice, so only the
//! direction of `(a, b)` matters for the uniform types.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use crate::model::SignalVector;
use crate::schemes::SupportedBox;

pub type Pt = [f64; 2];

const EPS: f64 = 1e-12;

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn scale_of(pts: &[Pt]) -> f64 {
    pts.iter().fold(1.0, |s, p| s.max(p[0].abs()).max(p[1].abs()))
}

/// Counter-clockwise hull without repeated or collinear points. Degenerate
/// inputs give one or two points.
pub fn convex_hull(points: &[Pt]) -> Vec<Pt> {
    let mut pts = points.to_vec();
    pts.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
    let tol = EPS * scale_of(&pts);
    pts.dedup_by(|p, q| (p[0] - q[0]).abs() <= tol && (p[1] - q[1]).abs() <= tol);
    if pts.len() <= 2 {
        return pts;
    }
    let tol2 = tol * scale_of(&pts);
    let mut hull: Vec<Pt> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Pt>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= tol2
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 2 {
        // all collinear: keep the extreme points
        return vec![pts[0], pts[pts.len() - 1]];
    }
    hull
}

/// Vertices of `{(lo, hi) : lo ∈ lr, hi ∈ hr, lo ≤ hi}`.
pub fn route_polygon(lr: (f64, f64), hr: (f64, f64)) -> Vec<Pt> {
    let rect = vec![[lr.0, hr.0], [lr.1, hr.0], [lr.1, hr.1], [lr.0, hr.1]];
    convex_hull(&clip(&rect, [1.0, -1.0], 0.0))
}

/// Reachable `(lo_1 − lo_2, hi_1 − hi_2)` for a two-route box.
pub fn difference_polygon(b: &SupportedBox) -> Vec<Pt> {
    let p1 = route_polygon(b.lo_range[0], b.hi_range[0]);
    let p2 = route_polygon(b.lo_range[1], b.hi_range[1]);
    let mut pts = Vec::with_capacity(p1.len() * p2.len());
    for u in &p1 {
        for v in &p2 {
            pts.push([u[0] - v[0], u[1] - v[1]]);
        }
    }
    convex_hull(&pts)
}

/// Part of a convex polygon with `n·x ≤ c`.
pub fn clip(poly: &[Pt], n: Pt, c: f64) -> Vec<Pt> {
    let k = poly.len();
    let mut out = Vec::with_capacity(k + 1);
    let side = |p: Pt| n[0] * p[0] + n[1] * p[1] - c;
    for i in 0..k {
        let cur = poly[i];
        let next = poly[(i + 1) % k];
        let (sc, sn) = (side(cur), side(next));
        if sc <= 0.0 {
            out.push(cur);
        }
        if (sc < 0.0 && sn > 0.0) || (sc > 0.0 && sn < 0.0) {
            let s = sc / (sc - sn);
            out.push([cur[0] + s * (next[0] - cur[0]), cur[1] + s * (next[1] - cur[1])]);
        }
    }
    if out.len() > 2 {
        convex_hull(&out)
    } else {
        out
    }
}

/// Whether `p` lies in the convex polygon, up to `tol`.
pub fn contains(poly: &[Pt], p: Pt, tol: f64) -> bool {
    match poly.len() {
        0 => false,
        1 => (poly[0][0] - p[0]).abs() <= tol && (poly[0][1] - p[1]).abs() <= tol,
        2 => {
            let (u, v) = (poly[0], poly[1]);
            let len = ((v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2)).sqrt();
            let off = cross(u, v, p).abs() / len.max(EPS);
            let dot = (p[0] - u[0]) * (v[0] - u[0]) + (p[1] - u[1]) * (v[1] - u[1]);
            off <= tol && dot >= -tol * len && dot <= len * len + tol * len
        }
        k => (0..k).all(|i| {
            let (u, v) = (poly[i], poly[(i + 1) % k]);
            let len = ((v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2)).sqrt();
            cross(u, v, p) >= -tol * len
        }),
    }
}

fn strictly_inside(poly: &[Pt], p: Pt) -> bool {
    let k = poly.len();
    if k < 3 {
        return false;
    }
    let tol = EPS * scale_of(poly);
    (0..k).all(|i| {
        let (u, v) = (poly[i], poly[(i + 1) % k]);
        cross(u, v, p) > tol * scale_of(&[u, v])
    })
}

/// Maximal run of directions sharing the sign of `a − b`. For `sigma = +1`
/// the direction is `(1 − t, −t)`, for `sigma = −1` it is `(t − 1, t)`; in
/// both cases the angle decreases as `t` grows. Infinite ends stand for the
/// diagonal directions `±(1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionPiece {
    pub sigma: i8,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl DirectionPiece {
    /// Direction vector for parameter `t`, infinite `t` included.
    pub fn direction(&self, t: f64) -> Pt {
        let s = self.sigma as f64;
        if t == f64::INFINITY {
            [-s, -s]
        } else if t == f64::NEG_INFINITY {
            [s, s]
        } else {
            [s * (1.0 - t), -s * t]
        }
    }
}

/// Crossing type `t = −b / (a − b)` of a direction within a piece.
fn t_of_angle(theta: f64, at_start: bool, at_end: bool) -> f64 {
    // Region starts are where t = +∞, ends where t = −∞.
    if at_start {
        return f64::INFINITY;
    }
    if at_end {
        return f64::NEG_INFINITY;
    }
    let (b, a) = theta.sin_cos();
    -b / (a - b)
}

/// Arcs `(start, length)` of directions of the nonzero points of `poly`.
fn direction_arcs(poly: &[Pt]) -> Vec<(f64, f64)> {
    if poly.is_empty() {
        return Vec::new();
    }
    if strictly_inside(poly, [0.0, 0.0]) {
        return vec![(0.0, TAU)];
    }
    let tiny = EPS * scale_of(poly);
    let nonzero: Vec<Pt> = poly
        .iter()
        .copied()
        .filter(|p| p[0].abs() > tiny || p[1].abs() > tiny)
        .collect();
    if nonzero.is_empty() {
        return Vec::new();
    }
    // A segment passing through the origin: two opposite directions only.
    if poly.len() == 2 && nonzero.len() == 2 {
        let (u, v) = (poly[0], poly[1]);
        let dot = u[0] * v[0] + u[1] * v[1];
        if cross([0.0, 0.0], u, v).abs() <= tiny * scale_of(poly) && dot < 0.0 {
            return nonzero
                .iter()
                .map(|p| (p[1].atan2(p[0]).rem_euclid(TAU), 0.0))
                .collect();
        }
    }
    let mut angles: Vec<f64> = nonzero
        .iter()
        .map(|p| p[1].atan2(p[0]).rem_euclid(TAU))
        .collect();
    angles.sort_by(f64::total_cmp);
    let k = angles.len();
    let mut best = (0, angles[0] + TAU - angles[k - 1]);
    for i in 1..k {
        let gap = angles[i] - angles[i - 1];
        if gap > best.1 {
            best = (i, gap);
        }
    }
    vec![(angles[best.0], TAU - best.1)]
}

/// Pieces of the direction set of `poly`, excluding the origin itself.
pub fn direction_pieces(poly: &[Pt]) -> Vec<DirectionPiece> {
    // sigma = +1 region: angles [−3π/4, π/4]; sigma = −1: [π/4, 5π/4].
    let regions: [(i8, f64); 2] = [(1, -3.0 * FRAC_PI_4), (-1, FRAC_PI_4)];
    let mut out = Vec::new();
    for (start, len) in direction_arcs(poly) {
        for &(sigma, rs) in &regions {
            let re = rs + PI;
            for shift in [-TAU, 0.0, TAU] {
                let lo = start + shift;
                let hi = lo + len;
                let a = lo.max(rs);
                let b = hi.min(re);
                if a > b {
                    continue;
                }
                let at_start = |x: f64| x <= rs;
                let at_end = |x: f64| x >= re;
                let t_hi = t_of_angle(a, at_start(a), at_end(a));
                let t_lo = t_of_angle(b, at_start(b), at_end(b));
                out.push(DirectionPiece { sigma, t_lo, t_hi });
            }
        }
    }
    // The unrolled circle can cut one run in two; glue the halves back.
    out.sort_by(|p, q| q.sigma.cmp(&p.sigma).then(p.t_lo.total_cmp(&q.t_lo)));
    let mut merged: Vec<DirectionPiece> = Vec::with_capacity(out.len());
    for p in out {
        match merged.last_mut() {
            Some(last) if last.sigma == p.sigma && p.t_lo <= last.t_hi + 1e-12 => {
                last.t_hi = last.t_hi.max(p.t_hi);
            }
            _ => merged.push(p),
        }
    }
    merged
}

/// Range of `λ ≥ 0` with `λ·d` in the polygon.
pub fn ray_segment(poly: &[Pt], d: Pt) -> Option<(f64, f64)> {
    let dd = d[0] * d[0] + d[1] * d[1];
    if poly.is_empty() || dd == 0.0 {
        return None;
    }
    let tol = 1e-9 * scale_of(poly);
    let mut hits: Vec<f64> = Vec::new();
    let k = poly.len();
    for i in 0..k {
        let u = poly[i];
        let v = poly[(i + 1) % k];
        let e = [v[0] - u[0], v[1] - u[1]];
        let den = d[0] * e[1] - d[1] * e[0];
        let elen = (e[0] * e[0] + e[1] * e[1]).sqrt();
        if den.abs() > 1e-12 * elen * dd.sqrt() {
            // λ·d = u + μ·e
            let lam = (u[0] * e[1] - u[1] * e[0]) / den;
            let mu = (u[0] * d[1] - u[1] * d[0]) / den;
            if mu >= -1e-12 && mu <= 1.0 + 1e-12 {
                hits.push(lam);
            }
        } else if (u[0] * d[1] - u[1] * d[0]).abs() <= tol * dd.sqrt() {
            hits.push((u[0] * d[0] + u[1] * d[1]) / dd);
            hits.push((v[0] * d[0] + v[1] * d[1]) / dd);
        }
    }
    if strictly_inside(poly, [0.0, 0.0]) {
        hits.push(0.0);
    }
    let hi = hits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = hits.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    (hi >= 0.0 && hits.iter().any(|&h| h >= -1e-12)).then_some((lo, hi.max(lo)))
}

/// A signal in `b` with `lo_1 − lo_2 = a` and `hi_1 − hi_2 = diff_hi`, if one
/// exists (up to `tol`).
pub fn signal_for_difference(b: &SupportedBox, a: f64, diff_hi: f64, tol: f64) -> Option<SignalVector> {
    let (l1, l2) = (b.lo_range[0], b.lo_range[1]);
    let (h1, h2) = (b.hi_range[0], b.hi_range[1]);
    let lo2 = (l2.0.max(l1.0 - a), l2.1.min(l1.1 - a));
    let hi2 = (h2.0.max(h1.0 - diff_hi), h2.1.min(h1.1 - diff_hi));
    if lo2.0 > lo2.1 + tol || hi2.0 > hi2.1 + tol {
        return None;
    }
    let x = lo2.0.min(lo2.1);
    let y = hi2.1.max(hi2.0);
    if x + (a - diff_hi).max(0.0) > y + tol {
        return None;
    }
    let s = SignalVector::new(vec![
        ((x + a).max(0.0), (y + diff_hi).max(x + a).max(0.0)),
        (x.max(0.0), y.max(x).max(0.0)),
    ])
    .ok()?;
    Some(b.project(&s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_square_with_interior_point() {
        let h = convex_hull(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5], [0.5, 0.0]]);
        assert_eq!(h.len(), 4);
    }

    #[test]
    fn triangle_route_polygon() {
        let p = route_polygon((0.4, 1.0), (0.4, 1.0));
        assert_eq!(p.len(), 3);
        assert_eq!(route_polygon((2.0, 2.0), (2.0, 2.0)).len(), 1);
    }

    #[test]
    fn full_circle_when_origin_inside() {
        let sq = vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        let pieces = direction_pieces(&sq);
        assert!(pieces.iter().any(|p| p.sigma == 1 && p.t_lo == f64::NEG_INFINITY && p.t_hi == f64::INFINITY));
        assert!(pieces.iter().any(|p| p.sigma == -1 && p.t_lo == f64::NEG_INFINITY && p.t_hi == f64::INFINITY));
    }

    #[test]
    fn piece_parameter_matches_direction() {
        // A small square around (1, 0): directions near θ = 0, t near 0.
        let sq = vec![[0.9, -0.1], [1.1, -0.1], [1.1, 0.1], [0.9, 0.1]];
        let pieces = direction_pieces(&sq);
        assert_eq!(pieces.len(), 1);
        let p = pieces[0];
        assert_eq!(p.sigma, 1);
        assert!(p.t_lo < 0.0 && p.t_hi > 0.0);
        for t in [p.t_lo, 0.0, p.t_hi] {
            let d = p.direction(t);
            let (lam0, lam1) = ray_segment(&sq, d).unwrap();
            assert!(lam0 <= lam1 + 1e-12);
        }
    }

    #[test]
    fn reconstructs_signal() {
        let b = SupportedBox::extreme(vec![(0.4, 1.0), (0.5, 0.9)]).unwrap();
        let s = signal_for_difference(&b, -0.1, 0.1, 1e-12).unwrap();
        assert!(((s.lo(0) - s.lo(1)) + 0.1).abs() < 1e-12);
        assert!(((s.hi(0) - s.hi(1)) - 0.1).abs() < 1e-12);
        assert!(b.contains(&s, 0.0));
        assert!(signal_for_difference(&b, 5.0, 0.0, 1e-12).is_none());
    }
}
