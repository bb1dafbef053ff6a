//! Dense univariate polynomials with coefficients in ascending powers.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// The monomial `x`.
    pub fn x() -> Self {
        Polynomial::new(vec![0.0, 1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::zero();
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| {
                self.coeffs.get(k).copied().unwrap_or(0.0)
                    + other.coeffs.get(k).copied().unwrap_or(0.0)
            })
            .collect();
        Polynomial::new(coeffs)
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, k: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    /// `x ↦ p(offset + slope·x)`.
    pub fn compose_affine(&self, offset: f64, slope: f64) -> Polynomial {
        let inner = Polynomial::new(vec![offset, slope]);
        let mut acc = Polynomial::zero();
        for &c in self.coeffs.iter().rev() {
            acc = acc.mul(&inner).add(&Polynomial::constant(c));
        }
        acc
    }

    /// Global minimiser on `[lo, hi]` over the endpoints and the sign changes
    /// of the derivative.
    pub fn minimize_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut best = (lo, self.eval(lo));
        let right = self.eval(hi);
        if right < best.1 {
            best = (hi, right);
        }
        if hi <= lo || self.degree() < 2 {
            return best;
        }
        let d = self.derivative();
        for x in sign_changes(&d, lo, hi, 256) {
            let v = self.eval(x);
            if v < best.1 {
                best = (x, v);
            }
        }
        best
    }

    pub fn maximize_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        let (x, v) = self.scale(-1.0).minimize_on(lo, hi);
        (x, -v)
    }
}

/// Roots of `p` in `[lo, hi]` located by sign changes on a uniform sample and
/// refined by bisection.
pub(crate) fn sign_changes(p: &Polynomial, lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let step = (hi - lo) / samples as f64;
    let mut a = lo;
    let mut fa = p.eval(a);
    for k in 1..=samples {
        let b = if k == samples { hi } else { lo + step * k as f64 };
        let fb = p.eval(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            let (mut l, mut r, mut fl) = (a, b, fa);
            for _ in 0..80 {
                let m = 0.5 * (l + r);
                let fm = p.eval(m);
                if fm == 0.0 {
                    l = m;
                    r = m;
                    break;
                }
                if fl * fm < 0.0 {
                    r = m;
                } else {
                    l = m;
                    fl = fm;
                }
            }
            roots.push(0.5 * (l + r));
        }
        a = b;
        fa = fb;
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_and_derivative() {
        let p = Polynomial::new(vec![2.0, 0.0, 0.0, 0.0, 7.2]);
        assert_eq!(p.eval(1.0), 9.2);
        assert_eq!(p.derivative().coeffs(), &[0.0, 0.0, 0.0, 28.8]);
        assert_eq!(Polynomial::constant(3.0).derivative(), Polynomial::zero());
    }

    #[test]
    fn affine_composition_matches_pointwise() {
        let p = Polynomial::new(vec![5.0, 0.0, 4.0]);
        let q = p.compose_affine(1.0, -1.0);
        for k in 0..=10 {
            let x = k as f64 / 10.0;
            assert!((q.eval(x) - p.eval(1.0 - x)).abs() < 1e-12);
        }
    }

    #[test]
    fn trailing_zeros_are_trimmed() {
        assert_eq!(Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]).degree(), 1);
        assert!(Polynomial::new(vec![]).is_zero());
    }

    #[test]
    fn interior_minimum_is_found() {
        // (x - 0.3)^2 + 1
        let p = Polynomial::new(vec![1.09, -0.6, 1.0]);
        let (x, v) = p.minimize_on(0.0, 1.0);
        assert!((x - 0.3).abs() < 1e-9);
        assert!((v - 1.0).abs() < 1e-12);
    }
}
