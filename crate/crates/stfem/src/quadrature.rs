//! Gauss–Legendre quadrature on the reference interval [0, 1].
//!
//! Rules are tensorized over brick axes by the callers; this module only
//! provides the 1D points and weights.

use crate::error::{Error, Result};

/// A 1D Gauss–Legendre rule with `order` points on [0, 1], exact for
/// polynomials of degree `2*order - 1`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    order: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss_legendre(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument(
                "quadrature order must be at least 1".into(),
            ));
        }
        let (pts, wts) = gauss_legendre_unit(order);
        Ok(QuadratureRule {
            order,
            points: pts,
            weights: wts,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Legendre polynomial value and derivative at `x` in [-1, 1].
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Gauss–Legendre nodes/weights on [0, 1] via Newton iteration.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut pts = vec![0.0; n];
    let mut wts = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-flavored initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map from [-1, 1] to [0, 1]; reverse order so points ascend.
        pts[n - 1 - i] = 0.5 * (x + 1.0);
        wts[n - 1 - i] = 0.5 * w;
    }
    (pts, wts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_order() {
        assert!(QuadratureRule::gauss_legendre(0).is_err());
    }

    #[test]
    fn low_order_nodes() {
        let q1 = QuadratureRule::gauss_legendre(1).unwrap();
        assert!((q1.points()[0] - 0.5).abs() < 1e-15);
        assert!((q1.weights()[0] - 1.0).abs() < 1e-15);

        let q2 = QuadratureRule::gauss_legendre(2).unwrap();
        let a = 0.5 - 0.5 / 3.0_f64.sqrt();
        assert!((q2.points()[0] - a).abs() < 1e-15);
        assert!((q2.points()[1] - (1.0 - a)).abs() < 1e-15);
        assert!((q2.weights()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn weights_positive_and_sum_to_one() {
        for n in 1..=16 {
            let q = QuadratureRule::gauss_legendre(n).unwrap();
            assert!(q.weights().iter().all(|&w| w > 0.0));
            let s: f64 = q.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "order {n}: weight sum {s}");
        }
    }

    #[test]
    fn exact_for_polynomials() {
        // \int_0^1 x^k dx = 1/(k+1), exact up to degree 2n-1.
        for n in 1..=10 {
            let q = QuadratureRule::gauss_legendre(n).unwrap();
            for k in 0..=(2 * n - 1) {
                let val: f64 = q
                    .points()
                    .iter()
                    .zip(q.weights())
                    .map(|(&x, &w)| w * x.powi(k as i32))
                    .sum();
                let exact = 1.0 / (k as f64 + 1.0);
                assert!(
                    (val - exact).abs() < 1e-14,
                    "order {n}, degree {k}: {val} vs {exact}"
                );
            }
        }
    }
}
