//! 1D Lagrange shape functions at Gauss–Lobatto nodes, tensorized by callers.

use crate::error::{Error, Result};

/// Reference 1D Lagrange basis of degree `p` on [0, 1] at Gauss–Lobatto
/// nodes, plus evaluators for values and first/second derivatives.
#[derive(Clone, Debug)]
pub struct ShapeSet {
    p: usize,
    nodes: Vec<f64>,
    /// Denominators prod_{k != j} (x_j - x_k).
    denom: Vec<f64>,
}

impl ShapeSet {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("polynomial degree must be >= 1".into()));
        }
        let nodes = gauss_lobatto_unit(p);
        let n = p + 1;
        let mut denom = vec![1.0; n];
        for j in 0..n {
            for k in 0..n {
                if k != j {
                    denom[j] *= nodes[j] - nodes[k];
                }
            }
        }
        Ok(ShapeSet { p, nodes, denom })
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn num_nodes(&self) -> usize {
        self.p + 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Values of all basis functions at `x`.
    pub fn eval(&self, x: f64, out: &mut [f64]) {
        let n = self.p + 1;
        for j in 0..n {
            let mut v = 1.0;
            for k in 0..n {
                if k != j {
                    v *= x - self.nodes[k];
                }
            }
            out[j] = v / self.denom[j];
        }
    }

    /// First derivatives of all basis functions at `x`.
    pub fn eval_deriv(&self, x: f64, out: &mut [f64]) {
        let n = self.p + 1;
        for j in 0..n {
            let mut sum = 0.0;
            for m in 0..n {
                if m == j {
                    continue;
                }
                let mut prod = 1.0;
                for k in 0..n {
                    if k != j && k != m {
                        prod *= x - self.nodes[k];
                    }
                }
                sum += prod;
            }
            out[j] = sum / self.denom[j];
        }
    }

    /// Second derivatives of all basis functions at `x`.
    pub fn eval_deriv2(&self, x: f64, out: &mut [f64]) {
        let n = self.p + 1;
        for j in 0..n {
            let mut sum = 0.0;
            for m in 0..n {
                if m == j {
                    continue;
                }
                for l in 0..n {
                    if l == j || l == m {
                        continue;
                    }
                    let mut prod = 1.0;
                    for k in 0..n {
                        if k != j && k != m && k != l {
                            prod *= x - self.nodes[k];
                        }
                    }
                    sum += prod;
                }
            }
            out[j] = sum / self.denom[j];
        }
    }

    /// Tabulate values and derivatives at the given points.
    pub fn tabulate(&self, points: &[f64]) -> Tab1d {
        let n = self.p + 1;
        let mut tab = Tab1d {
            val: vec![vec![0.0; n]; points.len()],
            d1: vec![vec![0.0; n]; points.len()],
            d2: vec![vec![0.0; n]; points.len()],
        };
        for (q, &x) in points.iter().enumerate() {
            self.eval(x, &mut tab.val[q]);
            self.eval_deriv(x, &mut tab.d1[q]);
            self.eval_deriv2(x, &mut tab.d2[q]);
        }
        tab
    }
}

/// Tabulated 1D basis data, indexed `[point][basis]`.
#[derive(Clone, Debug)]
pub struct Tab1d {
    pub val: Vec<Vec<f64>>,
    pub d1: Vec<Vec<f64>>,
    pub d2: Vec<Vec<f64>>,
}

/// Gauss–Lobatto nodes on [0, 1]: endpoints plus roots of P'_p.
fn gauss_lobatto_unit(p: usize) -> Vec<f64> {
    let n = p + 1;
    let mut nodes = vec![0.0; n];
    nodes[0] = 0.0;
    nodes[p] = 1.0;
    for i in 1..p {
        // Interior node i: root of P'_p in (-1, 1), Newton from a cosine guess.
        let mut x = -(std::f64::consts::PI * i as f64 / p as f64).cos();
        for _ in 0..100 {
            let (pp, dpp) = legendre_deriv(p, x);
            let dx = pp / dpp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = 0.5 * (x + 1.0);
    }
    nodes
}

/// (P'_n(x), P''_n(x)) on [-1, 1].
fn legendre_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let nf = n as f64;
    let dp = nf * (x * p - p_prev) / (x * x - 1.0);
    let d2p = (2.0 * x * dp - nf * (nf + 1.0) * p) / (1.0 - x * x);
    (dp, d2p)
}

/// Iterate lexicographic multi-indices over `dim` axes with `n` entries each,
/// axis 0 fastest.
pub(crate) fn for_each_multi_index(dim: usize, n: usize, mut f: impl FnMut(&[usize; 3])) {
    let mut idx = [0usize; 3];
    let total = n.pow(dim as u32);
    for flat in 0..total {
        let mut rem = flat;
        for a in 0..dim {
            idx[a] = rem % n;
            rem /= n;
        }
        f(&idx);
    }
}
