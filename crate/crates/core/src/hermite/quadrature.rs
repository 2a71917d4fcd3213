//! Quadrature rules for expectations under the standard normal law.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Half-width of the truncated domain used by the split rule. The normal
/// density at 20 is about 1e-87, far below anything the rule can resolve.
const SPLIT_HALF_WIDTH: f64 = 20.0;

/// Largest supported order.
pub const MAX_ORDER: usize = 1024;

/// Default order for coefficient extraction.
pub const DEFAULT_ORDER: usize = 200;

/// Nodes and weights with `Σ w_i f(x_i) ≈ E[f(z)]`, `z ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Gauss–Hermite rule for the weight `exp(-x²/2)/√(2π)` (probabilists'
    /// convention). Exact for polynomials of degree `2·order − 1`.
    ///
    /// Nodes come from the Jacobi matrix (Golub–Welsch) and are then polished
    /// by Newton steps on the orthonormal recurrence; weights are the
    /// Christoffel numbers `1 / Σ_j p_j(x_i)²`.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        check_order(order)?;
        let mut jacobi = DMatrix::<f64>::zeros(order, order);
        for j in 1..order {
            let b = (j as f64).sqrt();
            jacobi[(j - 1, j)] = b;
            jacobi[(j, j - 1)] = b;
        }
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        nodes.sort_by(f64::total_cmp);

        let mut weights = Vec::with_capacity(order);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (p, p_prev, _) = orthonormal_hermite(order, *x);
                let dp = (order as f64).sqrt() * p_prev;
                if dp != 0.0 {
                    *x -= p / dp;
                }
            }
            let (_, _, sum_sq) = orthonormal_hermite(order, *x);
            weights.push(1.0 / sum_sq);
        }
        // Symmetrize to remove round-off asymmetry.
        let n = order;
        for i in 0..n / 2 {
            let x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[n - 1 - i]);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(QuadratureRule { nodes, weights })
    }

    /// Gauss–Legendre on `[-20, 0]` and `[0, 20]` separately, `order / 2`
    /// nodes each, with the normal density folded into the weights.
    ///
    /// Integrands with a kink at the origin (ReLU and its products with
    /// polynomials) are smooth on each half, so this rule converges
    /// geometrically where plain Gauss–Hermite only converges algebraically.
    pub fn split_gauss_legendre(order: usize) -> Result<Self> {
        check_order(order)?;
        if order % 2 != 0 {
            return Err(Error::invalid("order", "split rule needs an even order"));
        }
        let half = order / 2;
        let (t, w) = gauss_legendre(half);
        let scale = 0.5 * SPLIT_HALF_WIDTH;
        let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let mut pos: Vec<(f64, f64)> = t
            .iter()
            .zip(&w)
            .map(|(&ti, &wi)| {
                let x = (ti + 1.0) * scale;
                (x, wi * scale * (-0.5 * x * x).exp() * inv_sqrt_2pi)
            })
            .collect();
        pos.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        for &(x, wi) in pos.iter().rev() {
            nodes.push(-x);
            weights.push(wi);
        }
        for &(x, wi) in &pos {
            nodes.push(x);
            weights.push(wi);
        }
        Ok(QuadratureRule { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_i w_i f(x_i)`.
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::split_gauss_legendre(DEFAULT_ORDER).expect("default order is valid")
    }
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::invalid(
            "order",
            format!("must be in 1..={MAX_ORDER}, got {order}"),
        ));
    }
    Ok(())
}

/// Orthonormal probabilists' Hermite values `p_order(x)`, `p_{order-1}(x)` and
/// `Σ_{j<order} p_j(x)²`.
fn orthonormal_hermite(order: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sum_sq = 0.0;
    for j in 0..order {
        sum_sq += cur * cur;
        let next = (x * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev, sum_sq)
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
