//! Gauss-Legendre rules and node doubling for matrix-valued integrands.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

/// Nodes and weights of the n-point rule on [-1, 1], by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // P_n = p1, P_{n-1} = p0
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn frobenius(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct QuadratureResult {
    pub value: DMatrix<Complex64>,
    pub nodes: usize,
    /// Frobenius norm of the change at the last doubling.
    pub change: f64,
}

/// `int_a^b f(t) dt` for a matrix-valued `f`, doubling the node count
/// from `start_nodes` until the Frobenius change drops below `tol`.
pub fn integrate_matrix(
    f: &dyn Fn(f64) -> DMatrix<Complex64>,
    a: f64,
    b: f64,
    start_nodes: usize,
    max_nodes: usize,
    tol: f64,
) -> Result<QuadratureResult> {
    let rule = |n: usize| {
        let (x, w) = gauss_legendre(n);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let mut acc: Option<DMatrix<Complex64>> = None;
        for (xi, wi) in x.iter().zip(&w) {
            let term = f(mid + half * xi) * Complex64::new(wi * half, 0.0);
            acc = Some(match acc {
                Some(m) => m + term,
                None => term,
            });
        }
        acc.expect("at least one node")
    };
    let mut n = start_nodes.max(1);
    let mut prev = rule(n);
    loop {
        let next_n = 2 * n;
        if next_n > max_nodes {
            return Err(Error::Quadrature {
                nodes: n,
                change: f64::NAN,
            });
        }
        let next = rule(next_n);
        let change = frobenius(&(&next - &prev));
        if change < tol {
            return Ok(QuadratureResult {
                value: next,
                nodes: next_n,
                change,
            });
        }
        if 2 * next_n > max_nodes {
            return Err(Error::Quadrature { nodes: next_n, change });
        }
        prev = next;
        n = next_n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((integral - exact).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn oscillatory_matrix_integral() {
        let f = |t: f64| DMatrix::from_element(1, 1, Complex64::from_polar(1.0, 7.0 * t));
        let r = integrate_matrix(&f, 0.0, 2.0, 4, 1 << 14, 1e-12).unwrap();
        let exact = (Complex64::from_polar(1.0, 14.0) - 1.0) / Complex64::new(0.0, 7.0);
        assert!((r.value[(0, 0)] - exact).norm() < 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let f = |t: f64| DMatrix::from_element(1, 1, Complex64::new(t.abs().sqrt().recip(), 0.0));
        assert!(matches!(
            integrate_matrix(&f, -1.0, 1.0, 2, 64, 1e-14),
            Err(Error::Quadrature { .. })
        ));
    }
}
