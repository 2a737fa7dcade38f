//! Gauss-Legendre rules over 1D intervals and tensor-product 2D boxes.

use std::f64::consts::PI;

use crate::domain::{cartesian, Domain};
use crate::error::{Error, Result};

/// Quadrature nodes and weights covering a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }

    /// Weighted sum of precomputed node values.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

/// Nodes and weights of the n-point rule on [-1, 1], ascending.
///
/// Roots of P_n are found by Newton iteration from the Chebyshev-like
/// initial guess cos(π(k - 1/4)/(n + 1/2)).
pub fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for k in 0..half {
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                dp = legendre_with_derivative(n, x).1;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped onto `domain`, tensor product in 2D.
pub fn gauss_legendre(domain: &Domain, counts: &[usize]) -> Result<QuadratureRule> {
    let dims = domain.dims();
    if dims > 2 {
        return Err(Error::InvalidArgument(format!(
            "quadrature supports at most 2 dimensions, domain has {dims}"
        )));
    }
    if counts.len() != dims {
        return Err(Error::Dimension {
            expected: dims,
            got: counts.len(),
        });
    }
    if counts.contains(&0) {
        return Err(Error::InvalidArgument(
            "quadrature needs at least one node per dimension".into(),
        ));
    }
    let mut axes = Vec::with_capacity(dims);
    let mut axis_weights = Vec::with_capacity(dims);
    for (d, &n) in counts.iter().enumerate() {
        let (x, w) = legendre_nodes(n);
        let (lo, hi) = (domain.lower()[d], domain.upper()[d]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        axes.push(x.iter().map(|t| mid + half * t).collect::<Vec<_>>());
        axis_weights.push(w.iter().map(|w| half * w).collect::<Vec<_>>());
    }
    let nodes = cartesian(&axes);
    let weights = cartesian(&axis_weights)
        .into_iter()
        .map(|ws| ws.iter().product())
        .collect();
    Ok(QuadratureRule { nodes, weights })
}

/// Convenience wrapper: `∫ f` over `domain` with the given rule sizes.
pub fn integrate(rule: &QuadratureRule, f: impl Fn(&[f64]) -> f64) -> f64 {
    rule.integrate(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_volume() {
        let d1 = Domain::interval(0.0, 100.0).unwrap();
        let r = gauss_legendre(&d1, &[100]).unwrap();
        assert_eq!(r.len(), 100);
        assert_relative_eq!(r.weights.iter().sum::<f64>(), 100.0, epsilon = 1e-10);
        assert!(r.nodes.iter().all(|x| x[0] > 0.0 && x[0] < 100.0));
        assert!(r.weights.iter().all(|&w| w > 0.0));

        let d2 = Domain::new(vec![0.0, 0.0], vec![100.0, 50.0]).unwrap();
        let r2 = gauss_legendre(&d2, &[50, 25]).unwrap();
        assert_eq!(r2.len(), 1250);
        assert_relative_eq!(r2.weights.iter().sum::<f64>(), 5000.0, epsilon = 1e-9);
    }

    #[test]
    fn known_small_rules() {
        let (x, w) = legendre_nodes(2);
        assert_relative_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-15);
        let (x, w) = legendre_nodes(3);
        assert_eq!(x[1], 0.0);
        assert_relative_eq!(x[2], (0.6f64).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[1], 8.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn sine_integral() {
        let d = Domain::interval(0.0, PI).unwrap();
        let r = gauss_legendre(&d, &[20]).unwrap();
        assert!((r.integrate(|x| x[0].sin()) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degree_nine_exact_with_five_nodes() {
        let d = Domain::interval(-1.5, 2.0).unwrap();
        let r = gauss_legendre(&d, &[5]).unwrap();
        let exact = (2f64.powi(10) - 1.5f64.powi(10)) / 10.0;
        let got = r.integrate(|x| x[0].powi(9));
        assert!(((got - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn rejects_three_dimensions() {
        let d = Domain::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
        assert!(gauss_legendre(&d, &[2, 2, 2]).is_err());
        let d1 = Domain::interval(0.0, 1.0).unwrap();
        assert!(gauss_legendre(&d1, &[0]).is_err());
    }

    #[test]
    fn linearity() {
        let d = Domain::interval(0.0, 3.0).unwrap();
        let r = gauss_legendre(&d, &[17]).unwrap();
        let f = |x: &[f64]| (x[0] * 1.3).cos();
        let g = |x: &[f64]| x[0].exp();
        let lhs = r.integrate(|x| 2.5 * f(x) - 0.7 * g(x));
        let rhs = 2.5 * r.integrate(f) - 0.7 * r.integrate(g);
        assert!((lhs - rhs).abs() < 1e-12);
        assert_relative_eq!(r.integrate(|_| 1.0), 3.0, epsilon = 1e-13);
    }
}
