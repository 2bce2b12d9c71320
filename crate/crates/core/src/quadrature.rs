//! Gauss–Legendre rules on `[0, 1]`.

use thiserror::Error;

pub const MAX_POINTS: usize = 64;
pub const DEFAULT_POINTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuadratureError {
    #[error("rule size {0} outside 1..={MAX_POINTS}")]
    PointsOutOfRange(usize),
    #[error("interaction order {order} must satisfy 1 <= order <= unique-feature depth {depth}")]
    OrderOutOfRange { order: usize, depth: usize },
}

/// An `n`-point Gauss–Legendre rule mapped to `[0, 1]`, exact for polynomials
/// of degree `<= 2n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn points(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes in strictly increasing order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        gauss_legendre(DEFAULT_POINTS).expect("default rule size is valid")
    }
}

/// Builds the `n`-point rule by Newton iteration on `P_n` from the
/// asymptotic guess `cos(π (i - 1/4) / (n + 1/2))`.
///
/// Only the positive roots are computed; the rest are mirrored so the rule is
/// exactly symmetric about 1/2.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule, QuadratureError> {
    if !(1..=MAX_POINTS).contains(&n) {
        return Err(QuadratureError::PointsOutOfRange(n));
    }
    let half = n.div_ceil(2);
    // (x in (0, 1], weight on [-1, 1]) for the upper half, largest root first.
    let mut upper = Vec::with_capacity(half);
    for i in 1..=half {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        if n % 2 == 1 && i == half {
            x = 0.0;
        }
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        upper.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }

    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for (i, &(x, w)) in upper.iter().enumerate() {
        // Map x -> t = (1 + x) / 2 and its mirror 1 - t; halve the weight.
        let lo = 0.5 * (1.0 - x);
        let hi = 1.0 - lo;
        nodes[i] = lo;
        nodes[n - 1 - i] = hi;
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
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

/// Smallest rule size that integrates the order-`order` interaction integrand
/// exactly on trees whose paths carry at most `depth` distinct features:
/// `ceil((depth - order + 1) / 2)`.
pub fn min_points(depth: usize, order: usize) -> Result<usize, QuadratureError> {
    if order == 0 || order > depth {
        return Err(QuadratureError::OrderOutOfRange { order, depth });
    }
    Ok((depth - order + 1).div_ceil(2))
}
