//! Discretisation of one-sided infinite sums `Σ_{u >= 0} f(u)`.
//!
//! The first `exact` indices are kept as unit-weight integer nodes. When the
//! summand is smooth and slowly decaying (long memory), the remaining sum is
//! replaced by `∫_{exact - 1/2}^∞ f(x) dx` evaluated with Gauss–Legendre
//! panels on geometrically growing intervals `[a, 4a]`. The midpoint-to-integral error
//! is `f'(exact - 1/2) / 24`, i.e. `O(exact^-2)` relative for power-law tails.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// A quadrature rule for sums over the non-negative integers.
#[derive(Debug, Clone)]
pub struct SumRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    exact: usize,
    upper: f64,
}

/// Default panel order of the tail rule.
pub const PANEL_POINTS: usize = 16;
/// Each tail panel is `[a, PANEL_RATIO * a]`.
pub const PANEL_RATIO: f64 = 4.0;
/// Tail panels cover `[exact - 1/2, TAIL_UPPER]`.
pub const TAIL_UPPER: f64 = 1.0e16;

impl SumRule {
    /// Integer nodes `0..exact` only; adequate when the summand is
    /// negligible (or zero) from `exact` on.
    pub fn integers(exact: usize) -> Self {
        SumRule {
            nodes: (0..exact).map(|u| u as f64).collect(),
            weights: vec![1.0; exact],
            exact,
            upper: exact as f64,
        }
    }

    /// Integer nodes `0..exact` plus a Gauss–Legendre tail up to `TAIL_UPPER`.
    pub fn with_tail(exact: usize) -> Self {
        assert!(exact >= 1, "tail rule needs at least one exact node");
        let mut rule = Self::integers(exact);
        let (gx, gw) = gauss_legendre(PANEL_POINTS);
        let mut a = exact as f64 - 0.5;
        while a < TAIL_UPPER {
            let b = PANEL_RATIO * a;
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in gx.iter().zip(&gw) {
                rule.nodes.push(mid + half * x);
                rule.weights.push(half * w);
            }
            a = b;
        }
        rule.upper = a;
        rule
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of leading unit-weight integer nodes.
    pub fn exact(&self) -> usize {
        self.exact
    }

    /// Right end of the covered range.
    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn has_tail(&self) -> bool {
        self.nodes.len() > self.exact
    }

    /// `Σ_u f(offset + u)` under this rule.
    pub fn sum<F: Fn(f64) -> f64>(&self, offset: f64, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(offset + x))
            .sum()
    }
}
