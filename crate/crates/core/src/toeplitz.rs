//! Symmetric positive-definite Toeplitz systems `T_n x = b`, `T_n[i][j] = γ(|i-j|)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Output of the Durbin recursion for orders `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Durbin {
    /// One-step predictor coefficients of order n (`Σ a_i γ(j-i) = γ(j)`).
    pub coeffs: Vec<f64>,
    /// Prediction variances `v_0 = γ(0), v_1, ..., v_n`.
    pub variances: Vec<f64>,
    /// Reflection (partial autocorrelation) coefficients `κ_1..κ_n`.
    pub reflection: Vec<f64>,
}

/// Forward predictor state shared by all right-hand sides.
struct Forward<'a> {
    gamma: &'a [f64],
    a: Vec<f64>,
    err: f64,
}

impl<'a> Forward<'a> {
    fn new(gamma: &'a [f64]) -> Result<Self> {
        let err = gamma[0];
        if !(err > 0.0) {
            return Err(Error::NotPositiveDefinite { order: 0, variance: err });
        }
        Ok(Forward {
            gamma,
            a: Vec::new(),
            err,
        })
    }

    fn order(&self) -> usize {
        self.a.len()
    }

    /// Extend a solution of `T_k x = b[..k]` to `T_{k+1}`, using the
    /// backward vector `w = [-rev(a); 1]` with `T_{k+1} w = E_k e_{k+1}`.
    fn extend_solution(&self, x: &mut Vec<f64>, b_next: f64) {
        let k = self.order();
        let g = self.gamma;
        let mut s = b_next;
        for (i, xi) in x.iter().enumerate() {
            s -= g[k - i] * xi;
        }
        let mu = s / self.err;
        for i in 0..k {
            x[i] -= mu * self.a[k - 1 - i];
        }
        x.push(mu);
    }

    /// Raise the predictor order by one; returns the reflection coefficient.
    fn step(&mut self) -> Result<f64> {
        let k = self.order();
        let g = self.gamma;
        let mut s = g[k + 1];
        for (i, ai) in self.a.iter().enumerate() {
            s -= ai * g[k - i];
        }
        let kappa = s / self.err;
        let prev = self.a.clone();
        for i in 0..k {
            self.a[i] -= kappa * prev[k - 1 - i];
        }
        self.a.push(kappa);
        self.err *= 1.0 - kappa * kappa;
        if !(self.err > 0.0) {
            return Err(Error::NotPositiveDefinite {
                order: k + 1,
                variance: self.err,
            });
        }
        Ok(kappa)
    }
}

/// Durbin recursion up to order `n`. Needs `gamma[0..=n]`.
pub fn durbin(gamma: &[f64], n: usize) -> Result<Durbin> {
    check_len(gamma, n + 1)?;
    let mut fwd = Forward::new(gamma)?;
    let mut variances = vec![fwd.err];
    let mut reflection = Vec::with_capacity(n);
    for _ in 0..n {
        reflection.push(fwd.step()?);
        variances.push(fwd.err);
    }
    Ok(Durbin {
        coeffs: fwd.a,
        variances,
        reflection,
    })
}

fn check_len(gamma: &[f64], need: usize) -> Result<()> {
    if gamma.len() < need {
        return Err(Error::LengthMismatch {
            expected: need,
            got: gamma.len(),
        });
    }
    Ok(())
}

/// Solve `T_n x = b` for every right-hand side in `rhs` (each of length n),
/// sharing one Durbin recursion. O(n² (1 + rhs.len())) time.
pub fn levinson_solve(gamma: &[f64], rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = match rhs.first() {
        Some(b) => b.len(),
        None => return Ok(Vec::new()),
    };
    if let Some(b) = rhs.iter().find(|b| b.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let mut last = Vec::new();
    levinson_sweep(
        gamma,
        n,
        |k| rhs.iter().map(|b| b[k]).collect(),
        |order, xs| {
            if order == n {
                last = xs.to_vec();
            }
        },
    )?;
    Ok(last)
}

/// Run the Levinson recursion for orders `1..=n_max`. Right-hand side entry
/// `k` (0-based) of every system is supplied by `rhs_entry(k)`; after order
/// `k` is reached `visit(k, solutions)` sees the solutions of all `T_k x = b[..k]`.
pub fn levinson_sweep<R, V>(gamma: &[f64], n_max: usize, mut rhs_entry: R, mut visit: V) -> Result<Vec<f64>>
where
    R: FnMut(usize) -> Vec<f64>,
    V: FnMut(usize, &[Vec<f64>]),
{
    check_len(gamma, n_max.max(1))?;
    let mut fwd = Forward::new(gamma)?;
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut variances = vec![fwd.err];
    for k in 0..n_max {
        let b = rhs_entry(k);
        if k == 0 {
            xs = b.iter().map(|bi| vec![bi / gamma[0]]).collect();
        } else {
            for (x, bi) in xs.iter_mut().zip(&b) {
                fwd.extend_solution(x, *bi);
            }
        }
        visit(k + 1, &xs);
        if k + 1 < n_max {
            fwd.step()?;
            variances.push(fwd.err);
        }
    }
    Ok(variances)
}

/// `T x` in O(n²).
pub fn toeplitz_matvec(gamma: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            x.iter()
                .enumerate()
                .map(|(j, xj)| gamma[(i as isize - j as isize).unsigned_abs()] * xj)
                .sum()
        })
        .collect()
}

/// `xᵀ T x = γ(0) Σ x_i² + 2 Σ_{l>=1} γ(l) Σ_i x_i x_{i+l}`, O(n²) without forming T.
pub fn quad_form(gamma: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    let mut s = gamma[0] * x.iter().map(|v| v * v).sum::<f64>();
    for l in 1..n {
        let lagged: f64 = x[..n - l].iter().zip(&x[l..]).map(|(a, b)| a * b).sum();
        s += 2.0 * gamma[l] * lagged;
    }
    s
}

/// `max_j |(T x)_j - b_j|`.
pub fn residual(gamma: &[f64], x: &[f64], b: &[f64]) -> f64 {
    toeplitz_matvec(gamma, x)
        .iter()
        .zip(b)
        .map(|(t, bi)| (t - bi).abs())
        .fold(0.0, f64::max)
}

/// Dense Cholesky solve, O(n³). Reference implementation for cross-checks.
pub fn dense_solve(gamma: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    check_len(gamma, n)?;
    let t = DMatrix::from_fn(n, n, |i, j| gamma[(i as isize - j as isize).unsigned_abs()]);
    let chol = t.cholesky().ok_or(Error::NotPositiveDefinite {
        order: n,
        variance: f64::NAN,
    })?;
    Ok(chol.solve(&DVector::from_column_slice(b)).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ar1_gamma(a: f64, len: usize) -> Vec<f64> {
        (0..len).map(|k| a.powi(k as i32) / (1.0 - a * a)).collect()
    }

    #[test]
    fn durbin_on_ar1() {
        let d = durbin(&ar1_gamma(0.5, 6), 5).unwrap();
        assert_relative_eq!(d.coeffs[0], 0.5, epsilon = 1e-15);
        for c in &d.coeffs[1..] {
            assert!(c.abs() < 1e-15);
        }
        assert_relative_eq!(d.variances[5], 1.0, epsilon = 1e-14);
        assert_relative_eq!(d.variances[0], 4.0 / 3.0);
    }

    #[test]
    fn solves_general_rhs_like_dense() {
        let g: Vec<f64> = (0..40).map(|k| 1.0 / (1.0 + k as f64).powf(0.6)).collect();
        let b: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = levinson_solve(&g, &[b.clone()]).unwrap().remove(0);
        let y = dense_solve(&g, &b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert_relative_eq!(u, v, epsilon = 1e-11);
        }
        assert!(residual(&g, &x, &b) < 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let g = vec![1.0, 0.9, 0.0, 0.9];
        assert!(matches!(durbin(&g, 3), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn sweep_reports_every_order() {
        let g = ar1_gamma(0.3, 12);
        let mut seen = Vec::new();
        levinson_sweep(&g, 10, |k| vec![g[k + 1]], |n, xs| seen.push((n, xs[0].len()))).unwrap();
        assert_eq!(seen, (1..=10).map(|n| (n, n)).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn quad_form_matches_dense(xs in prop::collection::vec(-1.0f64..1.0, 1..40), a in -0.9f64..0.9) {
            let g = ar1_gamma(a, xs.len());
            let tx = toeplitz_matvec(&g, &xs);
            let dense: f64 = xs.iter().zip(&tx).map(|(u, v)| u * v).sum();
            prop_assert!((quad_form(&g, &xs) - dense).abs() <= 1e-10 * (1.0 + dense.abs()));
            prop_assert!(quad_form(&g, &xs) >= -1e-12);
        }

        #[test]
        fn levinson_residual_is_small(bs in prop::collection::vec(-1.0f64..1.0, 1..60), a in -0.95f64..0.95) {
            let g = ar1_gamma(a, bs.len() + 1);
            let x = levinson_solve(&g, &[bs.clone()]).unwrap().remove(0);
            prop_assert!(residual(&g, &x, &bs) <= 1e-9 * g[0]);
        }
    }
}
