//! m-step ahead predictor coefficients: infinite past (φ_k^m) and last n
//! observations (φ_{k,n}^m).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm_expansion::LmConstants;
use crate::process::{integrate_power_tail, weighted_norm, AutocovSeq, CoeffSeq, TailModel};
use crate::toeplitz::{durbin, levinson_solve, levinson_sweep, toeplitz_matvec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorMethod {
    AnalyticConvolution,
    LevinsonToeplitz,
    SeriesExpansion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorCoeffs {
    pub m: usize,
    /// Number of observations; `None` for the infinite past.
    pub n: Option<usize>,
    /// `coeffs[k - 1]` is the coefficient of `X_{n+1-k}`.
    pub coeffs: Vec<f64>,
    pub method: PredictorMethod,
    /// One-step prediction variance `v_n` (finite, m = 1 only).
    pub residual_variance: Option<f64>,
}

fn seq_available(seq: &CoeffSeq, need: usize) -> bool {
    seq.values.len() >= need || seq.continuation.is_some() || seq.tail_model == TailModel::Zero
}

/// `φ_k^m = Σ_{ℓ=0}^{m-1} ψ_ℓ φ_{k+m-1-ℓ}` for `k = 1..=len`.
pub fn infinite_predictor_coeffs(psi: &CoeffSeq, phi: &CoeffSeq, m: usize, len: usize) -> Result<PredictorCoeffs> {
    if m == 0 {
        return Err(Error::InvalidConfig("horizon m must be at least 1".into()));
    }
    if !seq_available(phi, len + m) || !seq_available(psi, m) {
        return Err(Error::TruncationInsufficient(format!(
            "need psi to {m} and phi to {} terms, have {} and {}",
            len + m,
            psi.values.len(),
            phi.values.len()
        )));
    }
    let psi_head: Vec<f64> = (0..m).map(|l| psi.get(l)).collect();
    let coeffs = (1..=len)
        .map(|k| {
            psi_head
                .iter()
                .enumerate()
                .map(|(l, p)| p * phi.get(k + m - 1 - l))
                .sum()
        })
        .collect();
    Ok(PredictorCoeffs {
        m,
        n: None,
        coeffs,
        method: PredictorMethod::AnalyticConvolution,
        residual_variance: None,
    })
}

/// `φ^m(x)` at a real index, through the continuation of φ.
pub fn infinite_predictor_at(psi: &CoeffSeq, phi: &CoeffSeq, m: usize, x: f64) -> f64 {
    (0..m)
        .map(|l| psi.get(l) * phi.at(x + (m - 1 - l) as f64))
        .sum()
}

/// `Σ_{k >= from} |φ_k^m|`, `from >= 1`. Long-memory tails are integrated
/// through the continuation; short-memory tails are summed until the
/// coefficients vanish, plus a model bound past the stored values.
pub fn infinite_predictor_tail_sum(psi: &CoeffSeq, phi: &CoeffSeq, m: usize, from: usize) -> f64 {
    let from = from.max(1);
    if phi.continuation.is_some() {
        let exponent = match phi.tail_model {
            TailModel::Polynomial { exponent, .. } => exponent,
            _ => 2.0,
        };
        return integrate_power_tail(|x| infinite_predictor_at(psi, phi, m, x).abs(), from, exponent);
    }
    let stored_end = phi.values.len().saturating_sub(m - 1);
    let mut s = 0.0;
    for k in from..stored_end.max(from) {
        s += (0..m)
            .map(|l| psi.get(l) * phi.values[k + m - 1 - l])
            .sum::<f64>()
            .abs();
    }
    let psi_l1: f64 = (0..m).map(|l| psi.get(l).abs()).sum();
    s + psi_l1 * phi.tail_model.abs_sum_from(stored_end.max(from))
}

fn check_gamma(gamma: &AutocovSeq, need_lag: usize) -> Result<()> {
    if gamma.gamma.len() <= need_lag {
        return Err(Error::LengthMismatch {
            expected: need_lag + 1,
            got: gamma.gamma.len(),
        });
    }
    Ok(())
}

/// Solve `Σ_{k=1}^n φ_{k,n}^m γ(j-k) = γ(m-1+j)`, `j = 1..=n`, by Levinson recursion.
pub fn finite_predictor_coeffs(gamma: &AutocovSeq, m: usize, n: usize) -> Result<PredictorCoeffs> {
    Ok(finite_predictor_multi(gamma, &[m], n)?.remove(0))
}

/// Finite predictors of order n for several horizons, sharing one recursion.
pub fn finite_predictor_multi(gamma: &AutocovSeq, ms: &[usize], n: usize) -> Result<Vec<PredictorCoeffs>> {
    if n == 0 || ms.contains(&0) {
        return Err(Error::InvalidConfig("n and every horizon must be at least 1".into()));
    }
    let max_m = ms.iter().copied().max().unwrap_or(1);
    check_gamma(gamma, n + max_m - 1)?;
    let g = &gamma.gamma;
    let rhs: Vec<Vec<f64>> = ms.iter().map(|&m| (1..=n).map(|j| g[m - 1 + j]).collect()).collect();
    let sols = levinson_solve(g, &rhs)?;
    let v_n = if ms.contains(&1) {
        Some(*durbin(g, n)?.variances.last().unwrap())
    } else {
        None
    };
    Ok(ms
        .iter()
        .zip(sols)
        .map(|(&m, coeffs)| PredictorCoeffs {
            m,
            n: Some(n),
            coeffs,
            method: PredictorMethod::LevinsonToeplitz,
            residual_variance: if m == 1 { v_n } else { None },
        })
        .collect())
}

/// Visit the finite predictors of every order `n = 1..=n_max` for the given
/// horizons in one O(n_max² · |ms|) pass. `visit(n, coeffs)` receives one
/// coefficient vector per horizon.
pub fn finite_predictor_sweep<V>(gamma: &AutocovSeq, ms: &[usize], n_max: usize, visit: V) -> Result<Vec<f64>>
where
    V: FnMut(usize, &[Vec<f64>]),
{
    let max_m = ms.iter().copied().max().unwrap_or(1);
    check_gamma(gamma, n_max + max_m - 1)?;
    let g = &gamma.gamma;
    levinson_sweep(g, n_max, |k| ms.iter().map(|&m| g[m + k]).collect(), visit)
}

/// `max_j |Σ_k φ_{k,n}^m γ(j-k) - γ(m-1+j)|`.
pub fn normal_equation_residual(gamma: &AutocovSeq, p: &PredictorCoeffs) -> f64 {
    let g = &gamma.gamma;
    toeplitz_matvec(g, &p.coeffs)
        .iter()
        .enumerate()
        .map(|(i, t)| (t - g[p.m + i]).abs())
        .fold(0.0, f64::max)
}

/// `ρ_n = √v_n - √σ²`.
pub fn one_step_rho(gamma: &AutocovSeq, sigma2: f64, n: usize) -> Result<f64> {
    Ok(one_step_rhos(gamma, sigma2, n)?[n])
}

/// `ρ_0, ρ_1, ..., ρ_{n_max}` from one Durbin recursion.
pub fn one_step_rhos(gamma: &AutocovSeq, sigma2: f64, n_max: usize) -> Result<Vec<f64>> {
    check_gamma(gamma, n_max)?;
    let d = durbin(&gamma.gamma, n_max)?;
    let s = sigma2.sqrt();
    Ok(d.variances.iter().map(|v| (v.sqrt() - s).max(0.0)).collect())
}

/// `‖ψ‖₀ · Σ_{j>n} |φ_j|`, which bounds `sup_m Σ_{k>n} |φ_k^m|` for short memory.
pub fn tail_sum_bound_sm(psi: &CoeffSeq, phi: &CoeffSeq, n: usize) -> Result<f64> {
    let norm = weighted_norm(psi, 0.0)?;
    if let TailModel::Polynomial { exponent, .. } = phi.tail_model {
        if exponent <= 1.0 {
            return Err(Error::DivergentNorm { exponent, required: 1.0 });
        }
    }
    Ok(norm * phi.abs_tail_sum(n + 1))
}

/// `C₃ (m / (n + m))^d`.
pub fn tail_sum_bound_lm(constants: &LmConstants, m: usize, n: usize) -> f64 {
    let c3 = constants.c3.unwrap_or(f64::INFINITY);
    c3 * (m as f64 / (n + m) as f64).powf(constants.d)
}

/// Solve `T_n y = t` with `t_j = Σ_{k>n} c_k γ(k - j)` for each tail
/// `tails[r] = [c_{n+1}, c_{n+2}, ...]`.
///
/// If `x` solves the infinite normal equations, its first n entries minus the
/// order-n solution equal `-y`. Computing the difference this way keeps full
/// relative accuracy when it is far below the coefficients themselves.
pub fn truncation_correction(gamma: &[f64], tails: &[Vec<f64>], n: usize) -> Result<Vec<Vec<f64>>> {
    let longest = tails.iter().map(|t| t.len()).max().unwrap_or(0);
    if gamma.len() < n + longest {
        return Err(Error::LengthMismatch {
            expected: n + longest,
            got: gamma.len(),
        });
    }
    let rhs: Vec<Vec<f64>> = tails
        .iter()
        .map(|tail| {
            (1..=n)
                .map(|j| {
                    tail.iter()
                        .enumerate()
                        .map(|(i, c)| c * gamma[n + 1 + i - j])
                        .sum()
                })
                .collect()
        })
        .collect();
    levinson_solve(gamma, &rhs)
}

/// `φ_k^m - φ_{k,n}^m`, `k = 1..=n`, for short-memory processes through the
/// truncation correction. Returns the differences per horizon.
pub fn predictor_difference_sm(
    gamma: &AutocovSeq,
    psi: &CoeffSeq,
    phi: &CoeffSeq,
    ms: &[usize],
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    if phi.continuation.is_some() {
        return Err(Error::InvalidConfig(
            "the truncation-correction route needs a short-memory AR(∞) sequence".into(),
        ));
    }
    // φ_k^m vanishes once every φ_{k+m-1-ℓ} does, i.e. past the last stored
    // non-zero φ; the stored sequence must reach far enough for that.
    let last_nonzero = phi.values.iter().rposition(|v| *v != 0.0).unwrap_or(0);
    let tail_len = last_nonzero.saturating_sub(n).max(1);
    check_gamma(gamma, n + tail_len)?;
    let tails: Vec<Vec<f64>> = ms
        .iter()
        .map(|&m| {
            (n + 1..=n + tail_len)
                .map(|k| (0..m).map(|l| psi.get(l) * phi.get(k + m - 1 - l)).sum())
                .collect()
        })
        .collect();
    let ys = truncation_correction(&gamma.gamma, &tails, n)?;
    Ok(ys.into_iter().map(|y| y.into_iter().map(|v| -v).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{ar_inf_coeffs, autocovariance, ma_inf_coeffs, ProcessSpec};
    use crate::toeplitz::dense_solve;
    use approx::assert_relative_eq;

    fn parts(spec: &ProcessSpec, len: usize) -> (CoeffSeq, CoeffSeq, AutocovSeq) {
        (
            ma_inf_coeffs(spec, len).unwrap(),
            ar_inf_coeffs(spec, len).unwrap(),
            autocovariance(spec, len, len).unwrap(),
        )
    }

    #[test]
    fn infinite_predictors_of_examples() {
        let (psi, phi, _) = parts(&ProcessSpec::ar1(0.5), 20);
        let p = infinite_predictor_coeffs(&psi, &phi, 2, 5).unwrap();
        assert_eq!(p.coeffs, vec![0.25, 0.0, 0.0, 0.0, 0.0]);
        let (psi, phi, _) = parts(&ProcessSpec::fractional_noise(0.3), 20);
        let p = infinite_predictor_coeffs(&psi, &phi, 1, 10).unwrap();
        assert_eq!(p.coeffs, phi.values[1..11].to_vec());
        let (psi, phi, _) = parts(&ProcessSpec::white_noise(), 20);
        let p = infinite_predictor_coeffs(&psi, &phi, 4, 10).unwrap();
        assert!(p.coeffs.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn finite_predictors_of_examples() {
        let (_, _, g) = parts(&ProcessSpec::ar1(0.5), 20);
        let p = finite_predictor_coeffs(&g, 3, 5).unwrap();
        let dense = dense_solve(&g.gamma, &g.gamma[3..8]).unwrap();
        assert_relative_eq!(p.coeffs[0], 0.125, epsilon = 1e-15);
        for (c, d) in p.coeffs.iter().zip(&dense) {
            assert_relative_eq!(c, d, epsilon = 1e-15);
        }
        let (_, _, g) = parts(&ProcessSpec::white_noise(), 20);
        let p = finite_predictor_coeffs(&g, 2, 7).unwrap();
        assert!(p.coeffs.iter().all(|c| *c == 0.0));
        let (_, _, g) = parts(&ProcessSpec::ma1(0.5), 20);
        let p = finite_predictor_coeffs(&g, 1, 1).unwrap();
        assert_relative_eq!(p.coeffs[0], 0.4, epsilon = 1e-15);
        assert_relative_eq!(p.residual_variance.unwrap(), 1.25 - 0.2, epsilon = 1e-15);
    }

    #[test]
    fn finite_predictor_matches_high_precision_solve() {
        // 40-digit dense solve for ARFIMA(0, 0.2, 0), n = 32, m = 3.
        let g = autocovariance(&ProcessSpec::fractional_noise(0.2), 40, 0).unwrap();
        let p = finite_predictor_coeffs(&g, 3, 32).unwrap();
        assert_relative_eq!(p.coeffs[0], 0.089_620_599_231_558_911_55, max_relative = 1e-11);
        assert_relative_eq!(p.coeffs[4], 0.025_197_569_398_907_329_13, max_relative = 1e-11);
        assert_relative_eq!(p.coeffs[31], 0.007_907_699_932_196_374_548, max_relative = 1e-11);
        assert!(normal_equation_residual(&g, &p) < 1e-12);
    }

    #[test]
    fn rho_of_examples() {
        let (_, _, g) = parts(&ProcessSpec::ar1(0.5), 20);
        assert!(one_step_rho(&g, 1.0, 3).unwrap() < 1e-15);
        let (_, _, g) = parts(&ProcessSpec::white_noise(), 20);
        assert_eq!(one_step_rho(&g, 1.0, 10).unwrap(), 0.0);
        let g = autocovariance(&ProcessSpec::fractional_noise(0.25), 64, 0).unwrap();
        let rho = one_step_rho(&g, 1.0, 64).unwrap();
        let p = dense_solve(&g.gamma, &g.gamma[1..65]).unwrap();
        let v: f64 = g.gamma[0] - p.iter().zip(&g.gamma[1..]).map(|(a, b)| a * b).sum::<f64>();
        assert_relative_eq!(rho, v.sqrt() - 1.0, max_relative = 1e-9);
        assert!(rho > 0.0);
    }

    #[test]
    fn sm_tail_bounds_of_examples() {
        let (psi, phi, _) = parts(&ProcessSpec::white_noise(), 10);
        assert_eq!(tail_sum_bound_sm(&psi, &phi, 0).unwrap(), 0.0);
        let (psi, phi, _) = parts(&ProcessSpec::ma1(0.5), 80);
        assert_relative_eq!(tail_sum_bound_sm(&psi, &phi, 2).unwrap(), 0.375, max_relative = 1e-12);
        let (psi, phi, _) = parts(&ProcessSpec::ar1(0.5), 80);
        assert_eq!(tail_sum_bound_sm(&psi, &phi, 1).unwrap(), 0.0);
        let (psi, phi, _) = parts(&ProcessSpec::fractional_noise(0.25), 80);
        assert!(tail_sum_bound_sm(&psi, &phi, 1).is_err());
    }

    #[test]
    fn truncation_correction_matches_direct_difference() {
        let spec = ProcessSpec::arma(vec![0.5], vec![0.3]);
        let (psi, phi, g) = parts(&spec, 2000);
        for n in [1usize, 5, 12] {
            let diffs = predictor_difference_sm(&g, &psi, &phi, &[1, 3], n).unwrap();
            for (i, &m) in [1usize, 3].iter().enumerate() {
                let inf = infinite_predictor_coeffs(&psi, &phi, m, n).unwrap().coeffs;
                let fin = finite_predictor_coeffs(&g, m, n).unwrap().coeffs;
                for k in 0..n {
                    assert_relative_eq!(diffs[i][k], inf[k] - fin[k], epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn sweep_agrees_with_individual_solves() {
        let g = autocovariance(&ProcessSpec::fractional_noise(0.25), 100, 0).unwrap();
        let mut checked = 0;
        finite_predictor_sweep(&g, &[1, 4], 50, |n, xs| {
            if n % 10 == 0 {
                let p = finite_predictor_coeffs(&g, 4, n).unwrap();
                for (a, b) in xs[1].iter().zip(&p.coeffs) {
                    assert_relative_eq!(a, b, epsilon = 1e-13);
                }
                checked += 1;
            }
        })
        .unwrap();
        assert_eq!(checked, 5);
    }

    #[test]
    fn lm_tail_sum_integrates_to_closed_form() {
        // Σ_{k>=1} φ_k = 1 for fractional noise; with m = 1 the predictor is φ.
        let (psi, phi, _) = parts(&ProcessSpec::fractional_noise(0.25), 100);
        assert_relative_eq!(infinite_predictor_tail_sum(&psi, &phi, 1, 1), 1.0, max_relative = 1e-8);
    }
}
