//! Mean squared prediction errors of the finite-sample filter:
//! `σ̃_n = ‖Σ_{k<=n} (ĥ_k - ĥ_{k,n}) X_{n+1-k}‖` against the truncated optimal
//! filter and `σ_n = ‖Ŷ_n - Ŷ_n^{(n)}‖` against the full one.

use crate::error::{Error, Result};
use crate::filter::{future_innovation_weights, FilterSpec, HatCoeffs};
use crate::process::{AutocovSeq, CoeffSeq};
use crate::toeplitz::quad_form;

/// Relative tolerance for the truncation bound of a quadratic form.
pub const SIGMA_TRUNCATION_TOL: f64 = 1e-6;

/// A norm together with a bound on what the truncation left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaValue {
    pub value: f64,
    pub tail_bound: f64,
}

fn check_lag(gamma: &AutocovSeq, lag: usize) -> Result<()> {
    if gamma.gamma.len() <= lag {
        return Err(Error::LengthMismatch {
            expected: lag + 1,
            got: gamma.gamma.len(),
        });
    }
    Ok(())
}

/// `√(xᵀ T x)`, rejecting forms more negative than rounding allows.
pub fn toeplitz_norm(gamma: &AutocovSeq, x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Ok(0.0);
    }
    check_lag(gamma, x.len() - 1)?;
    let q = quad_form(&gamma.gamma, x);
    let scale = gamma.gamma0() * x.iter().map(|v| v * v).sum::<f64>();
    if q < -1e-12 * scale {
        return Err(Error::NotPositiveDefinite {
            order: x.len(),
            variance: q,
        });
    }
    Ok(q.max(0.0).sqrt())
}

/// `σ̃_n = √(aᵀ T_n a)` with `a_k = ĥ_k - ĥ_{k,n}`.
pub fn sigma_tilde(hinf: &[f64], hfin: &[f64], gamma: &AutocovSeq, n: usize) -> Result<f64> {
    for v in [hinf, hfin] {
        if v.len() < n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    let a: Vec<f64> = hinf[..n].iter().zip(&hfin[..n]).map(|(x, y)| x - y).collect();
    toeplitz_norm(gamma, &a)
}

fn tail_mass(hinf: &HatCoeffs, from: usize) -> f64 {
    hinf.values.iter().skip(from).map(|v| v.abs()).sum::<f64>() + hinf.tail_bound
}

fn check_truncation(v: SigmaValue, what: &str) -> Result<SigmaValue> {
    if v.tail_bound > SIGMA_TRUNCATION_TOL * v.value && v.tail_bound > 0.0 {
        return Err(Error::TruncationInsufficient(format!(
            "{what}: tail bound {:e} exceeds {SIGMA_TRUNCATION_TOL:e} relative to {:e}",
            v.tail_bound, v.value
        )));
    }
    Ok(v)
}

/// `σ_n` as `√(dᵀ T d)` with `d_k = ĥ_{k,n} - ĥ_k` for `k <= n` and
/// `d_k = -ĥ_k` for `n < k <= n + tail_len`.
pub fn sigma(hinf: &HatCoeffs, hfin: &[f64], gamma: &AutocovSeq, n: usize, tail_len: usize) -> Result<SigmaValue> {
    if hfin.len() < n || hinf.len() < n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: hfin.len().min(hinf.len()),
        });
    }
    let diff: Vec<f64> = hfin[..n].iter().zip(&hinf.values).map(|(f, i)| f - i).collect();
    sigma_from_difference(hinf, &diff, gamma, tail_len)
}

/// `σ_n` from a precomputed difference `ĥ_{·,n} - ĥ` on `1..=n`.
pub fn sigma_from_difference(hinf: &HatCoeffs, diff: &[f64], gamma: &AutocovSeq, tail_len: usize) -> Result<SigmaValue> {
    let n = diff.len();
    let end = n + tail_len;
    if hinf.len() < end {
        return Err(Error::LengthMismatch {
            expected: end,
            got: hinf.len(),
        });
    }
    let d: Vec<f64> = diff.iter().copied().chain(hinf.values[n..end].iter().map(|v| -v)).collect();
    let value = toeplitz_norm(gamma, &d)?;
    let tail_bound = gamma.gamma0().sqrt() * tail_mass(hinf, end);
    check_truncation(SigmaValue { value, tail_bound }, "sigma")
}

/// `‖Σ_{k>n} ĥ_k X_{n+1-k}‖` from `ĥ_{n+1..=n+tail_len}`.
pub fn tail_norm(hinf: &HatCoeffs, gamma: &AutocovSeq, n: usize, tail_len: usize) -> Result<SigmaValue> {
    let end = n + tail_len;
    if hinf.len() < end {
        return Err(Error::LengthMismatch {
            expected: end,
            got: hinf.len(),
        });
    }
    let value = toeplitz_norm(gamma, &hinf.values[n..end])?;
    let tail_bound = gamma.gamma0().sqrt() * tail_mass(hinf, end);
    check_truncation(SigmaValue { value, tail_bound }, "tail norm")
}

/// Second moments of the target and of its optimal causal prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionNorms {
    /// `‖Y_n‖²`.
    pub target: f64,
    /// `‖Y_n - Ŷ_n‖² = σ² Σ_s a_s²`.
    pub innovation: f64,
    /// `‖Ŷ_n‖²`.
    pub prediction: f64,
}

/// Norms of `Y_n` and `Ŷ_n`, exact for a finite set of taps.
pub fn projection_norms(filter: &FilterSpec, psi: &CoeffSeq, gamma: &AutocovSeq, sigma2: f64) -> Result<ProjectionNorms> {
    let (_, taps) = filter.taps();
    let target = toeplitz_norm(gamma, taps)?.powi(2);
    let innovation = sigma2 * future_innovation_weights(filter, psi).iter().map(|a| a * a).sum::<f64>();
    Ok(ProjectionNorms {
        target,
        innovation,
        prediction: target - innovation,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `σ_n = √(‖Ŷ_n‖² - ‖Ŷ_n^{(n)}‖²)` with `‖Ŷ_n^{(n)}‖² = ĥ_{·,n}ᵀ c`, where
/// `c_i = Cov(Y_n, X_{n+1-i})`. No truncation of ĥ is involved.
pub fn sigma_projection(norms: &ProjectionNorms, hfin: &[f64], c: &[f64]) -> Result<f64> {
    if c.len() < hfin.len() {
        return Err(Error::LengthMismatch {
            expected: hfin.len(),
            got: c.len(),
        });
    }
    Ok((norms.prediction - dot(hfin, c)).max(0.0).sqrt())
}

/// `‖Ŷ_n - Σ_{k<=n} ĥ_k X_{n+1-k}‖ = √(‖Ŷ_n‖² - 2 ĥᵀc + ĥᵀ T_n ĥ)`.
pub fn tail_norm_projection(norms: &ProjectionNorms, hinf: &[f64], c: &[f64], gamma: &AutocovSeq) -> Result<f64> {
    let n = c.len();
    if hinf.len() < n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: hinf.len(),
        });
    }
    let head = &hinf[..n];
    let q = toeplitz_norm(gamma, head)?.powi(2);
    Ok((norms.prediction - 2.0 * dot(head, c) + q).max(0.0).sqrt())
}

/// `(√γ(0) · l1, √γ(0) · l1 + tail_norm)`, upper bounds on `σ̃_n` and `σ_n`.
pub fn mspe_bounds(l1: f64, gamma0: f64, tail_norm: f64) -> (f64, f64) {
    let b1 = gamma0.sqrt() * l1;
    (b1, b1 + tail_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{
        bandpass_filter, hhat_difference, hhat_finite, hhat_finite_sweep, hhat_infinite, l1_diff, polydecay_filter,
        shift_filter, target_covariances,
    };
    use crate::predictor::one_step_rhos;
    use crate::process::{ar_inf_coeffs, autocovariance, ma_inf_coeffs, Memory, ProcessSpec};
    use crate::toeplitz::durbin;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    struct Setup {
        memory: Memory,
        psi: CoeffSeq,
        phi: CoeffSeq,
        gamma: AutocovSeq,
    }

    fn setup(spec: &ProcessSpec, len: usize) -> Setup {
        Setup {
            memory: spec.memory(),
            psi: ma_inf_coeffs(spec, len).unwrap(),
            phi: ar_inf_coeffs(spec, len).unwrap(),
            gamma: autocovariance(spec, len, len).unwrap(),
        }
    }

    #[test]
    fn sigma_tilde_examples() {
        let s = setup(&ProcessSpec::ma1(0.5), 64);
        assert_eq!(sigma_tilde(&[0.3, 0.2], &[0.3, 0.2], &s.gamma, 2).unwrap(), 0.0);
        let inf = hhat_infinite(&shift_filter(1), &s.memory, &s.psi, &s.phi, 20).unwrap();
        let fin = hhat_finite(&shift_filter(1), &s.memory, &s.gamma, 1).unwrap();
        assert_relative_eq!(
            sigma_tilde(&inf.values, &fin, &s.gamma, 1).unwrap(),
            0.111_803_398_874_989_48,
            epsilon = 1e-15
        );
        for n in 1..20 {
            let fin = hhat_finite(&shift_filter(1), &s.memory, &s.gamma, n).unwrap();
            let st = sigma_tilde(&inf.values, &fin, &s.gamma, n).unwrap();
            let l1 = l1_diff(&inf.values, &fin, n).unwrap();
            assert!(st <= s.gamma.gamma0().sqrt() * l1 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn sigma_vanishes_for_white_noise_and_ar1() {
        for spec in [ProcessSpec::white_noise(), ProcessSpec::ar1(0.5)] {
            let s = setup(&spec, 64);
            for m in [1, 3] {
                let f = shift_filter(m);
                let inf = hhat_infinite(&f, &s.memory, &s.psi, &s.phi, 40).unwrap();
                for n in [1, 5, 20] {
                    let fin = hhat_finite(&f, &s.memory, &s.gamma, n).unwrap();
                    let v = sigma(&inf, &fin, &s.gamma, n, 20).unwrap();
                    assert!(v.value <= 1e-12 && v.tail_bound == 0.0, "{spec:?} {v:?}");
                }
            }
        }
    }

    #[test]
    fn mspe_bounds_examples() {
        assert_eq!(mspe_bounds(0.0, 1.0, 0.0), (0.0, 0.0));
        let (a, b) = mspe_bounds(0.1, 1.25, 0.0);
        assert_relative_eq!(a, 0.111_803_398_874_989_48, epsilon = 1e-15);
        assert_eq!(a, b);
    }

    #[test]
    fn one_step_sigma_is_excess_prediction_variance() {
        // Shift-1: σ_n² = v_n - σ², and σ_n >= ρ_n = √v_n - σ.
        let spec = ProcessSpec::fractional_noise(0.25);
        let s = setup(&spec, 2100);
        let f = shift_filter(1);
        let norms = projection_norms(&f, &s.psi, &s.gamma, 1.0).unwrap();
        assert_relative_eq!(norms.prediction, s.gamma.gamma0() - 1.0, epsilon = 1e-14);
        let ns = [16, 64, 256, 1024];
        let v = durbin(&s.gamma.gamma, 1024).unwrap().variances;
        let rho = one_step_rhos(&s.gamma, 1.0, 1024).unwrap();
        let mut prev = f64::INFINITY;
        for h in hhat_finite_sweep(&f, &s.memory, &s.gamma, &ns).unwrap() {
            let c = target_covariances(&f, &s.gamma, h.n).unwrap().total();
            let sig = sigma_projection(&norms, &h.values(), &c).unwrap();
            assert_relative_eq!(sig * sig, v[h.n] - 1.0, epsilon = 1e-12);
            assert!(sig >= rho[h.n]);
            // O(n^{-d}) holds with room to spare: σ_n n^{1/4} keeps falling.
            let scaled = sig * (h.n as f64).powf(0.25);
            assert!(scaled < prev);
            prev = scaled;
        }
    }

    #[test]
    fn projection_route_matches_direct_quadratic_form() {
        let spec = ProcessSpec::arma(vec![0.5], vec![0.3]);
        let s = setup(&spec, 700);
        let f = bandpass_filter(0.0, std::f64::consts::FRAC_PI_2, 128).unwrap();
        let inf = hhat_infinite(&f, &s.memory, &s.psi, &s.phi, 600).unwrap();
        let norms = projection_norms(&f, &s.psi, &s.gamma, 1.0).unwrap();
        for n in [4, 16, 64] {
            let fin = hhat_finite(&f, &s.memory, &s.gamma, n).unwrap();
            let c = target_covariances(&f, &s.gamma, n).unwrap().total();
            let direct = sigma(&inf, &fin, &s.gamma, n, 600 - n).unwrap();
            let proj = sigma_projection(&norms, &fin, &c).unwrap();
            assert_relative_eq!(direct.value, proj, max_relative = 1e-8);
            let tn = tail_norm(&inf, &s.gamma, n, 600 - n).unwrap();
            let tp = tail_norm_projection(&norms, &inf.values, &c, &s.gamma).unwrap();
            assert_relative_eq!(tn.value, tp, max_relative = 1e-8);
        }
    }

    #[test]
    fn sigma_decomposes_into_head_tail_and_cross_terms() {
        let spec = ProcessSpec::arma(vec![0.6], vec![-0.2]);
        let s = setup(&spec, 400);
        let f = bandpass_filter(0.2, 1.3, 40).unwrap();
        let inf = hhat_infinite(&f, &s.memory, &s.psi, &s.phi, 300).unwrap();
        for n in [8, 32, 128] {
            let tail_len = 300 - n;
            let diff = hhat_difference(&f, &inf, &s.gamma, n).unwrap().total();
            let st = toeplitz_norm(&s.gamma, &diff).unwrap();
            let sg = sigma_from_difference(&inf, &diff, &s.gamma, tail_len).unwrap().value;
            let tail = &inf.values[n..300];
            let t = DMatrix::from_fn(300, 300, |i, j| s.gamma.gamma[i.abs_diff(j)]);
            let cross: f64 = (0..n)
                .map(|i| (0..tail_len).map(|j| diff[i] * t[(i, n + j)] * tail[j]).sum::<f64>())
                .sum();
            let tail_q: f64 = (0..tail_len)
                .map(|i| (0..tail_len).map(|j| tail[i] * t[(n + i, n + j)] * tail[j]).sum::<f64>())
                .sum();
            assert_relative_eq!(sg * sg - st * st, tail_q - 2.0 * cross, epsilon = 1e-12);
        }
    }

    #[test]
    fn bounds_hold_for_long_memory_polydecay() {
        let spec = ProcessSpec::fractional_noise(0.25);
        let s = setup(&spec, 1200);
        let f = polydecay_filter(0.25, 0.25, 256).unwrap();
        let inf = hhat_infinite(&f, &s.memory, &s.psi, &s.phi, 512).unwrap();
        let norms = projection_norms(&f, &s.psi, &s.gamma, 1.0).unwrap();
        for h in hhat_finite_sweep(&f, &s.memory, &s.gamma, &[32, 128, 512]).unwrap() {
            let fin = h.values();
            let c = target_covariances(&f, &s.gamma, h.n).unwrap().total();
            let st = sigma_tilde(&inf.values, &fin, &s.gamma, h.n).unwrap();
            let sg = sigma_projection(&norms, &fin, &c).unwrap();
            let l1 = l1_diff(&inf.values, &fin, h.n).unwrap();
            let tn = tail_norm_projection(&norms, &inf.values, &c, &s.gamma).unwrap();
            let (b1, b2) = mspe_bounds(l1, s.gamma.gamma0(), tn);
            assert!(st <= b1 && sg <= b2 && st <= sg + 1e-12, "n={} {st} {b1} {sg} {b2}", h.n);
        }
    }

    #[test]
    fn insufficient_tail_is_reported() {
        let spec = ProcessSpec::arma(vec![0.9], vec![]);
        let s = setup(&spec, 400);
        let f = bandpass_filter(0.0, 1.0, 100).unwrap();
        let inf = hhat_infinite(&f, &s.memory, &s.psi, &s.phi, 300).unwrap();
        let fin = hhat_finite(&f, &s.memory, &s.gamma, 10).unwrap();
        assert!(matches!(sigma(&inf, &fin, &s.gamma, 10, 5), Err(Error::TruncationInsufficient(_))));
    }
}
