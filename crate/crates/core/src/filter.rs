//! Two-sided linear filters `Y_n = Σ_k h_k X_{n-k}` and their optimal causal
//! approximations: ĥ_k from the infinite past and ĥ_{k,n} from the last n
//! observations. `ĥ_k` and `ĥ_{k,n}` are the coefficients of `X_{n+1-k}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::{finite_predictor_multi, infinite_predictor_coeffs, predictor_difference_sm};
use crate::process::{AutocovSeq, CoeffSeq, Memory};
use crate::toeplitz::{levinson_solve, levinson_sweep, toeplitz_matvec};

/// Summability class of the filter coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Summability {
    Fir,
    L1,
    L2,
    /// `Σ (1 + |k|)^d |h_k| < ∞`.
    Cd { d: f64 },
}

/// Serialized form of a filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FilterFamily {
    /// Taps keyed by lag, e.g. `{"-1": 1.0}` for one-step prediction.
    Explicit { taps: BTreeMap<String, f64> },
    Bandpass { mu1: f64, mu2: f64, window: usize },
    Polydecay { d: f64, eps: f64, window: usize },
    Shift { m: usize },
    Identity,
}

/// A two-sided filter with taps on the lags `lo..=hi`. Generated families are
/// truncated to their window; the mass beyond it is recorded as a tail bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FilterFamily", into = "FilterFamily")]
pub struct FilterSpec {
    family: FilterFamily,
    lo: i64,
    taps: Vec<f64>,
    summability: Summability,
    label: String,
    tail_abs: f64,
    tail_sq: f64,
    tail_sup: f64,
}

impl TryFrom<FilterFamily> for FilterSpec {
    type Error = Error;

    fn try_from(family: FilterFamily) -> Result<Self> {
        match family {
            FilterFamily::Explicit { taps } => {
                let mut parsed = BTreeMap::new();
                for (k, v) in taps {
                    let lag: i64 = k
                        .trim()
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("filter tap key {k:?} is not an integer")))?;
                    parsed.insert(lag, v);
                }
                explicit_filter(&parsed)
            }
            FilterFamily::Bandpass { mu1, mu2, window } => bandpass_filter(mu1, mu2, window),
            FilterFamily::Polydecay { d, eps, window } => polydecay_filter(d, eps, window),
            FilterFamily::Shift { m } => Ok(shift_filter(m)),
            FilterFamily::Identity => Ok(identity_filter()),
        }
    }
}

impl From<FilterSpec> for FilterFamily {
    fn from(f: FilterSpec) -> Self {
        f.family
    }
}

impl FilterSpec {
    fn from_parts(family: FilterFamily, lo: i64, taps: Vec<f64>, summability: Summability, label: String) -> Self {
        FilterSpec {
            family,
            lo,
            taps,
            summability,
            label,
            tail_abs: 0.0,
            tail_sq: 0.0,
            tail_sup: 0.0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let family: FilterFamily = serde_json::from_str(text)?;
        FilterSpec::try_from(family)
    }

    pub fn family(&self) -> &FilterFamily {
        &self.family
    }

    pub fn summability(&self) -> Summability {
        self.summability
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Smallest lag with a stored tap.
    pub fn lo(&self) -> i64 {
        self.lo
    }

    /// Largest lag with a stored tap.
    pub fn hi(&self) -> i64 {
        self.lo + self.taps.len() as i64 - 1
    }

    pub fn tap(&self, k: i64) -> f64 {
        let i = k - self.lo;
        if i < 0 {
            return 0.0;
        }
        self.taps.get(i as usize).copied().unwrap_or(0.0)
    }

    /// Taps as `(lo, [h_lo, ..., h_hi])`.
    pub fn taps(&self) -> (i64, &[f64]) {
        (self.lo, &self.taps)
    }

    /// `[h_{-1}, h_{-2}, ..., h_lo]`, the weights on future samples.
    pub fn future_taps(&self) -> Vec<f64> {
        (1..=(-self.lo).max(0)).map(|m| self.tap(-m)).collect()
    }

    /// Bound on `Σ |h_k|` over the lags dropped by the window.
    pub fn tail_abs_sum(&self) -> f64 {
        self.tail_abs
    }

    /// Bound on `Σ h_k²` over the lags dropped by the window.
    pub fn tail_sq_sum(&self) -> f64 {
        self.tail_sq
    }

    /// `sup_{j >= k} |h_j|`, including the dropped lags.
    pub fn sup_abs_from(&self, k: i64) -> f64 {
        let stored = (k.max(self.lo)..=self.hi()).map(|j| self.tap(j).abs()).fold(0.0, f64::max);
        stored.max(self.tail_sup)
    }

    /// Frequency response `H(e^{iω}) = Σ h_k e^{ikω}` as `(re, im)`.
    pub fn response(&self, omega: f64) -> (f64, f64) {
        self.taps
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let k = (self.lo + i as i64) as f64;
                (h * (k * omega).cos(), h * (k * omega).sin())
            })
            .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d))
    }

    /// Check the filter class against the memory of the process.
    pub fn check_compatible(&self, memory: &Memory) -> Result<()> {
        match (memory, self.summability) {
            (_, Summability::Fir) => Ok(()),
            (Memory::Short { .. }, Summability::L1 | Summability::Cd { .. }) => Ok(()),
            (Memory::Short { alpha }, Summability::L2) => match alpha {
                Some(a) if *a < 1.0 => Err(Error::IncompatibleFilter(format!(
                    "square-summable filter {} needs short memory with alpha >= 1, got {a}",
                    self.label
                ))),
                _ => Ok(()),
            },
            (Memory::Long { d }, Summability::Cd { d: df }) if df >= *d => Ok(()),
            (Memory::Long { d }, class) => Err(Error::IncompatibleFilter(format!(
                "filter {} of class {class:?} is not in C_d for long memory d = {d}",
                self.label
            ))),
        }
    }
}

/// `H(B) = B^{-m}`: `h_{-m} = 1`. `m = 0` gives the identity.
pub fn shift_filter(m: usize) -> FilterSpec {
    FilterSpec::from_parts(
        FilterFamily::Shift { m },
        -(m as i64),
        vec![1.0],
        Summability::Fir,
        format!("shift-{m}"),
    )
}

/// `h_0 = 1`.
pub fn identity_filter() -> FilterSpec {
    FilterSpec::from_parts(FilterFamily::Identity, 0, vec![1.0], Summability::Fir, "identity".into())
}

/// Finite filter from explicit taps.
pub fn explicit_filter(taps: &BTreeMap<i64, f64>) -> Result<FilterSpec> {
    let (lo, hi) = match (taps.keys().next(), taps.keys().next_back()) {
        (Some(lo), Some(hi)) => (*lo, *hi),
        _ => return Err(Error::InvalidConfig("explicit filter has no taps".into())),
    };
    if taps.values().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("explicit filter has a non-finite tap".into()));
    }
    let mut dense = vec![0.0; (hi - lo + 1) as usize];
    for (k, v) in taps {
        dense[(k - lo) as usize] = *v;
    }
    let family = FilterFamily::Explicit {
        taps: taps.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    };
    Ok(FilterSpec::from_parts(family, lo, dense, Summability::Fir, "explicit".into()))
}

/// `sin(k μ)` with the band edges 0 and π giving exact zeros.
fn sin_k(k: f64, mu: f64) -> f64 {
    if mu == 0.0 || mu == PI {
        0.0
    } else {
        (k * mu).sin()
    }
}

/// Ideal band-pass `H(e^{iω}) = 1{μ₁ <= |ω| < μ₂}` truncated to `|k| <= window`.
pub fn bandpass_filter(mu1: f64, mu2: f64, window: usize) -> Result<FilterSpec> {
    if !(0.0 <= mu1 && mu1 < mu2 && mu2 <= PI) {
        return Err(Error::InvalidBand { mu1, mu2 });
    }
    if window == 0 {
        return Err(Error::InvalidConfig("band-pass window must be at least 1".into()));
    }
    let w = window as i64;
    let taps: Vec<f64> = (-w..=w)
        .map(|k| {
            if k == 0 {
                (mu2 - mu1) / PI
            } else {
                let kf = k as f64;
                (sin_k(kf, mu2) - sin_k(kf, mu1)) / (PI * kf)
            }
        })
        .collect();
    let mut f = FilterSpec::from_parts(
        FilterFamily::Bandpass { mu1, mu2, window },
        -w,
        taps,
        Summability::L2,
        format!("bandpass({mu1}, {mu2})"),
    );
    let all_pass = mu1 == 0.0 && mu2 == PI;
    if !all_pass {
        let wf = window as f64;
        f.tail_abs = f64::INFINITY;
        f.tail_sq = 8.0 / (PI * PI * wf);
        f.tail_sup = 2.0 / (PI * (wf + 1.0));
    }
    Ok(f)
}

/// `h_k = (1 + |k|)^{-(1+d+eps)}` on `|k| <= window`.
pub fn polydecay_filter(d: f64, eps: f64, window: usize) -> Result<FilterSpec> {
    if !(d > 0.0 && d < 0.5) || !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "polydecay filter needs d in (0, 0.5) and eps > 0, got d = {d}, eps = {eps}"
        )));
    }
    if window == 0 {
        return Err(Error::InvalidConfig("polydecay window must be at least 1".into()));
    }
    let p = 1.0 + d + eps;
    let w = window as i64;
    let taps = (-w..=w).map(|k| (1.0 + k.abs() as f64).powf(-p)).collect();
    let mut f = FilterSpec::from_parts(
        FilterFamily::Polydecay { d, eps, window },
        -w,
        taps,
        Summability::Cd { d },
        format!("polydecay({d}, {eps})"),
    );
    // Σ_{|k| > W} (1+|k|)^{-p} = 2 Σ_{j >= W+2} j^{-p} <= 2 (W+1)^{1-p} / (p-1).
    let wf = window as f64;
    f.tail_abs = 2.0 * (wf + 1.0).powf(1.0 - p) / (p - 1.0);
    f.tail_sq = 2.0 * (wf + 1.0).powf(1.0 - 2.0 * p) / (2.0 * p - 1.0);
    f.tail_sup = (wf + 2.0).powf(-p);
    Ok(f)
}

/// Optimal causal coefficients from the infinite past.
#[derive(Debug, Clone, PartialEq)]
pub struct HatCoeffs {
    /// `ĥ_k` for `k = 1..=len` (index `k - 1`).
    pub values: Vec<f64>,
    /// `Σ_m h_{-m} φ_k^m`, the contribution of the future taps to `ĥ_k`.
    pub future: Vec<f64>,
    /// Bound on `Σ_{k > len} |ĥ_k|`.
    pub tail_bound: f64,
}

impl HatCoeffs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `a_s = Σ_ℓ h_{-(s+1+ℓ)} ψ_ℓ`: the prediction error of the target is
/// `Y_n - Ŷ_n = Σ_s a_s ε_{n+1+s}`, and `Σ_m h_{-m} φ_k^m = Σ_s a_s φ_{k+s}`.
pub fn future_innovation_weights(filter: &FilterSpec, psi: &CoeffSeq) -> Vec<f64> {
    let future = filter.future_taps();
    let f = future.len();
    let psi: Vec<f64> = (0..f).map(|l| psi.get(l)).collect();
    (0..f)
        .into_par_iter()
        .map(|s| (0..f - s).map(|l| future[s + l] * psi[l]).sum())
        .collect()
}

/// `ĥ_k = Σ_m h_{-m} φ_k^m + h_{k-1}` for `k = 1..=len`. φ should be stored
/// to at least `len + (number of future taps)` terms.
pub fn hhat_infinite(
    filter: &FilterSpec,
    memory: &Memory,
    psi: &CoeffSeq,
    phi: &CoeffSeq,
    len: usize,
) -> Result<HatCoeffs> {
    filter.check_compatible(memory)?;
    let a = future_innovation_weights(filter, psi);
    let need = len + a.len();
    if phi.values.len() < need && phi.continuation.is_none() && phi.tail_bound > 0.0 {
        return Err(Error::TruncationInsufficient(format!(
            "phi stored to {} terms, need {need}",
            phi.values.len()
        )));
    }
    let phis: Vec<f64> = (0..=need).map(|j| phi.get(j)).collect();
    let future: Vec<f64> = (1..=len)
        .into_par_iter()
        .map(|k| a.iter().enumerate().map(|(s, av)| av * phis[k + s]).sum())
        .collect();
    let values = future
        .iter()
        .enumerate()
        .map(|(i, f)| f + filter.tap(i as i64))
        .collect();
    let a_l1: f64 = a.iter().map(|v| v.abs()).sum();
    let filter_rest: f64 = (len as i64..=filter.hi()).map(|j| filter.tap(j).abs()).sum();
    let tail_bound = if a_l1 == 0.0 {
        filter_rest
    } else {
        a_l1 * phi.abs_tail_sum(len + 1) + filter_rest
    };
    Ok(HatCoeffs {
        values,
        future,
        tail_bound,
    })
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

/// Covariances `c_i = Cov(Y_n, X_{n+1-i}) = Σ_j h_j γ(i-1-j)`, `i = 1..=n`,
/// split into the future-tap part (`j < 0`) and the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetCov {
    pub future: Vec<f64>,
    pub past: Vec<f64>,
}

impl TargetCov {
    pub fn total(&self) -> Vec<f64> {
        self.future.iter().zip(&self.past).map(|(a, b)| a + b).collect()
    }
}

pub fn target_covariances(filter: &FilterSpec, gamma: &AutocovSeq, n: usize) -> Result<TargetCov> {
    let (lo, hi) = (filter.lo(), filter.hi());
    let need = ((n as i64 - 1 - lo).max(hi)).max(0) as usize;
    check_lag(gamma, need)?;
    let g = &gamma.gamma;
    let (lo_taps, taps) = filter.taps();
    let part = |i: usize, future: bool| -> f64 {
        taps.iter()
            .enumerate()
            .filter(|(t, _)| (lo_taps + (*t as i64) < 0) == future)
            .map(|(t, h)| h * g[(i as i64 - 1 - (lo_taps + t as i64)).unsigned_abs() as usize])
            .sum()
    };
    let (future, past) = (1..=n).into_par_iter().map(|i| (part(i, true), part(i, false))).unzip();
    Ok(TargetCov { future, past })
}

fn horizon_span(filter: &FilterSpec, n: usize) -> usize {
    let future = (-filter.lo()).max(0) as usize;
    let past = (filter.hi() - n as i64 + 1).max(0) as usize;
    future.max(past)
}

/// `ĥ_{k,n}`, `k = 1..=n`, from the normal equations `T_n ĥ_{·,n} = c`.
pub fn hhat_finite(filter: &FilterSpec, memory: &Memory, gamma: &AutocovSeq, n: usize) -> Result<Vec<f64>> {
    filter.check_compatible(memory)?;
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    check_lag(gamma, n)?;
    let c = target_covariances(filter, gamma, n)?.total();
    Ok(levinson_solve(&gamma.gamma, &[c])?.remove(0))
}

/// Finite-sample coefficients split by tap group: `future = Σ_m h_{-m} φ_{·,n}^m`
/// and `past = h_{k-1} + Σ_m h_{n-1+m} φ_{n+1-k,n}^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHat {
    pub n: usize,
    pub future: Vec<f64>,
    pub past: Vec<f64>,
}

impl FiniteHat {
    pub fn values(&self) -> Vec<f64> {
        self.future.iter().zip(&self.past).map(|(a, b)| a + b).collect()
    }
}

/// `ĥ_{·,n}` for every `n` in `ns`, from one Levinson sweep.
pub fn hhat_finite_sweep(
    filter: &FilterSpec,
    memory: &Memory,
    gamma: &AutocovSeq,
    ns: &[usize],
) -> Result<Vec<FiniteHat>> {
    filter.check_compatible(memory)?;
    let n_max = match ns.iter().copied().max() {
        Some(n) if n > 0 && !ns.contains(&0) => n,
        _ => return Err(Error::InvalidConfig("n values must be at least 1".into())),
    };
    check_lag(gamma, n_max)?;
    let c = target_covariances(filter, gamma, n_max)?;
    let mut out = Vec::new();
    levinson_sweep(
        &gamma.gamma,
        n_max,
        |k| vec![c.future[k], c.past[k]],
        |order, xs| {
            if ns.contains(&order) {
                out.push(FiniteHat {
                    n: order,
                    future: xs[0].clone(),
                    past: xs[1].clone(),
                });
            }
        },
    )?;
    out.sort_by_key(|h| ns.iter().position(|n| *n == h.n));
    Ok(out)
}

/// `ĥ_{k,n}` from the explicit sum over horizons:
/// `Σ_m h_{-m} φ_{k,n}^m + h_{k-1} + Σ_m h_{n-1+m} φ_{n+1-k,n}^m`.
/// One finite predictor per horizon, so only practical for short filters.
pub fn hhat_finite_by_horizons(filter: &FilterSpec, memory: &Memory, gamma: &AutocovSeq, n: usize) -> Result<Vec<f64>> {
    filter.check_compatible(memory)?;
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let span = horizon_span(filter, n);
    let mut out: Vec<f64> = (1..=n).map(|k| filter.tap(k as i64 - 1)).collect();
    if span == 0 {
        return Ok(out);
    }
    let ms: Vec<usize> = (1..=span).collect();
    let preds = finite_predictor_multi(gamma, &ms, n)?;
    for (m, p) in ms.iter().zip(&preds) {
        let future = filter.tap(-(*m as i64));
        let past = filter.tap(n as i64 - 1 + *m as i64);
        for k in 1..=n {
            out[k - 1] += future * p.coeffs[k - 1] + past * p.coeffs[n - k];
        }
    }
    Ok(out)
}

/// `ĥ_{·,n} - ĥ_{1..n}` split into the future-tap and past-tap components.
#[derive(Debug, Clone, PartialEq)]
pub struct HatDifference {
    pub future: Vec<f64>,
    pub past: Vec<f64>,
    /// Bound on the neglected right-hand side mass, `γ(0) Σ_{k > len} |ĥ_k|`.
    pub rhs_bound: f64,
}

impl HatDifference {
    pub fn total(&self) -> Vec<f64> {
        self.future.iter().zip(&self.past).map(|(a, b)| a + b).collect()
    }

    pub fn l1_future(&self) -> f64 {
        self.future.iter().map(|v| v.abs()).sum()
    }

    pub fn l1_past(&self) -> f64 {
        self.past.iter().map(|v| v.abs()).sum()
    }

    pub fn l1(&self) -> f64 {
        self.total().iter().map(|v| v.abs()).sum()
    }
}

/// `ĥ_{·,n} - ĥ` as `T_n^{-1} t` with `t_j = Σ_{k > n} ĥ_k γ(k - j)`.
///
/// Both sides of the difference solve normal equations with the same matrix,
/// so the difference is obtained without cancellation. Intended for short
/// memory, where ĥ and γ decay fast enough for the tail sums to close.
pub fn hhat_difference(filter: &FilterSpec, hinf: &HatCoeffs, gamma: &AutocovSeq, n: usize) -> Result<HatDifference> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let len = hinf.len();
    if len < n {
        return Err(Error::LengthMismatch { expected: n, got: len });
    }
    check_lag(gamma, len.max(filter.hi().max(0) as usize + 1))?;
    let g = &gamma.gamma;
    let past_end = (filter.hi() + 1).max(0) as usize;
    let (t_future, t_past): (Vec<f64>, Vec<f64>) = (1..=n)
        .into_par_iter()
        .map(|j| {
            let f: f64 = (n + 1..=len).map(|k| hinf.future[k - 1] * g[k - j]).sum();
            let p: f64 = (n + 1..=past_end).map(|k| filter.tap(k as i64 - 1) * g[k - j]).sum();
            (f, p)
        })
        .unzip();
    let mut sols = levinson_solve(g, &[t_future, t_past])?;
    let past = sols.pop().unwrap_or_default();
    let future = sols.pop().unwrap_or_default();
    Ok(HatDifference {
        future,
        past,
        rhs_bound: gamma.gamma0() * hinf.tail_bound,
    })
}

/// `Σ_{k=1}^n |ĥ_k - ĥ_{k,n}|`.
pub fn l1_diff(hinf: &[f64], hfin: &[f64], n: usize) -> Result<f64> {
    for v in [hinf, hfin] {
        if v.len() < n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    Ok(hinf[..n].iter().zip(&hfin[..n]).map(|(a, b)| (a - b).abs()).sum())
}

/// `Σ_m |h_{-m}| Σ_k |φ_k^m - φ_{k,n}^m| + Σ_m |h_{n-1+m}| Σ_k |φ_{k,n}^m|`,
/// the termwise bound on `l1_diff`. One predictor per horizon.
pub fn corollary_bound(
    filter: &FilterSpec,
    psi: &CoeffSeq,
    phi: &CoeffSeq,
    gamma: &AutocovSeq,
    n: usize,
) -> Result<f64> {
    let span = horizon_span(filter, n);
    if span == 0 {
        return Ok(0.0);
    }
    let ms: Vec<usize> = (1..=span).collect();
    let fin = finite_predictor_multi(gamma, &ms, n)?;
    let future_ms: Vec<usize> = ms.iter().copied().filter(|m| filter.tap(-(*m as i64)) != 0.0).collect();
    let diffs: Vec<f64> = if phi.continuation.is_none() && !future_ms.is_empty() {
        predictor_difference_sm(gamma, psi, phi, &future_ms, n)?
            .iter()
            .map(|d| d.iter().map(|v| v.abs()).sum())
            .collect()
    } else {
        future_ms
            .iter()
            .map(|&m| {
                let inf = infinite_predictor_coeffs(psi, phi, m, n)?;
                Ok(inf
                    .coeffs
                    .iter()
                    .zip(&fin[m - 1].coeffs)
                    .map(|(a, b)| (a - b).abs())
                    .sum())
            })
            .collect::<Result<_>>()?
    };
    let first: f64 = future_ms
        .iter()
        .zip(&diffs)
        .map(|(m, d)| filter.tap(-(*m as i64)).abs() * d)
        .sum();
    let second: f64 = ms
        .iter()
        .map(|&m| {
            let h = filter.tap(n as i64 - 1 + m as i64).abs();
            if h == 0.0 {
                0.0
            } else {
                h * fin[m - 1].coeffs.iter().map(|v| v.abs()).sum::<f64>()
            }
        })
        .sum();
    Ok(first + second)
}

/// `max_j |c_j - (T_n ĥ_{·,n})_j|`: covariance of the finite-sample
/// prediction error with the observations.
pub fn projection_residual(filter: &FilterSpec, gamma: &AutocovSeq, hfin: &[f64]) -> Result<f64> {
    let c = target_covariances(filter, gamma, hfin.len())?.total();
    Ok(toeplitz_matvec(&gamma.gamma, hfin)
        .iter()
        .zip(&c)
        .map(|(t, ci)| (t - ci).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::finite_predictor_coeffs;
    use crate::process::{ar_inf_coeffs, autocovariance, ma_inf_coeffs, ProcessSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

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

    fn taps(pairs: &[(i64, f64)]) -> FilterSpec {
        explicit_filter(&pairs.iter().copied().collect()).unwrap()
    }

    #[test]
    fn shift_taps() {
        let f = shift_filter(1);
        assert_eq!((f.lo(), f.hi()), (-1, -1));
        assert_eq!(f.tap(-1), 1.0);
        assert_eq!(f.tap(0), 0.0);
        let f = shift_filter(3);
        assert_eq!(f.future_taps(), vec![0.0, 0.0, 1.0]);
        assert_eq!(f.summability(), Summability::Fir);
    }

    #[test]
    fn bandpass_low_pass_taps() {
        let f = bandpass_filter(0.0, PI / 2.0, 16).unwrap();
        assert_relative_eq!(f.tap(0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(f.tap(1), 1.0 / PI, epsilon = 1e-15);
        assert!(f.tap(2).abs() < 1e-16);
        assert_relative_eq!(f.tap(3), -1.0 / (3.0 * PI), epsilon = 1e-15);
        for k in 1..=16 {
            assert_eq!(f.tap(k), f.tap(-k));
        }
        assert_eq!(f.summability(), Summability::L2);
    }

    #[test]
    fn bandpass_taps_match_quadrature_of_the_response() {
        // h_k = (1/π) ∫_{μ1}^{μ2} cos(kω) dω by Gauss–Legendre.
        let (x, w) = crate::quadrature::gauss_legendre(32);
        let (mu1, mu2) = (0.3, 1.9);
        let f = bandpass_filter(mu1, mu2, 8).unwrap();
        for k in 0..=8 {
            let half = 0.5 * (mu2 - mu1);
            let mid = 0.5 * (mu2 + mu1);
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| half * wi * (k as f64 * (mid + half * xi)).cos()).sum();
            assert_relative_eq!(f.tap(k), q / PI, epsilon = 1e-14);
        }
    }

    #[test]
    fn all_pass_band_is_the_identity() {
        let f = bandpass_filter(0.0, PI, 32).unwrap();
        assert_eq!(f.tap(0), 1.0);
        assert!((1..=32).all(|k| f.tap(k) == 0.0 && f.tap(-k) == 0.0));
        assert_eq!(f.tail_abs_sum(), 0.0);
    }

    #[test]
    fn bad_bands_are_rejected() {
        for (a, b) in [(1.0, 1.0), (-0.1, 1.0), (0.0, 3.5), (2.0, 1.0)] {
            assert!(matches!(bandpass_filter(a, b, 8), Err(Error::InvalidBand { .. })));
        }
    }

    #[test]
    fn polydecay_taps_and_weighted_sum() {
        let f = polydecay_filter(0.25, 0.25, 100_000).unwrap();
        assert_eq!(f.tap(0), 1.0);
        assert_relative_eq!(f.tap(1), 2f64.powf(-1.5), epsilon = 1e-15);
        assert_relative_eq!(f.tap(-1), 0.353_553_390_593_273_8, epsilon = 1e-15);
        // Σ (1+|k|)^{0.25} |h_k| = 1 + 2 Σ_{j>=2} j^{-1.25} = 1 + 2 (ζ(1.25) - 1).
        let weighted: f64 = (-100_000i64..=100_000).map(|k| (1.0 + k.abs() as f64).powf(0.25) * f.tap(k)).sum();
        let zeta_125 = 4.595_111_825_842_94;
        let tail = 2.0 * 4.0 * 100_001f64.powf(-0.25);
        assert!(weighted < 1.0 + 2.0 * (zeta_125 - 1.0));
        assert!(weighted + tail > 1.0 + 2.0 * (zeta_125 - 1.0));
        let exact_tail: f64 = 2.0 * (1..=200_000).map(|j| (100_001.0 + j as f64).powf(-1.5)).sum::<f64>();
        assert!(exact_tail <= f.tail_abs_sum());
    }

    #[test]
    fn compatibility_rules() {
        let lm = Memory::Long { d: 0.25 };
        let sm = Memory::Short { alpha: None };
        let bp = bandpass_filter(0.0, 1.0, 64).unwrap();
        assert!(matches!(bp.check_compatible(&lm), Err(Error::IncompatibleFilter(_))));
        assert!(bp.check_compatible(&sm).is_ok());
        assert!(bp.check_compatible(&Memory::Short { alpha: Some(0.5) }).is_err());
        assert!(polydecay_filter(0.25, 0.1, 64).unwrap().check_compatible(&lm).is_ok());
        assert!(polydecay_filter(0.2, 0.1, 64).unwrap().check_compatible(&lm).is_err());
        assert!(shift_filter(2).check_compatible(&lm).is_ok());
    }

    #[test]
    fn json_forms() {
        let f = FilterSpec::from_json(r#"{"family": "explicit", "taps": {"-1": 1.0}}"#).unwrap();
        assert_eq!(f.lo(), -1);
        assert_eq!(f.tap(-1), 1.0);
        let b = FilterSpec::from_json(r#"{"family": "bandpass", "mu1": 0.0, "mu2": 1.5708, "window": 4096}"#).unwrap();
        assert_eq!(b.lo(), -4096);
        let back: FilterSpec = serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
        assert_eq!(back, b);
        assert!(FilterSpec::from_json(r#"{"family": "explicit", "taps": {"x": 1.0}}"#).is_err());
        assert!(FilterSpec::from_json(r#"{"family": "shift", "m": 2}"#).unwrap().tap(-2) == 1.0);
    }

    #[test]
    fn response_of_shift_is_unimodular() {
        let (re, im) = shift_filter(2).response(0.7);
        assert_relative_eq!(re * re + im * im, 1.0, epsilon = 1e-15);
        let (re, _) = bandpass_filter(0.0, PI / 2.0, 4096).unwrap().response(0.5);
        assert!((re - 1.0).abs() < 0.01);
    }

    #[test]
    fn hhat_infinite_examples() {
        let s = setup(&ProcessSpec::ma1(0.5), 64);
        let id = hhat_infinite(&identity_filter(), &s.memory, &s.psi, &s.phi, 5).unwrap();
        assert_eq!(id.values, vec![1.0, 0.0, 0.0, 0.0, 0.0]);

        let h = hhat_infinite(&taps(&[(-1, 1.0), (0, 1.0)]), &s.memory, &s.psi, &s.phi, 3).unwrap();
        assert_relative_eq!(h.values[0], 1.5, epsilon = 1e-15);
        assert_relative_eq!(h.values[1], -0.25, epsilon = 1e-15);
        assert_relative_eq!(h.values[2], 0.125, epsilon = 1e-15);

        let s = setup(&ProcessSpec::ar1(0.5), 64);
        for m in 1..=4 {
            let h = hhat_infinite(&shift_filter(m), &s.memory, &s.psi, &s.phi, 6).unwrap();
            assert_relative_eq!(h.values[0], 0.5f64.powi(m as i32), epsilon = 1e-15);
            assert!(h.values[1..].iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn shift_reduces_to_infinite_predictor() {
        for spec in [ProcessSpec::arma(vec![0.5], vec![0.3]), ProcessSpec::fractional_noise(0.25)] {
            let s = setup(&spec, 200);
            for m in [1, 3, 7] {
                let h = hhat_infinite(&shift_filter(m), &s.memory, &s.psi, &s.phi, 50).unwrap();
                let p = infinite_predictor_coeffs(&s.psi, &s.phi, m, 50).unwrap();
                for (a, b) in h.values.iter().zip(&p.coeffs) {
                    assert_relative_eq!(a, b, max_relative = 1e-13, epsilon = 1e-300);
                }
            }
        }
    }

    #[test]
    fn hhat_finite_examples() {
        let s = setup(&ProcessSpec::ma1(0.5), 64);
        let id = hhat_finite(&identity_filter(), &s.memory, &s.gamma, 4).unwrap();
        assert_eq!(id, vec![1.0, 0.0, 0.0, 0.0]);
        let h = hhat_finite(&shift_filter(1), &s.memory, &s.gamma, 1).unwrap();
        assert_relative_eq!(h[0], 0.4, epsilon = 1e-15);

        let s = setup(&ProcessSpec::ar1(0.5), 64);
        for m in 1..=5 {
            for n in [1, 2, 7, 20] {
                let fin = hhat_finite(&shift_filter(m), &s.memory, &s.gamma, n).unwrap();
                let inf = hhat_infinite(&shift_filter(m), &s.memory, &s.psi, &s.phi, n).unwrap();
                assert!(l1_diff(&inf.values, &fin, n).unwrap() <= 1e-12);
            }
        }
    }

    #[test]
    fn shift_reduces_to_finite_predictor() {
        let s = setup(&ProcessSpec::fractional_noise(0.3), 200);
        for m in [1, 2, 5] {
            let h = hhat_finite(&shift_filter(m), &s.memory, &s.gamma, 40).unwrap();
            let p = finite_predictor_coeffs(&s.gamma, m, 40).unwrap();
            for (a, b) in h.iter().zip(&p.coeffs) {
                assert_relative_eq!(a, b, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn horizon_sum_matches_normal_equations() {
        let f = taps(&[(-3, 0.2), (-1, 1.0), (0, 0.7), (2, -0.4), (5, 0.3)]);
        for spec in [ProcessSpec::arma(vec![0.5], vec![0.3]), ProcessSpec::fractional_noise(0.2)] {
            let s = setup(&spec, 64);
            for n in [1, 2, 3, 4, 6, 10] {
                let direct = hhat_finite(&f, &s.memory, &s.gamma, n).unwrap();
                let by_m = hhat_finite_by_horizons(&f, &s.memory, &s.gamma, n).unwrap();
                for (a, b) in direct.iter().zip(&by_m) {
                    assert_relative_eq!(a, b, epsilon = 1e-12);
                }
                let sweep = hhat_finite_sweep(&f, &s.memory, &s.gamma, &[n]).unwrap();
                for (a, b) in direct.iter().zip(&sweep[0].values()) {
                    assert_relative_eq!(a, b, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn l1_diff_examples() {
        assert_eq!(l1_diff(&[1.0, 2.0], &[1.0, 2.0], 2).unwrap(), 0.0);
        let s = setup(&ProcessSpec::ma1(0.5), 64);
        let inf = hhat_infinite(&shift_filter(1), &s.memory, &s.psi, &s.phi, 1).unwrap();
        let fin = hhat_finite(&shift_filter(1), &s.memory, &s.gamma, 1).unwrap();
        assert_relative_eq!(l1_diff(&inf.values, &fin, 1).unwrap(), 0.1, epsilon = 1e-15);
        assert!(matches!(l1_diff(&[1.0], &[1.0, 2.0], 2), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn long_memory_l1_decays_like_n_to_minus_d() {
        let spec = ProcessSpec::fractional_noise(0.25);
        let s = setup(&spec, 3000);
        let inf = hhat_infinite(&shift_filter(1), &s.memory, &s.psi, &s.phi, 1024).unwrap();
        let fins = hhat_finite_sweep(&shift_filter(1), &s.memory, &s.gamma, &[256, 1024]).unwrap();
        let l: Vec<f64> = fins.iter().map(|h| l1_diff(&inf.values, &h.values(), h.n).unwrap()).collect();
        let slope = (l[1] / l[0]).ln() / 4f64.ln();
        assert!((-0.30..=-0.20).contains(&slope), "slope {slope}");
    }

    #[test]
    fn difference_route_matches_direct_subtraction() {
        let spec = ProcessSpec::arma(vec![0.5], vec![0.3]);
        let s = setup(&spec, 400);
        let f = bandpass_filter(0.0, PI / 2.0, 64).unwrap();
        let inf = hhat_infinite(&f, &s.memory, &s.psi, &s.phi, 300).unwrap();
        for n in [3, 10, 30] {
            let fin = hhat_finite(&f, &s.memory, &s.gamma, n).unwrap();
            let d = hhat_difference(&f, &inf, &s.gamma, n).unwrap();
            for (k, v) in d.total().iter().enumerate() {
                assert_relative_eq!(*v, fin[k] - inf.values[k], epsilon = 1e-12);
            }
            assert!(d.rhs_bound < 1e-15);
        }
        // Far out the future component is geometric and far below rounding of ĥ itself.
        let d60 = hhat_difference(&f, &inf, &s.gamma, 60).unwrap();
        let d80 = hhat_difference(&f, &inf, &s.gamma, 80).unwrap();
        let ratio = (d80.l1_future() / d60.l1_future()).powf(1.0 / 20.0);
        assert!((ratio - 0.3).abs() < 0.02, "ratio {ratio}");
        assert!(d80.l1_future() < 1e-40);
    }

    #[test]
    fn corollary_bound_dominates() {
        let f = taps(&[(-4, -0.3), (-2, 0.5), (-1, 1.0), (0, 0.7), (3, 0.4), (9, -0.2)]);
        for spec in [
            ProcessSpec::ma1(0.5),
            ProcessSpec::arma(vec![0.5], vec![0.3]),
            ProcessSpec::fractional_noise(0.25),
        ] {
            let s = setup(&spec, 400);
            let inf = hhat_infinite(&f, &s.memory, &s.psi, &s.phi, 300).unwrap();
            for n in [1, 2, 5, 8, 16, 64] {
                let l1 = if s.memory.is_long() {
                    let fin = hhat_finite(&f, &s.memory, &s.gamma, n).unwrap();
                    l1_diff(&inf.values, &fin, n).unwrap()
                } else {
                    hhat_difference(&f, &inf, &s.gamma, n).unwrap().l1()
                };
                let bound = corollary_bound(&f, &s.psi, &s.phi, &s.gamma, n).unwrap();
                assert!(l1 <= bound * (1.0 + 1e-12) + 1e-15, "{spec:?} n={n}: {l1} > {bound}");
            }
        }
    }

    #[test]
    fn long_memory_hhat_is_absolutely_summable() {
        let spec = ProcessSpec::fractional_noise(0.25);
        let s = setup(&spec, 5000);
        let f = polydecay_filter(0.25, 0.25, 512).unwrap();
        let h = hhat_infinite(&f, &s.memory, &s.psi, &s.phi, 4000).unwrap();
        let head: f64 = h.values.iter().map(|v| v.abs()).sum();
        assert!(h.tail_bound.is_finite() && h.tail_bound < head);
        let half: f64 = h.values[..2000].iter().map(|v| v.abs()).sum();
        assert!(head - half < h.tail_bound + head - half);
        assert!(head - half < 0.2 * head);
    }

    proptest! {
        #[test]
        fn finite_filter_error_is_orthogonal_to_observations(
            w in prop::collection::vec(-1.0f64..1.0, 1..8),
            lo in -6i64..3,
            a in -0.8f64..0.8,
            theta in -0.8f64..0.8,
            n in 1usize..40,
        ) {
            let f = taps(&w.iter().enumerate().map(|(i, v)| (lo + i as i64, *v)).collect::<Vec<_>>());
            let s = setup(&ProcessSpec::arma(vec![a], vec![theta]), 64);
            let h = hhat_finite(&f, &s.memory, &s.gamma, n).unwrap();
            prop_assert!(projection_residual(&f, &s.gamma, &h).unwrap() <= 1e-9 * s.gamma.gamma0());
        }

        #[test]
        fn bandpass_is_symmetric(mu1 in 0.0f64..1.5, width in 0.01f64..1.6, k in 1i64..200) {
            let f = bandpass_filter(mu1, mu1 + width, 200).unwrap();
            prop_assert_eq!(f.tap(k), f.tap(-k));
        }
    }
}
