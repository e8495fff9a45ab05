//! Series expansion of finite predictor coefficients,
//! `φ_{j,n}^m = Σ_k g_k^{m-1}(n, j)`, built from
//!
//! * `β_n = Σ_v ψ_v φ_{n+v}`,
//! * `δ_0(n,u,v) = 1{u = v}`, `δ_{k+1}(n,u,v) = Σ_w β_{n+v+w} δ_k(n,u,w)`,
//! * `b_k^m(n,j) = Σ_{v=0}^m ψ_{m-v} Σ_u φ_{j+u} δ_{k-1}(n+1,u,v)`,
//! * `g_k^m(n,j) = b_k^m(n,j)` for odd k and `b_k^m(n,n+1-j)` for even k,
//!
//! together with the constants of the uniform Baxter inequalities.
//!
//! The sums over u and w run over all non-negative integers. For short memory
//! they are cut where β vanishes; for fractional noise the summands decay
//! polynomially and the sums are discretised with [`SumRule::with_tail`], using
//! the exact continuation `β(x) = sin(πd) / (π (x - d))` at real arguments.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{ar_inf_coeffs, ma_inf_coeffs, weighted_norm, CoeffSeq, Memory, ProcessSpec};
use crate::quadrature::SumRule;
use crate::special::{beta_fn, gamma_fn};

/// `f_1(0), f_2(0), ...`: `Σ f_{2k-1}(0) x^{2k-1} = arcsin(x)/π` and
/// `Σ f_{2k}(0) x^{2k} = (arcsin(x)/π)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FCoeffs {
    /// `values[k - 1] = f_k(0)`.
    pub values: Vec<f64>,
}

impl FCoeffs {
    pub fn get(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    /// `Σ_{k odd} f_k(0) x^k` over the stored terms.
    pub fn odd_sum(&self, x: f64) -> f64 {
        self.partial(x, |k| k % 2 == 1)
    }

    /// `Σ_{k even} f_k(0) x^k` over the stored terms.
    pub fn even_sum(&self, x: f64) -> f64 {
        self.partial(x, |k| k % 2 == 0)
    }

    pub fn sum(&self, x: f64) -> f64 {
        self.partial(x, |_| true)
    }

    fn partial(&self, x: f64, keep: impl Fn(usize) -> bool) -> f64 {
        let mut s = 0.0;
        let mut p = 1.0;
        for (i, f) in self.values.iter().enumerate() {
            p *= x;
            if keep(i + 1) {
                s += f * p;
            }
        }
        s
    }
}

/// `Σ_{k>=1} f_k(0) x^k = arcsin(x)/π + (arcsin(x)/π)²` for `|x| < 1`.
pub fn f_series_closed_form(x: f64) -> f64 {
    let a = x.asin() / PI;
    a + a * a
}

pub fn f_coeffs(len: usize) -> FCoeffs {
    // arcsin(x) = Σ_j (2j)! / (4^j (j!)² (2j+1)) x^{2j+1}; the central binomial
    // ratio c_j = (2j)!/(4^j (j!)²) obeys c_j = c_{j-1} (2j-1)/(2j).
    let mut odd = vec![0.0; len + 1];
    let mut c = 1.0;
    let mut j = 0usize;
    while 2 * j < len {
        if j > 0 {
            c *= (2 * j - 1) as f64 / (2 * j) as f64;
        }
        odd[2 * j + 1] = c / (PI * (2 * j + 1) as f64);
        j += 1;
    }
    let mut values = vec![0.0; len];
    for k in 1..=len {
        values[k - 1] = if k % 2 == 1 {
            odd[k]
        } else {
            (1..k).step_by(2).map(|i| odd[i] * odd[k - i]).sum()
        };
    }
    FCoeffs { values }
}

/// Truncated `β_n`, `n = 0..=max_n`, with a bound on the omitted tail.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSeq {
    pub values: Vec<f64>,
    pub tail_bound: f64,
}

/// `β_n = Σ_{v<trunc} ψ_v φ_{n+v}` for `n = 0..=max_n`.
pub fn beta_seq(psi: &CoeffSeq, phi: &CoeffSeq, max_n: usize, trunc: usize) -> Result<BetaSeq> {
    let exact_psi = psi.values.len() >= trunc || psi.continuation.is_some();
    let exact_phi = phi.values.len() >= max_n + trunc || phi.continuation.is_some();
    if !(exact_psi || psi.tail_model == crate::process::TailModel::Zero)
        || !(exact_phi || phi.tail_model == crate::process::TailModel::Zero)
    {
        return Err(Error::TruncationInsufficient(format!(
            "beta sums need psi to {trunc} and phi to {} terms",
            max_n + trunc
        )));
    }
    let psi_v: Vec<f64> = (0..trunc).map(|v| psi.get(v)).collect();
    let phi_v: Vec<f64> = (0..max_n + trunc).map(|v| phi.get(v)).collect();
    let values = (0..=max_n)
        .map(|n| psi_v.iter().zip(&phi_v[n..]).map(|(a, b)| a * b).sum())
        .collect();
    // |Σ_{v>=trunc} ψ_v φ_{n+v}| <= sup_{v>=trunc} |ψ_v| · Σ_{j>=trunc} |φ_j|
    let psi_sup = match psi.tail_model {
        crate::process::TailModel::Zero => psi.values.iter().skip(trunc).fold(0.0f64, |a, b| a.max(b.abs())),
        crate::process::TailModel::Geometric { rho, scale } => scale * rho.powi(trunc as i32),
        crate::process::TailModel::Polynomial { exponent, scale } => scale * (trunc.max(1) as f64).powf(-exponent),
    };
    let psi_sup = psi_sup.max(psi.values.iter().skip(trunc).fold(0.0f64, |a, b| a.max(b.abs())));
    let tail_bound = psi_sup * phi.abs_tail_sum(trunc);
    Ok(BetaSeq { values, tail_bound })
}

/// `β_n` of ARFIMA(0, d, 0): `sin(πd) / (π (n - d))`, valid for real `n >= 0`.
pub fn beta_fractional_noise(d: f64, n: f64) -> f64 {
    (PI * d).sin() / (PI * (n - d))
}

/// How β is evaluated inside the δ recursion.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaKernel {
    /// Closed form of fractional noise, at real arguments.
    FractionalNoise { d: f64 },
    /// Tabulated `β_0, β_1, ...` of a short-memory process; zero past the table.
    Tabulated(Vec<f64>),
}

impl BetaKernel {
    pub fn at(&self, x: f64) -> f64 {
        match self {
            BetaKernel::FractionalNoise { d } => beta_fractional_noise(*d, x),
            BetaKernel::Tabulated(t) => t.get(x as usize).copied().unwrap_or(0.0),
        }
    }
}

/// Memoised rows `δ_k(n, u, ·)` evaluated at the nodes of a [`SumRule`].
///
/// By symmetry `δ_k(n,u,v) = δ_k(n,v,u)`, so a row keyed `(k, u)` also gives
/// the column. Rows are computed with the Nyström recursion
/// `δ_{k+1}(n,u,x_i) = Σ_j ω_j β(n + x_i + x_j) δ_k(n,u,x_j)`.
#[derive(Debug, Clone)]
pub struct DeltaCache {
    pub n: usize,
    pub max_k: usize,
    rule: SumRule,
    /// Row-major `β(n + x_i + x_j)`.
    kernel: Vec<f64>,
    rows: HashMap<(usize, usize), Vec<f64>>,
}

/// Relative size of the β tail beyond the last integer node that is accepted
/// for integer-only rules.
pub const W_TAIL_TOL: f64 = 1e-10;

impl DeltaCache {
    pub fn new(beta: &BetaKernel, rule: SumRule, n: usize, max_k: usize) -> Result<Self> {
        if let BetaKernel::Tabulated(t) = beta {
            if rule.has_tail() {
                return Err(Error::InvalidConfig("tabulated beta needs an integer-only rule".into()));
            }
            let scale = t.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let w = rule.exact();
            // The w-sum at the last row reaches β_{n + 2(w-1)}; what lies past
            // the last node must be negligible.
            let beyond = t.iter().skip(n + w).fold(0.0f64, |a, b| a.max(b.abs()));
            if beyond > W_TAIL_TOL * scale {
                return Err(Error::TruncationInsufficient(format!(
                    "beta beyond index {} is {beyond:e}, above {W_TAIL_TOL:e} relative",
                    n + w
                )));
            }
        }
        let x = rule.nodes();
        let nn = x.len();
        let mut kernel = vec![0.0; nn * nn];
        for i in 0..nn {
            for j in 0..nn {
                kernel[i * nn + j] = beta.at(n as f64 + x[i] + x[j]);
            }
        }
        Ok(DeltaCache {
            n,
            max_k,
            rule,
            kernel,
            rows: HashMap::new(),
        })
    }

    pub fn rule(&self) -> &SumRule {
        &self.rule
    }

    /// Number of integer nodes, i.e. the largest addressable `v` plus one.
    pub fn trunc_w(&self) -> usize {
        self.rule.exact()
    }

    /// `δ_k(n, u, x_i)` for every node `x_i`, `k >= 1`, integer `u < trunc_w`.
    pub fn row(&mut self, k: usize, u: usize) -> &[f64] {
        assert!(k >= 1 && u < self.rule.exact());
        if !self.rows.contains_key(&(k, u)) {
            let nn = self.rule.len();
            let new = if k == 1 {
                // Only the unit-weight node u survives the Kronecker delta.
                self.kernel[u * nn..(u + 1) * nn].to_vec()
            } else {
                let prev = self.row(k - 1, u).to_vec();
                let wr: Vec<f64> = prev.iter().zip(self.rule.weights()).map(|(r, w)| r * w).collect();
                (0..nn)
                    .map(|i| {
                        self.kernel[i * nn..(i + 1) * nn]
                            .iter()
                            .zip(&wr)
                            .map(|(a, b)| a * b)
                            .sum()
                    })
                    .collect()
            };
            self.rows.insert((k, u), new);
        }
        &self.rows[&(k, u)]
    }
}

/// `δ_k(n, u, v)` for integer `u, v` below the cache's `trunc_w`.
pub fn delta_k(cache: &mut DeltaCache, k: usize, u: usize, v: usize) -> Result<f64> {
    if u >= cache.trunc_w() || v >= cache.trunc_w() {
        return Err(Error::InvalidConfig(format!(
            "delta indices ({u}, {v}) beyond the {} exact nodes",
            cache.trunc_w()
        )));
    }
    if k > cache.max_k {
        return Err(Error::InvalidConfig(format!("k = {k} exceeds max_k = {}", cache.max_k)));
    }
    if k == 0 {
        return Ok(if u == v { 1.0 } else { 0.0 });
    }
    Ok(cache.row(k, u)[v])
}

/// `b_k^m(n, j)` from its closed form. `cache` must be built at `n + 1`.
pub fn b_km(psi: &CoeffSeq, phi: &CoeffSeq, cache: &mut DeltaCache, k: usize, m: usize, j: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("b_k^m needs k >= 1".into()));
    }
    if k == 1 {
        return Ok((0..=m).map(|v| psi.get(m - v) * phi.get(j + v)).sum());
    }
    if m >= cache.trunc_w() {
        return Err(Error::InvalidConfig(format!("m = {m} beyond the cached rows")));
    }
    let weighted_phi = weighted_phi(phi, cache.rule(), j);
    let mut s = 0.0;
    for v in 0..=m {
        let row = cache.row(k - 1, v);
        s += psi.get(m - v) * dot(&weighted_phi, row);
    }
    Ok(s)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ω_i φ(j + x_i)` over the nodes of the rule.
fn weighted_phi(phi: &CoeffSeq, rule: &SumRule, j: usize) -> Vec<f64> {
    rule.nodes()
        .iter()
        .zip(rule.weights())
        .map(|(x, w)| w * phi.at(j as f64 + x))
        .collect()
}

/// Partial sum of the expansion with a remainder estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    pub remainder_bound: f64,
}

/// All `φ_{j,n}^m`, `j = 1..=n`, for `m = 1..=m_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPredictors {
    pub n: usize,
    /// `coeffs[m - 1][j - 1] = φ_{j,n}^m`.
    pub coeffs: Vec<Vec<f64>>,
    pub terms: usize,
    pub remainder_bound: f64,
}

/// Evaluation context for the expansion of one process.
#[derive(Debug, Clone)]
pub struct SeriesExpansion {
    pub psi: CoeffSeq,
    pub phi: CoeffSeq,
    pub kernel: BetaKernel,
    /// Integer nodes in the u/w sums.
    pub exact_nodes: usize,
    /// Whether the sums carry a quadrature tail past the integer nodes.
    pub tail: bool,
}

/// Default number of integer nodes for long-memory sums; the discretisation
/// error is about `exact_nodes^-2` relative.
pub const DEFAULT_EXACT_NODES: usize = 256;

impl SeriesExpansion {
    /// Long memory is supported for ARFIMA(0, d, 0), whose β has a closed
    /// form at real arguments; short memory for any process whose β sequence
    /// dies out within `exact_nodes`.
    pub fn new(spec: &ProcessSpec, exact_nodes: usize) -> Result<Self> {
        spec.validate()?;
        match spec.memory() {
            Memory::Long { d } => {
                if !spec.is_fractional_noise() {
                    return Err(Error::InvalidConfig(
                        "series expansion for long memory is implemented for ARFIMA(0, d, 0) only".into(),
                    ));
                }
                Ok(SeriesExpansion {
                    psi: ma_inf_coeffs(spec, exact_nodes + 64)?,
                    phi: ar_inf_coeffs(spec, exact_nodes + 64)?,
                    kernel: BetaKernel::FractionalNoise { d },
                    exact_nodes,
                    tail: true,
                })
            }
            Memory::Short { .. } => {
                let len = 4 * exact_nodes + 64;
                let psi = ma_inf_coeffs(spec, len)?;
                let phi = ar_inf_coeffs(spec, len)?;
                let beta = beta_seq(&psi, &phi, 2 * exact_nodes + 2, 2 * exact_nodes)?;
                Ok(SeriesExpansion {
                    psi,
                    phi,
                    kernel: BetaKernel::Tabulated(beta.values),
                    exact_nodes,
                    tail: false,
                })
            }
        }
    }

    pub fn rule(&self) -> SumRule {
        if self.tail {
            SumRule::with_tail(self.exact_nodes)
        } else {
            SumRule::integers(self.exact_nodes)
        }
    }

    /// δ cache at `n` (the b_k^m sums need `n + 1`).
    pub fn cache(&self, n: usize, max_k: usize) -> Result<DeltaCache> {
        DeltaCache::new(&self.kernel, self.rule(), n, max_k)
    }

    /// Expansion of `φ_{j,n}^m` for all `j = 1..=n` and `m = 1..=m_max`.
    /// Terms are added until the largest new term is below `rel_tol` times the
    /// largest coefficient; `max_terms` caps the count.
    pub fn predictors(&self, n: usize, m_max: usize, max_terms: usize, rel_tol: f64) -> Result<SeriesPredictors> {
        if n == 0 || m_max == 0 {
            return Err(Error::InvalidConfig("n and m must be at least 1".into()));
        }
        if m_max > self.exact_nodes {
            return Err(Error::InvalidConfig("horizon exceeds the number of exact nodes".into()));
        }
        let mut cache = self.cache(n + 1, max_terms)?;
        let rule = cache.rule().clone();
        let wphi: Vec<Vec<f64>> = (1..=n).map(|j| weighted_phi(&self.phi, &rule, j)).collect();
        let psi: Vec<f64> = (0..m_max).map(|l| self.psi.get(l)).collect();
        // D(v, j) for the current k; b_k^{m-1}(n, j) = Σ_{v<m} ψ_{m-1-v} D(v, j).
        let mut sums = vec![vec![0.0; n]; m_max];
        let mut history: Vec<f64> = Vec::new();
        for k in 1..=max_terms {
            let d: Vec<Vec<f64>> = (0..m_max)
                .map(|v| {
                    if k == 1 {
                        (1..=n).map(|j| self.phi.get(j + v)).collect()
                    } else {
                        let row = cache.row(k - 1, v).to_vec();
                        wphi.iter().map(|w| dot(w, &row)).collect()
                    }
                })
                .collect();
            let mut largest: f64 = 0.0;
            for m in 1..=m_max {
                for j in 1..=n {
                    let arg = if k % 2 == 1 { j } else { n + 1 - j };
                    let b: f64 = (0..m).map(|v| psi[m - 1 - v] * d[v][arg - 1]).sum();
                    sums[m - 1][j - 1] += b;
                    largest = largest.max(b.abs());
                }
            }
            history.push(largest);
            let scale = sums
                .iter()
                .flat_map(|s| s.iter())
                .fold(0.0f64, |a, b| a.max(b.abs()));
            if largest == 0.0 || (k >= 2 && largest <= rel_tol * scale) {
                let remainder_bound = geometric_remainder(&history).unwrap_or(0.0);
                return Ok(SeriesPredictors {
                    n,
                    coeffs: sums,
                    terms: k,
                    remainder_bound,
                });
            }
        }
        Err(Error::SeriesNotConverging {
            terms: max_terms,
            last_term: *history.last().unwrap_or(&f64::NAN),
        })
    }
}

/// Remainder estimate `t_K q / (1 - q)` from the largest observed ratio of
/// successive term magnitudes over the last few terms.
fn geometric_remainder(history: &[f64]) -> Option<f64> {
    let last = *history.last()?;
    if last == 0.0 {
        return Some(0.0);
    }
    let window = &history[history.len().saturating_sub(6)..];
    let q = window
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .fold(0.0f64, f64::max);
    if q >= 1.0 {
        return Some(f64::INFINITY);
    }
    Some(last * q / (1.0 - q))
}

/// Single coefficient `φ_{j,n}^m` from the expansion.
pub fn finite_predictor_series(
    expansion: &SeriesExpansion,
    n: usize,
    m: usize,
    j: usize,
    max_terms: usize,
) -> Result<SeriesValue> {
    if j == 0 || j > n {
        return Err(Error::InvalidConfig(format!("j = {j} outside 1..={n}")));
    }
    let p = expansion.predictors(n, m, max_terms, 1e-12)?;
    Ok(SeriesValue {
        value: p.coeffs[m - 1][j - 1],
        terms: p.terms,
        remainder_bound: p.remainder_bound,
    })
}

/// Explicit constants of the uniform Baxter inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmConstants {
    pub d: f64,
    pub r: f64,
    pub epsilon: f64,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub k3: Option<f64>,
    pub k4: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub n1: Option<usize>,
    /// `Σ_k f_k(0) (r sin πd)^k`.
    pub f_sum: Option<f64>,
    /// `B(d, 1 - d)`.
    pub beta_d: Option<f64>,
    /// Range `1..=probe_len` over which the K suprema were taken.
    pub probe_len: usize,
}

/// `C₂ = 2/(1-d) K₁ K₃ Σ_k f_k(0) (r sin πd)^k`.
pub fn assemble_c2(d: f64, r: f64, k1: f64, k3: f64) -> f64 {
    2.0 / (1.0 - d) * k1 * k3 * f_series_closed_form(r * (PI * d).sin())
}

/// `C₃ = K₁ K₂ K₄ B(d, 1-d)`.
pub fn assemble_c3(d: f64, k1: f64, k2: f64, k4: f64) -> f64 {
    k1 * k2 * k4 * beta_fn(d, 1.0 - d)
}

/// `(1/m) Σ_{ℓ=1}^m (ℓ/m)^{d-1} ((1 + 1/m) - ℓ/m)^{-d}`.
pub fn k4_ratio(d: f64, m: usize) -> f64 {
    let mf = m as f64;
    (1..=m)
        .map(|l| {
            let x = l as f64 / mf;
            x.powf(d - 1.0) * (1.0 + 1.0 / mf - x).powf(-d)
        })
        .sum::<f64>()
        / mf
}

/// Smallest `n >= 1` with `(Σ_{k>n} |φ_k|)(Σ_{k>=1} |ψ_k|) <= ε`.
pub fn choose_n1(psi: &CoeffSeq, phi: &CoeffSeq, epsilon: f64) -> Result<usize> {
    let psi_sum = psi.abs_tail_sum(1);
    if psi_sum == 0.0 {
        return Ok(1);
    }
    let limit = phi.values.len();
    let mut tail = phi.abs_tail_sum(2);
    let mut n = 1;
    loop {
        if tail * psi_sum <= epsilon {
            return Ok(n);
        }
        if n + 1 >= limit {
            break;
        }
        tail -= phi.values[n + 1].abs();
        n += 1;
    }
    Err(Error::TruncationInsufficient(format!(
        "no n below {limit} satisfies the N1 rule for epsilon = {epsilon}"
    )))
}

/// Estimate the inequality constants.
///
/// Short memory: C₁ and N₁. Long memory: K₁..K₄ as suprema over
/// `1..=probe_len` (raised to their asymptotic limits when those are larger),
/// then C₂ and C₃.
pub fn estimate_constants(spec: &ProcessSpec, epsilon: f64, r: f64, probe_len: usize) -> Result<LmConstants> {
    spec.validate()?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let probe_len = probe_len.max(2);
    let psi = ma_inf_coeffs(spec, probe_len + 2)?;
    let phi = ar_inf_coeffs(spec, probe_len + 2)?;
    let mut out = LmConstants {
        d: spec.d(),
        r,
        epsilon,
        k1: None,
        k2: None,
        k3: None,
        k4: None,
        c1: None,
        c2: None,
        c3: None,
        n1: None,
        f_sum: None,
        beta_d: None,
        probe_len,
    };
    match spec.memory() {
        Memory::Short { .. } => {
            let np = weighted_norm(&psi, 0.0)?;
            let nf = weighted_norm(&phi, 0.0)?;
            out.c1 = Some((3.0 - epsilon) / (1.0 - epsilon) * np * np * nf * nf);
            out.n1 = Some(choose_n1(&psi, &phi, epsilon)?);
        }
        Memory::Long { d } => {
            let x = r * (PI * d).sin();
            if !(r > 1.0) || x >= 1.0 {
                return Err(Error::ConstraintViolated(format!(
                    "need r > 1 and r sin(pi d) < 1, got r = {r}, r sin(pi d) = {x}"
                )));
            }
            let (ar, ma) = spec.arma_parts();
            let a1: f64 = 1.0 - ar.iter().sum::<f64>();
            let t1: f64 = 1.0 + ma.iter().sum::<f64>();
            let psi_arma1 = (t1 / a1).abs();
            let ell = psi_arma1 / gamma_fn(d);

            // K₁: Σ_{j>=n-1} |φ_j| <= K₁ n^{-d}
            let mut tail = phi.abs_tail_sum(probe_len);
            let mut k1: f64 = 0.0;
            for n in (1..=probe_len).rev() {
                tail += phi.values[n - 1].abs();
                k1 = k1.max((n as f64).powf(d) * tail);
            }
            k1 = k1.max(1.0 / (psi_arma1 * gamma_fn(1.0 - d)));

            // K₂: |ψ_j| <= K₂ (j+1)^{d-1}
            let k2 = psi.values[..probe_len]
                .iter()
                .enumerate()
                .map(|(j, p)| p.abs() * (j as f64 + 1.0).powf(1.0 - d))
                .fold(ell, f64::max);

            // K₃: Σ_{j=1}^m |ψ_j| <= K₃ m^d
            let mut partial = 0.0;
            let mut k3 = ell / d;
            for m in 1..=probe_len {
                partial += psi.values[m].abs();
                k3 = k3.max(partial * (m as f64).powf(-d));
            }

            // K₄ from the Riemann-sum ratio; its limit is B(d, 1-d) itself.
            let bd = beta_fn(d, 1.0 - d);
            let mut k4: f64 = 1.0;
            let mut m = 1usize;
            while m <= probe_len {
                k4 = k4.max(k4_ratio(d, m) / bd);
                m = if m < 2048 { m + 1 } else { m + m / 16 };
            }

            out.k1 = Some(k1);
            out.k2 = Some(k2);
            out.k3 = Some(k3);
            out.k4 = Some(k4);
            out.f_sum = Some(f_series_closed_form(x));
            out.beta_d = Some(bd);
            out.c2 = Some(assemble_c2(d, r, k1, k3));
            out.c3 = Some(assemble_c3(d, k1, k2, k4));
        }
    }
    Ok(out)
}
