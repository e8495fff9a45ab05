//! Grid experiments: uniform Baxter checks, L1 and MSPE diagnostics over a
//! grid of sample sizes, convergence-rate fits and the CSV/JSON report.

use std::collections::BTreeMap;
use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{
    hhat_difference, hhat_finite_sweep, hhat_infinite, target_covariances, FilterSpec, HatCoeffs, Summability,
};
use crate::lm_expansion::{estimate_constants, f_coeffs, LmConstants, SeriesExpansion};
use crate::mspe::{
    mspe_bounds, projection_norms, sigma_from_difference, sigma_projection, tail_norm, tail_norm_projection,
    toeplitz_norm,
};
use crate::predictor::{
    finite_predictor_multi, finite_predictor_sweep, infinite_predictor_coeffs, infinite_predictor_tail_sum,
    one_step_rhos, predictor_difference_sm,
};
use crate::process::{ar_inf_coeffs, autocovariance, ma_inf_coeffs, AutocovSeq, CoeffSeq, Memory, ProcessSpec, TailModel};

/// Relative slack for inequalities that can hold with equality.
const INEQUALITY_SLACK: f64 = 1e-12;

pub fn default_n_grid() -> Vec<usize> {
    (6..=12).map(|p| 1usize << p).collect()
}

pub fn default_m_grid() -> Vec<usize> {
    vec![1, 2, 4, 8, 16]
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_r() -> f64 {
    1.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub process: ProcessSpec,
    pub filter: FilterSpec,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_m_grid")]
    pub m_grid: Vec<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    /// Overrides for the entries of [`Tolerances`], by field name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    pub fn new(process: ProcessSpec, filter: FilterSpec) -> Self {
        ExperimentConfig {
            process,
            filter,
            n_grid: default_n_grid(),
            m_grid: default_m_grid(),
            epsilon: default_epsilon(),
            r: default_r(),
            tolerances: BTreeMap::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.process.validate()?;
        if self.n_grid.is_empty() || self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "n grid must be non-empty, positive and strictly increasing".into(),
            ));
        }
        if self.m_grid.is_empty() || self.m_grid.iter().any(|m| !(1..=64).contains(m)) {
            return Err(Error::InvalidConfig("m grid must be non-empty and within 1..=64".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        self.filter.check_compatible(&self.process.memory())?;
        Tolerances::resolve(&self.tolerances)?;
        Ok(())
    }

    pub fn tolerances(&self) -> Result<Tolerances> {
        Tolerances::resolve(&self.tolerances)
    }
}

/// Numerical tolerances and knobs of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Largest accepted truncation bound (relative to the quantity bounded).
    pub truncation: f64,
    /// Largest accepted relative deviation between Levinson and series predictors.
    pub cross_method: f64,
    /// Half-width of the accepted slope interval for `l1_diff`.
    pub l1_slope: f64,
    /// Half-width for `sigma_tilde` and `sigma`.
    pub sigma_slope: f64,
    /// Half-width for `rho_n`.
    pub rho_slope: f64,
    /// Half-width for `l1_diff` when it follows the filter tail.
    pub tail_slope: f64,
    /// Number of smallest grid points left out of the fits.
    pub skip: f64,
    /// Configured N₂ for long memory; 0 selects the empirical one.
    pub n2: f64,
    /// Range over which the K constants are maximised.
    pub probe_len: f64,
    /// Largest n at which the series expansion is cross-checked.
    pub cross_n_max: f64,
    /// Integer nodes of the series-expansion sums.
    pub series_nodes: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            truncation: 1e-6,
            cross_method: 1e-6,
            l1_slope: 0.05,
            sigma_slope: 0.07,
            rho_slope: 0.15,
            tail_slope: 0.15,
            skip: 2.0,
            n2: 0.0,
            probe_len: 1e4,
            cross_n_max: 64.0,
            series_nodes: 256.0,
        }
    }
}

impl Tolerances {
    pub fn resolve(overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut t = Tolerances::default();
        for (name, v) in overrides {
            let slot = match name.as_str() {
                "truncation" => &mut t.truncation,
                "cross_method" => &mut t.cross_method,
                "l1_slope" => &mut t.l1_slope,
                "sigma_slope" => &mut t.sigma_slope,
                "rho_slope" => &mut t.rho_slope,
                "tail_slope" => &mut t.tail_slope,
                "skip" => &mut t.skip,
                "n2" => &mut t.n2,
                "probe_len" => &mut t.probe_len,
                "cross_n_max" => &mut t.cross_n_max,
                "series_nodes" => &mut t.series_nodes,
                other => return Err(Error::InvalidConfig(format!("unknown tolerance {other:?}"))),
            };
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::InvalidConfig(format!("tolerance {name} must be finite and >= 0")));
            }
            *slot = *v;
        }
        Ok(t)
    }
}

/// Parse `A:B:xS` (geometric), `A:B:+S` or `A:B` (arithmetic), or a comma list.
pub fn parse_grid(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidConfig(format!("cannot parse grid {text:?}"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    let grid = match parts.as_slice() {
        [single] => single.split(',').map(num).collect::<Result<Vec<_>>>()?,
        [a, b] => (num(a)?..=num(b)?).collect(),
        [a, b, step] => {
            let (a, b) = (num(a)?, num(b)?);
            let step = step.trim();
            let mut out = Vec::new();
            if let Some(f) = step.strip_prefix('x') {
                let f = num(f)?;
                if f < 2 || a == 0 {
                    return Err(bad());
                }
                let mut v = a;
                while v <= b {
                    out.push(v);
                    v *= f;
                }
            } else {
                let s = num(step.strip_prefix('+').unwrap_or(step))?;
                if s == 0 {
                    return Err(bad());
                }
                out = (a..=b).step_by(s).collect();
            }
            out
        }
        _ => return Err(bad()),
    };
    if grid.is_empty() {
        return Err(bad());
    }
    Ok(grid)
}

/// One grid point of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub l1_diff: Option<f64>,
    /// Part of `l1_diff` due to the future taps, `Σ_k |Σ_m h_{-m} (φ_{k,n}^m - φ_k^m)|`.
    pub l1_future: Option<f64>,
    /// Part due to the taps beyond the sample.
    pub l1_past: Option<f64>,
    pub sigma_tilde: Option<f64>,
    pub sigma: Option<f64>,
    pub rho_n: Option<f64>,
    pub bound1: Option<f64>,
    pub bound2: Option<f64>,
    pub tail_norm: Option<f64>,
    /// `sup_{k >= n} |h_k|`.
    pub filter_tail: Option<f64>,
    /// Horizon of the tightest Baxter cell at this n.
    pub baxter_m: Option<usize>,
    pub baxter_lhs: Option<f64>,
    pub baxter_rhs: Option<f64>,
    pub baxter_constant: Option<f64>,
    /// `baxter_constant * baxter_rhs - baxter_lhs`.
    pub margin: Option<f64>,
    pub truncation_bound: Option<f64>,
    pub status: String,
}

impl ReportRow {
    fn empty(n: usize) -> Self {
        ReportRow {
            n,
            l1_diff: None,
            l1_future: None,
            l1_past: None,
            sigma_tilde: None,
            sigma: None,
            rho_n: None,
            bound1: None,
            bound2: None,
            tail_norm: None,
            filter_tail: None,
            baxter_m: None,
            baxter_lhs: None,
            baxter_rhs: None,
            baxter_constant: None,
            margin: None,
            truncation_bound: None,
            status: String::new(),
        }
    }

    pub fn column(&self, name: &str) -> Result<Option<f64>> {
        Ok(match name {
            "l1_diff" => self.l1_diff,
            "l1_future" => self.l1_future,
            "l1_past" => self.l1_past,
            "sigma_tilde" => self.sigma_tilde,
            "sigma" => self.sigma,
            "rho_n" => self.rho_n,
            "bound1" => self.bound1,
            "bound2" => self.bound2,
            "tail_norm" => self.tail_norm,
            "baxter_lhs" => self.baxter_lhs,
            other => return Err(Error::InvalidConfig(format!("unknown report column {other:?}"))),
        })
    }
}

/// One `(n, m)` cell of the uniform Baxter check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaxterCell {
    pub n: usize,
    pub m: usize,
    /// `Σ_{k<=n} |φ_k^m - φ_{k,n}^m|`.
    pub lhs: f64,
    /// `Σ_{k>n} |φ_k^m|` (short memory) or `m^d n^{-d}` (long memory).
    pub rhs: f64,
    pub constant: f64,
    pub margin: f64,
    /// Long memory: `Σ_{k>n} |φ_k^m|` against `C₃ (m / (n + m))^d`.
    pub tail_lhs: Option<f64>,
    pub tail_rhs: Option<f64>,
    pub tail_margin: Option<f64>,
    pub status: String,
}

impl BaxterCell {
    fn holds(&self) -> bool {
        self.margin >= 0.0 && self.tail_margin.is_none_or(|t| t >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// `log(value)` against `log(n)`.
    LogLog,
    /// `log(value)` against `n`.
    SemiLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Points used in the fit.
    pub points: usize,
    /// Exact zeros left out.
    pub zeros: usize,
}

/// Ordinary least squares of `log(value)` on `log(n)` or `n`. Zeros are
/// left out; at least three positive values are needed.
pub fn fit_rate(ns: &[usize], values: &[f64], mode: FitMode) -> Result<RateFit> {
    if ns.len() != values.len() {
        return Err(Error::LengthMismatch {
            expected: ns.len(),
            got: values.len(),
        });
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::DegenerateFit("values must be finite and non-negative".into()));
    }
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(n, v)| {
            let x = match mode {
                FitMode::LogLog => (*n as f64).ln(),
                FitMode::SemiLog => *n as f64,
            };
            (x, v.ln())
        })
        .collect();
    let zeros = values.len() - pts.len();
    if pts.len() < 3 {
        return Err(Error::DegenerateFit(format!("only {} positive values", pts.len())));
    }
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, y)| (a.min(*y), b.max(*y)));
    if lo == hi {
        return Err(Error::DegenerateFit("all values identical".into()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (sse / (k - 2.0) / sxx).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(RateFit {
        slope,
        stderr,
        intercept,
        r_squared,
        points: pts.len(),
        zeros,
    })
}

/// Fit one report column over the rows whose `n` lies in `window`.
pub fn rate_fit(rows: &[ReportRow], column: &str, window: RangeInclusive<usize>, mode: FitMode) -> Result<RateFit> {
    let mut ns = Vec::new();
    let mut vals = Vec::new();
    for r in rows.iter().filter(|r| window.contains(&r.n)) {
        if let Some(v) = r.column(column)? {
            ns.push(r.n);
            vals.push(v);
        }
    }
    if ns.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "{column}: {} grid points in the window, need 4",
            ns.len()
        )));
    }
    fit_rate(&ns, &vals, mode)
}

/// What a fitted slope is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expectation {
    Range { lo: f64, hi: f64 },
    /// Geometric decay: any negative slope.
    Negative,
    /// Reported only.
    Informational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub column: String,
    pub mode: FitMode,
    /// `fitted`, `exact_zero`, `underflow` or `error`.
    pub outcome: String,
    pub fit: Option<RateFit>,
    pub expected: Expectation,
    pub pass: Option<bool>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossMethod {
    pub ns: Vec<usize>,
    pub ms: Vec<usize>,
    pub max_rel_deviation: f64,
    pub series_terms: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCheck {
    pub n: usize,
    pub k_max: usize,
    pub uv_max: usize,
    pub checked: usize,
    pub violations: usize,
    /// Largest `δ_k / bound` seen.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rows: Vec<ReportRow>,
    pub baxter: Vec<BaxterCell>,
    pub constants: Option<LmConstants>,
    /// Short memory: grid start of the Baxter check.
    pub n1: Option<usize>,
    /// Long memory: N₂ used for the verdicts; configured, else where the
    /// δ-bound starts to hold (fractional noise) or where the Baxter check does.
    pub n2: Option<usize>,
    pub fits: Vec<FitSummary>,
    /// Slope of `l1_diff` and the centre of its expected interval.
    pub fitted_slope: Option<f64>,
    pub expected_slope: Option<f64>,
    /// Smallest and largest n used by the fits.
    pub slope_window: (usize, usize),
    pub cross_method: Option<CrossMethod>,
    /// δ-bound check at every grid n (fractional noise).
    pub delta_bound: Vec<DeltaCheck>,
    pub pass: BTreeMap<String, bool>,
    pub errors: Vec<String>,
}

/// Which parts of the pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub diagnostics: bool,
    pub baxter: bool,
    pub cross_method: bool,
}

impl Stages {
    pub fn all() -> Self {
        Stages {
            diagnostics: true,
            baxter: true,
            cross_method: true,
        }
    }
}

/// Process quantities sized for one configuration.
struct Model {
    memory: Memory,
    psi: CoeffSeq,
    phi: CoeffSeq,
    gamma: AutocovSeq,
    /// Length of ĥ: n_max for long memory, long enough for ĥ to vanish otherwise.
    hat_len: usize,
}

/// Indices past which a geometric sequence is below the smallest normal double.
fn geometric_extent(model: &TailModel) -> Result<usize> {
    Ok(match *model {
        TailModel::Zero => 8,
        TailModel::Geometric { rho, .. } => ((700.0 / -rho.ln()).ceil() as usize).clamp(8, 1 << 16),
        TailModel::Polynomial { .. } => {
            return Err(Error::InvalidConfig("polynomial tail on a short-memory process".into()))
        }
    })
}

fn build_model(config: &ExperimentConfig) -> Result<Model> {
    let spec = &config.process;
    let filter = &config.filter;
    let memory = spec.memory();
    let n_max = *config.n_grid.last().unwrap_or(&1);
    let m_max = config.m_grid.iter().copied().max().unwrap_or(1);
    let future = (-filter.lo()).max(0) as usize;
    let past_end = (filter.hi() + 1).max(0) as usize;
    let span = (filter.hi() - filter.lo()) as usize;
    let reach = future.max(m_max);
    let (hat_len, phi_len, max_lag) = if memory.is_long() {
        (n_max, n_max + reach + 2, (n_max + future).max(span).max(n_max + m_max) + 1)
    } else {
        let extra = geometric_extent(&ar_inf_coeffs(spec, 64)?.tail_model)?;
        let hat_len = n_max.max(past_end) + extra;
        let phi_len = hat_len + reach + 2;
        (hat_len, phi_len, phi_len.max(n_max + future).max(span) + 1)
    };
    Ok(Model {
        memory,
        psi: ma_inf_coeffs(spec, reach + 2)?,
        phi: ar_inf_coeffs(spec, phi_len)?,
        gamma: autocovariance(spec, max_lag, max_lag)?,
        hat_len,
    })
}

struct Diag {
    n: usize,
    l1: f64,
    l1_future: f64,
    l1_past: f64,
    sigma_tilde: f64,
    sigma: f64,
    tail_norm: f64,
    truncation: f64,
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn diagnostics(config: &ExperimentConfig, model: &Model, hinf: &HatCoeffs) -> Vec<Result<Diag>> {
    let filter = &config.filter;
    let gamma = &model.gamma;
    if model.memory.is_long() {
        let pre = (|| -> Result<_> {
            let fins = hhat_finite_sweep(filter, &model.memory, gamma, &config.n_grid)?;
            let n_max = *config.n_grid.last().unwrap_or(&1);
            let c = target_covariances(filter, gamma, n_max)?.total();
            let norms = projection_norms(filter, &model.psi, gamma, config.process.sigma2)?;
            Ok((fins, c, norms))
        })();
        let (fins, c, norms) = match pre {
            Ok(v) => v,
            Err(e) => return config.n_grid.iter().map(|_| Err(e.clone())).collect(),
        };
        fins.par_iter()
            .map(|h| {
                let n = h.n;
                let df: Vec<f64> = h.future.iter().zip(&hinf.future).map(|(a, b)| a - b).collect();
                let dp: Vec<f64> = h
                    .past
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a - filter.tap(i as i64))
                    .collect();
                let total: Vec<f64> = df.iter().zip(&dp).map(|(a, b)| a + b).collect();
                let hfin = h.values();
                Ok(Diag {
                    n,
                    l1: l1(&total),
                    l1_future: l1(&df),
                    l1_past: l1(&dp),
                    sigma_tilde: toeplitz_norm(gamma, &total)?,
                    sigma: sigma_projection(&norms, &hfin, &c[..n])?,
                    tail_norm: tail_norm_projection(&norms, &hinf.values, &c[..n], gamma)?,
                    truncation: gamma.error_bound,
                })
            })
            .collect()
    } else {
        config
            .n_grid
            .par_iter()
            .map(|&n| {
                let d = hhat_difference(filter, hinf, gamma, n)?;
                let total = d.total();
                let rest = model.hat_len - n;
                let sigma = sigma_from_difference(hinf, &total, gamma, rest)?;
                let tn = tail_norm(hinf, gamma, n, rest)?;
                Ok(Diag {
                    n,
                    l1: l1(&total),
                    l1_future: d.l1_future(),
                    l1_past: d.l1_past(),
                    sigma_tilde: toeplitz_norm(gamma, &total)?,
                    sigma: sigma.value,
                    tail_norm: tn.value,
                    truncation: d.rhs_bound.max(sigma.tail_bound).max(tn.tail_bound),
                })
            })
            .collect()
    }
}

fn baxter_cells(config: &ExperimentConfig, model: &Model, constants: &LmConstants) -> Result<Vec<BaxterCell>> {
    let ms = &config.m_grid;
    let ns = &config.n_grid;
    let (psi, phi, gamma) = (&model.psi, &model.phi, &model.gamma);
    let cell = |n: usize, m: usize, lhs: f64, rhs: f64, constant: f64| BaxterCell {
        n,
        m,
        lhs,
        rhs,
        constant,
        margin: constant * rhs - lhs,
        tail_lhs: None,
        tail_rhs: None,
        tail_margin: None,
        status: String::new(),
    };
    if let Memory::Long { d } = model.memory {
        let c2 = constants.c2.ok_or_else(|| Error::InvalidConfig("C2 unavailable".into()))?;
        let c3 = constants.c3.ok_or_else(|| Error::InvalidConfig("C3 unavailable".into()))?;
        let n_max = *ns.last().unwrap_or(&1);
        let inf: Vec<Vec<f64>> = ms
            .iter()
            .map(|&m| Ok(infinite_predictor_coeffs(psi, phi, m, n_max)?.coeffs))
            .collect::<Result<_>>()?;
        let mut lhs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        finite_predictor_sweep(gamma, ms, n_max, |n, xs| {
            if ns.contains(&n) {
                for (i, x) in xs.iter().enumerate() {
                    let s = x.iter().zip(&inf[i]).map(|(a, b)| (a - b).abs()).sum();
                    lhs.insert((n, ms[i]), s);
                }
            }
        })?;
        let keys: Vec<(usize, usize)> = ns.iter().flat_map(|&n| ms.iter().map(move |&m| (n, m))).collect();
        Ok(keys
            .par_iter()
            .map(|&(n, m)| {
                let mut c = cell(n, m, lhs[&(n, m)], (m as f64 / n as f64).powf(d), c2);
                let tail_lhs = infinite_predictor_tail_sum(psi, phi, m, n + 1);
                let tail_rhs = (m as f64 / (n + m) as f64).powf(d);
                c.tail_lhs = Some(tail_lhs);
                c.tail_rhs = Some(tail_rhs);
                c.tail_margin = Some(c3 * tail_rhs - tail_lhs);
                c
            })
            .collect())
    } else {
        let c1 = constants.c1.ok_or_else(|| Error::InvalidConfig("C1 unavailable".into()))?;
        let per_n: Vec<Vec<BaxterCell>> = ns
            .par_iter()
            .map(|&n| {
                let diffs = predictor_difference_sm(gamma, psi, phi, ms, n)?;
                Ok(ms
                    .iter()
                    .zip(&diffs)
                    .map(|(&m, diff)| cell(n, m, l1(diff), infinite_predictor_tail_sum(psi, phi, m, n + 1), c1))
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(per_n.into_iter().flatten().collect())
    }
}

/// Label cells. Short memory starts at N₁; long memory at `n2` when given,
/// else at the smallest grid n past the last violation.
fn classify_baxter(cells: &mut [BaxterCell], ns: &[usize], memory: &Memory, n1: Option<usize>, n2: Option<usize>) -> Option<usize> {
    let start = if memory.is_long() {
        n2.or_else(|| {
            let last_bad = cells.iter().filter(|c| !c.holds()).map(|c| c.n).max();
            match last_bad {
                None => ns.first().copied(),
                Some(b) => ns.iter().copied().find(|n| *n > b),
            }
        })
    } else {
        n1
    };
    for c in cells.iter_mut() {
        c.status = match start {
            Some(s) if c.n < s => "preasymptotic",
            Some(_) if c.holds() => "pass",
            _ => "fail",
        }
        .into();
    }
    start
}

/// Smallest grid n from which the δ-bound holds at every larger grid n.
fn delta_threshold(checks: &[DeltaCheck]) -> Option<usize> {
    let last_bad = checks.iter().filter(|c| c.violations > 0).map(|c| c.n).max();
    checks.iter().map(|c| c.n).find(|n| last_bad.is_none_or(|b| *n > b))
}

fn cross_method(config: &ExperimentConfig, model: &Model, tol: &Tolerances) -> Result<Option<CrossMethod>> {
    if !config.process.is_fractional_noise() {
        return Ok(None);
    }
    let cap = tol.cross_n_max as usize;
    let mut ns: Vec<usize> = config.n_grid.iter().copied().filter(|n| *n <= cap).collect();
    if ns.is_empty() {
        ns.push(cap.min(config.n_grid[0]).max(1));
    }
    let ms = config.m_grid.clone();
    let m_max = *ms.iter().max().unwrap_or(&1);
    let exp = SeriesExpansion::new(&config.process, tol.series_nodes as usize)?;
    let results: Vec<(f64, usize)> = ns
        .par_iter()
        .map(|&n| {
            let series = exp.predictors(n, m_max, 400, 1e-12)?;
            let lev = finite_predictor_multi(&model.gamma, &ms, n)?;
            let mut worst: f64 = 0.0;
            for (m, p) in ms.iter().zip(&lev) {
                for (a, b) in series.coeffs[m - 1].iter().zip(&p.coeffs) {
                    worst = worst.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
                }
            }
            Ok((worst, series.terms))
        })
        .collect::<Result<_>>()?;
    let max_rel_deviation = results.iter().map(|r| r.0).fold(0.0, f64::max);
    Ok(Some(CrossMethod {
        ns,
        ms,
        max_rel_deviation,
        series_terms: results.iter().map(|r| r.1).max().unwrap_or(0),
        pass: max_rel_deviation <= tol.cross_method,
    }))
}

/// `0 < δ_k(n,u,v) <= f_k(0) (r sin πd)^k / n` for `k <= k_max`, `u, v <= uv_max`.
pub fn delta_bound_check(spec: &ProcessSpec, r: f64, n: usize, k_max: usize, uv_max: usize, nodes: usize) -> Result<DeltaCheck> {
    let d = match spec.memory() {
        Memory::Long { d } => d,
        Memory::Short { .. } => return Err(Error::InvalidConfig("the delta bound concerns long memory".into())),
    };
    let exp = SeriesExpansion::new(spec, nodes.max(uv_max + 1))?;
    let mut cache = exp.cache(n, k_max)?;
    let f = f_coeffs(k_max);
    let x = r * (std::f64::consts::PI * d).sin();
    let mut out = DeltaCheck {
        n,
        k_max,
        uv_max,
        checked: 0,
        violations: 0,
        worst_ratio: 0.0,
    };
    for k in 1..=k_max {
        let bound = f.get(k) * x.powi(k as i32) / n as f64;
        for u in 0..=uv_max {
            for v in 0..=uv_max {
                let delta = crate::lm_expansion::delta_k(&mut cache, k, u, v)?;
                out.checked += 1;
                out.worst_ratio = out.worst_ratio.max(delta / bound);
                if !(delta > 0.0 && delta <= bound) {
                    out.violations += 1;
                }
            }
        }
    }
    Ok(out)
}

fn expectations(config: &ExperimentConfig, tol: &Tolerances, window: &[usize]) -> Vec<(&'static str, FitMode, Expectation)> {
    use Expectation::*;
    use FitMode::*;
    let range = |centre: f64, half: f64| Range {
        lo: centre - half,
        hi: centre + half,
    };
    match config.process.memory() {
        Memory::Long { d } => vec![
            ("l1_diff", LogLog, range(-d, tol.l1_slope)),
            ("l1_future", LogLog, Informational),
            ("l1_past", LogLog, Informational),
            ("sigma_tilde", LogLog, range(-d, tol.sigma_slope)),
            ("sigma", LogLog, range(-d, tol.sigma_slope)),
            ("rho_n", LogLog, range(-1.0, tol.rho_slope)),
        ],
        Memory::Short { .. } => {
            let f = &config.filter;
            if f.summability() == Summability::Fir {
                vec![
                    ("l1_diff", SemiLog, Negative),
                    ("l1_future", SemiLog, Negative),
                    ("l1_past", SemiLog, Negative),
                    ("sigma_tilde", SemiLog, Negative),
                    ("sigma", SemiLog, Negative),
                    ("rho_n", SemiLog, Negative),
                ]
            } else {
                // The L1 distance follows the filter tail: sup |h_k| over k >= n
                // for square-summable filters, Σ_{k>=n} |h_k| otherwise.
                let proxy = |n: usize| -> f64 {
                    if f.summability() == Summability::L2 {
                        f.sup_abs_from(n as i64)
                    } else {
                        (n as i64..=f.hi()).map(|k| f.tap(k).abs()).sum::<f64>() + 0.5 * f.tail_abs_sum()
                    }
                };
                let vals: Vec<f64> = window.iter().map(|n| proxy(*n)).collect();
                let l1_expect = match fit_rate(window, &vals, LogLog) {
                    Ok(fit) => range(fit.slope, tol.tail_slope),
                    Err(_) => Informational,
                };
                vec![
                    ("l1_diff", LogLog, l1_expect),
                    ("l1_future", SemiLog, Negative),
                    ("l1_past", LogLog, Informational),
                    ("sigma_tilde", LogLog, Informational),
                    ("sigma", LogLog, Informational),
                    ("rho_n", SemiLog, Negative),
                ]
            }
        }
    }
}

fn summarize_fit(rows: &[ReportRow], column: &str, mode: FitMode, expected: Expectation, window: RangeInclusive<usize>) -> FitSummary {
    let values: Vec<(usize, f64)> = rows
        .iter()
        .filter(|r| window.contains(&r.n))
        .filter_map(|r| r.column(column).ok().flatten().map(|v| (r.n, v)))
        .collect();
    let mut s = FitSummary {
        column: column.into(),
        mode,
        outcome: "fitted".into(),
        fit: None,
        expected,
        pass: None,
        note: None,
    };
    let judge = |slope: f64| match expected {
        Expectation::Range { lo, hi } => Some((lo..=hi).contains(&slope)),
        Expectation::Negative => Some(slope < 0.0),
        Expectation::Informational => None,
    };
    match rate_fit(rows, column, window, mode) {
        Ok(fit) => {
            s.pass = judge(fit.slope);
            s.fit = Some(fit);
        }
        Err(e) => {
            let positive = values.iter().filter(|v| v.1 > 0.0).count();
            let decreasing = values.windows(2).all(|w| w[1].1 <= w[0].1);
            if !values.is_empty() && positive == 0 {
                s.outcome = "exact_zero".into();
                s.pass = (expected != Expectation::Informational).then_some(true);
            } else if values.len() >= 4 && positive < 3 && decreasing {
                s.outcome = "underflow".into();
                s.pass = match expected {
                    Expectation::Negative => Some(true),
                    Expectation::Range { .. } => Some(false),
                    Expectation::Informational => None,
                };
            } else {
                s.outcome = "error".into();
                s.pass = (expected != Expectation::Informational).then_some(false);
            }
            s.note = Some(e.to_string());
        }
    }
    s
}

fn within(value: f64, bound: f64) -> bool {
    value <= bound * (1.0 + INEQUALITY_SLACK) + f64::MIN_POSITIVE
}

/// Run the requested stages. Stage failures are collected in `errors`;
/// whatever was computed is still reported.
pub fn evaluate(config: &ExperimentConfig, stages: Stages) -> Result<RateReport> {
    config.validate()?;
    let tol = config.tolerances()?;
    let model = build_model(config)?;
    let ns = &config.n_grid;
    let mut errors = Vec::new();
    let mut rows: Vec<ReportRow> = ns.iter().map(|&n| ReportRow::empty(n)).collect();
    let mut pass = BTreeMap::new();
    let skip = (tol.skip as usize).min(ns.len().saturating_sub(1));
    let window_ns: Vec<usize> = ns[skip..].to_vec();
    let slope_window = (window_ns[0], *window_ns.last().unwrap_or(&window_ns[0]));
    let mut fits = Vec::new();

    if stages.diagnostics {
        let n_max = *ns.last().unwrap_or(&1);
        let rhos = one_step_rhos(&model.gamma, config.process.sigma2, n_max);
        if let Err(e) = &rhos {
            errors.push(format!("rho_n: {e}"));
        }
        match hhat_infinite(&config.filter, &model.memory, &model.psi, &model.phi, model.hat_len) {
            Err(e) => errors.push(format!("optimal filter: {e}")),
            Ok(hinf) => {
                let g0 = model.gamma.gamma0();
                for (row, diag) in rows.iter_mut().zip(diagnostics(config, &model, &hinf)) {
                    let n = row.n;
                    row.filter_tail = Some(config.filter.sup_abs_from(n as i64));
                    row.rho_n = rhos.as_ref().ok().map(|r| r[n]);
                    match diag {
                        Ok(d) => {
                            let (b1, b2) = mspe_bounds(d.l1, g0, d.tail_norm);
                            row.l1_diff = Some(d.l1);
                            row.l1_future = Some(d.l1_future);
                            row.l1_past = Some(d.l1_past);
                            row.sigma_tilde = Some(d.sigma_tilde);
                            row.sigma = Some(d.sigma);
                            row.tail_norm = Some(d.tail_norm);
                            row.bound1 = Some(b1);
                            row.bound2 = Some(b2);
                            row.truncation_bound = Some(d.truncation);
                            debug_assert_eq!(d.n, n);
                        }
                        Err(e) => errors.push(format!("n = {n}: {e}")),
                    }
                }
            }
        }
        let bounds_ok = rows.iter().all(|r| match (r.sigma_tilde, r.bound1, r.sigma, r.bound2) {
            (Some(st), Some(b1), Some(s), Some(b2)) => within(st, b1) && within(s, b2),
            _ => false,
        });
        pass.insert("bounds".into(), bounds_ok);
        let trunc_ok = rows
            .iter()
            .all(|r| r.truncation_bound.is_some_and(|t| t <= tol.truncation));
        pass.insert("truncation".into(), trunc_ok);
        if config.filter.lo() == -1 && config.filter.hi() == -1 && config.filter.tap(-1) == 1.0 {
            let ok = rows.iter().all(|r| match (r.sigma, r.rho_n) {
                (Some(s), Some(rho)) => s >= rho * (1.0 - INEQUALITY_SLACK),
                _ => false,
            });
            pass.insert("sigma_ge_rho".into(), ok);
        }
        for (column, mode, expected) in expectations(config, &tol, &window_ns) {
            let f = summarize_fit(&rows, column, mode, expected, slope_window.0..=slope_window.1);
            if let Some(p) = f.pass {
                pass.insert(format!("{column}_rate"), p);
            }
            fits.push(f);
        }
    }

    let mut constants = None;
    let mut n1 = None;
    let mut n2 = None;
    let mut cells = Vec::new();
    let mut delta = Vec::new();
    if stages.baxter {
        match estimate_constants(&config.process, config.epsilon, config.r, tol.probe_len as usize) {
            Err(e) => {
                errors.push(format!("constants: {e}"));
                pass.insert("baxter".into(), false);
            }
            Ok(c) => {
                n1 = c.n1;
                match baxter_cells(config, &model, &c) {
                    Err(e) => {
                        errors.push(format!("baxter: {e}"));
                        pass.insert("baxter".into(), false);
                    }
                    Ok(mut cs) => {
                        // For fractional noise N₂ is where the δ-bound starts to hold.
                        let mut fixed = (tol.n2 > 0.0).then_some(tol.n2 as usize);
                        if config.process.is_fractional_noise() {
                            let scan: Result<Vec<DeltaCheck>> = ns
                                .par_iter()
                                .map(|&n| delta_bound_check(&config.process, config.r, n, 8, 16, tol.series_nodes as usize))
                                .collect();
                            match scan {
                                Ok(scan) => {
                                    let threshold = delta_threshold(&scan);
                                    let from = fixed.or(threshold);
                                    let ok = from.is_some_and(|f| scan.iter().all(|c| c.n < f || c.violations == 0));
                                    pass.insert("delta_bound".into(), ok);
                                    if fixed.is_none() {
                                        fixed = Some(threshold.unwrap_or(usize::MAX));
                                    }
                                    delta = scan;
                                }
                                Err(e) => errors.push(format!("delta bound: {e}")),
                            }
                        }
                        let start = classify_baxter(&mut cs, ns, &model.memory, n1, fixed).filter(|s| *s != usize::MAX);
                        if model.memory.is_long() {
                            n2 = start;
                        }
                        pass.insert(
                            "baxter".into(),
                            start.is_some() && cs.iter().all(|c| c.status != "fail"),
                        );
                        for row in rows.iter_mut() {
                            let tightest = cs
                                .iter()
                                .filter(|c| c.n == row.n)
                                .min_by(|a, b| a.margin.total_cmp(&b.margin));
                            if let Some(c) = tightest {
                                row.baxter_m = Some(c.m);
                                row.baxter_lhs = Some(c.lhs);
                                row.baxter_rhs = Some(c.rhs);
                                row.baxter_constant = Some(c.constant);
                                row.margin = Some(c.margin);
                            }
                        }
                        cells = cs;
                    }
                }
                constants = Some(c);
            }
        }
    }

    let mut cross = None;
    if stages.cross_method && model.memory.is_long() {
        match cross_method(config, &model, &tol) {
            Ok(c) => {
                if let Some(c) = &c {
                    pass.insert("cross_method".into(), c.pass);
                }
                cross = c;
            }
            Err(e) => {
                errors.push(format!("cross-method: {e}"));
                pass.insert("cross_method".into(), false);
            }
        }
    }

    for row in rows.iter_mut() {
        let n = row.n;
        let trunc_bad = row.truncation_bound.is_some_and(|t| t > tol.truncation);
        let bounds_bad = match (row.sigma_tilde, row.bound1, row.sigma, row.bound2) {
            (Some(st), Some(b1), Some(s), Some(b2)) => !(within(st, b1) && within(s, b2)),
            _ => stages.diagnostics,
        };
        let cell_states: Vec<&str> = cells.iter().filter(|c| c.n == n).map(|c| c.status.as_str()).collect();
        row.status = if trunc_bad {
            "truncation"
        } else if bounds_bad || cell_states.contains(&"fail") {
            "fail"
        } else if cell_states.contains(&"preasymptotic") {
            "preasymptotic"
        } else {
            "pass"
        }
        .into();
    }

    let l1_fit = fits.iter().find(|f| f.column == "l1_diff");
    let fitted_slope = l1_fit.and_then(|f| f.fit.map(|x| x.slope));
    let expected_slope = l1_fit.and_then(|f| match f.expected {
        Expectation::Range { lo, hi } => Some(0.5 * (lo + hi)),
        _ => None,
    });
    pass.insert("no_errors".into(), errors.is_empty());
    let all = pass.values().all(|v| *v);
    pass.insert("all".into(), all);
    Ok(RateReport {
        rows,
        baxter: cells,
        constants,
        n1,
        n2,
        fits,
        fitted_slope,
        expected_slope,
        slope_window,
        cross_method: cross,
        delta_bound: delta,
        pass,
        errors,
    })
}

/// Constants and the `(n, m)` Baxter grid only.
pub fn baxter_grid_check(config: &ExperimentConfig) -> Result<RateReport> {
    evaluate(
        config,
        Stages {
            diagnostics: false,
            baxter: true,
            cross_method: false,
        },
    )
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a ExperimentConfig,
    tolerances: Tolerances,
    constants: &'a Option<LmConstants>,
    n1: Option<usize>,
    n2: Option<usize>,
    slope_window: (usize, usize),
    fitted_slope: Option<f64>,
    expected_slope: Option<f64>,
    fits: &'a [FitSummary],
    cross_method: &'a Option<CrossMethod>,
    delta_bound: &'a [DeltaCheck],
    pass: &'a BTreeMap<String, bool>,
    errors: &'a [String],
}

/// Write `report.csv`, `baxter.csv` and `summary.json` into `out`.
pub fn write_report(report: &RateReport, config: &ExperimentConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("report.csv"))?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("baxter.csv"))?;
    if report.baxter.is_empty() {
        w.write_record([
            "n", "m", "lhs", "rhs", "constant", "margin", "tail_lhs", "tail_rhs", "tail_margin", "status",
        ])?;
    }
    for cell in &report.baxter {
        w.serialize(cell)?;
    }
    w.flush()?;
    let summary = Summary {
        config,
        tolerances: config.tolerances()?,
        constants: &report.constants,
        n1: report.n1,
        n2: report.n2,
        slope_window: report.slope_window,
        fitted_slope: report.fitted_slope,
        expected_slope: report.expected_slope,
        fits: &report.fits,
        cross_method: &report.cross_method,
        delta_bound: &report.delta_bound,
        pass: &report.pass,
        errors: &report.errors,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(out.join("summary.json"), text)?;
    Ok(())
}

/// Full pipeline, written to `out`.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<RateReport> {
    let report = evaluate(config, Stages::all())?;
    write_report(&report, config, out)?;
    Ok(report)
}
