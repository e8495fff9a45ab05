//! Stationary processes through their Wold representation: MA(∞) weights
//! ψ_j, AR(∞) weights φ_j (with `Φ(z) = 1 - Σ φ_j z^j = Ψ(z)^{-1}`), and
//! autocovariances γ(k).
//!
//! Sign conventions: an ARMA process is
//! `X_t = Σ a_i X_{t-i} + ε_t + Σ θ_j ε_{t-j}`, so the AR polynomial is
//! `1 - Σ a_i z^i` and the MA polynomial is `1 + Σ θ_j z^j`.

use nalgebra::{DMatrix, DVector};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{fractional_coeff, gamma_fn};

/// Minimum modulus margin for polynomial roots outside the unit circle.
pub const ROOT_TOLERANCE: f64 = 1e-8;

/// Below this magnitude geometric coefficient tails are treated as exactly zero.
const NEGLIGIBLE: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessKind {
    WhiteNoise,
    Arma {
        #[serde(default)]
        ar: Vec<f64>,
        #[serde(default)]
        ma: Vec<f64>,
    },
    Arfima {
        #[serde(default)]
        ar: Vec<f64>,
        d: f64,
        #[serde(default)]
        ma: Vec<f64>,
    },
    /// Finite MA(∞) weights given directly; `psi[0]` must be 1.
    RawMa { psi: Vec<f64> },
}

/// Memory class of a process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Memory {
    /// Absolutely summable weights; `alpha` is caller-declared metadata.
    Short { alpha: Option<f64> },
    Long { d: f64 },
}

impl Memory {
    pub fn is_long(&self) -> bool {
        matches!(self, Memory::Long { .. })
    }
}

fn default_sigma2() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    #[serde(flatten)]
    pub kind: ProcessKind,
    /// Innovation variance σ².
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl ProcessSpec {
    pub fn new(kind: ProcessKind) -> Self {
        ProcessSpec {
            kind,
            sigma2: 1.0,
            alpha: None,
        }
    }

    pub fn white_noise() -> Self {
        Self::new(ProcessKind::WhiteNoise)
    }

    pub fn arma(ar: Vec<f64>, ma: Vec<f64>) -> Self {
        Self::new(ProcessKind::Arma { ar, ma })
    }

    pub fn ar1(a: f64) -> Self {
        Self::arma(vec![a], vec![])
    }

    pub fn ma1(theta: f64) -> Self {
        Self::arma(vec![], vec![theta])
    }

    pub fn arfima(ar: Vec<f64>, d: f64, ma: Vec<f64>) -> Self {
        Self::new(ProcessKind::Arfima { ar, d, ma })
    }

    /// ARFIMA(0, d, 0).
    pub fn fractional_noise(d: f64) -> Self {
        Self::arfima(vec![], d, vec![])
    }

    pub fn raw_ma(psi: Vec<f64>) -> Self {
        Self::new(ProcessKind::RawMa { psi })
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ProcessSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn memory(&self) -> Memory {
        match &self.kind {
            ProcessKind::Arfima { d, .. } if *d > 0.0 => Memory::Long { d: *d },
            _ => Memory::Short { alpha: self.alpha },
        }
    }

    /// Fractional parameter, 0 for short memory.
    pub fn d(&self) -> f64 {
        match self.memory() {
            Memory::Long { d } => d,
            Memory::Short { .. } => 0.0,
        }
    }

    /// AR and MA polynomial coefficients of the short-memory part.
    pub fn arma_parts(&self) -> (&[f64], &[f64]) {
        match &self.kind {
            ProcessKind::WhiteNoise | ProcessKind::RawMa { .. } => (&[], &[]),
            ProcessKind::Arma { ar, ma } | ProcessKind::Arfima { ar, ma, .. } => (ar, ma),
        }
    }

    pub fn is_fractional_noise(&self) -> bool {
        matches!(&self.kind, ProcessKind::Arfima { ar, ma, .. } if ar.is_empty() && ma.is_empty())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidSpec(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if let Some(alpha) = self.alpha {
            if !(alpha >= 0.0) {
                return Err(Error::InvalidSpec(format!("alpha must be non-negative, got {alpha}")));
            }
        }
        let all_finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &self.kind {
            ProcessKind::WhiteNoise => {}
            ProcessKind::Arma { ar, ma } => {
                if !all_finite(ar) || !all_finite(ma) {
                    return Err(Error::InvalidSpec("non-finite ARMA coefficient".into()));
                }
                check_roots("AR", &ar.iter().map(|a| -a).collect::<Vec<_>>())?;
                check_roots("MA", ma)?;
            }
            ProcessKind::Arfima { ar, d, ma } => {
                if !(*d > 0.0 && *d < 0.5) {
                    return Err(Error::InvalidSpec(format!("d must lie in (0, 0.5), got {d}")));
                }
                if !all_finite(ar) || !all_finite(ma) {
                    return Err(Error::InvalidSpec("non-finite ARFIMA coefficient".into()));
                }
                check_roots("AR", &ar.iter().map(|a| -a).collect::<Vec<_>>())?;
                check_roots("MA", ma)?;
            }
            ProcessKind::RawMa { psi } => {
                if psi.first() != Some(&1.0) {
                    return Err(Error::InvalidSpec("raw MA weights must start with psi_0 = 1".into()));
                }
                if !all_finite(psi) {
                    return Err(Error::InvalidSpec("non-finite MA weight".into()));
                }
                check_roots("MA", &psi[1..])?;
            }
        }
        Ok(())
    }
}

/// Largest reciprocal-root modulus of `1 + Σ c_i z^i`, i.e. the spectral
/// radius of its companion matrix. Zero for a constant polynomial.
pub fn reciprocal_root_radius(c: &[f64]) -> f64 {
    let mut p = c.len();
    while p > 0 && c[p - 1] == 0.0 {
        p -= 1;
    }
    if p == 0 {
        return 0.0;
    }
    // Companion matrix of z^p + c_1 z^{p-1} + ... + c_p, whose roots are the
    // reciprocals of the roots of 1 + c_1 z + ... + c_p z^p.
    let mut m = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        m[(0, j)] = -c[j];
    }
    for i in 1..p {
        m[(i, i - 1)] = 1.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn check_roots(polynomial: &'static str, c: &[f64]) -> Result<()> {
    let radius = reciprocal_root_radius(c);
    if radius > 0.0 && 1.0 / radius <= 1.0 + ROOT_TOLERANCE {
        return Err(Error::InvalidRoots {
            polynomial,
            modulus: 1.0 / radius,
        });
    }
    Ok(())
}

/// Decay model of a coefficient sequence beyond its stored values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TailModel {
    /// All coefficients past the truncation are zero.
    Zero,
    /// `|c_j| <= scale * rho^j`.
    Geometric { rho: f64, scale: f64 },
    /// `|c_j| <= scale * j^{-exponent}`.
    Polynomial { exponent: f64, scale: f64 },
}

impl TailModel {
    /// Bound on `Σ_{j >= from} |c_j|` implied by the model.
    pub fn abs_sum_from(&self, from: usize) -> f64 {
        match *self {
            TailModel::Zero => 0.0,
            TailModel::Geometric { rho, scale } => scale * rho.powi(from as i32) / (1.0 - rho),
            TailModel::Polynomial { exponent, scale } => {
                if exponent <= 1.0 {
                    f64::INFINITY
                } else {
                    let x = (from.max(2) - 1) as f64;
                    scale * x.powf(1.0 - exponent) / (exponent - 1.0)
                }
            }
        }
    }

    /// Bound on `Σ_{j >= from} c_j^2`.
    pub fn sq_sum_from(&self, from: usize) -> f64 {
        match *self {
            TailModel::Zero => 0.0,
            TailModel::Geometric { rho, scale } => {
                scale * scale * rho.powi(2 * from as i32) / (1.0 - rho * rho)
            }
            TailModel::Polynomial { exponent, scale } => {
                if exponent <= 0.5 {
                    f64::INFINITY
                } else {
                    let x = (from.max(2) - 1) as f64;
                    scale * scale * x.powf(1.0 - 2.0 * exponent) / (2.0 * exponent - 1.0)
                }
            }
        }
    }
}

/// Real-index continuation of a long-memory coefficient sequence:
/// `c(x) = sign * Σ_i short[i] * fractional_coeff(e, x - i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Continuation {
    pub short: Vec<f64>,
    pub e: f64,
    pub sign: f64,
}

impl Continuation {
    pub fn at(&self, x: f64) -> f64 {
        self.sign
            * self
                .short
                .iter()
                .enumerate()
                .map(|(i, s)| s * fractional_coeff(self.e, x - i as f64))
                .sum::<f64>()
    }
}

/// Truncated one-sided coefficient sequence `c_0, c_1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffSeq {
    pub values: Vec<f64>,
    pub tail_model: TailModel,
    /// Bound on `Σ_{j >= truncation_len} |c_j|`.
    pub tail_bound: f64,
    pub continuation: Option<Continuation>,
}

impl CoeffSeq {
    pub fn new(values: Vec<f64>, tail_model: TailModel) -> Self {
        let tail_bound = tail_model.abs_sum_from(values.len());
        CoeffSeq {
            values,
            tail_model,
            tail_bound,
            continuation: None,
        }
    }

    pub fn truncation_len(&self) -> usize {
        self.values.len()
    }

    /// `c_j`, zero past the truncation unless a continuation is available.
    pub fn get(&self, j: usize) -> f64 {
        match self.values.get(j) {
            Some(v) => *v,
            None => match &self.continuation {
                Some(c) => c.at(j as f64),
                None => 0.0,
            },
        }
    }

    /// `c(x)` at a real index. Integer indices inside the truncation use the
    /// stored values; elsewhere the continuation (if any) is used.
    pub fn at(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x == x.floor() && (x as usize) < self.values.len() {
            return self.values[x as usize];
        }
        match &self.continuation {
            Some(c) => c.at(x),
            None => 0.0,
        }
    }

    /// `Σ_{j >= from} |c_j|`: stored part plus the tail. With a continuation
    /// the tail is integrated numerically, otherwise the model bound is used.
    pub fn abs_tail_sum(&self, from: usize) -> f64 {
        let len = self.values.len();
        let stored: f64 = self.values.iter().skip(from).map(|v| v.abs()).sum();
        let start = from.max(len);
        stored + self.abs_sum_beyond(start)
    }

    fn abs_sum_beyond(&self, start: usize) -> f64 {
        match (&self.continuation, self.tail_model) {
            (Some(c), TailModel::Polynomial { exponent, .. }) => {
                if exponent <= 1.0 {
                    return f64::INFINITY;
                }
                integrate_power_tail(|x| c.at(x).abs(), start, exponent)
            }
            (_, model) => {
                if start == self.values.len() {
                    self.tail_bound
                } else {
                    model.abs_sum_from(start)
                }
            }
        }
    }
}

/// `Σ_{j >= start} f(j)` for a smooth `f` with `f(x) ~ x^{-exponent}`:
/// exact terms for a stretch, then `∫_{a}^∞ f` from the half-integer `a`
/// with the Euler–Maclaurin midpoint correction `-f'(a)/24`, the integral by
/// Gauss–Legendre on geometric panels plus an analytic power-law remainder.
pub(crate) fn integrate_power_tail<F: Fn(f64) -> f64>(f: F, start: usize, exponent: f64) -> f64 {
    const EXACT: usize = 1024;
    let mut s: f64 = (start..start + EXACT).map(|j| f(j as f64)).sum();
    let (gx, gw) = crate::quadrature::gauss_legendre(crate::quadrature::PANEL_POINTS);
    let a0 = (start + EXACT) as f64 - 0.5;
    let h = 0.25;
    s -= (f(a0 + h) - f(a0 - h)) / (2.0 * h) / 24.0;
    let mut a = a0;
    while a < crate::quadrature::TAIL_UPPER {
        let b = crate::quadrature::PANEL_RATIO * a;
        let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
        s += gx
            .iter()
            .zip(&gw)
            .map(|(x, w)| half * w * f(mid + half * x))
            .sum::<f64>();
        a = b;
    }
    s + f(a) * a / (exponent - 1.0)
}

fn series_product(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, ai) in a.iter().enumerate().take(len) {
        if *ai == 0.0 {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(len - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Power series of `num(z) / den(z)` with `den[0] = 1`.
fn series_quotient(num: &[f64], den: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for j in 0..len {
        let mut v = num.get(j).copied().unwrap_or(0.0);
        for (i, di) in den.iter().enumerate().skip(1).take(j) {
            v -= di * out[j - i];
        }
        out[j] = if v.abs() < NEGLIGIBLE { 0.0 } else { v };
    }
    out
}

fn ar_poly(ar: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(ar.iter().map(|a| -a)).collect()
}

fn ma_poly(ma: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(ma.iter().copied()).collect()
}

/// Coefficients of `(1 - z)^{-e}` for `j = 0..len`.
pub fn fractional_series(e: f64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    if len == 0 {
        return out;
    }
    out[0] = 1.0;
    for j in 1..len {
        out[j] = out[j - 1] * (j as f64 - 1.0 + e) / j as f64;
    }
    out
}

/// Length at which a geometric sequence with the given radius has decayed
/// below `1e-18` relative, so a short-memory factor can be cut there.
fn geometric_cutoff(radius: f64, degree: usize) -> usize {
    if radius <= 0.0 {
        return degree + 1;
    }
    let base = (18.0 * std::f64::consts::LN_10 / -radius.ln()).ceil() as usize;
    base + 4 * degree + 16
}

/// Fit the scale of a tail model against the second half of the stored values.
fn fit_scale(values: &[f64], bound: impl Fn(usize) -> f64) -> f64 {
    let len = values.len();
    let from = (len / 2).max(1);
    let mut scale: f64 = 0.0;
    for (j, v) in values.iter().enumerate().skip(from) {
        let b = bound(j);
        if b > 0.0 {
            scale = scale.max(v.abs() / b);
        }
    }
    scale
}

fn geometric_model(values: &[f64], radius: f64) -> TailModel {
    if radius <= 0.0 || values.iter().skip(1).all(|v| *v == 0.0) {
        return TailModel::Zero;
    }
    // Inflate the radius slightly to absorb polynomial factors from repeated roots.
    let rho = radius + 0.05 * (1.0 - radius);
    let scale = fit_scale(values, |j| rho.powi(j as i32)).max(f64::MIN_POSITIVE);
    TailModel::Geometric { rho, scale }
}

fn polynomial_model(values: &[f64], exponent: f64) -> TailModel {
    let scale = 1.02 * fit_scale(values, |j| (j as f64).powf(-exponent));
    TailModel::Polynomial { exponent, scale }
}

/// MA(∞) weights ψ_0..ψ_{len-1}.
pub fn ma_inf_coeffs(spec: &ProcessSpec, len: usize) -> Result<CoeffSeq> {
    spec.validate()?;
    let len = len.max(1);
    Ok(match &spec.kind {
        ProcessKind::WhiteNoise => {
            let mut v = vec![0.0; len];
            v[0] = 1.0;
            CoeffSeq::new(v, TailModel::Zero)
        }
        ProcessKind::RawMa { psi } => {
            let mut v = psi.clone();
            v.resize(len, 0.0);
            v.truncate(len);
            let mut seq = CoeffSeq::new(v, TailModel::Zero);
            seq.tail_bound = psi.iter().skip(len).map(|x| x.abs()).sum();
            seq
        }
        ProcessKind::Arma { ar, ma } => {
            let v = series_quotient(&ma_poly(ma), &ar_poly(ar), len);
            let radius = reciprocal_root_radius(&ar_poly(ar)[1..]);
            let model = if ar.iter().all(|a| *a == 0.0) {
                TailModel::Zero
            } else {
                geometric_model(&v, radius)
            };
            CoeffSeq::new(v, model)
        }
        ProcessKind::Arfima { ar, d, ma } => {
            let radius = reciprocal_root_radius(&ar_poly(ar)[1..]);
            let short_len = geometric_cutoff(radius, ar.len() + ma.len()).min(len.max(ma.len() + 1));
            let short = series_quotient(&ma_poly(ma), &ar_poly(ar), short_len);
            let v = series_product(&short, &fractional_series(*d, len), len);
            let model = polynomial_model(&v, 1.0 - d);
            let mut seq = CoeffSeq::new(v, model);
            seq.continuation = Some(Continuation {
                short,
                e: *d,
                sign: 1.0,
            });
            seq
        }
    })
}

/// AR(∞) weights φ_0..φ_{len-1} with φ_0 = -1.
pub fn ar_inf_coeffs(spec: &ProcessSpec, len: usize) -> Result<CoeffSeq> {
    spec.validate()?;
    let len = len.max(1);
    let negate = |c: Vec<f64>| -> Vec<f64> { c.into_iter().map(|x| if x == 0.0 { 0.0 } else { -x }).collect() };
    Ok(match &spec.kind {
        ProcessKind::WhiteNoise => {
            let mut v = vec![0.0; len];
            v[0] = -1.0;
            CoeffSeq::new(v, TailModel::Zero)
        }
        ProcessKind::RawMa { psi } => {
            let v = negate(series_quotient(&[1.0], psi, len));
            let radius = reciprocal_root_radius(&psi[1..]);
            let model = geometric_model(&v, radius);
            CoeffSeq::new(v, model)
        }
        ProcessKind::Arma { ar, ma } => {
            let v = negate(series_quotient(&ar_poly(ar), &ma_poly(ma), len));
            let radius = reciprocal_root_radius(ma);
            let model = if ma.iter().all(|t| *t == 0.0) {
                TailModel::Zero
            } else {
                geometric_model(&v, radius)
            };
            CoeffSeq::new(v, model)
        }
        ProcessKind::Arfima { ar, d, ma } => {
            let radius = reciprocal_root_radius(ma);
            let short_len = geometric_cutoff(radius, ar.len() + ma.len()).min(len.max(ar.len() + 1));
            let short = series_quotient(&ar_poly(ar), &ma_poly(ma), short_len);
            let v = negate(series_product(&short, &fractional_series(-d, len), len));
            let model = polynomial_model(&v, 1.0 + d);
            let mut seq = CoeffSeq::new(v, model);
            seq.continuation = Some(Continuation {
                short,
                e: -d,
                sign: -1.0,
            });
            seq
        }
    })
}

/// `Σ_j (1 + j)^{alpha'} |c_j|`, including the modelled tail.
pub fn weighted_norm(seq: &CoeffSeq, alpha_prime: f64) -> Result<f64> {
    if !(alpha_prime >= 0.0) {
        return Err(Error::InvalidConfig(format!("alpha' must be non-negative, got {alpha_prime}")));
    }
    let len = seq.values.len();
    let head: f64 = seq
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| (1.0 + j as f64).powf(alpha_prime) * v.abs())
        .sum();
    let tail = match seq.tail_model {
        TailModel::Zero => 0.0,
        TailModel::Geometric { rho, scale } => {
            let mut s = 0.0;
            let mut j = len;
            loop {
                let t = scale * (1.0 + j as f64).powf(alpha_prime) * rho.powi(j as i32);
                s += t;
                if t <= 1e-18 * (head + s) || j > len + 100_000 {
                    break;
                }
                j += 1;
            }
            s
        }
        TailModel::Polynomial { exponent, scale } => {
            if exponent <= alpha_prime + 1.0 {
                return Err(Error::DivergentNorm {
                    exponent,
                    required: alpha_prime + 1.0,
                });
            }
            match &seq.continuation {
                Some(c) => integrate_power_tail(
                    |x| (1.0 + x).powf(alpha_prime) * c.at(x).abs(),
                    len,
                    exponent - alpha_prime,
                ),
                None => {
                    let x = (len.max(2) - 1) as f64;
                    let ratio = ((x + 2.0) / x).powf(alpha_prime);
                    scale * ratio * x.powf(1.0 + alpha_prime - exponent) / (exponent - 1.0 - alpha_prime)
                }
            }
        }
    };
    Ok(head + tail)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutocovMethod {
    ClosedForm,
    PsiConvolution,
}

/// Autocovariances γ(0..=max_lag).
#[derive(Debug, Clone, PartialEq)]
pub struct AutocovSeq {
    pub gamma: Vec<f64>,
    pub method: AutocovMethod,
    /// Bound on the absolute error of every entry.
    pub error_bound: f64,
}

impl AutocovSeq {
    pub fn from_values(gamma: Vec<f64>) -> Self {
        AutocovSeq {
            gamma,
            method: AutocovMethod::ClosedForm,
            error_bound: 0.0,
        }
    }

    pub fn max_lag(&self) -> usize {
        self.gamma.len() - 1
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma[0]
    }

    pub fn at(&self, lag: isize) -> f64 {
        self.gamma[lag.unsigned_abs()]
    }
}

/// γ(k) = σ² Γ(1-2d) Γ(k+d) / (Γ(d) Γ(1-d) Γ(k+1-d)) via its ratio recursion.
pub fn fractional_noise_autocov(d: f64, sigma2: f64, max_lag: usize) -> Vec<f64> {
    let mut g = vec![0.0; max_lag + 1];
    let g1 = gamma_fn(1.0 - d);
    g[0] = sigma2 * gamma_fn(1.0 - 2.0 * d) / (g1 * g1);
    for k in 1..=max_lag {
        g[k] = g[k - 1] * (k as f64 - 1.0 + d) / (k as f64 - d);
    }
    g
}

/// Exact ARMA autocovariances: γ(0..=p) from a linear system, the rest by the
/// AR recursion.
fn arma_autocov(ar: &[f64], ma: &[f64], sigma2: f64, max_lag: usize) -> Vec<f64> {
    let p = ar.len();
    let q = ma.len();
    let theta = ma_poly(ma);
    let psi = series_quotient(&theta, &ar_poly(ar), q + 1);
    // rhs_k = σ² Σ_{j=k}^{q} θ_j ψ_{j-k}
    let rhs = |k: usize| -> f64 {
        if k > q {
            0.0
        } else {
            sigma2 * (k..=q).map(|j| theta[j] * psi[j - k]).sum::<f64>()
        }
    };
    let mut g = vec![0.0; max_lag.max(p) + 1];
    if p > 0 {
        let mut a = DMatrix::<f64>::zeros(p + 1, p + 1);
        let mut b = DVector::<f64>::zeros(p + 1);
        for k in 0..=p {
            a[(k, k)] += 1.0;
            for i in 1..=p {
                let lag = (k as isize - i as isize).unsigned_abs();
                a[(k, lag)] -= ar[i - 1];
            }
            b[k] = rhs(k);
        }
        let sol = a.lu().solve(&b).expect("ARMA autocovariance system is singular");
        for k in 0..=p {
            g[k] = sol[k];
        }
    } else {
        g[0] = rhs(0);
    }
    for k in (p + 1)..g.len() {
        g[k] = rhs(k) + (1..=p).map(|i| ar[i - 1] * g[k - i]).sum::<f64>();
    }
    g.truncate(max_lag + 1);
    g
}

/// Autocovariances by closed form. `trunc` bounds the length of the
/// short-memory factor when a fractional process is split as ARMA ∗ fractional noise.
pub fn autocovariance(spec: &ProcessSpec, max_lag: usize, trunc: usize) -> Result<AutocovSeq> {
    spec.validate()?;
    let s2 = spec.sigma2;
    let (gamma, error_bound) = match &spec.kind {
        ProcessKind::WhiteNoise => {
            let mut g = vec![0.0; max_lag + 1];
            g[0] = s2;
            (g, 0.0)
        }
        ProcessKind::RawMa { psi } => {
            let g = (0..=max_lag)
                .map(|k| s2 * psi.iter().zip(psi.iter().skip(k)).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            (g, 0.0)
        }
        ProcessKind::Arma { ar, ma } => (arma_autocov(ar, ma, s2, max_lag), 0.0),
        ProcessKind::Arfima { ar, d, ma } => {
            if ar.is_empty() && ma.is_empty() {
                (fractional_noise_autocov(*d, s2, max_lag), 0.0)
            } else {
                // X = A(B) Z with Z fractional noise: γ_X(k) = Σ_l r(l) γ_Z(k + l),
                // r the two-sided autocorrelation of the ARMA weights.
                let radius = reciprocal_root_radius(&ar_poly(ar)[1..]);
                let cut = geometric_cutoff(radius, ar.len() + ma.len()).min(trunc.max(ma.len() + 1));
                let a = series_quotient(&ma_poly(ma), &ar_poly(ar), cut);
                let tail_bound = TailModel::Geometric {
                    rho: radius.max(1e-300),
                    scale: 1.0,
                }
                .abs_sum_from(cut);
                let gz = fractional_noise_autocov(*d, s2, max_lag + cut);
                let r: Vec<f64> = (0..cut)
                    .map(|l| a.iter().zip(a.iter().skip(l)).map(|(x, y)| x * y).sum())
                    .collect();
                let g = (0..=max_lag)
                    .map(|k| {
                        let mut s = r[0] * gz[k];
                        for l in 1..cut {
                            s += r[l] * (gz[k + l] + gz[(k as isize - l as isize).unsigned_abs()]);
                        }
                        s
                    })
                    .collect();
                let asum: f64 = a.iter().map(|x| x.abs()).sum();
                (g, 2.0 * asum * tail_bound * gz[0])
            }
        }
    };
    Ok(AutocovSeq {
        gamma,
        method: AutocovMethod::ClosedForm,
        error_bound,
    })
}

/// Autocovariances by the truncated Wold sum γ(k) = σ² Σ_{j<trunc} ψ_j ψ_{j+k},
/// with an error bound from the ψ tail model. Fails when the bound exceeds
/// `rel_tol · γ(0)`.
pub fn autocovariance_by_convolution(
    spec: &ProcessSpec,
    max_lag: usize,
    trunc: usize,
    rel_tol: f64,
) -> Result<AutocovSeq> {
    let psi = ma_inf_coeffs(spec, trunc + max_lag)?;
    let v = &psi.values;
    let total = trunc + max_lag;
    let size = (total + trunc).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut a: Vec<Complex<f64>> = (0..size)
        .map(|i| Complex::new(if i < trunc { v[i] } else { 0.0 }, 0.0))
        .collect();
    let mut b: Vec<Complex<f64>> = (0..size)
        .map(|i| Complex::new(if i < total { v[i] } else { 0.0 }, 0.0))
        .collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    // Cross-correlation c_k = Σ_j a_j b_{j+k} = IFFT(conj(A) B).
    for (x, y) in a.iter_mut().zip(&b) {
        *x = x.conj() * y;
    }
    inv.process(&mut a);
    let scale = spec.sigma2 / size as f64;
    let gamma: Vec<f64> = (0..=max_lag).map(|k| a[k].re * scale).collect();
    // |Σ_{j>=trunc} ψ_j ψ_{j+k}| <= Σ_{j>=trunc} ψ_j^2 by Cauchy–Schwarz.
    let error_bound = spec.sigma2 * psi.tail_model.sq_sum_from(trunc);
    let fft_noise = 1e-14 * gamma[0].abs() * (trunc as f64).log2().max(1.0);
    let error_bound = error_bound + fft_noise;
    if error_bound > rel_tol * gamma[0] {
        return Err(Error::TruncationInsufficient(format!(
            "autocovariance truncation at {trunc} leaves error bound {error_bound:e} > {rel_tol:e} * gamma(0)"
        )));
    }
    Ok(AutocovSeq {
        gamma,
        method: AutocovMethod::PsiConvolution,
        error_bound,
    })
}
