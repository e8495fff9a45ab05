//! Gamma-function ratios and related special functions.
//!
//! The coefficient sequences of fractionally integrated processes are ratios
//! `Γ(x + a) / Γ(x + b)` evaluated far out in `x` (up to ~1e15 in the
//! quadrature tails). Differencing two `ln Γ` values loses every significant
//! digit there, so the ratio is evaluated from its own asymptotic expansion.

use statrs::function::gamma::{gamma, ln_gamma};

/// Bernoulli numbers B_0 ..= B_14.
const BERNOULLI: [f64; 15] = [
    1.0,
    -0.5,
    1.0 / 6.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    1.0 / 42.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    5.0 / 66.0,
    0.0,
    -691.0 / 2730.0,
    0.0,
    7.0 / 6.0,
];

/// Smallest argument at which the asymptotic expansion is used directly.
const ASYMPTOTIC_FROM: f64 = 24.0;

fn binomial(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Bernoulli polynomial `B_n(t)`, `n <= 14`.
pub fn bernoulli_poly(n: usize, t: f64) -> f64 {
    (0..=n)
        .map(|j| binomial(n, j) * BERNOULLI[j] * t.powi((n - j) as i32))
        .sum()
}

/// `ln Γ(x + a) - ln Γ(x + b)` for `x + a > 0` and `x + b > 0`.
pub fn ln_gamma_ratio(x: f64, a: f64, b: f64) -> f64 {
    debug_assert!(x + a > 0.0 && x + b > 0.0, "ln_gamma_ratio outside domain");
    if a == b {
        return 0.0;
    }
    // Shift the argument up with the recurrence Γ(z + 1) = z Γ(z).
    let lo = a.min(b);
    let mut shift = 0.0;
    let mut correction = 0.0;
    while x + shift + lo < ASYMPTOTIC_FROM {
        // ln(x+a+i) - ln(x+b+i) = ln1p((a-b)/(x+b+i))
        correction += ((a - b) / (x + b + shift)).ln_1p();
        shift += 1.0;
    }
    let z = x + shift;
    let mut s = (a - b) * z.ln();
    let mut zpow = z;
    for n in 1..=12usize {
        let num = bernoulli_poly(n + 1, a) - bernoulli_poly(n + 1, b);
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        s += sign * num / ((n * (n + 1)) as f64 * zpow);
        zpow *= z;
    }
    s - correction
}

/// `1 / Γ(e)` for any real `e`, including non-positive integers (where it is 0).
pub fn rgamma(e: f64) -> f64 {
    if e <= 0.0 && e == e.floor() {
        return 0.0;
    }
    if e < 0.5 {
        // 1/Γ(e) = e / Γ(e + 1), applied until the argument is comfortably positive.
        return e * rgamma(e + 1.0);
    }
    1.0 / gamma(e)
}

/// Coefficient of `z^y` in `(1 - z)^{-e}`, continued to real `y >= 0`:
/// `Γ(y + e) / (Γ(e) Γ(y + 1))`.
///
/// With `e = d` this gives the MA(∞) weights of fractional integration; with
/// `e = -d` the coefficients of `(1 - z)^d`.
pub fn fractional_coeff(e: f64, y: f64) -> f64 {
    if y < 0.0 {
        return 0.0;
    }
    if y == 0.0 {
        return 1.0;
    }
    if e == 0.0 {
        return 0.0;
    }
    if y + e <= 0.0 {
        // Only reachable for y < -e < 1 with e < 0; evaluate via Γ directly.
        return gamma(y + e) * rgamma(e) / gamma(y + 1.0);
    }
    rgamma(e) * ln_gamma_ratio(y, e, 1.0).exp()
}

/// Euler beta function `B(a, b)` for `a, b > 0`.
pub fn beta_fn(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

pub use statrs::function::gamma::gamma as gamma_fn;
pub use statrs::function::gamma::ln_gamma as ln_gamma_fn;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ratio_matches_recurrence() {
        for &x in &[0.3, 2.0, 17.5, 1.0e3, 4.2e7, 3.0e14] {
            // Γ(x + 1) / Γ(x) = x
            assert_relative_eq!(ln_gamma_ratio(x, 1.0, 0.0).exp(), x, max_relative = 1e-13);
            // Γ(x + 2.5) / Γ(x + 0.5) = (x + 0.5)(x + 1.5)
            let expect = (x + 0.5) * (x + 1.5);
            assert_relative_eq!(ln_gamma_ratio(x, 2.5, 0.5).exp(), expect, max_relative = 1e-13);
        }
    }

    #[test]
    fn ratio_matches_ln_gamma_difference_at_moderate_arguments() {
        for &(x, a, b) in &[(3.0, 0.25, 1.0), (40.0, -0.2, 1.0), (7.3, 0.45, 0.55)] {
            let direct = ln_gamma(x + a) - ln_gamma(x + b);
            assert_relative_eq!(ln_gamma_ratio(x, a, b), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn fractional_coefficients_match_high_precision_values() {
        // Reference values from 40-digit evaluation of Γ(j+d)/(Γ(d)Γ(j+1)).
        assert_relative_eq!(fractional_coeff(0.25, 100.0), 0.008_713_877_210_057_305_5, max_relative = 1e-13);
        assert_relative_eq!(fractional_coeff(0.25, 1000.0), 0.001_550_880_039_509_795_9, max_relative = 1e-13);
        assert_relative_eq!(-fractional_coeff(-0.25, 100.0), 0.000_646_154_686_117_965, max_relative = 1e-13);
        assert_relative_eq!(-fractional_coeff(-0.2, 1000.0), 4.315_622_452_690_171_6e-5, max_relative = 1e-13);
        assert_relative_eq!(fractional_coeff(0.25, 2.0), 0.15625, max_relative = 1e-14);
        assert_eq!(fractional_coeff(0.3, 0.0), 1.0);
    }

    #[test]
    fn rgamma_handles_poles_and_negative_arguments() {
        assert_eq!(rgamma(0.0), 0.0);
        assert_eq!(rgamma(-3.0), 0.0);
        // Γ(-0.25) = -4 Γ(0.75)
        assert_relative_eq!(1.0 / rgamma(-0.25), -4.901_666_809_860_711, max_relative = 1e-12);
    }

    #[test]
    fn beta_at_quarter() {
        // B(1/4, 3/4) = π / sin(π/4)
        assert_relative_eq!(beta_fn(0.25, 0.75), 4.442_882_938_158_366, max_relative = 1e-13);
    }
}
