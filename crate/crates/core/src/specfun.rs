//! Special functions evaluated in log space.
//!
//! The modified Bessel function of the first kind is computed through the
//! normalized quantity `C_ν(x) = Γ(ν+1) I_ν(x) / (x/2)^ν`, which equals the
//! confluent limit `₀F₁(; ν+1; x²/4)`. Its power series has strictly positive
//! terms for `ν ≥ -1/2`, so summing it with running rescaling is free of
//! cancellation at any argument. For large arguments the Hankel expansion is
//! used instead, which keeps the cost bounded.

use statrs::function::gamma::ln_gamma as statrs_ln_gamma;
use std::f64::consts::{LN_2, PI};
use thiserror::Error;

/// Smallest Bessel order accepted anywhere in this crate.
pub const MIN_ORDER: f64 = -0.5;

const RESCALE: f64 = 1e280;
const LN_RESCALE: f64 = 644.7238260383328; // ln(1e280)

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecfunError {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },
}

fn check_order_arg(order: f64, x: f64) -> Result<(), SpecfunError> {
    if !order.is_finite() || order < MIN_ORDER {
        return Err(SpecfunError::Domain {
            what: "bessel order",
            value: order,
        });
    }
    if !x.is_finite() || x < 0.0 {
        return Err(SpecfunError::Domain {
            what: "bessel argument",
            value: x,
        });
    }
    Ok(())
}

/// Natural log of the gamma function.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    statrs_ln_gamma(x)
}

/// Whether the Hankel expansion is accurate to machine precision at `(order, x)`.
#[inline]
fn use_hankel(order: f64, x: f64) -> bool {
    x > 30.0 + 2.0 * order * order
}

/// `ln C_ν(x)` by the positive-term power series.
fn log_normalized_series(order: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let z = 0.25 * x * x;
    let b = order + 1.0;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut log_scale = 0.0_f64;
    let mut k = 0.0_f64;
    loop {
        let ratio = z / ((k + 1.0) * (b + k));
        term *= ratio;
        sum += term;
        k += 1.0;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            log_scale += LN_RESCALE;
        }
        if ratio < 1.0 && term <= sum * 1e-17 {
            break;
        }
    }
    log_scale + sum.ln()
}

/// `ln C_ν(x)` and its derivative `I_{ν+1}(x)/I_ν(x)` from one pass of the
/// series, using `d/dx t_k = (2k/x) t_k`.
fn log_normalized_series_with_ratio(order: f64, x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.0, 0.0);
    }
    let z = 0.25 * x * x;
    let b = order + 1.0;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut weighted = 0.0_f64;
    let mut log_scale = 0.0_f64;
    let mut k = 0.0_f64;
    loop {
        let ratio = z / ((k + 1.0) * (b + k));
        term *= ratio;
        k += 1.0;
        sum += term;
        weighted += k * term;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            weighted /= RESCALE;
            log_scale += LN_RESCALE;
        }
        if ratio < 1.0 && term <= sum * 1e-17 {
            break;
        }
    }
    (log_scale + sum.ln(), 2.0 * weighted / (x * sum))
}

/// `ln I_ν(x)` and `d/dx ln I_ν(x)` by the Hankel expansion.
fn log_bessel_hankel_with_derivative(order: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * order * order;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    // Σ k a_k x^{-k}; the derivative of the sum is -(this)/x.
    let mut weighted = 0.0_f64;
    let mut k = 1.0_f64;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (k * 8.0 * x);
        if next.abs() >= term.abs() && k > 1.0 {
            break;
        }
        term = next;
        sum += term;
        weighted += k * term;
        if term.abs() <= sum.abs() * 1e-17 {
            break;
        }
        k += 1.0;
        if k > 200.0 {
            break;
        }
    }
    (
        x - 0.5 * (2.0 * PI * x).ln() + sum.ln(),
        1.0 - 0.5 / x - weighted / (x * sum),
    )
}

/// `ln I_ν(x)` by the Hankel large-argument expansion.
fn log_bessel_hankel(order: f64, x: f64) -> f64 {
    let mu = 4.0 * order * order;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut k = 1.0_f64;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (k * 8.0 * x);
        if next.abs() >= term.abs() && k > 1.0 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= sum.abs() * 1e-17 {
            break;
        }
        k += 1.0;
        if k > 200.0 {
            break;
        }
    }
    x - 0.5 * (2.0 * PI * x).ln() + sum.ln()
}

/// `ln C_ν(x) = ln{Γ(ν+1) I_ν(x) / (x/2)^ν}`, finite and equal to 0 at `x = 0`.
///
/// This is the per-column factor of the sequential Stiefel proposal's bound,
/// so it is exposed without the `Result` wrapper; callers validate inputs.
pub fn log_bessel_i_normalized(order: f64, x: f64) -> f64 {
    debug_assert!(order >= MIN_ORDER && x >= 0.0);
    if use_hankel(order, x) {
        log_bessel_hankel(order, x) - order * (0.5 * x).ln() + ln_gamma(order + 1.0)
    } else {
        log_normalized_series(order, x)
    }
}

/// `ln I_ν(x)` for `ν ≥ -1/2`, `x ≥ 0`.
///
/// At `x = 0` the result is `-∞` for `ν > 0`, `0` for `ν = 0` and `+∞` for
/// `-1/2 ≤ ν < 0`.
pub fn log_bessel_i(order: f64, x: f64) -> Result<f64, SpecfunError> {
    check_order_arg(order, x)?;
    if x == 0.0 {
        return Ok(if order > 0.0 {
            f64::NEG_INFINITY
        } else if order == 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    if use_hankel(order, x) {
        Ok(log_bessel_hankel(order, x))
    } else {
        Ok(order * (0.5 * x).ln() - ln_gamma(order + 1.0) + log_normalized_series(order, x))
    }
}

/// `I_{ν+1}(x) / I_ν(x)`, which lies in `[0, 1)` and is 0 at `x = 0`.
///
/// This is also the derivative of `ln C_ν(x)` with respect to `x`.
pub fn bessel_ratio(order: f64, x: f64) -> Result<f64, SpecfunError> {
    check_order_arg(order, x)?;
    Ok(bessel_ratio_unchecked(order, x))
}

pub(crate) fn bessel_ratio_unchecked(order: f64, x: f64) -> f64 {
    log_bessel_i_normalized_with_ratio(order, x).1
}

/// `(ln C_ν(x), I_{ν+1}(x)/I_ν(x))` evaluated together, at roughly the cost
/// of one of them.
pub fn log_bessel_i_normalized_with_ratio(order: f64, x: f64) -> (f64, f64) {
    debug_assert!(order >= MIN_ORDER && x >= 0.0);
    let (value, ratio) = if use_hankel(order, x) {
        let (log_i, dlog_i) = log_bessel_hankel_with_derivative(order, x);
        (
            log_i - order * (0.5 * x).ln() + ln_gamma(order + 1.0),
            dlog_i - order / x,
        )
    } else {
        log_normalized_series_with_ratio(order, x)
    };
    (value, ratio.clamp(0.0, 1.0 - f64::EPSILON))
}

/// Log-scaled Bessel value together with its inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScaledBessel {
    pub order: f64,
    pub argument: f64,
    pub log_value: f64,
}

impl LogScaledBessel {
    pub fn new(order: f64, argument: f64) -> Result<Self, SpecfunError> {
        let log_value = log_bessel_i(order, argument)?;
        Ok(Self {
            order,
            argument,
            log_value,
        })
    }

    /// `I_{ν+1}(x)/I_ν(x)` at the same argument.
    pub fn ratio_to_next(&self) -> f64 {
        bessel_ratio_unchecked(self.order, self.argument)
    }
}

/// Log of the large-concentration approximation to the matrix Langevin
/// normalizing constant `₀F₁(d/2; κᵀκ/4)` on `V_{p,d}`, taken with respect to
/// the normalized Haar measure.
pub fn log_z_asymptotic(kappa: &[f64], d: usize) -> Result<f64, SpecfunError> {
    let p = kappa.len();
    if p == 0 || d < p {
        return Err(SpecfunError::Domain {
            what: "stiefel dimensions (d >= p >= 1)",
            value: d as f64,
        });
    }
    if let Some(&bad) = kappa.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
        return Err(SpecfunError::Domain {
            what: "concentration",
            value: bad,
        });
    }
    let pf = p as f64;
    let df = d as f64;
    let mut value = (-0.25 * pf * (pf + 5.0) + 0.5 * pf * df) * LN_2 - 0.5 * pf * PI.ln();
    value += kappa.iter().sum::<f64>();
    value += (1..=p).map(|j| ln_gamma((df - j as f64 + 1.0) / 2.0)).sum::<f64>();
    for j in 1..p {
        for i in 0..j {
            value -= 0.5 * (kappa[i] + kappa[j]).ln();
        }
    }
    value -= 0.5 * (df - pf) * kappa.iter().map(|k| k.ln()).sum::<f64>();
    Ok(value)
}

/// Number of pairwise `κ_i + κ_j` factors in [`log_z_asymptotic`].
pub fn asymptotic_pair_terms(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// `ln(1 - e^a)` for `a ≤ 0`, accurate near both ends.
pub fn log1m_exp(a: f64) -> f64 {
    if a >= 0.0 {
        f64::NEG_INFINITY
    } else if a > -LN_2 {
        (-a.exp_m1()).ln()
    } else {
        (-a.exp()).ln_1p()
    }
}

/// `ln(e^a - e^b)` for `a > b`; `-∞` when `a ≤ b`.
pub fn log_diff_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if !(a > b) {
        return f64::NEG_INFINITY;
    }
    a + log1m_exp(b - a)
}

/// `ln Σ e^{x_i}` without overflow.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    // ln I_ν(x) at 40 significant digits, frozen from an arbitrary-precision
    // evaluation.
    #[allow(clippy::excessive_precision)]
    const HIGH_PRECISION: &[(f64, f64, f64)] = &include!("../tests/data/log_bessel_table.in");

    #[test]
    fn zero_argument_values() {
        assert_eq!(log_bessel_i(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(log_bessel_i(1.0, 0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(log_bessel_i(-0.5, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(bessel_ratio(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(log_bessel_i_normalized(3.5, 0.0), 0.0);
    }

    #[test]
    fn half_order_closed_form() {
        let x: f64 = 2.0;
        let expected = (x.sinh() / (PI * x / 2.0).sqrt()).ln();
        let got = log_bessel_i(0.5, x).unwrap();
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");

        let x: f64 = 3.0;
        let expected = 1.0 / x.tanh() - 1.0 / x;
        let got = bessel_ratio(0.5, x).unwrap();
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn ratio_at_large_argument_approaches_one() {
        let r = bessel_ratio(0.0, 1000.0).unwrap();
        assert!(r > 0.999 && r < 1.0, "{r}");
    }

    #[test]
    fn domain_errors() {
        assert!(log_bessel_i(-0.6, 1.0).is_err());
        assert!(log_bessel_i(0.0, -1.0).is_err());
        assert!(log_bessel_i(f64::NAN, 1.0).is_err());
        assert!(log_bessel_i(0.0, f64::INFINITY).is_err());
        assert!(bessel_ratio(-1.0, 1.0).is_err());
        assert!(log_z_asymptotic(&[1.0, 0.0], 3).is_err());
        assert!(log_z_asymptotic(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn matches_high_precision_table() {
        for &(nu, x, expected) in HIGH_PRECISION {
            let got = log_bessel_i(nu, x).unwrap();
            let err = (got - expected).abs();
            // Absolute error of the log is the relative error of I.
            assert!(err <= 1e-10, "nu={nu} x={x}: {got} vs {expected} (err {err:e})");
        }
    }

    /// Direct 50-term series with each term built from ln Γ, independent of the
    /// recurrence used by the implementation.
    fn direct_series(nu: f64, x: f64) -> f64 {
        let terms: Vec<f64> = (0..50)
            .map(|k| {
                let k = k as f64;
                (2.0 * k + nu) * (x / 2.0).ln() - ln_gamma(k + 1.0) - ln_gamma(k + nu + 1.0)
            })
            .collect();
        log_sum_exp(&terms)
    }

    #[test]
    fn matches_fifty_term_series_on_small_grid() {
        for i in 0..=20 {
            let nu = -0.5 + i as f64 * 0.525;
            for j in 1..=25 {
                let x = j as f64 * 0.4;
                let got = log_bessel_i(nu, x).unwrap();
                let expected = direct_series(nu, x);
                assert!(
                    (got - expected).abs() <= 1e-10 * expected.abs().max(1.0),
                    "nu={nu} x={x}: {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn hankel_and_series_agree_at_the_seam() {
        for &nu in &[-0.5f64, 0.0, 0.5, 1.0, 2.0, 3.5, 6.0] {
            let seam = 30.0 + 2.0 * nu * nu;
            for &dx in &[-1e-6, 0.0, 1e-6, 1.0, 5.0] {
                let x = seam + dx;
                let series = nu * (0.5 * x).ln() - ln_gamma(nu + 1.0) + log_normalized_series(nu, x);
                let hankel = log_bessel_hankel(nu, x);
                assert!(
                    (series - hankel).abs() < 1e-11 * series.abs(),
                    "nu={nu} x={x}: {series} vs {hankel}"
                );
            }
        }
    }

    #[test]
    fn finite_over_the_documented_range() {
        for i in 0..=40 {
            let nu = -0.5 + i as f64 * 5.0125;
            for j in 0..=70 {
                let x = j as f64 * 10.0;
                if x == 0.0 {
                    continue;
                }
                let v = log_bessel_i(nu, x).unwrap();
                assert!(v.is_finite(), "nu={nu} x={x}");
                assert!(log_bessel_i_normalized(nu, x).is_finite());
            }
        }
    }

    #[test]
    fn ratio_strictly_increasing_in_argument() {
        for &nu in &[-0.5, 0.0, 0.5, 1.0, 3.5, 10.0] {
            let mut prev = 0.0;
            for j in 1..=400 {
                let x = j as f64 * 0.25;
                let r = bessel_ratio(nu, x).unwrap();
                // tanh-like ratios are within rounding of 1 well before x = 100.
                let saturated = prev >= 1.0 - 1e-13;
                assert!((r > prev || saturated) && r < 1.0, "nu={nu} x={x}: {r} <= {prev}");
                prev = r;
            }
        }
    }

    #[test]
    fn combined_ratio_matches_log_difference() {
        for &nu in &[-0.5f64, 0.0, 0.5, 1.0, 3.5, 10.0, 40.0] {
            for &x in &[1e-3f64, 0.5, 3.0, 12.0, 31.0, 45.0, 200.0, 3300.0, 650.0] {
                let diff = (log_bessel_i_normalized(nu + 1.0, x) - log_bessel_i_normalized(nu, x) + (0.5 * x).ln()
                    - (nu + 1.0).ln())
                .exp();
                let (v, r) = log_bessel_i_normalized_with_ratio(nu, x);
                assert_eq!(v, log_bessel_i_normalized(nu, x));
                assert!(
                    (r - diff.min(1.0)).abs() <= 1e-12 * diff,
                    "nu={nu} x={x}: {r} vs {diff}"
                );
            }
        }
    }

    #[test]
    fn ratio_is_derivative_of_normalized_log() {
        for &nu in &[-0.5, 0.0, 1.5, 4.0] {
            for &x in &[0.3f64, 2.0, 9.0, 40.0, 120.0] {
                let h = 1e-5 * x.max(1.0);
                let fd = (log_bessel_i_normalized(nu, x + h) - log_bessel_i_normalized(nu, x - h)) / (2.0 * h);
                let r = bessel_ratio(nu, x).unwrap();
                assert!((fd - r).abs() < 1e-7, "nu={nu} x={x}: {fd} vs {r}");
            }
        }
    }

    #[test]
    fn asymptotic_z_single_column_closed_form() {
        // For p = 1, Z(κ) = Γ(d/2)(κ/2)^{1-d/2} I_{d/2-1}(κ) and the formula is its
        // leading Hankel term.
        let kappa = 40.0;
        for d in 2..7 {
            let nu = d as f64 / 2.0 - 1.0;
            let exact = log_bessel_i_normalized(nu, kappa);
            let approx = log_z_asymptotic(&[kappa], d).unwrap();
            assert!((exact - approx).abs() < 0.05, "d={d}: {exact} vs {approx}");
        }
    }

    #[test]
    fn asymptotic_z_pair_count_and_symmetry() {
        assert_eq!(asymptotic_pair_terms(3), 3);
        assert_eq!(asymptotic_pair_terms(1), 0);
        let a = log_z_asymptotic(&[1.0, 5.0, 10.0], 5).unwrap();
        let b = log_z_asymptotic(&[10.0, 1.0, 5.0], 5).unwrap();
        assert!(a.is_finite());
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_z_increasing_above_threshold() {
        let base = [2.0, 5.0, 10.0];
        for i in 0..3 {
            let mut bumped = base;
            bumped[i] += 1e-3;
            assert!(log_z_asymptotic(&bumped, 5).unwrap() > log_z_asymptotic(&base, 5).unwrap());
        }
    }

    #[test]
    fn stable_log_differences() {
        assert!((log1m_exp(-1e-20) - (1e-20f64).ln()).abs() < 1e-6);
        assert!((log_diff_exp(2.0, 1.0) - (2f64.exp() - 1f64.exp()).ln()).abs() < 1e-14);
        assert_eq!(log_diff_exp(1.0, 1.0), f64::NEG_INFINITY);
        assert_eq!(log_diff_exp(1.0, f64::NEG_INFINITY), 1.0);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + LN_2)).abs() < 1e-12);
    }
}
