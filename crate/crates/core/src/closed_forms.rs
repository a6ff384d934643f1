//! Exact exit-time formulas for the ungarbled belief diffusion on
//! `[lower, upper]`, and the potential representation of expected
//! embedding time.
//!
//! With `k = (mu_h - mu_l) / sigma` the posterior generator is
//! `L f = ½ k² p² (1-p)² f''`. Everything here follows from solving
//! `L f = s f` (Laplace transform) or `L f = -1` (mean) with unit or zero
//! boundary values, written in terms of the odds `x = p / (1 - p)`.

use crate::dynamics::sigma0;
use crate::model::{validate_law, ModelParams, TerminalLaw};
use crate::quadrature::{adaptive_simpson, integrate_piecewise};
use crate::{Error, Result};

/// Absolute tolerance of the potential-integral quadrature.
pub const POTENTIAL_QUAD_TOL: f64 = 1e-8;

/// `sqrt(1 + 8 s sigma² / (mu_h - mu_l)²)`, the spread of the characteristic
/// exponents `(1 ± gamma) / 2` of the Cauchy–Euler equation in the odds.
pub fn gamma_of_s(s: f64, params: &ModelParams) -> f64 {
    let k = params.snr();
    (1.0 + 8.0 * s / (k * k)).sqrt()
}

#[inline]
fn log_odds(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

fn check_closed_interval(lower: f64, upper: f64, p: f64) -> Result<()> {
    if !(0.0 <= lower && lower <= p && p <= upper && upper <= 1.0) {
        return Err(Error::InvalidInterval(format!(
            "need 0 <= lower <= p <= upper <= 1, got lower={lower}, p={p}, upper={upper}"
        )));
    }
    Ok(())
}

/// `sinh(g a) / sinh(g total)` for `0 <= a <= total`, `total > 0`, without
/// forming either hyperbolic sine.
#[inline]
fn sinh_ratio(g: f64, a: f64, total: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    (-g * (total - a)).exp() * (-2.0 * g * a).exp_m1() / (-2.0 * g * total).exp_m1()
}

/// `E_p[exp(-s tau)]` for the exit time of `[lower, upper]` started at `p`.
///
/// In odds, `x̲ = lower/(1-lower)`, `x̄ = upper/(1-upper)`:
///
/// ```text
/// phi_s(p) = sqrt(p(1-p)) / sinh(g ln(x̄/x̲))
///            * [ sinh(g ln(x̄/x)) / sqrt(lower(1-lower))
///              + sinh(g ln(x/x̲)) / sqrt(upper(1-upper)) ],   g = gamma(s)/2
/// ```
///
/// evaluated through ratios of hyperbolic sines so large `s` cannot overflow.
pub fn laplace_exit_transform(s: f64, p: f64, lower: f64, upper: f64, params: &ModelParams) -> Result<f64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("s must be nonnegative and finite, got {s}")));
    }
    check_closed_interval(lower, upper, p)?;
    if p == lower || p == upper || s == 0.0 {
        return Ok(1.0);
    }
    if lower == 0.0 || upper == 1.0 {
        return Err(Error::Divergent(format!(
            "log-odds of the boundary diverge for interval [{lower}, {upper}]"
        )));
    }
    let g = 0.5 * gamma_of_s(s, params);
    let to_upper = log_odds(upper) - log_odds(p);
    let from_lower = log_odds(p) - log_odds(lower);
    let total = to_upper + from_lower;
    let scale = (p * (1.0 - p)).sqrt();
    let value = scale
        * (sinh_ratio(g, to_upper, total) / (lower * (1.0 - lower)).sqrt()
            + sinh_ratio(g, from_lower, total) / (upper * (1.0 - upper)).sqrt());
    Ok(value.min(1.0))
}

/// `(2p - 1) ln(p / (1 - p))`, a solution of `L f = k²/2` up to scaling.
fn exit_potential(p: f64) -> f64 {
    (2.0 * p - 1.0) * log_odds(p)
}

/// Expected exit time of `[lower, upper]` from `p0`:
///
/// ```text
/// E[tau] = 2/k² · ( q Φ(upper) + (1-q) Φ(lower) - Φ(p0) ),
/// Φ(p) = (2p-1) ln(p/(1-p)),  q = (p0 - lower)/(upper - lower).
/// ```
pub fn expected_exit_time(p0: f64, lower: f64, upper: f64, params: &ModelParams) -> Result<f64> {
    check_closed_interval(lower, upper, p0)?;
    if p0 == lower || p0 == upper {
        return Ok(0.0);
    }
    if lower == 0.0 || upper == 1.0 {
        return Err(Error::Divergent(format!(
            "expected exit time from [{lower}, {upper}] is infinite"
        )));
    }
    let k = params.snr();
    let q = (p0 - lower) / (upper - lower);
    let inner = q * exit_potential(upper) + (1.0 - q) * exit_potential(lower) - exit_potential(p0);
    Ok((2.0 / (k * k) * inner).max(0.0))
}

/// Expected exit time through the derivative of the Poisson solution,
/// `psi(p) = ∫_{p0}^{p} 2 / (k² r² (1-r)²) dr`, and
/// `E[tau] = (1-q) ∫_{p0}^{lower} psi + q ∫_{p0}^{upper} psi`, both integrals
/// computed numerically. A check on [`expected_exit_time`].
pub fn expected_exit_time_psi(p0: f64, lower: f64, upper: f64, params: &ModelParams) -> Result<f64> {
    check_closed_interval(lower, upper, p0)?;
    if p0 == lower || p0 == upper {
        return Ok(0.0);
    }
    if lower == 0.0 || upper == 1.0 {
        return Err(Error::Divergent(format!(
            "expected exit time from [{lower}, {upper}] is infinite"
        )));
    }
    let k2 = params.snr().powi(2);
    let psi_prime = |r: f64| 2.0 / (k2 * r * r * (1.0 - r) * (1.0 - r));
    let psi = |p: f64| {
        if p >= p0 {
            adaptive_simpson(&psi_prime, p0, p, 1e-13)
        } else {
            -adaptive_simpson(&psi_prime, p, p0, 1e-13)
        }
    };
    let q = (p0 - lower) / (upper - lower);
    let down = -adaptive_simpson(&psi, lower, p0, 1e-11);
    let up = adaptive_simpson(&psi, p0, upper, 1e-11);
    Ok((1.0 - q) * down + q * up)
}

/// `E_p[tau²]` for the exit time of `[lower, upper]`, from the moment
/// recursion `E_p[tau²] = 2 E_p[∫_0^tau m1(p_t) dt]` with the interval's
/// Green function:
///
/// ```text
/// E_p[tau²] = 4 ∫ G(p, y) m1(y) / sigma0(y)² dy,
/// G(p, y) = (min(p,y) - lower)(upper - max(p,y)) / (upper - lower).
/// ```
pub fn second_moment_exit_time(p: f64, lower: f64, upper: f64, params: &ModelParams) -> Result<f64> {
    let m1_start = expected_exit_time(p, lower, upper, params)?;
    if m1_start == 0.0 {
        return Ok(0.0);
    }
    let width = upper - lower;
    let integrand = |y: f64| {
        let green = (p.min(y) - lower) * (upper - p.max(y)) / width;
        if green <= 0.0 {
            return 0.0;
        }
        let m1 = expected_exit_time(y, lower, upper, params).unwrap_or(0.0);
        let s = sigma0(y, params);
        green * m1 / (s * s)
    };
    // m1 is a difference of O(1) terms; on narrow intervals its relative
    // rounding error exceeds 1e-10 and the tolerance must not go below it.
    let k2 = params.snr().powi(2);
    let magnitude = exit_potential(lower).abs() + exit_potential(upper).abs() + exit_potential(p).abs();
    let noise = f64::EPSILON * 2.0 * magnitude / (k2 * m1_start);
    let tol = (1e-10f64).max(1e3 * noise) * m1_start * m1_start;
    Ok(4.0 * integrate_piecewise(&integrand, &[lower, p, upper], tol))
}

/// Potential of the law, `U(y) = Σ mass · |belief - y|`.
pub fn potential(law: &TerminalLaw, y: f64) -> f64 {
    law.atoms().iter().map(|&(b, m)| m * (b - y).abs()).sum()
}

/// Expected time for the ungarbled diffusion to embed `law`:
///
/// ```text
/// ∫ (U(y) - |p0 - y|) / sigma0(y)² dy
/// ```
///
/// over the support hull, split at `p0` and at every atom where the
/// numerator has kinks.
pub fn embedding_time_via_potential(law: &TerminalLaw, params: &ModelParams) -> Result<f64> {
    let report = validate_law(law, params);
    if !report.is_ok() {
        return Err(Error::InvalidLaw(report.to_string()));
    }
    let (lo, hi) = (law.min_support(), law.max_support());
    if lo == hi {
        return Ok(0.0);
    }
    if lo <= 0.0 || hi >= 1.0 {
        return Err(Error::Divergent(format!(
            "support [{lo}, {hi}] touches an absorbing belief; the embedding time is infinite"
        )));
    }
    let p0 = params.p0();
    let integrand = |y: f64| {
        let s = sigma0(y, params);
        ((potential(law, y) - (p0 - y).abs()) / (s * s)).max(0.0)
    };
    let mut breaks: Vec<f64> = law.atoms().iter().map(|a| a.0).collect();
    breaks.push(p0);
    Ok(integrate_piecewise(&integrand, &breaks, POTENTIAL_QUAD_TOL))
}
