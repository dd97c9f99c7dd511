//! Special functions and the generic CDF inverter.
//!
//! `erfc` comes from `libm` (accurate to about one ulp); the regularized
//! incomplete beta function and `ln Γ` come from `statrs`. This module adapts them to the tail-accurate forms the
//! distributions need and adds a bracketed root finder for quantiles.

use std::f64::consts::SQRT_2;

use statrs::function::{beta, gamma};

/// Standard normal CDF Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal survival function 1 − Φ(x), accurate in the upper tail.
pub fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Regularized incomplete beta function I_x(a, b), clamped outside [0, 1].
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta::beta_reg(a, b, x)
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    beta::ln_beta(a, b)
}

/// Student-t CDF with `df` degrees of freedom (df = ∞ gives the normal CDF).
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if df.is_infinite() {
        return normal_cdf(t);
    }
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let t2 = t * t;
    if t2 < df {
        // P(|T| < |t|) = I_{t²/(df+t²)}(1/2, df/2); keeps the argument away from 1.
        let inner = 0.5 * beta_reg(0.5, 0.5 * df, t2 / (df + t2));
        return 0.5 + inner.copysign(t);
    }
    // P(|T| > |t|) = I_{df/(df+t²)}(df/2, 1/2)
    let tail = 0.5 * beta_reg(0.5 * df, 0.5, df / (df + t2));
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Student-t density (df = ∞ gives the normal density).
pub fn student_t_pdf(t: f64, df: f64) -> f64 {
    if df.is_infinite() {
        return normal_pdf(t);
    }
    let ln_c = ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * std::f64::consts::PI).ln();
    (ln_c - 0.5 * (df + 1.0) * (1.0 + t * t / df).ln()).exp()
}

/// Inverts a continuous nondecreasing `cdf` at level `u` ∈ (0, 1).
///
/// Bisection on a bracket grown geometrically from `[lo, hi]` (clipped to the
/// support), then Newton polishing with `pdf`, falling back to bisection
/// whenever a Newton step leaves the bracket.
pub fn invert_cdf(
    cdf: impl Fn(f64) -> f64,
    pdf: impl Fn(f64) -> f64,
    u: f64,
    support: (f64, f64),
) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    let (s_lo, s_hi) = support;
    let mut lo = if s_lo.is_finite() { s_lo } else { -1.0 };
    let mut hi = if s_hi.is_finite() { s_hi } else { 1.0 };
    let mut width = 1.0;
    while !s_lo.is_finite() && cdf(lo) > u {
        width *= 2.0;
        lo = -width;
    }
    width = 1.0;
    while !s_hi.is_finite() && cdf(hi) < u {
        width *= 2.0;
        hi = width;
    }

    for _ in 0..200 {
        if hi - lo <= 1e-3 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        let err = cdf(x) - u;
        if err == 0.0 {
            return x;
        }
        if err < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = pdf(x);
        let newton = x - err / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        x = next;
    }
    x
}
