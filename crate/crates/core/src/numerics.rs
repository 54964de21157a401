//! Real-valued Lambert W on `[-1/e, 0)`, the phase fractions solving
//! `-x ln x = 1/(ce)`, the secretary bound `f(c)` and the summation
//! identities behind the graphic matroid bound.

use std::f64::consts::E;

use num_rational::Ratio;

use crate::error::{Error, Result};

/// The branch point `-1/e` shared by `W_0` and `W_{-1}`.
pub const BRANCH_POINT: f64 = -1.0 / E;

const BRANCH_POINT_TOLERANCE: f64 = 1e-12;

/// The two solutions of `-x ln x = 1/(ce)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFractions {
    /// Solution in `(0, 1/e]`; end of the observation phase.
    pub low: f64,
    /// Solution in `[1/e, 1)`; end of the prediction phase.
    pub high: f64,
}

fn check_lambert_domain(x: f64) -> Result<()> {
    if !x.is_finite() || !(BRANCH_POINT - BRANCH_POINT_TOLERANCE..0.0).contains(&x) {
        return Err(Error::Domain(format!(
            "Lambert W argument {x} outside [-1/e, 0)"
        )));
    }
    Ok(())
}

/// Solve `y e^y = x` on `[lo, hi]` where `y e^y - x` changes sign.
///
/// Bisection runs until the bracket stops shrinking, then a few Newton
/// steps polish the root; a Newton step is kept only if it lowers the
/// residual, so it can never leave the basin of the bracketed root.
fn solve_product_log(x: f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = |y: f64| y * y.exp() - x;
    let g_lo = g(lo);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return mid;
        }
        if (g_mid < 0.0) == (g_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut y = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    for _ in 0..4 {
        let slope = y.exp() * (1.0 + y);
        if slope == 0.0 {
            break;
        }
        let candidate = y - g(y) / slope;
        if candidate.is_finite() && g(candidate).abs() < g(y).abs() {
            y = candidate;
        } else {
            break;
        }
    }
    y
}

/// Principal branch `W_0` on `[-1/e, 0)`; returns `y` in `[-1, 0)`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    check_lambert_domain(x)?;
    if x - BRANCH_POINT <= BRANCH_POINT_TOLERANCE {
        return Ok(-1.0);
    }
    Ok(solve_product_log(x, -1.0, 0.0))
}

/// Lower branch `W_{-1}` on `[-1/e, 0)`; returns `y <= -1`.
pub fn lambert_w_minus1(x: f64) -> Result<f64> {
    check_lambert_domain(x)?;
    if x - BRANCH_POINT <= BRANCH_POINT_TOLERANCE {
        return Ok(-1.0);
    }
    // y e^y tends to 0 from below as y -> -inf, so widen until the bracket holds.
    let mut lo = -2.0_f64;
    while lo * lo.exp() <= x {
        lo *= 2.0;
    }
    Ok(solve_product_log(x, lo, -1.0))
}

fn check_confidence(c: f64) -> Result<()> {
    if !c.is_finite() || c < 1.0 {
        return Err(Error::Domain(format!("c = {c} must satisfy c >= 1")));
    }
    Ok(())
}

/// Bisection for `-x ln x = target` on an interval where `-x ln x` is monotone.
fn bisect_entropy(target: f64, mut lo: f64, mut hi: f64, increasing: bool) -> f64 {
    let h = |x: f64| -x * x.ln();
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let below = h(mid) < target;
        if below == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (h(lo) - target).abs() <= (h(hi) - target).abs() {
        lo
    } else {
        hi
    }
}

/// Phase fractions `(exp W_{-1}(-1/(ce)), exp W_0(-1/(ce)))`, found by solving
/// `-x ln x = 1/(ce)` directly on `(0, 1/e]` and `[1/e, 1)`.
pub fn phase_fractions(c: f64) -> Result<PhaseFractions> {
    check_confidence(c)?;
    let inv_e = 1.0 / E;
    let target = 1.0 / (c * E);
    if c == 1.0 {
        return Ok(PhaseFractions {
            low: inv_e,
            high: inv_e,
        });
    }
    Ok(PhaseFractions {
        low: bisect_entropy(target, 0.0, inv_e, true),
        high: bisect_entropy(target, inv_e, 1.0, false),
    })
}

/// `f(c) = exp W_0(-1/(ce)) - exp W_{-1}(-1/(ce))`: the probability that the
/// maximum lands in the prediction phase of the secretary algorithm.
pub fn f_of_c(c: f64) -> Result<f64> {
    let fractions = phase_fractions(c)?;
    Ok(fractions.high - fractions.low)
}

/// Closed form of `sum_{l=n}^{n+k} 1/(l(l+1)) = (k+1) / (n(n+k+1))`.
pub fn partial_fraction_sum(n: u64, k: u64) -> Result<Ratio<u64>> {
    if n == 0 {
        return Err(Error::Domain("partial_fraction_sum needs n >= 1".into()));
    }
    Ok(Ratio::new(k + 1, n * (n + k + 1)))
}

/// `f(c, n) = (1/n) sum_{l=s}^{n-1} (s-1)s / ((l-1)l)` with `s = floor(n/c)`,
/// the expected-weight factor of the deterministic graphic matroid algorithm.
///
/// The telescoping sum gives `s (n - s) / (n (n - 1))`, which tends to
/// `(c-1)/c^2`.
pub fn graphic_bound_f(c: f64, n: u64) -> Result<f64> {
    if !c.is_finite() || c <= 1.0 {
        return Err(Error::Domain(format!("c = {c} must satisfy c > 1")));
    }
    let s = (n as f64 / c).floor() as u64;
    if s < 2 {
        return Err(Error::Domain(format!(
            "floor(n/c) = {s} must be at least 2 (n = {n}, c = {c})"
        )));
    }
    let (s, n) = (s as f64, n as f64);
    Ok(s * (n - s) / (n * (n - 1.0)))
}
