//! Scalar special functions and one-dimensional search primitives.
//!
//! Everything here is a pure function of its arguments. The principal branch
//! of the Lambert W function is evaluated to full double precision because the
//! energy-efficiency closed forms sit exactly on its branch point when the
//! circuit power vanishes.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// The branch point of the Lambert W function, `-1/e`.
pub const BRANCH_POINT: f64 = -0.367_879_441_171_442_33;

/// Slack tolerated below [`BRANCH_POINT`] before a domain error is raised.
pub const BRANCH_SLACK: f64 = 1e-15;

/// Default cap for [`expand_bracket`].
pub const EXPAND_CAP: f64 = 1_152_921_504_606_846_976.0; // 2^60

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// A Lambert W evaluation together with its defining-equation residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambertEval {
    pub x: f64,
    pub w: f64,
    pub residual: f64,
}

impl LambertEval {
    pub fn new(x: f64) -> Result<Self> {
        let w = lambert_w0(x)?;
        Ok(LambertEval {
            x,
            w,
            residual: (w * w.exp() - x).abs(),
        })
    }
}

/// Result of a bracketed one-dimensional maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketedMax {
    pub x_star: f64,
    pub f_star: f64,
    /// Final bracket after shrinking.
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// Principal branch `W0(x)` of the Lambert W function, the inverse of `w e^w`
/// restricted to `w >= -1`.
///
/// Arguments down to `-1/e - 1e-15` are clamped onto the branch point.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < BRANCH_POINT - BRANCH_SLACK {
        return Err(Error::Domain {
            func: "lambert_w0",
            value: x,
        });
    }
    if x <= BRANCH_POINT {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }

    let mut w = initial_guess(x);
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        if !step.is_finite() {
            break;
        }
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w.max(-1.0))
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // branch-point expansion in p = sqrt(2(ex + 1))
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p
            * (1.0
                + p * (-1.0 / 3.0
                    + p * (11.0 / 72.0 + p * (-43.0 / 540.0 + p * (769.0 / 17280.0 - p * 221.0 / 8505.0)))))
    } else if x <= 3.0 {
        let l = x.ln_1p();
        l * (1.0 - (1.0 + l).ln() / (2.0 + l))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1 + l2 * (l2 - 2.0) / (2.0 * l1 * l1)
    }
}

/// Derivative `W0'(x) = W0(x) / (x (1 + W0(x)))`, evaluated in the
/// equivalent form `e^{-W0(x)} / (1 + W0(x))` which is regular at zero.
pub fn lambert_w0_derivative(x: f64) -> Result<f64> {
    if x.is_nan() || x <= BRANCH_POINT {
        return Err(Error::Domain {
            func: "lambert_w0_derivative",
            value: x,
        });
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let w = lambert_w0(x)?;
    Ok((-w).exp() / (1.0 + w))
}

/// Golden-section search for the maximizer of a unimodal function on
/// `[lo, hi]`.
///
/// Stops when the bracket is narrower than `tol` or stops shrinking in
/// floating point. The returned point is the best of the final interior
/// probes and the final bracket endpoints, so boundary maxima are found
/// exactly.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<BracketedMax>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidBracket { lo, hi });
    }
    if !(tol > 0.0) {
        return Err(Error::Domain {
            func: "golden_section_max",
            value: tol,
        });
    }

    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;

    while b - a > tol {
        let width = b - a;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evaluations += 1;
        if b - a >= width {
            break;
        }
    }

    let fa = f(a);
    let fb = f(b);
    evaluations += 2;

    let mut best = (c, fc);
    for cand in [(d, fd), (a, fa), (b, fb)] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    Ok(BracketedMax {
        x_star: best.0,
        f_star: best.1,
        bracket: (a, b),
        evaluations,
    })
}

/// Grows an upper bracket geometrically from `start` until the function
/// stops increasing. Returns `[lo, hi]` containing the maximizer of a
/// quasi-concave `f` on `[0, inf)`.
pub fn expand_bracket<F>(f: F, start: f64, growth: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    expand_bracket_with_cap(f, start, growth, EXPAND_CAP)
}

pub fn expand_bracket_with_cap<F>(mut f: F, start: f64, growth: f64, cap: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    if !(growth > 1.0) || !growth.is_finite() {
        return Err(Error::Domain {
            func: "expand_bracket",
            value: growth,
        });
    }
    if !(start > 0.0) || !start.is_finite() {
        return Err(Error::Domain {
            func: "expand_bracket",
            value: start,
        });
    }
    let mut lo = 0.0;
    let mut hi = start;
    let mut f_hi = f(hi);
    loop {
        let next = hi * growth;
        if next > cap {
            return Err(Error::BracketCap { cap });
        }
        let f_next = f(next);
        if f_next < f_hi {
            return Ok((lo, next));
        }
        lo = hi;
        hi = next;
        f_hi = f_next;
    }
}

/// The `u`-quantile of the maximum of `k` i.i.d. unit-mean exponential
/// variables, `-ln(1 - u^(1/k))`.
///
/// Feeding a uniform variate through this draws the maximum in O(1),
/// independent of `k`.
pub fn max_exponential_quantile(k: u64, u: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain {
            func: "max_exponential_quantile",
            value: 0.0,
        });
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain {
            func: "max_exponential_quantile",
            value: u,
        });
    }
    // 1 - u^(1/k) = -expm1(ln(u)/k)
    let tail = -(u.ln() / k as f64).exp_m1();
    Ok(-tail.ln())
}
