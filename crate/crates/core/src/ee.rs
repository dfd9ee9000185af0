//! Energy-efficiency maximization.
//!
//! The scalar problem `max_{x>=0} m log2(1 + (gamma/m) x) / (x + alpha)` has
//! the closed-form optimum `t = W0((alpha gamma - m)/(e m)) + 1`,
//! `y* = m t / ln 2`, `x* = m (e^t - 1) / gamma`. The SISO efficiency, and the
//! upper and lower MIMO bounds, are instances of it. The exact MIMO
//! efficiency is found by Dinkelbach's fractional-programming iteration over
//! the dual-MAC sum-capacity curve.

use std::f64::consts::{E, LN_2};

use crate::capacity::{self, DualMacSolver, DEFAULT_MAX_ITER};
use crate::error::{Error, Result};
use crate::special_math::lambert_w0;
use crate::system_model::{denormalize_ee, ChannelSet, SystemConfig};

/// Optimum of the scalar EE problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormSolution {
    /// Optimal rate in bits.
    pub y_star: f64,
    /// Optimal normalized power.
    pub x_star: f64,
    pub xi: f64,
    /// `|(ln2 y*/m - 1) 2^(y*/m) - (alpha gamma - m)/m|`.
    pub stationarity_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EeMethod {
    ClosedForm,
    OuterSearch,
    SlopeLimit,
}

/// An optimized efficiency point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EePoint {
    /// Optimal normalized total transmit power.
    pub q_star: f64,
    /// Rate at `q_star`, in bits.
    pub rate: f64,
    /// Normalized efficiency.
    pub xi: f64,
    /// Physical efficiency in bits/Joule, once a configuration is attached.
    pub gamma_bits_per_joule: Option<f64>,
    pub method: EeMethod,
}

impl EePoint {
    fn from_closed_form(sol: ClosedFormSolution) -> Self {
        EePoint {
            q_star: sol.x_star,
            rate: sol.y_star,
            xi: sol.xi,
            gamma_bits_per_joule: None,
            method: EeMethod::ClosedForm,
        }
    }

    pub fn denormalized(mut self, cfg: &SystemConfig) -> Self {
        self.gamma_bits_per_joule = Some(denormalize_ee(cfg, self.xi));
        self
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::Domain {
            func: "alpha",
            value: alpha,
        });
    }
    Ok(())
}

/// Maximizes `m log2(1 + (gamma/m) x) / (x + alpha)` over `x >= 0`.
///
/// For `alpha = 0` the supremum is the slope at the origin, `gamma / ln 2`,
/// approached as `x -> 0`.
pub fn ee_closed_form(alpha: f64, gamma: f64, m: usize) -> Result<ClosedFormSolution> {
    check_alpha(alpha)?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain {
            func: "ee_closed_form gamma",
            value: gamma,
        });
    }
    if m == 0 {
        return Err(Error::Domain {
            func: "ee_closed_form streams",
            value: 0.0,
        });
    }
    let mf = m as f64;
    let rhs = (alpha * gamma - mf) / mf;
    if alpha == 0.0 {
        return Ok(ClosedFormSolution {
            y_star: 0.0,
            x_star: 0.0,
            xi: gamma / LN_2,
            stationarity_residual: (-1.0 - rhs).abs(),
        });
    }
    let t = lambert_w0(rhs / E)? + 1.0;
    let y_star = mf * t / LN_2;
    // e^t - 1 rather than the printed (alpha gamma - 1)/W - 1 form, which is
    // 0/0 at alpha gamma = m
    let x_star = mf * t.exp_m1() / gamma;
    let xi = y_star / (x_star + alpha);
    let stationarity_residual = ((t - 1.0) * t.exp() - rhs).abs();
    Ok(ClosedFormSolution {
        y_star,
        x_star,
        xi,
        stationarity_residual,
    })
}

/// SISO efficiency: only the strongest user is served.
pub fn ee_siso(channels: &ChannelSet, alpha: f64) -> Result<EePoint> {
    let gain = capacity::siso_best_gain(channels)?;
    if gain == 0.0 {
        return Ok(zero_point(EeMethod::ClosedForm));
    }
    Ok(EePoint::from_closed_form(ee_closed_form(alpha, gain, 1)?))
}

fn zero_point(method: EeMethod) -> EePoint {
    EePoint {
        q_star: 0.0,
        rate: 0.0,
        xi: 0.0,
        gamma_bits_per_joule: None,
        method,
    }
}

/// Limit of `C(q)/q` as `q -> 0`: all power on the strongest eigenmode of the
/// strongest user, `max_k lambda_max(H_k^H H_k) / ln 2`.
pub fn ee_slope_at_zero(channels: &ChannelSet) -> EePoint {
    EePoint {
        q_star: 0.0,
        rate: 0.0,
        xi: capacity::max_eigen_gain(channels) / LN_2,
        gamma_bits_per_joule: None,
        method: EeMethod::SlopeLimit,
    }
}

/// Exact MIMO broadcast efficiency.
///
/// For `alpha > 0` this runs Dinkelbach's iteration on `C(q)/(q + alpha)`:
/// with the current ratio `lambda`, the penalized problem
/// `max_q C(q) - lambda q` is solved exactly by block-coordinate
/// waterfilling, and `lambda` is replaced by the ratio at its solution. The
/// ratios increase monotonically to the optimum. Iteration stops once the
/// remaining gap to the optimal ratio is certified to be at most `tol`; inner
/// solves are certified ten times tighter (scaled by `min(1, alpha)`).
pub fn ee_dpc(channels: &ChannelSet, alpha: f64, tol: f64) -> Result<EePoint> {
    check_alpha(alpha)?;
    if !(tol > 0.0) {
        return Err(Error::Domain {
            func: "ee_dpc tolerance",
            value: tol,
        });
    }
    if alpha == 0.0 {
        return Ok(ee_slope_at_zero(channels));
    }
    let g_max = capacity::max_eigen_gain(channels);
    if g_max == 0.0 {
        return Ok(zero_point(EeMethod::OuterSearch));
    }

    // beamforming to the strongest eigenmode is feasible, so this starts
    // below the optimum
    let mut lambda = ee_closed_form(alpha, g_max, 1)?.xi;
    let inner_tol = 0.1 * tol * alpha.min(1.0);
    let mut solver = DualMacSolver::new(channels);
    let mut previous: Option<EePoint> = None;
    for _ in 0..DINKELBACH_MAX_ITER {
        let r = solver.solve_penalized(lambda * LN_2, inner_tol, DEFAULT_MAX_ITER);
        if !r.converged {
            return Err(Error::NotConverged {
                iterations: r.sweeps,
                gap: r.duality_gap,
            });
        }
        let ratio = r.rate_bits / (r.power + alpha);
        // max_q C(q) - lambda (q + alpha) <= (ratio - lambda)(q + alpha) + gap,
        // and the optimum exceeds lambda by at most that over alpha
        let excess = ((ratio - lambda) * (r.power + alpha) + r.duality_gap).max(0.0);
        let point = EePoint {
            q_star: r.power,
            rate: r.rate_bits,
            xi: ratio,
            gamma_bits_per_joule: None,
            method: EeMethod::OuterSearch,
        };
        if ratio <= lambda {
            // no progress at working precision; keep the better iterate
            return Ok(previous.unwrap_or(point));
        }
        if excess <= tol * alpha {
            return Ok(point);
        }
        lambda = ratio;
        previous = Some(point);
    }
    Err(Error::NotConverged {
        iterations: DINKELBACH_MAX_ITER,
        gap: f64::NAN,
    })
}

const DINKELBACH_MAX_ITER: usize = 200;

/// Efficiency of the trace upper bound `M log2(1 + (q/M) gamma_hat)`.
pub fn ee_upper(channels: &ChannelSet, alpha: f64) -> Result<EePoint> {
    let gamma_hat = capacity::max_eigen_gain(channels);
    if gamma_hat == 0.0 {
        check_alpha(alpha)?;
        return Ok(zero_point(EeMethod::ClosedForm));
    }
    Ok(EePoint::from_closed_form(ee_closed_form(
        alpha,
        gamma_hat,
        channels.tx_antennas(),
    )?))
}

/// Efficiency of the ZF-DPC lower bound `M log2(1 + (q/M) d_MM^2)`.
pub fn ee_lower(channels: &ChannelSet, alpha: f64) -> Result<EePoint> {
    let sel = capacity::zfdpc_greedy(channels)?;
    Ok(EePoint::from_closed_form(ee_closed_form(
        alpha,
        sel.min_gain(),
        channels.tx_antennas(),
    )?))
}
