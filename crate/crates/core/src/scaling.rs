//! Monte Carlo experiments on how the expected efficiency grows with the
//! number of users, and the asymptotic and finite-K predictors they are
//! compared against.
//!
//! Every trial draws from its own stream, seeded from
//! `(master_seed, grid index, trial index)`, and per-trial values are reduced
//! in index order. Results are therefore bit-identical for any thread count.

use std::f64::consts::{E, LN_2};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ee::{ee_closed_form, ee_dpc, ee_lower, ee_upper};
use crate::error::{Error, Result};
use crate::matrix_kernel::sample_complex_gaussian;
use crate::special_math::{lambert_w0, max_exponential_quantile};
use crate::system_model::{normalized_alpha, ChannelSet, SystemConfig};

/// Largest user count accepted in `mimo_exact` mode.
pub const MIMO_EXACT_MAX_USERS: u64 = 64;

/// Outer tolerance for `ee_dpc` inside experiments.
pub const EXPERIMENT_DPC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// Single-antenna users; the best gain is drawn as one order statistic.
    SisoExact,
    /// Full channel draws; upper and lower bound efficiencies.
    MimoBounds,
    /// Full channel draws; exact efficiency by outer search.
    MimoExact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub mode: ExperimentMode,
    pub alpha: f64,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub k_grid: Vec<u64>,
    pub trials: usize,
    pub master_seed: u64,
    pub include_qstar_in_predictor: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!(
                "`alpha` must be nonnegative, got {}",
                self.alpha
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("`trials` must be at least 1".into()));
        }
        if self.tx_antennas == 0 || self.rx_antennas == 0 {
            return Err(Error::Config("antenna counts must be at least 1".into()));
        }
        if self.k_grid.is_empty() || self.k_grid[0] == 0 {
            return Err(Error::Config("`k_grid` must be nonempty with K >= 1".into()));
        }
        if self.k_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("`k_grid` must be strictly increasing".into()));
        }
        match self.mode {
            ExperimentMode::SisoExact => {
                if self.tx_antennas != 1 || self.rx_antennas != 1 {
                    return Err(Error::Config("siso_exact needs tx_antennas = rx_antennas = 1".into()));
                }
            }
            ExperimentMode::MimoBounds | ExperimentMode::MimoExact => {
                let nk = self.rx_antennas as u64 * self.k_grid[0];
                if nk < self.tx_antennas as u64 {
                    return Err(Error::Config(format!(
                        "N K = {nk} is smaller than M = {}; the ZF-DPC bound needs N K >= M",
                        self.tx_antennas
                    )));
                }
                if self.mode == ExperimentMode::MimoExact
                    && self.k_grid.last().is_some_and(|&k| k > MIMO_EXACT_MAX_USERS)
                {
                    return Err(Error::Config(format!(
                        "mimo_exact is limited to K <= {MIMO_EXACT_MAX_USERS}"
                    )));
                }
            }
        }
        // the asymptotic predictor needs ln ln NK > 0
        if self.alpha > 0.0 && self.rx_antennas as u64 * self.k_grid[0] < 3 {
            return Err(Error::Config("alpha > 0 needs N K >= 3 at every grid point".into()));
        }
        Ok(())
    }
}

/// One grid point of a scaling experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub k: u64,
    pub mean_xi: f64,
    /// Half-width of the 95% normal-approximation confidence interval.
    pub ci_halfwidth: f64,
    pub predictor_asymptotic: f64,
    pub predictor_finite_k: f64,
    pub ratio_asymptotic: f64,
    pub ratio_finite_k: f64,
    pub mean_xi_upper: Option<f64>,
    pub mean_xi_lower: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingResult {
    pub mode: ExperimentMode,
    pub rows: Vec<ScalingRow>,
}

pub const CSV_HEADER: &str = "K,mean_xi,ci95,pred_asym,pred_finite,ratio_asym,ratio_finite";

impl ScalingResult {
    /// CSV with 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let bounds = self.mode == ExperimentMode::MimoBounds;
        let mut out = String::from(CSV_HEADER);
        if bounds {
            out.push_str(",mean_xi_upper,mean_xi_lower");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{}", r.k);
            for v in [
                r.mean_xi,
                r.ci_halfwidth,
                r.predictor_asymptotic,
                r.predictor_finite_k,
                r.ratio_asymptotic,
                r.ratio_finite_k,
            ] {
                let _ = write!(out, ",{}", fmt17(v));
            }
            if bounds {
                for v in [r.mean_xi_upper, r.mean_xi_lower] {
                    let _ = write!(out, ",{}", fmt17(v.unwrap_or(f64::NAN)));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Formats with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_users(k: u64) -> Result<()> {
    if k == 0 {
        return Err(Error::Domain {
            func: "predictor user count",
            value: 0.0,
        });
    }
    Ok(())
}

/// Single-antenna scaling law: `log2(ln K) / alpha` for `alpha > 0`,
/// `log2 K` for `alpha = 0`.
pub fn predictor_theorem1(alpha: f64, k: u64) -> Result<f64> {
    predictor_theorem2(alpha, k, 1, 1)
}

/// Multi-antenna scaling law: `M log2(ln NK) / alpha` for `alpha > 0`,
/// `log2 NK` for `alpha = 0`.
pub fn predictor_theorem2(alpha: f64, k: u64, m: usize, n: usize) -> Result<f64> {
    check_users(k)?;
    if !(alpha >= 0.0) {
        return Err(Error::Domain {
            func: "predictor alpha",
            value: alpha,
        });
    }
    let nk = n as f64 * k as f64;
    if alpha == 0.0 {
        return Ok(nk.log2());
    }
    if nk < 3.0 {
        return Err(Error::Domain {
            func: "predictor_theorem2 (needs N K >= 3)",
            value: nk,
        });
    }
    Ok(m as f64 * nk.ln().log2() / alpha)
}

/// Finite-K predictor `(m/ln2)[W((alpha ln NK - m)/(e m)) + 1]` divided by
/// `alpha`, or by `q~* + alpha` when `include_qstar` is set, where `q~*` is
/// the closed-form optimal power at gain `ln NK`.
pub fn predictor_finite_k(alpha: f64, k: u64, m: usize, n: usize, include_qstar: bool) -> Result<f64> {
    check_users(k)?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain {
            func: "predictor_finite_k alpha",
            value: alpha,
        });
    }
    let mf = m as f64;
    let log_nk = (n as f64 * k as f64).ln();
    let arg = (alpha * log_nk - mf) / (E * mf);
    let numerator = mf / LN_2 * (lambert_w0(arg)? + 1.0);
    if !include_qstar {
        return Ok(numerator / alpha);
    }
    if log_nk == 0.0 {
        // NK = 1: zero gain, zero rate
        return Ok(0.0);
    }
    let sol = ee_closed_form(alpha, log_nk, m)?;
    Ok(numerator / (sol.x_star + alpha))
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream seed for trial `trial` of grid point `grid_index`.
pub fn trial_seed(master_seed: u64, grid_index: usize, trial: usize) -> u64 {
    let h = mix64(master_seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let h = mix64(h ^ grid_index as u64);
    mix64(h.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ trial as u64)
}

/// Per-trial outcome: primary efficiency and, in bounds mode, (upper, lower).
#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    xi: f64,
    bounds: Option<(f64, f64)>,
}

fn run_trial(spec: &ExperimentSpec, k: u64, seed: u64) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec.mode {
        ExperimentMode::SisoExact => {
            let u = open_unit(&mut rng);
            let best = max_exponential_quantile(k, u)?;
            let xi = if best > 0.0 {
                ee_closed_form(spec.alpha, best, 1)?.xi
            } else {
                0.0
            };
            Ok(TrialOutcome { xi, bounds: None })
        }
        ExperimentMode::MimoBounds => {
            let ch = draw(spec, k, &mut rng)?;
            let upper = ee_upper(&ch, spec.alpha)?.xi;
            let lower = ee_lower(&ch, spec.alpha)?.xi;
            Ok(TrialOutcome {
                xi: lower,
                bounds: Some((upper, lower)),
            })
        }
        ExperimentMode::MimoExact => {
            let ch = draw(spec, k, &mut rng)?;
            Ok(TrialOutcome {
                xi: ee_dpc(&ch, spec.alpha, EXPERIMENT_DPC_TOL)?.xi,
                bounds: None,
            })
        }
    }
}

/// Uniform variate on the open interval (0, 1).
fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn draw(spec: &ExperimentSpec, k: u64, rng: &mut ChaCha8Rng) -> Result<ChannelSet> {
    let mats = (0..k)
        .map(|_| sample_complex_gaussian(rng, spec.rx_antennas, spec.tx_antennas))
        .collect();
    ChannelSet::new(spec.tx_antennas, spec.rx_antennas, mats)
}

fn mean_and_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Runs every grid point of `spec`; trials execute in parallel.
pub fn run_scaling_experiment(spec: &ExperimentSpec) -> Result<ScalingResult> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.k_grid.len());
    for (g, &k) in spec.k_grid.iter().enumerate() {
        let outcomes: Vec<TrialOutcome> = (0..spec.trials)
            .into_par_iter()
            .map(|t| {
                run_trial(spec, k, trial_seed(spec.master_seed, g, t)).map_err(|e| Error::Trial {
                    k,
                    trial: t,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;

        let xs: Vec<f64> = outcomes.iter().map(|o| o.xi).collect();
        let (mean_xi, ci_halfwidth) = mean_and_ci(&xs);
        let (mean_xi_upper, mean_xi_lower) = if spec.mode == ExperimentMode::MimoBounds {
            let n = outcomes.len() as f64;
            let up = outcomes.iter().map(|o| o.bounds.map_or(0.0, |b| b.0)).sum::<f64>() / n;
            let lo = outcomes.iter().map(|o| o.bounds.map_or(0.0, |b| b.1)).sum::<f64>() / n;
            (Some(up), Some(lo))
        } else {
            (None, None)
        };

        let (m, n) = (spec.tx_antennas, spec.rx_antennas);
        let predictor_asymptotic = predictor_theorem2(spec.alpha, k, m, n)?;
        let predictor_finite_k = if spec.alpha > 0.0 {
            predictor_finite_k(spec.alpha, k, m, n, spec.include_qstar_in_predictor)?
        } else {
            // alpha -> 0 limit of the finite-K form is log2 NK as well
            predictor_asymptotic
        };
        rows.push(ScalingRow {
            k,
            mean_xi,
            ci_halfwidth,
            predictor_asymptotic,
            predictor_finite_k,
            ratio_asymptotic: mean_xi / predictor_asymptotic,
            ratio_finite_k: mean_xi / predictor_finite_k,
            mean_xi_upper,
            mean_xi_lower,
        });
    }
    Ok(ScalingResult { mode: spec.mode, rows })
}

/// Asymptotic efficiency as a function of the transmit antenna count, with
/// `alpha` recomputed from the circuit-power model for each `M`.
pub fn antenna_tradeoff_curve(cfg_base: &SystemConfig, m_grid: &[usize], k: u64) -> Result<Vec<(usize, f64)>> {
    m_grid
        .iter()
        .map(|&m| {
            let cfg = SystemConfig {
                tx_antennas: m,
                ..cfg_base.clone()
            };
            cfg.validate()?;
            let alpha = normalized_alpha(&cfg);
            Ok((m, predictor_theorem2(alpha, k, m, cfg.rx_antennas)?))
        })
        .collect()
}
