//! Built-in property suite behind `mimo-ee verify`.
//!
//! Every check computes its reference independently of the routine under
//! test (bisection, brute-force grids, golden-section search) and reports the
//! measured value next to the limit it is judged against.

use std::f64::consts::{E, LN_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::capacity::{capacity_lower_bound, capacity_upper_bound, sum_capacity_dpc, zfdpc_greedy, DEFAULT_MAX_ITER};
use crate::ee::{ee_closed_form, ee_dpc, ee_lower, ee_upper};
use crate::error::Result;
use crate::matrix_kernel::{sample_complex_gaussian, C64};
use crate::scaling::{
    antenna_tradeoff_curve, predictor_theorem2, run_scaling_experiment, ExperimentMode, ExperimentSpec, ScalingResult,
};
use crate::special_math::{expand_bracket, golden_section_max, BRANCH_POINT};
use crate::system_model::{denormalize_ee, normalized_alpha, total_power, ChannelSet, SystemConfig};

use super::config::TOOL_VERSION;

/// Numerical kernels the suite exercises directly. Replacing one with a
/// faulty implementation must make the matching property fail.
#[derive(Debug, Clone, Copy)]
pub struct Kernels {
    pub lambert_w0: fn(f64) -> Result<f64>,
}

impl Default for Kernels {
    fn default() -> Self {
        Kernels {
            lambert_w0: crate::special_math::lambert_w0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyLevel {
    /// Reduced sample sizes; well under a minute.
    Quick,
    /// Acceptance-scale sample sizes.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub level: VerifyLevel,
    pub tool_version: &'static str,
    pub passed: bool,
    pub properties: Vec<PropertyOutcome>,
}

impl VerifyReport {
    pub fn lines(&self) -> String {
        let mut out = String::new();
        for p in &self.properties {
            let tag = if p.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{tag} {:<28} {}\n", p.name, p.measured));
        }
        out
    }
}

struct Sizes {
    lambert_points: usize,
    closed_form_cases: usize,
    dpc_instances: usize,
    sandwich_instances: usize,
    siso_trials: usize,
    siso_k: Vec<u64>,
    bounds_trials: usize,
    bounds_k: Vec<u64>,
}

impl Sizes {
    fn for_level(level: VerifyLevel) -> Self {
        match level {
            VerifyLevel::Quick => Sizes {
                lambert_points: 10_000,
                closed_form_cases: 200,
                dpc_instances: 10,
                sandwich_instances: 60,
                siso_trials: 4_000,
                siso_k: vec![10_000],
                bounds_trials: 400,
                bounds_k: vec![16, 64, 256],
            },
            VerifyLevel::Full => Sizes {
                lambert_points: 100_000,
                closed_form_cases: 1_000,
                dpc_instances: 50,
                sandwich_instances: 1_000,
                siso_trials: 10_000,
                siso_k: vec![10_000, 100_000, 1_000_000],
                bounds_trials: 2_000,
                bounds_k: vec![16, 64, 256, 1024, 4096],
            },
        }
    }
}

pub fn run_verify(level: VerifyLevel, kernels: &Kernels) -> VerifyReport {
    let sizes = Sizes::for_level(level);
    let checks: Vec<fn(&Sizes, &Kernels) -> PropertyOutcome> = vec![
        lambert_residual,
        closed_form_vs_search,
        closed_form_pinned,
        dpc_vs_grid_search,
        sandwich,
        normalization_identity,
        siso_finite_k,
        siso_ratio_band,
        siso_alpha_zero,
        bounds_trend,
        antenna_monotone,
        thread_count_invariance,
        csv_round_trip,
    ];
    let properties: Vec<PropertyOutcome> = checks.iter().map(|check| check(&sizes, kernels)).collect();
    VerifyReport {
        level,
        tool_version: TOOL_VERSION,
        passed: properties.iter().all(|p| p.passed),
        properties,
    }
}

fn outcome(name: &'static str, passed: bool, measured: String) -> PropertyOutcome {
    PropertyOutcome { name, passed, measured }
}

fn failed(name: &'static str, err: impl std::fmt::Display) -> PropertyOutcome {
    outcome(name, false, format!("error: {err}"))
}

fn lambert_residual(sizes: &Sizes, kernels: &Kernels) -> PropertyOutcome {
    const NAME: &str = "lambert_residual";
    // log-spaced offsets above the branch point, so both the singular corner
    // and the large-argument tail are sampled densely
    let n = sizes.lambert_points;
    let (lo, hi) = (1e-9f64.ln(), (1e8 - BRANCH_POINT).ln());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let x = BRANCH_POINT + (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp();
        let w = match (kernels.lambert_w0)(x) {
            Ok(w) => w,
            Err(e) => return failed(NAME, e),
        };
        let r = (w * w.exp() - x).abs() / x.abs().max(1.0);
        worst = worst.max(if r.is_nan() { f64::INFINITY } else { r });
    }
    outcome(
        NAME,
        worst <= 1e-12,
        format!("max |w e^w - x|/max(1,|x|) = {worst:.3e} over {n} points (limit 1e-12)"),
    )
}

/// Golden-section reference for `max_x m log2(1 + gamma x/m)/(x + alpha)`.
fn ratio_by_search(alpha: f64, gamma: f64, m: usize) -> Result<f64> {
    let mf = m as f64;
    let f = |x: f64| mf * (gamma * x / mf).ln_1p() / LN_2 / (x + alpha);
    let (lo, hi) = expand_bracket(f, alpha.max(1e-3) / gamma, 2.0)?;
    Ok(golden_section_max(f, lo, hi, 1e-13 * hi.max(1.0))?.f_star)
}

fn closed_form_vs_search(sizes: &Sizes, _: &Kernels) -> PropertyOutcome {
    const NAME: &str = "closed_form_vs_search";
    let mut rng = ChaCha8Rng::seed_from_u64(0xc10_5ed);
    let (mut gap, mut abs_res, mut rel_res) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..sizes.closed_form_cases {
        let alpha = 10f64.powf(rng.random_range(-3.0..3.0));
        let gamma = 10f64.powf(rng.random_range(-3.0..3.0));
        let m = [1usize, 2, 4][rng.random_range(0..3)];
        let (sol, reference) = match (ee_closed_form(alpha, gamma, m), ratio_by_search(alpha, gamma, m)) {
            (Ok(s), Ok(r)) => (s, r),
            (Err(e), _) | (_, Err(e)) => return failed(NAME, e),
        };
        gap = gap.max((sol.xi - reference).abs());
        let rhs = (alpha * gamma - m as f64) / m as f64;
        abs_res = abs_res.max(sol.stationarity_residual);
        rel_res = rel_res.max(sol.stationarity_residual / rhs.abs().max(1.0));
    }
    outcome(
        NAME,
        gap <= 1e-8 && rel_res <= 1e-10,
        format!(
            "max |xi - search| = {gap:.3e} (limit 1e-8); stationarity residual {abs_res:.3e} abs, \
             {rel_res:.3e} relative to max(1,|rhs|) (limit 1e-10)"
        ),
    )
}

fn closed_form_pinned(_: &Sizes, _: &Kernels) -> PropertyOutcome {
    const NAME: &str = "closed_form_pinned";
    let (unit, ideal) = match (ee_closed_form(1.0, 1.0, 1), ee_closed_form(0.0, 3.5, 2)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return failed(NAME, e),
    };
    let d = (unit.xi - 1.0 / (E * LN_2)).abs();
    let exact = ideal.xi == 3.5 / LN_2;
    outcome(
        NAME,
        d <= 1e-12 && exact,
        format!("|xi(1,1,1) - 1/(e ln2)| = {d:.3e} (limit 1e-12); alpha = 0 gives gamma/ln2 exactly: {exact}"),
    )
}

fn random_channels(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize) -> ChannelSet {
    let mats = (0..k).map(|_| sample_complex_gaussian(rng, n, m)).collect();
    ChannelSet::new(m, n, mats).expect("shapes are consistent")
}

/// Brute-force sum capacity for `M = 2`, `N = 1`, `K = 2` over the dual-MAC
/// power split `p + (q - p) = q`, using the closed-form 2x2 determinant.
fn two_user_grid(ch: &ChannelSet, q: f64) -> f64 {
    let u = ch.matrices()[0].row(0);
    let v = ch.matrices()[1].row(0);
    let nu: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    let nv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let cross: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
    let coupling = nu * nv - cross.norm_sqr();
    let steps = 20_000;
    (0..=steps)
        .map(|i| {
            let p = q * i as f64 / steps as f64;
            let r = q - p;
            (1.0 + p * nu + r * nv + p * r * coupling).log2()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn dpc_vs_grid_search(sizes: &Sizes, _: &Kernels) -> PropertyOutcome {
    const NAME: &str = "dpc_vs_grid_search";
    let mut rng = ChaCha8Rng::seed_from_u64(0xd9c);
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    for _ in 0..sizes.dpc_instances {
        let ch = random_channels(&mut rng, 2, 1, 2);
        for q in [0.1, 1.0, 3.0, 10.0, 50.0] {
            let r = match sum_capacity_dpc(&ch, q, 1e-9, DEFAULT_MAX_ITER) {
                Ok(r) => r,
                Err(e) => return failed(NAME, e),
            };
            worst = worst.max((r.rate_bits - two_user_grid(&ch, q)).abs());
            monotone &= r.objective_trace.windows(2).all(|w| w[1] >= w[0]);
        }
    }
    outcome(
        NAME,
        worst <= 1e-3 && monotone,
        format!("max |dpc - grid| = {worst:.3e} bits (limit 1e-3); objective nondecreasing: {monotone}"),
    )
}

fn sandwich(sizes: &Sizes, _: &Kernels) -> PropertyOutcome {
    const NAME: &str = "sandwich";
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a4d);
    let mut violation: f64 = 0.0;
    let mut gains_sorted = true;
    for i in 0..sizes.sandwich_instances {
        let m = [2, 4][i % 2];
        let n = [1, 2][(i / 2) % 2];
        let k = [4, 8, 16][(i / 4) % 3];
        let alpha = [0.0, 0.5, 2.0][(i / 12) % 3];
        let ch = random_channels(&mut rng, m, n, k);
        let q = rng.random_range(0.1..20.0);
        let rates = (|| {
            let lower = capacity_lower_bound(&ch, q)?;
            let dpc = sum_capacity_dpc(&ch, q, 1e-9, DEFAULT_MAX_ITER)?.rate_bits;
            let upper = capacity_upper_bound(&ch, q)?;
            let xi = (
                ee_lower(&ch, alpha)?.xi,
                ee_dpc(&ch, alpha, 1e-9)?.xi,
                ee_upper(&ch, alpha)?.xi,
            );
            let gains = zfdpc_greedy(&ch)?.gains;
            Ok::<_, crate::Error>((lower, dpc, upper, xi, gains))
        })();
        let ((sum_form, min_form), dpc, upper, (xl, xd, xu), gains) = match rates {
            Ok(v) => v,
            Err(e) => return failed(NAME, e),
        };
        for (a, b) in [(min_form, sum_form), (sum_form, dpc), (dpc, upper), (xl, xd), (xd, xu)] {
            violation = violation.max(a - b);
        }
        gains_sorted &= gains.windows(2).all(|w| w[1] <= w[0]);
    }
    outcome(
        NAME,
        violation <= 1e-6 && gains_sorted,
        format!(
            "max ordering violation = {violation:.3e} over {} instances (limit 1e-6); zfdpc gains nonincreasing: {gains_sorted}",
            sizes.sandwich_instances
        ),
    )
}

fn normalization_identity(_: &Sizes, _: &Kernels) -> PropertyOutcome {
    const NAME: &str = "normalization_identity";
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e7);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let cfg = SystemConfig {
            tx_antennas: rng.random_range(1..9),
            rx_antennas: rng.random_range(1..3),
            users: 1,
            bandwidth_hz: 10f64.powf(rng.random_range(3.0..7.0)),
            noise_density: 10f64.powf(rng.random_range(-21.0..-17.0)),
            pathloss: 10f64.powf(rng.random_range(-14.0..-8.0)),
            pa_efficiency: rng.random_range(0.1..1.0),
            p_dyn_watts: rng.random_range(0.0..2.0),
            p_sta_watts: rng.random_range(0.0..10.0),
        };
        let q: f64 = 10f64.powf(rng.random_range(-2.0..3.0));
        let rate: f64 = rng.random_range(0.0..30.0);
        let p_tx = q * cfg.noise_density * cfg.bandwidth_hz / cfg.pathloss;
        let physical = match total_power(&cfg, p_tx) {
            Ok(p) => rate * cfg.bandwidth_hz / p,
            Err(e) => return failed(NAME, e),
        };
        let normalized = denormalize_ee(&cfg, rate / (q + normalized_alpha(&cfg)));
        worst = worst.max((physical - normalized).abs() / physical.abs().max(f64::MIN_POSITIVE));
    }
    outcome(
        NAME,
        worst <= 1e-12,
        format!("max relative mismatch physical vs normalized EE = {worst:.3e} (limit 1e-12)"),
    )
}

fn siso_spec(alpha: f64, k_grid: Vec<u64>, trials: usize, seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        mode: ExperimentMode::SisoExact,
        alpha,
        tx_antennas: 1,
        rx_antennas: 1,
        k_grid,
        trials,
        master_seed: seed,
        include_qstar_in_predictor: true,
    }
}

fn siso_finite_k(sizes: &Sizes, _: &Kernels) -> PropertyOutcome {
    const NAME: &str = "siso_finite_k";
    let res = match run_scaling_experiment(&siso_spec(1.0, sizes.siso_k.clone(), sizes.siso_trials, 11)) {
        Ok(r) => r,
        Err(e) => return failed(NAME, e),
    };
    let worst = res
        .rows
        .iter()
        .map(|r| (r.ratio_finite_k - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        NAME,
        worst <= 0.10,
        format!(
            "max |mean/pred_finite - 1| = {worst:.4} at K in {:?}, {} trials (limit 0.10)",
            sizes.siso_k, sizes.siso_trials
        ),
    )
}

/// Over `K = 1e2..1e6` the ratio to `log2(ln K)/alpha` is not monotone (it
/// dips before its slow climb to 1), so the check is the band it must stay
/// in plus agreement with the finite-K predictor at every grid point.
fn siso_ratio_band(sizes: &Sizes, _: &Kernels) -> PropertyOutcome {
    const NAME: &str = "siso_ratio_band";
    let grid = vec![100, 1_000, 10_000, 100_000, 1_000_000];
    let res = match run_scaling_experiment(&siso_spec(1.0, grid, sizes.siso_trials, 12)) {
        Ok(r) => r,
        Err(e) => return failed(NAME, e),
    };
    let ratios: Vec<f64> = res.rows.iter().map(|r| r.ratio_asymptotic).collect();
    let finite: Vec<f64> = res.rows.iter().map(|r| r.ratio_finite_k).collect();
    let inside = ratios.iter().all(|&r| r > 0.5 && r < 1.05);
    let tracks = finite.iter().all(|&r| (r - 1.0).abs() <= 0.10);
    outcome(
        NAME,
        inside && tracks,
        format!(
            "K = 1e2..1e6: ratio to log2(ln K)/alpha {ratios:.4?} (inside (0.5, 1.05)); \
             ratio to finite-K predictor {finite:.4?} (within 10%)"
        ),
    )
}

fn siso_alpha_zero(sizes: &Sizes, _: &Kernels) -> PropertyOutcome {
    const NAME: &str = "siso_alpha_zero";
    let k = 100_000u64;
    let res = match run_scaling_experiment(&siso_spec(0.0, vec![k], sizes.siso_trials, 13)) {
        Ok(r) => r,
        Err(e) => return failed(NAME, e),
    };
    let target = (k as f64).ln() + 0.577_215_664_901_532_9;
    let dev = (res.rows[0].mean_xi * LN_2 / target - 1.0).abs();
    outcome(
        NAME,
        dev <= 0.02,
        format!("|mean_xi ln2 / (ln K + gamma_E) - 1| = {dev:.4} at K = 1e5 (limit 0.02)"),
    )
}

/// The bound means bracket the exact efficiency and close in on each other
/// as `K` grows. Their ratios to the asymptotic predictor are reported only:
/// at these `K` they are not monotone.
fn bounds_trend(sizes: &Sizes, _: &Kernels) -> PropertyOutcome {
    const NAME: &str = "mimo_bounds_tighten";
    let spec = ExperimentSpec {
        mode: ExperimentMode::MimoBounds,
        alpha: 1.0,
        tx_antennas: 2,
        rx_antennas: 2,
        k_grid: sizes.bounds_k.clone(),
        trials: sizes.bounds_trials,
        master_seed: 14,
        include_qstar_in_predictor: true,
    };
    let res = match run_scaling_experiment(&spec) {
        Ok(r) => r,
        Err(e) => return failed(NAME, e),
    };
    let mut up = Vec::new();
    let mut lo = Vec::new();
    let mut spread = Vec::new();
    for row in &res.rows {
        let pred = match predictor_theorem2(1.0, row.k, 2, 2) {
            Ok(p) => p,
            Err(e) => return failed(NAME, e),
        };
        let (u, l) = (
            row.mean_xi_upper.unwrap_or(f64::NAN),
            row.mean_xi_lower.unwrap_or(f64::NAN),
        );
        up.push(u / pred);
        lo.push(l / pred);
        spread.push(u / l);
    }
    let ok = spread.iter().all(|&r| r >= 1.0) && spread.windows(2).all(|w| w[1] < w[0]);
    outcome(
        NAME,
        ok,
        format!("upper/lower {spread:.4?} (>= 1, decreasing in K); upper/pred {up:.4?}, lower/pred {lo:.4?}"),
    )
}

fn antenna_monotone(_: &Sizes, _: &Kernels) -> PropertyOutcome {
    const NAME: &str = "antenna_tradeoff_monotone";
    let cfg = SystemConfig {
        p_dyn_watts: 0.5,
        p_sta_watts: 2.0,
        ..SystemConfig::unit()
    };
    let curve = match antenna_tradeoff_curve(&cfg, &[1, 2, 4, 8], 1000) {
        Ok(c) => c,
        Err(e) => return failed(NAME, e),
    };
    let values: Vec<f64> = curve.iter().map(|&(_, v)| v).collect();
    let ok = values.windows(2).all(|w| w[1] > w[0]);
    outcome(
        NAME,
        ok,
        format!("predicted xi at M = 1, 2, 4, 8: {values:.4?} (strictly increasing)"),
    )
}

fn thread_count_invariance(_: &Sizes, _: &Kernels) -> PropertyOutcome {
    const NAME: &str = "thread_count_invariance";
    let spec = ExperimentSpec {
        mode: ExperimentMode::MimoBounds,
        alpha: 0.5,
        tx_antennas: 2,
        rx_antennas: 1,
        k_grid: vec![4, 32],
        trials: 64,
        master_seed: 15,
        include_qstar_in_predictor: false,
    };
    let run = |threads: usize| -> std::result::Result<ScalingResult, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| run_scaling_experiment(&spec))
            .map_err(|e| e.to_string())
    };
    match (run(1), run(4)) {
        (Ok(a), Ok(b)) => {
            let same = a.to_csv() == b.to_csv();
            outcome(NAME, same, format!("CSV from 1 and 4 worker threads identical: {same}"))
        }
        (Err(e), _) | (_, Err(e)) => failed(NAME, e),
    }
}

fn csv_round_trip(_: &Sizes, _: &Kernels) -> PropertyOutcome {
    const NAME: &str = "csv_round_trip";
    let res = match run_scaling_experiment(&siso_spec(2.0, vec![10, 1000], 50, 16)) {
        Ok(r) => r,
        Err(e) => return failed(NAME, e),
    };
    let csv = res.to_csv();
    let parsed: Vec<f64> = csv
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(1).map(str::to_owned).collect::<Vec<_>>())
        .filter_map(|s| s.parse().ok())
        .collect();
    let originals: Vec<f64> = res
        .rows
        .iter()
        .flat_map(|r| {
            [
                r.mean_xi,
                r.ci_halfwidth,
                r.predictor_asymptotic,
                r.predictor_finite_k,
                r.ratio_asymptotic,
                r.ratio_finite_k,
            ]
        })
        .collect();
    let exact =
        parsed.len() == originals.len() && parsed.iter().zip(&originals).all(|(a, b)| a.to_bits() == b.to_bits());
    outcome(
        NAME,
        exact,
        format!("{} CSV values parse back bit-identically: {exact}", originals.len()),
    )
}
