//! Sum-rate computations at a fixed normalized power budget.
//!
//! * [`sum_capacity_dpc`]: exact broadcast sum capacity through the dual
//!   multiple-access channel, solved by sum-power iterative waterfilling.
//! * [`capacity_upper_bound`]: the single-gain trace bound
//!   `M log2(1 + q/M * gamma_hat)`.
//! * [`capacity_lower_bound`]: zero-forcing DPC over greedily scheduled
//!   antenna rows with equal power per stream.

use std::f64::consts::LN_2;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix_kernel::{
    hermitian_eigenvalues, hermitize, logdet_i_plus_unchecked, project_out, vec_norm_sq, ComplexMatrix, C64,
    RESIDUAL_FLOOR,
};
use crate::system_model::ChannelSet;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 2000;

const PENALTY_SLACK: f64 = 1e-9;

/// Outcome of the dual-MAC sum-capacity solver.
#[derive(Debug, Clone)]
pub struct CapacityResult {
    /// `log2 |I + sum_k H_k^H Q_k H_k|` at the returned covariances.
    pub rate_bits: f64,
    /// Dual-uplink covariances `Q_k`, each `N x N`.
    pub covariances: Vec<ComplexMatrix>,
    pub iterations: usize,
    /// False when `max_iter` was reached with the objective still moving.
    pub converged: bool,
    /// Upper bound on `optimum - rate_bits` at the returned point.
    pub duality_gap: f64,
    /// Objective after every iteration, starting with the initial point;
    /// later entries add each step's gain to the first.
    pub objective_trace: Vec<f64>,
}

/// A point on the sum-capacity curve from the penalized solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PenalizedResult {
    /// Total power the solution uses.
    pub power: f64,
    /// Sum capacity at `power`, in bits.
    pub rate_bits: f64,
    pub sweeps: usize,
    /// Bound on the penalized suboptimality, in bits.
    pub duality_gap: f64,
    pub converged: bool,
}

/// Greedy zero-forcing DPC schedule over antenna rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfdpcSelection {
    /// `(user, antenna row)` in selection order.
    pub selected: Vec<(usize, usize)>,
    /// Effective gains `d_kk^2`, nonincreasing.
    pub gains: Vec<f64>,
}

impl ZfdpcSelection {
    /// The last (smallest) effective gain `d_MM^2`.
    pub fn min_gain(&self) -> f64 {
        self.gains.last().copied().unwrap_or(0.0)
    }
}

/// Largest scalar gain `max_k |H_k|^2` of a single-antenna channel set.
pub fn siso_best_gain(channels: &ChannelSet) -> Result<f64> {
    if channels.tx_antennas() != 1 || channels.rx_antennas() != 1 {
        return Err(Error::Shape(format!(
            "siso_best_gain needs M = N = 1, got M = {}, N = {}",
            channels.tx_antennas(),
            channels.rx_antennas()
        )));
    }
    Ok(channels
        .matrices()
        .iter()
        .map(|h| h.get(0, 0).norm_sqr())
        .fold(0.0, f64::max))
}

/// Largest squared row norm `max_{i,j} g_j^i (g_j^i)^H` over all antenna rows.
pub fn max_row_gain(channels: &ChannelSet) -> f64 {
    channels.rows().map(|(_, _, g)| vec_norm_sq(&g)).fold(0.0, f64::max)
}

/// Largest per-user eigen-gain `max_k lambda_max(H_k H_k^H)`.
///
/// Satisfies `tr(H_k^H Q_k H_k) <= lambda_max(H_k H_k^H) tr(Q_k)`; it equals
/// [`max_row_gain`] when `N = 1` and dominates it otherwise.
pub fn max_eigen_gain(channels: &ChannelSet) -> f64 {
    channels
        .matrices()
        .iter()
        .map(|h| user_eigen_gain(h.as_matrix()))
        .fold(0.0, f64::max)
}

pub(crate) fn user_eigen_gain(h: &DMatrix<C64>) -> f64 {
    let g = if h.nrows() <= h.ncols() {
        h * h.adjoint()
    } else {
        h.adjoint() * h
    };
    hermitian_eigenvalues(&hermitize(&g)).into_iter().fold(0.0, f64::max)
}

/// Trace upper bound `M log2(1 + (q/M) gamma_hat)` with
/// `gamma_hat = max_eigen_gain`.
pub fn capacity_upper_bound(channels: &ChannelSet, q_total: f64) -> Result<f64> {
    check_power(q_total)?;
    let m = channels.tx_antennas() as f64;
    Ok(m * (q_total / m * max_eigen_gain(channels)).ln_1p() / LN_2)
}

fn check_power(q: f64) -> Result<()> {
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::Domain {
            func: "power budget",
            value: q,
        });
    }
    Ok(())
}

/// Greedy antenna-row schedule for zero-forcing DPC.
///
/// At each step the row with the largest residual after projecting out the
/// previously selected rows is chosen; ties go to the lowest
/// `(user, antenna)` index.
pub fn zfdpc_greedy(channels: &ChannelSet) -> Result<ZfdpcSelection> {
    let m = channels.tx_antennas();
    let mut rows: Vec<((usize, usize), Vec<C64>)> = channels.rows().map(|(k, j, g)| ((k, j), g)).collect();
    if rows.len() < m {
        return Err(Error::RankDeficient {
            needed: m,
            found: rows.len(),
        });
    }

    let mut selected = Vec::with_capacity(m);
    let mut gains = Vec::with_capacity(m);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m);
    for step in 0..m {
        let mut best: Option<(usize, f64)> = None;
        for (i, (_, r)) in rows.iter().enumerate() {
            let n = vec_norm_sq(r);
            if best.is_none_or(|(_, b)| n > b) {
                best = Some((i, n));
            }
        }
        let (idx, _) = best.expect("rows is nonempty");
        let (id, mut r) = rows.swap_remove(idx);
        // re-orthogonalize the winner against the full basis
        for b in &basis {
            project_out(&mut r, b);
        }
        let gain = vec_norm_sq(&r);
        if gain < RESIDUAL_FLOOR {
            return Err(Error::RankDeficient { needed: m, found: step });
        }
        let inv = 1.0 / gain.sqrt();
        let unit: Vec<C64> = r.iter().map(|z| z * inv).collect();
        for (_, other) in rows.iter_mut() {
            project_out(other, &unit);
        }
        // swap_remove breaks index order; restore it for tie-breaking
        rows.sort_by_key(|(id, _)| *id);
        basis.push(unit);
        selected.push(id);
        gains.push(gain);
    }
    Ok(ZfdpcSelection { selected, gains })
}

/// ZF-DPC lower bounds with equal power `q/M` per stream:
/// `(sum_k log2(1 + q/M d_kk^2), M log2(1 + q/M d_MM^2))`.
pub fn capacity_lower_bound(channels: &ChannelSet, q_total: f64) -> Result<(f64, f64)> {
    check_power(q_total)?;
    let sel = zfdpc_greedy(channels)?;
    Ok(lower_bound_from_gains(&sel.gains, q_total))
}

pub fn lower_bound_from_gains(gains: &[f64], q_total: f64) -> (f64, f64) {
    let m = gains.len() as f64;
    let per_stream = q_total / m;
    let sum_form = gains.iter().map(|d| (per_stream * d).ln_1p()).sum::<f64>() / LN_2;
    let d_min = gains.last().copied().unwrap_or(0.0);
    let min_form = m * (per_stream * d_min).ln_1p() / LN_2;
    (sum_form, min_form)
}

/// Exact sum capacity of the broadcast channel at normalized power
/// `q_total`, via the dual MAC.
///
/// Non-convergence within `max_iter` is reported through
/// [`CapacityResult::converged`], not as an error.
pub fn sum_capacity_dpc(channels: &ChannelSet, q_total: f64, tol: f64, max_iter: usize) -> Result<CapacityResult> {
    check_power(q_total)?;
    if !(tol > 0.0) {
        return Err(Error::Domain {
            func: "sum_capacity_dpc tolerance",
            value: tol,
        });
    }
    Ok(DualMacSolver::new(channels).solve(q_total, tol, max_iter))
}

/// Sum-power iterative waterfilling on the dual MAC.
///
/// Each iteration waterfills every user simultaneously against the others'
/// current covariances under one global water level, then moves toward that
/// point by an exact line search over the step in `[0, 1]`. The objective is
/// concave, so the sequence is nondecreasing. The trace accumulates each
/// step's gain `log2|I + theta S^-1 D|`, evaluated from the eigenvalues of
/// `S^-1 D` so that gains far below the objective's rounding level keep
/// their sign; a negative gain ends the iteration. It stops when the
/// first-order duality gap `q * max_k lambda_max(grad_k) - sum_k tr(Q_k grad_k)`
/// (an upper bound on the distance to the optimum) drops below `tol`, or when
/// the waterfilling direction is no longer an ascent direction.
#[derive(Debug, Clone)]
pub(crate) struct DualMacSolver {
    h: Vec<DMatrix<C64>>,
    h_adj: Vec<DMatrix<C64>>,
    m: usize,
    n: usize,
    /// Last solution, for warm starts.
    last: Option<(f64, Vec<DMatrix<C64>>)>,
}

impl DualMacSolver {
    pub(crate) fn new(channels: &ChannelSet) -> Self {
        let h: Vec<DMatrix<C64>> = channels.matrices().iter().map(|h| h.as_matrix().clone()).collect();
        let h_adj = h.iter().map(|h| h.adjoint()).collect();
        DualMacSolver {
            h,
            h_adj,
            m: channels.tx_antennas(),
            n: channels.rx_antennas(),
            last: None,
        }
    }

    fn users(&self) -> usize {
        self.h.len()
    }

    /// `sum_k H_k^H Q_k H_k`.
    fn aggregate(&self, covs: &[DMatrix<C64>]) -> DMatrix<C64> {
        let mut acc = DMatrix::<C64>::zeros(self.m, self.m);
        for ((h, ha), q) in self.h.iter().zip(&self.h_adj).zip(covs) {
            acc += ha * q * h;
        }
        hermitize(&acc)
    }

    /// Warm-started solve: reuses the previous solution scaled to the new
    /// budget when one exists.
    pub(crate) fn solve(&mut self, q_total: f64, tol: f64, max_iter: usize) -> CapacityResult {
        let k = self.users();
        let init = match &self.last {
            Some((q_prev, covs)) if *q_prev > 0.0 && q_total > 0.0 => {
                let s = C64::new(q_total / q_prev, 0.0);
                covs.iter().map(|c| c * s).collect()
            }
            _ => {
                let share = C64::new(q_total / (k * self.n) as f64, 0.0);
                vec![DMatrix::<C64>::identity(self.n, self.n) * share; k]
            }
        };
        let result = self.run(init, q_total, tol, max_iter);
        self.last = Some((
            q_total,
            result.covariances.iter().map(|c| c.as_matrix().clone()).collect(),
        ));
        result
    }

    fn run(&self, mut covs: Vec<DMatrix<C64>>, q_total: f64, tol: f64, max_iter: usize) -> CapacityResult {
        let mut agg = self.aggregate(&covs);
        let mut obj = logdet_i_plus_unchecked(&agg);
        let mut trace = vec![obj];
        let mut iterations = 0;
        let mut gap = f64::INFINITY;
        let mut converged = q_total == 0.0;
        if converged {
            gap = 0.0;
        }

        while !converged && iterations < max_iter {
            let s = DMatrix::<C64>::identity(self.m, self.m) + &agg;
            gap = self.duality_gap(&s, &covs, q_total);
            if gap <= tol {
                converged = true;
                break;
            }
            iterations += 1;

            let mut target = self.waterfill_step(&s, &covs, q_total);
            let mut dir = hermitize(&(&self.aggregate(&target) - &agg));
            let mut step = exact_step(&s, &dir);
            if step.is_none() {
                // the waterfilling point is not always an ascent direction;
                // the conditional-gradient vertex is, whenever the gap is positive
                target = self.vertex_step(&s, q_total);
                dir = hermitize(&(&self.aggregate(&target) - &agg));
                step = exact_step(&s, &dir);
            }
            let Some(theta) = step else {
                break;
            };
            let t = C64::new(theta, 0.0);
            let candidate: Vec<_> = covs
                .iter()
                .zip(&target)
                .map(|(c, tgt)| hermitize(&(c + (tgt - c) * t)))
                .collect();
            let gain = step_gain(&s, &dir, theta);
            if !(gain >= 0.0) {
                break;
            }
            covs = candidate;
            agg = self.aggregate(&covs);
            obj += gain;
            trace.push(obj);
        }
        if !converged {
            let s = DMatrix::<C64>::identity(self.m, self.m) + &agg;
            gap = self.duality_gap(&s, &covs, q_total);
            converged = gap <= tol;
        }

        CapacityResult {
            rate_bits: logdet_i_plus_unchecked(&agg).max(0.0),
            covariances: covs.into_iter().map(ComplexMatrix::from_matrix_unchecked).collect(),
            iterations,
            converged,
            duality_gap: gap.max(0.0),
            objective_trace: trace,
        }
    }

    /// Solves `S x = b` for Hermitian positive definite `S`.
    fn solve_hpd(s: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
        match Cholesky::new(s.clone()) {
            Some(ch) => ch.solve(b),
            None => s.clone().try_inverse().expect("I + PSD is invertible") * b,
        }
    }

    fn duality_gap(&self, s: &DMatrix<C64>, covs: &[DMatrix<C64>], q_total: f64) -> f64 {
        let (inner, max_eig) = self.gradient_summary(s, covs);
        ((q_total * max_eig - inner) / LN_2).max(0.0)
    }

    /// `(sum_k tr(Q_k grad_k), max_k lambda_max(grad_k))` with
    /// `grad_k = H_k S^-1 H_k^H`.
    fn gradient_summary(&self, s: &DMatrix<C64>, covs: &[DMatrix<C64>]) -> (f64, f64) {
        let mut max_eig = 0.0f64;
        let mut inner = 0.0;
        for ((h, ha), q) in self.h.iter().zip(&self.h_adj).zip(covs) {
            let grad = hermitize(&(h * Self::solve_hpd(s, ha)));
            max_eig = max_eig.max(hermitian_eigenvalues(&grad).into_iter().fold(0.0, f64::max));
            inner += (q * &grad).trace().re;
        }
        (inner, max_eig)
    }

    /// Block-coordinate ascent on `ln|I + sum_k H_k^H Q_k H_k| - mu sum_k tr Q_k`.
    ///
    /// Each block update waterfills one user against the others at the fixed
    /// level `1/mu`, which maximizes the penalized objective over that block
    /// exactly, so the penalized objective never decreases. With
    /// `grad_k = H_k S^-1 H_k^H`, the optimum satisfies `grad_k <= mu I` and
    /// `tr(Q_k (mu I - grad_k)) = 0`; once the first holds (to a relative
    /// `1e-9`), the second summed over users bounds the distance to the
    /// optimal penalized value. Sweeps stop when that bound is at most `tol`
    /// bits.
    pub(crate) fn solve_penalized(&mut self, mu: f64, tol: f64, max_sweeps: usize) -> PenalizedResult {
        let mut covs = match self.last.take() {
            Some((_, covs)) => covs,
            None => vec![DMatrix::<C64>::zeros(self.n, self.n); self.users()],
        };
        let eye = DMatrix::<C64>::identity(self.m, self.m);
        let mut s = &eye + self.aggregate(&covs);
        let mut sweeps = 0;
        let mut gap;
        let mut settled;
        loop {
            let power: f64 = covs.iter().map(|c| c.trace().re).sum();
            let (inner, slope) = self.gradient_summary(&s, &covs);
            gap = ((mu * power - inner) / LN_2).max(0.0);
            settled = gap <= tol && slope <= mu * (1.0 + PENALTY_SLACK);
            if settled || sweeps >= max_sweeps {
                break;
            }
            sweeps += 1;
            for ((h, ha), cov) in self.h.iter().zip(&self.h_adj).zip(covs.iter_mut()) {
                let z = hermitize(&(&s - ha * &*cov * h));
                let eig = SymmetricEigen::new(hermitize(&(h * Self::solve_hpd(&z, ha))));
                let d = nalgebra::DVector::from_iterator(
                    self.n,
                    eig.eigenvalues.iter().map(|&l| {
                        let p = if l > mu { 1.0 / mu - 1.0 / l } else { 0.0 };
                        C64::new(p, 0.0)
                    }),
                );
                let u = &eig.eigenvectors;
                *cov = hermitize(&(u * DMatrix::from_diagonal(&d) * u.adjoint()));
                s = hermitize(&(z + ha * &*cov * h));
            }
        }
        let power: f64 = covs.iter().map(|c| c.trace().re).sum();
        let rate_bits = logdet_i_plus_unchecked(&(&s - &eye)).max(0.0);
        self.last = Some((power, covs));
        PenalizedResult {
            power,
            rate_bits,
            sweeps,
            duality_gap: gap,
            converged: settled,
        }
    }

    /// All power on the top eigenvector of the steepest user's gradient
    /// `H_k S^-1 H_k^H`.
    fn vertex_step(&self, s: &DMatrix<C64>, q_total: f64) -> Vec<DMatrix<C64>> {
        let mut best: Option<(usize, f64, nalgebra::DVector<C64>)> = None;
        for (i, (h, ha)) in self.h.iter().zip(&self.h_adj).enumerate() {
            let eig = SymmetricEigen::new(hermitize(&(h * Self::solve_hpd(s, ha))));
            let (j, lmax) = eig
                .eigenvalues
                .iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (j, l)| if l > acc.1 { (j, l) } else { acc },
                );
            if best.as_ref().is_none_or(|b| lmax > b.1) {
                best = Some((i, lmax, eig.eigenvectors.column(j).into_owned()));
            }
        }
        let (user, _, v) = best.expect("at least one user");
        let mut out = vec![DMatrix::<C64>::zeros(self.n, self.n); self.users()];
        out[user] = &v * v.adjoint() * C64::new(q_total, 0.0);
        out
    }

    /// Simultaneous waterfilling of all users against the interference of the
    /// others, under a common water level.
    fn waterfill_step(&self, s: &DMatrix<C64>, covs: &[DMatrix<C64>], q_total: f64) -> Vec<DMatrix<C64>> {
        let mut modes: Vec<(Vec<f64>, DMatrix<C64>)> = Vec::with_capacity(self.users());
        for ((h, ha), q) in self.h.iter().zip(&self.h_adj).zip(covs) {
            let z = hermitize(&(s - ha * q * h));
            let g = hermitize(&(h * Self::solve_hpd(&z, ha)));
            let eig = SymmetricEigen::new(g);
            modes.push((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors));
        }
        let gains: Vec<f64> = modes.iter().flat_map(|(l, _)| l.iter().copied()).collect();
        let powers = waterfill(&gains, q_total);
        let mut offset = 0;
        modes
            .into_iter()
            .map(|(l, u)| {
                let p = &powers[offset..offset + l.len()];
                offset += l.len();
                let d = DMatrix::<C64>::from_diagonal(&nalgebra::DVector::from_iterator(
                    p.len(),
                    p.iter().map(|&x| C64::new(x, 0.0)),
                ));
                hermitize(&(&u * d * u.adjoint()))
            })
            .collect()
    }
}

/// Maximizer over `[0, 1]` of the concave `theta -> ln|S + theta D|`, found
/// from the derivative `tr((S + theta D)^-1 D)` by safeguarded Newton steps.
/// Returns `None` when the slope at zero is not positive.
fn exact_step(s: &DMatrix<C64>, d: &DMatrix<C64>) -> Option<f64> {
    let slope = |theta: f64| {
        let y = DualMacSolver::solve_hpd(&hermitize(&(s + d * C64::new(theta, 0.0))), d);
        let first = y.trace().re;
        let second = -(&y * &y).trace().re;
        (first, second)
    };
    let (d0, _) = slope(0.0);
    if !(d0 > 0.0) {
        return None;
    }
    let (d1, _) = slope(1.0);
    if d1 >= 0.0 {
        return Some(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut theta = 0.5;
    for _ in 0..100 {
        let (g, h) = slope(theta);
        if g > 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let newton = if h < 0.0 { theta - g / h } else { f64::NAN };
        theta = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 || g.abs() <= 1e-16 * d0 {
            break;
        }
    }
    Some(theta)
}

/// `log2|S + theta D| - log2|S|` in bits, through the eigenvalues of
/// `L^-1 D L^-H` with `S = L L^H`.
fn step_gain(s: &DMatrix<C64>, d: &DMatrix<C64>, theta: f64) -> f64 {
    let Some(ch) = Cholesky::new(s.clone()) else {
        return f64::NAN;
    };
    let l = ch.l();
    let Some(left) = l.solve_lower_triangular(d) else {
        return f64::NAN;
    };
    let Some(both) = l.solve_lower_triangular(&left.adjoint()) else {
        return f64::NAN;
    };
    hermitian_eigenvalues(&hermitize(&both))
        .into_iter()
        .map(|mu| (theta * mu).ln_1p())
        .sum::<f64>()
        / LN_2
}

/// Classic waterfilling: `p_i = (mu - 1/g_i)^+` with `sum p_i = budget`.
pub(crate) fn waterfill(gains: &[f64], budget: f64) -> Vec<f64> {
    let g_max = gains.iter().copied().fold(0.0, f64::max);
    if budget <= 0.0 || g_max <= 0.0 {
        return vec![0.0; gains.len()];
    }
    let floor = g_max * 1e-14;
    let mut levels: Vec<f64> = gains.iter().filter(|&&g| g > floor).map(|g| 1.0 / g).collect();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("finite levels"));
    let mut mu = 0.0;
    let mut acc = 0.0;
    for (j, &lvl) in levels.iter().enumerate() {
        acc += lvl;
        mu = (budget + acc) / (j + 1) as f64;
        if levels.get(j + 1).is_none_or(|&next| mu <= next) {
            break;
        }
    }
    gains
        .iter()
        .map(|&g| if g > floor { (mu - 1.0 / g).max(0.0) } else { 0.0 })
        .collect()
}

impl ComplexMatrix {
    pub(crate) fn from_matrix_unchecked(m: DMatrix<C64>) -> Self {
        ComplexMatrix::from_matrix(m).expect("solver produced finite covariances")
    }
}
