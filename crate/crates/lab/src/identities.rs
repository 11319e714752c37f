//! Exact identities and pathwise invariants, each reported with its margin.

use rand::Rng;
use rayon::prelude::*;

use vflip_core::chain::{fd_residual, ChainState, Model};
use vflip_core::gaussian::{
    simulate_moments_with, verify_moment_bounds, DiagonalMoments, MixtureSpec, MomentBoundReport, MomentState,
    TimeSlice,
};
use vflip_core::seeds::{stream, Purpose};
use vflip_core::spectral::Propagator;
use vflip_core::thermo::{
    averages_from_potentials, log_partition_product, potentials_from_averages, thermodynamic_entropy, GibbsParams,
    StateAverages,
};

use crate::error::LabResult;
use crate::output::CheckResult;

/// Largest residual of the two fluctuation-dissipation identities over
/// `states` random states of a chain of `n` sites, for each flip rate.
pub fn fd_residual_max(states: usize, n: usize, gammas: &[f64], seed: u64) -> LabResult<f64> {
    let worst = (0..states)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, 1, i as u64, Purpose::Auxiliary);
            let scale = rng.random_range(0.2..3.0);
            let r = (0..n).map(|_| scale * rng.random_range(-2.0..2.0)).collect();
            let p = (0..n).map(|_| scale * rng.random_range(-2.0..2.0)).collect();
            let s = ChainState::new(Model::Unpinned, r, p)?;
            let x = rng.random_range(0..n);
            let mut m: f64 = 0.0;
            for &g in gammas {
                let (a, b) = fd_residual(&s, x, g)?;
                m = m.max(a.abs()).max(b.abs());
            }
            Ok(m)
        })
        .collect::<LabResult<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Worst relative errors of the potential/average bijection, of the
/// Fenchel identity `-S(e, r) + log Z = -(beta e + lambda r)` and of the
/// entropy gradient against `(beta, lambda)`, at `pairs` random points.
pub fn duality_errors(pairs: usize, seed: u64) -> LabResult<(f64, f64, f64)> {
    let (mut bij, mut fen, mut grad): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..pairs {
        let mut rng = stream(seed, 2, i as u64, Purpose::Auxiliary);
        let p = GibbsParams::new(rng.random_range(0.05..5.0), rng.random_range(-3.0..3.0))?;
        let a = averages_from_potentials(p)?;
        let back = potentials_from_averages(a)?;
        bij = bij
            .max((back.beta - p.beta).abs() / p.beta.max(1.0))
            .max((back.lambda - p.lambda).abs() / p.lambda.abs().max(1.0));

        let lhs = -thermodynamic_entropy(a)? + log_partition_product(p)?;
        let rhs = -(p.beta * a.e + p.lambda * a.r);
        fen = fen.max((lhs - rhs).abs() / rhs.abs().max(1.0));

        let s = |e: f64, r: f64| thermodynamic_entropy(StateAverages { e, r });
        let h = 1e-6 * a.temperature();
        let de = (s(a.e + h, a.r)? - s(a.e - h, a.r)?) / (2.0 * h);
        let dr = (s(a.e, a.r + h)? - s(a.e, a.r - h)?) / (2.0 * h);
        grad = grad
            .max((de - p.beta).abs() / p.beta.max(1.0))
            .max((dr - p.lambda).abs() / p.lambda.abs().max(1.0));
    }
    Ok((bij, fen, grad))
}

/// Pathwise invariants of conditional moment trajectories.
#[derive(Debug, Clone)]
pub struct MomentPathReport {
    /// Largest `|Tr(C_t^k) - Tr(C_0^k)| / |Tr(C_0^k)|` over `k <= 3`.
    pub trace_drift: f64,
    /// Smallest eigenvalue of any covariance `C - m m^T`.
    pub min_cov_eigenvalue: f64,
    /// Largest `pi_y^2 - V_yy` and `rho_y^2 - U_yy`, relative to the diagonal.
    pub mean_square_excess: f64,
    /// Flip-averaged diagonal moments at each time.
    pub averages: Vec<(f64, DiagonalMoments)>,
    pub slices: Vec<TimeSlice>,
}

/// Where the members of a moment ensemble start.
pub enum MomentStart<'a> {
    Point(&'a MomentState),
    Mixture(&'a MixtureSpec),
}

/// Runs `members` conditional moment trajectories sampled at `times`
/// (microscopic) and collects their invariants.
pub fn moment_paths(
    prop: &Propagator,
    start: MomentStart<'_>,
    gamma: f64,
    times: &[f64],
    members: usize,
    seed: u64,
) -> LabResult<MomentPathReport> {
    let n = prop.n();
    let label = n as u64 ^ (2 << 40);
    let runs: Vec<(f64, f64, f64, Vec<DiagonalMoments>)> = (0..members)
        .into_par_iter()
        .map(|m| {
            let ms0 = match &start {
                MomentStart::Point(ms) => (*ms).clone(),
                MomentStart::Mixture(mix) => mix
                    .sample(&mut stream(seed, label, m as u64, Purpose::Mixture))?
                    .into_state(),
            };
            let t0: Vec<f64> = (1..=3).map(|k| ms0.trace_power(k)).collect();
            let mut clock = stream(seed, label, m as u64, Purpose::FlipClock);
            let (mut drift, mut eig, mut excess): (f64, f64, f64) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
            let mut diag = Vec::with_capacity(times.len());
            simulate_moments_with(prop, &ms0, gamma, times, &mut clock, false, |_, ms, ev| {
                if ev.is_some() {
                    return;
                }
                for k in 1..=3 {
                    let t = ms.trace_power(k);
                    drift = drift.max((t - t0[k as usize - 1]).abs() / t0[k as usize - 1].abs());
                }
                eig = eig.min(ms.min_cov_eigenvalue());
                for y in 0..n {
                    let (u, v) = (ms.u(y), ms.v(y));
                    excess = excess.max((ms.pi(y).powi(2) - v) / v.abs().max(1.0));
                    excess = excess.max((ms.rho(y).powi(2) - u) / u.abs().max(1.0));
                }
                diag.push(DiagonalMoments::of(ms));
            })?;
            Ok((drift, eig, excess, diag))
        })
        .collect::<LabResult<_>>()?;

    let mut report = MomentPathReport {
        trace_drift: 0.0,
        min_cov_eigenvalue: f64::INFINITY,
        mean_square_excess: f64::NEG_INFINITY,
        averages: Vec::new(),
        slices: times
            .iter()
            .map(|&t| TimeSlice {
                t,
                states: Vec::with_capacity(members),
            })
            .collect(),
    };
    for (drift, eig, excess, diag) in runs {
        report.trace_drift = report.trace_drift.max(drift);
        report.min_cov_eigenvalue = report.min_cov_eigenvalue.min(eig);
        report.mean_square_excess = report.mean_square_excess.max(excess);
        for (slice, d) in report.slices.iter_mut().zip(diag) {
            slice.states.push(d);
        }
    }
    let w = 1.0 / members.max(1) as f64;
    report.averages = report
        .slices
        .iter()
        .map(|s| {
            let mut avg = DiagonalMoments {
                rho: vec![0.0; n],
                pi: vec![0.0; n],
                u: vec![0.0; n],
                v: vec![0.0; n],
            };
            for d in &s.states {
                for y in 0..n {
                    avg.rho[y] += w * d.rho[y];
                    avg.pi[y] += w * d.pi[y];
                    avg.u[y] += w * d.u[y];
                    avg.v[y] += w * d.v[y];
                }
            }
            (s.t, avg)
        })
        .collect();
    Ok(report)
}

/// Moment bounds for slices started from a mixture: `N int K^k d sigma`
/// for each block and `(2k)^k int K^k d sigma` for the energy moment.
pub fn mixture_moment_bounds(slices: &[TimeSlice], k_max: u32, mix: &MixtureSpec) -> MomentBoundReport {
    let mut report = verify_moment_bounds(slices, k_max, 1.0);
    for row in &mut report.rows {
        let w = mix.k_moment(row.k);
        row.block_bound *= w;
        row.energy_bound *= w;
        row.passed = row.u_k <= row.block_bound && row.v_k <= row.block_bound && row.energy_moment <= row.energy_bound;
    }
    report.passed = report.rows.iter().all(|r| r.passed);
    report
}

/// Largest `(u_k + v_k) / (N K^k)` over the report, the literal form of the
/// bound as a single sum.
pub fn summed_bound_ratio(report: &MomentBoundReport) -> f64 {
    report
        .rows
        .iter()
        .map(|r| (r.u_k + r.v_k) / r.block_bound)
        .fold(0.0, f64::max)
}

/// The standard checks on a moment path report.
pub fn moment_path_checks(prefix: &str, r: &MomentPathReport) -> Vec<CheckResult> {
    vec![
        CheckResult::at_most(format!("{prefix}trace_drift"), r.trace_drift, 1e-8),
        CheckResult::at_least(format!("{prefix}min_cov_eigenvalue"), r.min_cov_eigenvalue, -1e-10),
        CheckResult::at_most(format!("{prefix}mean_square_excess"), r.mean_square_excess, 1e-12),
    ]
}
