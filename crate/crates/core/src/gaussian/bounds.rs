//! Growth bounds on diagonal moments along moment trajectories.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::{gaussian_even_moment, MomentState};

/// Diagonal data of one conditional moment state, all that the bounds need.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMoments {
    pub rho: Vec<f64>,
    pub pi: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl DiagonalMoments {
    pub fn of(ms: &MomentState) -> Self {
        let n = ms.n();
        Self {
            rho: (0..n).map(|y| ms.rho(y)).collect(),
            pi: (0..n).map(|y| ms.pi(y)).collect(),
            u: (0..n).map(|y| ms.u(y)).collect(),
            v: (0..n).map(|y| ms.v(y)).collect(),
        }
    }
}

/// Conditional states of a trajectory ensemble at one time. A single state
/// (the flip-averaged moments) is also accepted; then `E[U_ii^k]` is replaced
/// by `E[U_ii]^k`, which is a lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSlice {
    pub t: f64,
    pub states: Vec<DiagonalMoments>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentBoundRow {
    pub t: f64,
    pub k: u32,
    /// `sum_i E[U_ii^k]`.
    pub u_k: f64,
    /// `sum_i E[V_ii^k]`.
    pub v_k: f64,
    /// `N K^k`, the bound on each of `u_k` and `v_k`.
    pub block_bound: f64,
    /// Upper estimate `(1/N) sum_x E[(p_x^{2k} + r_x^{2k}) / 2]` of the mean
    /// `k`-th energy moment.
    pub energy_moment: f64,
    /// `(2 K k)^k`.
    pub energy_bound: f64,
    pub passed: bool,
}

impl MomentBoundRow {
    /// Smallest relative slack among the checked inequalities.
    pub fn margin(&self) -> f64 {
        let a = 1.0 - self.u_k / self.block_bound;
        let b = 1.0 - self.v_k / self.block_bound;
        let c = 1.0 - self.energy_moment / self.energy_bound;
        a.min(b).min(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentBoundReport {
    pub rows: Vec<MomentBoundRow>,
    pub passed: bool,
}

impl MomentBoundReport {
    pub fn worst_margin(&self) -> f64 {
        self.rows
            .iter()
            .map(MomentBoundRow::margin)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Checks `u_k <= N K^k`, `v_k <= N K^k` and the energy moment bound for
/// `k = 1..=k_max` at every slice, where `K` bounds the initial diagonal.
pub fn verify_moment_bounds(slices: &[TimeSlice], k_max: u32, big_k: f64) -> MomentBoundReport {
    let mut rows = Vec::new();
    for slice in slices {
        let count = slice.states.len().max(1) as f64;
        let n = slice.states.first().map_or(0, |s| s.u.len());
        for k in 1..=k_max {
            let ki = k as i32;
            let (mut u_k, mut v_k, mut energy) = (0.0, 0.0, 0.0);
            for s in &slice.states {
                for y in 0..n {
                    u_k += s.u[y].powi(ki);
                    v_k += s.v[y].powi(ki);
                    let vp = (s.v[y] - s.pi[y] * s.pi[y]).max(0.0);
                    let vr = (s.u[y] - s.rho[y] * s.rho[y]).max(0.0);
                    energy += 0.5
                        * (gaussian_even_moment(s.pi[y], vp, k)
                            + gaussian_even_moment(s.rho[y], vr, k));
                }
            }
            u_k /= count;
            v_k /= count;
            energy /= count * n.max(1) as f64;
            let block_bound = n as f64 * big_k.powi(ki);
            let energy_bound = (2.0 * big_k * k as f64).powi(ki);
            let passed = u_k <= block_bound && v_k <= block_bound && energy <= energy_bound;
            rows.push(MomentBoundRow {
                t: slice.t,
                k,
                u_k,
                v_k,
                block_bound,
                energy_moment: energy,
                energy_bound,
                passed,
            });
        }
    }
    let passed = rows.iter().all(|r| r.passed);
    MomentBoundReport { rows, passed }
}
