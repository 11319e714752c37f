//! Closed linear equations for the flip-averaged moments `E[m]`, `E[C]`.
//!
//! Between flips `m' = A m` and `C' = A C + (A C)^T`. Averaging the flips at
//! rate `gamma / 2` per site adds `-gamma pi` to the velocity means, `-gamma`
//! times the mixed block `Z` and `-2 gamma` times the off-diagonal part of
//! the velocity block `V`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::MomentState;
use crate::chain::Model;
use crate::harris::check_times;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub dt: f64,
    /// Keep only entries within this circular distance inside each block.
    pub band: Option<usize>,
    /// Repeat the run at `dt / 2` and report the largest difference.
    pub check_halving: bool,
}

impl OdeOptions {
    pub fn for_rate(gamma: f64) -> Self {
        let dt = if gamma > 0.0 { (0.2 / gamma).min(0.05) } else { 0.05 };
        Self {
            dt,
            band: None,
            check_halving: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExpectedOde {
    pub snapshots: Vec<(f64, MomentState)>,
    /// Max-norm difference to the half-step run at the final time.
    pub halving_discrepancy: Option<f64>,
    /// Largest absolute entry dropped by the band truncation.
    pub truncation_max: f64,
}

struct System {
    n: usize,
    model: Model,
    gamma: f64,
    band: Option<usize>,
}

#[inline]
fn circ(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

impl System {
    fn in_band(&self, i: usize, j: usize) -> bool {
        match self.band {
            None => true,
            Some(w) => circ(i % self.n, j % self.n, self.n) <= w,
        }
    }

    /// `A v` on a column of length `2N`.
    fn apply_a(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        match self.model {
            Model::Unpinned => {
                for x in 0..n {
                    let xp = if x + 1 == n { 0 } else { x + 1 };
                    let xm = if x == 0 { n - 1 } else { x - 1 };
                    out[x] = v[n + xp] - v[n + x];
                    out[n + x] = v[x] - v[xm];
                }
            }
            Model::Pinned { nu } => {
                for x in 0..n {
                    let xp = if x + 1 == n { 0 } else { x + 1 };
                    let xm = if x == 0 { n - 1 } else { x - 1 };
                    out[x] = v[n + x];
                    out[n + x] = v[xp] + v[xm] - (2.0 + nu * nu) * v[x];
                }
            }
        }
    }

    /// Right-hand side into `(dm, dc)`; `g` is scratch of size `(2N)^2`.
    fn rhs(&self, m: &[f64], c: &[f64], dm: &mut [f64], dc: &mut [f64], g: &mut [f64]) {
        let n = self.n;
        let d = 2 * n;
        self.apply_a(m, dm);
        for x in 0..n {
            dm[n + x] -= self.gamma * m[n + x];
        }
        for j in 0..d {
            self.apply_a(&c[j * d..(j + 1) * d], &mut g[j * d..(j + 1) * d]);
        }
        // Column-major: entry (i, j) at j * d + i.
        for j in 0..d {
            for i in 0..=j {
                let v = if self.in_band(i, j) {
                    let p_count = (i >= n) as u8 + (j >= n) as u8;
                    let jump = match p_count {
                        0 => 0.0,
                        1 => -self.gamma,
                        _ if i == j => 0.0,
                        _ => -2.0 * self.gamma,
                    };
                    g[j * d + i] + g[i * d + j] + jump * c[j * d + i]
                } else {
                    0.0
                };
                dc[j * d + i] = v;
                dc[i * d + j] = v;
            }
        }
    }

    fn truncate(&self, c: &mut [f64]) -> f64 {
        if self.band.is_none() {
            return 0.0;
        }
        let d = 2 * self.n;
        let mut dropped: f64 = 0.0;
        for j in 0..d {
            for i in 0..d {
                if !self.in_band(i, j) {
                    dropped = dropped.max(c[j * d + i].abs());
                    c[j * d + i] = 0.0;
                }
            }
        }
        dropped
    }
}

fn run(
    sys: &System,
    ms0: &MomentState,
    times: &[f64],
    dt: f64,
) -> (Vec<(f64, MomentState)>, f64) {
    let n = sys.n;
    let d = 2 * n;
    let mut m: Vec<f64> = ms0.mean.iter().copied().collect();
    let mut c: Vec<f64> = ms0.corr.as_slice().to_vec();
    let mut dropped = sys.truncate(&mut c);
    let mut km = [(); 4].map(|_| alloc::vec![0.0; d]);
    let mut kc = [(); 4].map(|_| alloc::vec![0.0; d * d]);
    let mut tm = alloc::vec![0.0; d];
    let mut tc = alloc::vec![0.0; d * d];
    let mut g = alloc::vec![0.0; d * d];
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while now < target {
            let h = (target - now).min(dt);
            // Guard against a sliver step from rounding.
            let h = if target - (now + h) < 1e-12 * dt { target - now } else { h };
            sys.rhs(&m, &c, &mut km[0], &mut kc[0], &mut g);
            for (s, a) in [(1, 0.5 * h), (2, 0.5 * h), (3, h)] {
                let (km_done, km_next) = km.split_at_mut(s);
                let (kc_done, kc_next) = kc.split_at_mut(s);
                for i in 0..d {
                    tm[i] = m[i] + a * km_done[s - 1][i];
                }
                for i in 0..d * d {
                    tc[i] = c[i] + a * kc_done[s - 1][i];
                }
                sys.rhs(&tm, &tc, &mut km_next[0], &mut kc_next[0], &mut g);
            }
            for i in 0..d {
                m[i] += h / 6.0 * (km[0][i] + 2.0 * km[1][i] + 2.0 * km[2][i] + km[3][i]);
            }
            for i in 0..d * d {
                c[i] += h / 6.0 * (kc[0][i] + 2.0 * kc[1][i] + 2.0 * kc[2][i] + kc[3][i]);
            }
            dropped = dropped.max(sys.truncate(&mut c));
            now += h;
        }
        out.push((
            target,
            MomentState {
                mean: DVector::from_column_slice(&m),
                corr: DMatrix::from_column_slice(d, d, &c),
            },
        ));
    }
    (out, dropped)
}

fn validate(gamma: f64, opts: &OdeOptions, times: &[f64]) -> Result<()> {
    if !(opts.dt > 0.0) || !opts.dt.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be positive, got {}", opts.dt)));
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!("flip rate must be nonnegative, got {gamma}")));
    }
    check_times(times, times.last().copied().unwrap_or(0.0))
}

/// Integrates the averaged moment equations with classical RK4 and returns
/// the moments at each of `times` (nondecreasing).
pub fn expected_moment_ode(
    model: Model,
    ms0: &MomentState,
    gamma: f64,
    times: &[f64],
    opts: OdeOptions,
) -> Result<ExpectedOde> {
    validate(gamma, &opts, times)?;
    let sys = System {
        n: ms0.n(),
        model,
        gamma,
        band: opts.band,
    };
    let (snapshots, truncation_max) = run(&sys, ms0, times, opts.dt);
    let halving_discrepancy = if opts.check_halving && !times.is_empty() {
        let last = [*times.last().expect("nonempty")];
        let (fine, _) = run(&sys, ms0, &last, 0.5 * opts.dt);
        let coarse = &snapshots.last().expect("nonempty").1;
        let f = &fine[0].1;
        Some((&f.corr - &coarse.corr).amax().max((&f.mean - &coarse.mean).amax()))
    } else {
        None
    };
    Ok(ExpectedOde {
        snapshots,
        halving_discrepancy,
        truncation_max,
    })
}

/// Time derivative of the averaged moments at `ms`.
pub fn expected_moment_rhs(model: Model, ms: &MomentState, gamma: f64) -> MomentState {
    let sys = System {
        n: ms.n(),
        model,
        gamma,
        band: None,
    };
    let d = 2 * ms.n();
    let m: Vec<f64> = ms.mean.iter().copied().collect();
    let mut dm = alloc::vec![0.0; d];
    let mut dc = alloc::vec![0.0; d * d];
    let mut g = alloc::vec![0.0; d * d];
    sys.rhs(&m, ms.corr.as_slice(), &mut dm, &mut dc, &mut g);
    MomentState {
        mean: DVector::from_vec(dm),
        corr: DMatrix::from_vec(d, d, dc),
    }
}
