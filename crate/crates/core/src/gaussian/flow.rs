use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use super::MomentState;
use crate::harris::{check_times, FlipClock, FlipEvent, FlipSequence};
use crate::spectral::Propagator;
use crate::{Error, Result};

/// `m -> P m`, `C -> P C P^T` with the dense real propagator `P`.
pub fn moment_free_flow(prop: &Propagator, ms: &MomentState, dt: f64) -> Result<MomentState> {
    if ms.n() != prop.n() {
        return Err(Error::DimensionMismatch {
            expected: prop.n(),
            found: ms.n(),
        });
    }
    let p = prop.dense(dt);
    let corr = &p * &ms.corr * p.transpose();
    Ok(MomentState {
        mean: &p * &ms.mean,
        corr: symmetrize(corr),
    })
}

fn symmetrize(mut c: DMatrix<f64>) -> DMatrix<f64> {
    let d = c.nrows();
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Effect of reversing the velocity at site `k`: `pi_k`, row and column
/// `N + k` of `C` change sign; the diagonal is untouched.
pub fn moment_flip(ms: &MomentState, k: usize) -> Result<MomentState> {
    let n = ms.n();
    if k >= n {
        return Err(Error::SiteOutOfRange { site: k, len: n });
    }
    let mut out = ms.clone();
    let s = n + k;
    out.mean[s] = -out.mean[s];
    for j in 0..2 * n {
        if j != s {
            out.corr[(s, j)] = -out.corr[(s, j)];
            out.corr[(j, s)] = -out.corr[(j, s)];
        }
    }
    Ok(out)
}

/// Moments held in Fourier space, `m_hat = W m`, `C_hat = W C W^*`, where `W`
/// applies the transform to the `r` and `p` blocks separately. The flow acts
/// mode by mode and a flip is a rank-one correction, so both cost `O(N^2)`.
#[derive(Debug, Clone)]
pub struct SpectralMoments<'a> {
    prop: &'a Propagator,
    mean: Vec<Complex64>,
    /// Row-major `2N x 2N`, index `(a N + k, b N + l)`.
    corr: Vec<Complex64>,
}

impl<'a> SpectralMoments<'a> {
    pub fn new(prop: &'a Propagator, ms: &MomentState) -> Result<Self> {
        let n = prop.n();
        if ms.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: ms.n(),
            });
        }
        let d = 2 * n;
        let mut mean = alloc::vec![Complex64::new(0.0, 0.0); d];
        for a in 0..2 {
            for k in 0..n {
                mean[a * n + k] = (0..n)
                    .map(|j| prop.w(j * k).conj() * ms.mean[a * n + j])
                    .sum();
            }
        }
        // T = W C, then C_hat = T W^*.
        let mut t = alloc::vec![Complex64::new(0.0, 0.0); d * d];
        for a in 0..2 {
            for k in 0..n {
                for col in 0..d {
                    t[(a * n + k) * d + col] = (0..n)
                        .map(|i| prop.w(i * k).conj() * ms.corr[(a * n + i, col)])
                        .sum();
                }
            }
        }
        let mut corr = alloc::vec![Complex64::new(0.0, 0.0); d * d];
        for row in 0..d {
            for b in 0..2 {
                for l in 0..n {
                    corr[row * d + b * n + l] =
                        (0..n).map(|j| t[row * d + b * n + j] * prop.w(j * l)).sum();
                }
            }
        }
        Ok(Self { prop, mean, corr })
    }

    pub fn advance(&mut self, dt: f64) {
        let n = self.prop.n();
        let d = 2 * n;
        let mats: Vec<[[Complex64; 2]; 2]> = (0..n).map(|k| self.prop.mode_matrix(k, dt)).collect();
        for (k, m) in mats.iter().enumerate() {
            let (x, p) = (self.mean[k], self.mean[n + k]);
            self.mean[k] = m[0][0] * x + m[0][1] * p;
            self.mean[n + k] = m[1][0] * x + m[1][1] * p;
        }
        let c = &mut self.corr;
        for (k, m) in mats.iter().enumerate() {
            let (r0, r1) = (k * d, (n + k) * d);
            for col in 0..d {
                let (x, p) = (c[r0 + col], c[r1 + col]);
                c[r0 + col] = m[0][0] * x + m[0][1] * p;
                c[r1 + col] = m[1][0] * x + m[1][1] * p;
            }
        }
        for row in 0..d {
            let base = row * d;
            for (l, m) in mats.iter().enumerate() {
                let (x, p) = (c[base + l], c[base + n + l]);
                c[base + l] = x * m[0][0].conj() + p * m[0][1].conj();
                c[base + n + l] = x * m[1][0].conj() + p * m[1][1].conj();
            }
        }
    }

    pub fn flip(&mut self, x: usize) -> Result<()> {
        let n = self.prop.n();
        if x >= n {
            return Err(Error::SiteOutOfRange { site: x, len: n });
        }
        let d = 2 * n;
        let nf = n as f64;
        // u = (0, f) with f_k = w^{-kx}; the flip is I - (2/N) u u^*.
        let f: Vec<Complex64> = (0..n).map(|k| self.prop.w(k * x).conj()).collect();
        let px: Complex64 = (0..n).map(|k| f[k].conj() * self.mean[n + k]).sum();
        for k in 0..n {
            self.mean[n + k] -= f[k] * px * (2.0 / nf);
        }
        let c = &mut self.corr;
        // g = u^* C (row), h = C u (column), s = u^* C u.
        let mut g = alloc::vec![Complex64::new(0.0, 0.0); d];
        for k in 0..n {
            let fk = f[k].conj();
            let row = (n + k) * d;
            for (j, gj) in g.iter_mut().enumerate() {
                *gj += fk * c[row + j];
            }
        }
        let h: Vec<Complex64> = (0..d)
            .map(|i| (0..n).map(|k| c[i * d + n + k] * f[k]).sum())
            .collect();
        let s: Complex64 = (0..n).map(|k| f[k].conj() * h[n + k]).sum();
        let a = 2.0 / nf;
        let b = 4.0 / (nf * nf);
        for k in 0..n {
            let row = (n + k) * d;
            for j in 0..d {
                c[row + j] -= f[k] * g[j] * a;
            }
        }
        for (i, hi) in h.iter().enumerate() {
            let row = i * d;
            for l in 0..n {
                c[row + n + l] -= hi * f[l].conj() * a;
            }
        }
        for k in 0..n {
            let row = (n + k) * d;
            let fs = f[k] * s * b;
            for l in 0..n {
                c[row + n + l] += fs * f[l].conj();
            }
        }
        Ok(())
    }

    /// Back to real space, `C = W^* C_hat W / N^2`. Costs `O(N^3)`.
    pub fn to_state(&self) -> MomentState {
        let prop = self.prop;
        let n = prop.n();
        let d = 2 * n;
        let nf = n as f64;
        let mut mean = DVector::zeros(d);
        for a in 0..2 {
            for i in 0..n {
                let s: Complex64 = (0..n).map(|k| self.mean[a * n + k] * prop.w(i * k)).sum();
                mean[a * n + i] = s.re / nf;
            }
        }
        // T = C_hat W (columns), then W^* T (rows).
        let mut t = alloc::vec![Complex64::new(0.0, 0.0); d * d];
        for row in 0..d {
            for b in 0..2 {
                for j in 0..n {
                    t[row * d + b * n + j] = (0..n)
                        .map(|l| self.corr[row * d + b * n + l] * prop.w(j * l).conj())
                        .sum();
                }
            }
        }
        let mut corr = DMatrix::zeros(d, d);
        for a in 0..2 {
            for i in 0..n {
                for col in 0..d {
                    let s: Complex64 = (0..n)
                        .map(|k| prop.w(i * k) * t[(a * n + k) * d + col])
                        .sum();
                    corr[(a * n + i, col)] = s.re / (nf * nf);
                }
            }
        }
        MomentState {
            mean,
            corr: symmetrize(corr),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MomentRun {
    pub flips: FlipSequence,
    pub snapshots: Vec<(f64, MomentState)>,
}

/// Conditional moments along one flip realisation, sampled at `times`.
/// Draws the flip clock exactly as the particle simulation does, so equal
/// streams give equal flip sequences.
pub fn simulate_moments<R: Rng + ?Sized>(
    prop: &Propagator,
    ms0: &MomentState,
    gamma: f64,
    times: &[f64],
    rng: &mut R,
) -> Result<MomentRun> {
    let mut events = Vec::new();
    let mut snapshots = Vec::with_capacity(times.len());
    simulate_moments_with(prop, ms0, gamma, times, rng, false, |t, ms, ev| {
        match ev {
            Some(e) => events.push(e),
            None => snapshots.push((t, ms.clone())),
        }
    })?;
    Ok(MomentRun {
        flips: FlipSequence::new(prop.n(), events)?,
        snapshots,
    })
}

/// Like [`simulate_moments`] but streams results to `visit(t, state, event)`.
/// `event` is `None` at sample times. With `every_event` the real-space
/// state is also produced after every flip (at `O(N^3)` each); otherwise
/// flips are reported with an unchanged placeholder state.
pub fn simulate_moments_with<R, F>(
    prop: &Propagator,
    ms0: &MomentState,
    gamma: f64,
    times: &[f64],
    rng: &mut R,
    every_event: bool,
    mut visit: F,
) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(f64, &MomentState, Option<FlipEvent>),
{
    let horizon = times.last().copied().unwrap_or(0.0);
    check_times(times, horizon)?;
    let mut spec = SpectralMoments::new(prop, ms0)?;
    let mut clock = FlipClock::new(rng, prop.n(), gamma)?.peekable();
    let mut now = 0.0;
    for &s in times {
        while let Some(e) = clock.next_if(|e| e.time <= s) {
            spec.advance(e.time - now);
            now = e.time;
            spec.flip(e.site)?;
            if every_event {
                visit(e.time, &spec.to_state(), Some(e));
            } else {
                visit(e.time, ms0, Some(e));
            }
        }
        spec.advance(s - now);
        now = s;
        visit(s, &spec.to_state(), None);
    }
    Ok(())
}
