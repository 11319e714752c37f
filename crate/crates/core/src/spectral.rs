//! Exact propagator of the harmonic flow, diagonalised by the discrete
//! Fourier transform on the torus.
//!
//! Convention: `x_hat(k) = sum_j x_j w^{-jk}` with `w = exp(2 pi i / N)`. The
//! shift `x_j -> x_{j+1}` has symbol `w^k`, so every mode evolves under a 2x2
//! linear system whose matrix squares to `-omega_k^2`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::chain::{ChainState, Model};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Propagator {
    n: usize,
    model: Model,
    twiddle: Vec<Complex64>,
    /// Unpinned coupling `w^k - 1`; unused for the pinned model.
    coupling: Vec<Complex64>,
    omega: Vec<f64>,
}

/// `(cos(omega t), sin(omega t) / omega)`, stable near `omega = 0`.
#[inline]
fn cos_sinc(omega: f64, t: f64) -> (f64, f64) {
    let x = omega * t;
    let (s, c) = x.sin_cos();
    if x.abs() < 1e-6 {
        (c, t * (1.0 - x * x / 6.0))
    } else {
        (c, s / omega)
    }
}

impl Propagator {
    pub fn new(model: Model, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("chain must have at least one site".into()));
        }
        if let Model::Pinned { nu } = model {
            Model::pinned(nu)?;
        }
        let twiddle: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64))
            .collect();
        let coupling = twiddle.iter().map(|w| w - 1.0).collect();
        let omega = (0..n).map(|k| model.omega_squared(k, n).sqrt()).collect();
        Ok(Self {
            n,
            model,
            twiddle,
            coupling,
            omega,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn omega(&self, k: usize) -> f64 {
        self.omega[k % self.n]
    }

    /// `w^{jk}`.
    #[inline]
    pub(crate) fn w(&self, jk: usize) -> Complex64 {
        self.twiddle[jk % self.n]
    }

    /// Propagator of mode `k` over time `t`, acting on `(x_hat, p_hat)`.
    pub fn mode_matrix(&self, k: usize, t: f64) -> [[Complex64; 2]; 2] {
        let k = k % self.n;
        let (c, sn) = cos_sinc(self.omega[k], t);
        let c = Complex64::new(c, 0.0);
        match self.model {
            Model::Unpinned => {
                let a = self.coupling[k];
                [[c, a * sn], [-a.conj() * sn, c]]
            }
            Model::Pinned { .. } => {
                let w2 = self.omega[k] * self.omega[k];
                [[c, Complex64::new(sn, 0.0)], [Complex64::new(-w2 * sn, 0.0), c]]
            }
        }
    }

    fn check(&self, s: &ChainState) -> Result<()> {
        if s.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: s.len(),
            });
        }
        if s.model != self.model {
            return Err(Error::InvalidArgument("state and propagator models differ".into()));
        }
        Ok(())
    }

    /// Free flow of `s` over time `t`; negative `t` runs the flow backwards.
    pub fn apply(&self, s: &ChainState, t: f64) -> Result<ChainState> {
        let mut m = self.modes(s)?;
        m.advance(t);
        Ok(m.to_state())
    }

    /// Half-spectrum transform of a chain state.
    pub fn modes(&self, s: &ChainState) -> Result<ModeChain<'_>> {
        self.check(s)?;
        let half = self.n / 2 + 1;
        let forward = |v: &[f64]| -> Vec<Complex64> {
            (0..half)
                .map(|k| {
                    v.iter()
                        .enumerate()
                        .map(|(j, x)| self.w(j * k).conj() * *x)
                        .sum()
                })
                .collect()
        };
        Ok(ModeChain {
            prop: self,
            r_hat: forward(&s.r),
            p_hat: forward(&s.p),
        })
    }

    /// The real `2N x 2N` matrix of the flow over time `t`, ordered as
    /// `(r_0..r_{N-1}, p_0..p_{N-1})`.
    pub fn dense(&self, t: f64) -> DMatrix<f64> {
        let n = self.n;
        let nf = n as f64;
        let mats: Vec<[[Complex64; 2]; 2]> = (0..n).map(|k| self.mode_matrix(k, t)).collect();
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        for a in 0..2 {
            for b in 0..2 {
                let column: Vec<f64> = (0..n)
                    .map(|j| {
                        mats.iter()
                            .enumerate()
                            .map(|(k, m)| (m[a][b] * self.w(j * k)).re)
                            .sum::<f64>()
                            / nf
                    })
                    .collect();
                for i in 0..n {
                    for j in 0..n {
                        out[(a * n + i, b * n + j)] = column[(i + n - j) % n];
                    }
                }
            }
        }
        out
    }
}

/// A chain state held in Fourier space. Only modes `0..=N/2` are stored; the
/// rest follow from conjugate symmetry. Flows cost `O(N)` and so do single
/// velocity flips.
#[derive(Debug, Clone)]
pub struct ModeChain<'a> {
    prop: &'a Propagator,
    r_hat: Vec<Complex64>,
    p_hat: Vec<Complex64>,
}

impl ModeChain<'_> {
    pub fn advance(&mut self, t: f64) {
        for k in 0..self.r_hat.len() {
            let m = self.prop.mode_matrix(k, t);
            let (x, p) = (self.r_hat[k], self.p_hat[k]);
            self.r_hat[k] = m[0][0] * x + m[0][1] * p;
            self.p_hat[k] = m[1][0] * x + m[1][1] * p;
        }
    }

    fn inverse_at(&self, v: &[Complex64], x: usize) -> f64 {
        let n = self.prop.n;
        let mut acc = v[0].re;
        let upper = (n + 1) / 2;
        for (k, vk) in v.iter().enumerate().take(upper).skip(1) {
            acc += 2.0 * (vk * self.prop.w(k * x)).re;
        }
        if n % 2 == 0 && n > 1 {
            let s = if x % 2 == 0 { 1.0 } else { -1.0 };
            acc += s * v[n / 2].re;
        }
        acc / n as f64
    }

    pub fn velocity(&self, x: usize) -> f64 {
        self.inverse_at(&self.p_hat, x)
    }

    pub fn coordinate(&self, x: usize) -> f64 {
        self.inverse_at(&self.r_hat, x)
    }

    pub fn flip(&mut self, x: usize) -> Result<()> {
        let n = self.prop.n;
        if x >= n {
            return Err(Error::SiteOutOfRange { site: x, len: n });
        }
        let px = 2.0 * self.velocity(x);
        for k in 0..self.p_hat.len() {
            self.p_hat[k] -= self.prop.w(k * x).conj() * px;
        }
        Ok(())
    }

    pub fn to_state(&self) -> ChainState {
        let n = self.prop.n;
        ChainState {
            model: self.prop.model,
            r: (0..n).map(|x| self.coordinate(x)).collect(),
            p: (0..n).map(|x| self.velocity(x)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_state(model: Model, n: usize) -> ChainState {
        let r = (0..n).map(|j| ((j * 7 + 3) % 11) as f64 / 5.0 - 1.0).collect();
        let p = (0..n).map(|j| ((j * 5 + 1) % 13) as f64 / 6.0 - 1.0).collect();
        ChainState::new(model, r, p).unwrap()
    }

    fn max_diff(a: &ChainState, b: &ChainState) -> f64 {
        a.r.iter()
            .zip(&b.r)
            .chain(a.p.iter().zip(&b.p))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_time_is_identity() {
        for n in [1, 2, 5, 8] {
            let s = sample_state(Model::Unpinned, n);
            let prop = Propagator::new(Model::Unpinned, n).unwrap();
            assert!(max_diff(&prop.apply(&s, 0.0).unwrap(), &s) < 1e-13);
        }
    }

    #[test]
    fn dense_matches_mode_flow() {
        for model in [Model::Unpinned, Model::Pinned { nu: 0.7 }] {
            for n in [3, 6] {
                let s = sample_state(model, n);
                let prop = Propagator::new(model, n).unwrap();
                let d = prop.dense(0.8);
                let v = nalgebra::DVector::from_iterator(
                    2 * n,
                    s.r.iter().chain(&s.p).copied(),
                );
                let w = &d * v;
                let f = prop.apply(&s, 0.8).unwrap();
                for i in 0..n {
                    assert!((w[i] - f.r[i]).abs() < 1e-12);
                    assert!((w[n + i] - f.p[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn flip_in_mode_space_matches_real_space() {
        let n = 7;
        let s = sample_state(Model::Unpinned, n);
        let prop = Propagator::new(Model::Unpinned, n).unwrap();
        let mut m = prop.modes(&s).unwrap();
        m.flip(3).unwrap();
        let mut t = s.clone();
        t.flip_velocity(3).unwrap();
        assert!(max_diff(&m.to_state(), &t) < 1e-13);
    }
}
