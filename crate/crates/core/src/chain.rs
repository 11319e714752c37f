//! Microscopic configurations of the chain on the discrete torus.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    /// Coordinates are the deformations `r_x = q_{x+1} - q_x`.
    Unpinned,
    /// Coordinates are the positions `q_x`, each pinned with strength `nu^2`.
    Pinned { nu: f64 },
}

impl Model {
    pub fn pinned(nu: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "pinning strength must be positive, got {nu}"
            )));
        }
        Ok(Self::Pinned { nu })
    }

    /// Squared frequency of Fourier mode `k` on a torus of `n` sites.
    pub fn omega_squared(&self, k: usize, n: usize) -> f64 {
        let s = (PI * k as f64 / n as f64).sin();
        let base = 4.0 * s * s;
        match *self {
            Self::Unpinned => base,
            Self::Pinned { nu } => nu * nu + base,
        }
    }
}

/// A configuration `(r, p)` of the chain. For the pinned model `r` holds the
/// positions `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub model: Model,
    pub r: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedTotals {
    pub energy: f64,
    /// Sum of `r_x`. For the pinned model this is the sum of positions, which
    /// is not conserved.
    pub deformation: f64,
}

#[inline]
fn prev(x: usize, n: usize) -> usize {
    if x == 0 {
        n - 1
    } else {
        x - 1
    }
}

#[inline]
fn next(x: usize, n: usize) -> usize {
    if x + 1 == n {
        0
    } else {
        x + 1
    }
}

impl ChainState {
    pub fn new(model: Model, r: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::InvalidArgument("chain must have at least one site".into()));
        }
        if r.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: r.len(),
                found: p.len(),
            });
        }
        if r.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("state entries must be finite".into()));
        }
        if let Model::Pinned { nu } = model {
            Model::pinned(nu)?;
        }
        Ok(Self { model, r, p })
    }

    pub fn zeros(model: Model, n: usize) -> Self {
        Self {
            model,
            r: alloc::vec![0.0; n],
            p: alloc::vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    fn check_site(&self, x: usize) -> Result<()> {
        if x < self.len() {
            Ok(())
        } else {
            Err(Error::SiteOutOfRange {
                site: x,
                len: self.len(),
            })
        }
    }

    /// Time derivative under the Hamiltonian flow.
    pub fn drift(&self) -> ChainState {
        let n = self.len();
        let mut out = ChainState::zeros(self.model, n);
        match self.model {
            Model::Unpinned => {
                for x in 0..n {
                    out.r[x] = self.p[next(x, n)] - self.p[x];
                    out.p[x] = self.r[x] - self.r[prev(x, n)];
                }
            }
            Model::Pinned { nu } => {
                for x in 0..n {
                    let q = &self.r;
                    let lap = q[next(x, n)] + q[prev(x, n)] - 2.0 * q[x];
                    out.r[x] = self.p[x];
                    out.p[x] = lap - nu * nu * q[x];
                }
            }
        }
        out
    }

    pub fn site_energy(&self, x: usize) -> Result<f64> {
        self.check_site(x)?;
        Ok(self.energy_unchecked(x))
    }

    fn energy_unchecked(&self, x: usize) -> f64 {
        let n = self.len();
        match self.model {
            Model::Unpinned => 0.5 * (self.p[x] * self.p[x] + self.r[x] * self.r[x]),
            Model::Pinned { nu } => {
                let q = &self.r;
                let a = q[x] - q[next(x, n)];
                let b = q[x] - q[prev(x, n)];
                0.5 * self.p[x] * self.p[x] + 0.5 * nu * nu * q[x] * q[x] + 0.25 * (a * a + b * b)
            }
        }
    }

    pub fn site_energies(&self) -> Vec<f64> {
        (0..self.len()).map(|x| self.energy_unchecked(x)).collect()
    }

    pub fn conserved_totals(&self) -> ConservedTotals {
        ConservedTotals {
            energy: (0..self.len()).map(|x| self.energy_unchecked(x)).sum(),
            deformation: self.r.iter().sum(),
        }
    }

    /// Reverses the velocity at site `x`.
    pub fn flip_velocity(&mut self, x: usize) -> Result<()> {
        self.check_site(x)?;
        self.p[x] = -self.p[x];
        Ok(())
    }

    /// `steps` classical Runge-Kutta steps of the Hamiltonian flow over a
    /// total time `t`. Used as an independent check of the exact propagator.
    pub fn rk4_flow(&self, t: f64, steps: usize) -> ChainState {
        let steps = steps.max(1);
        let h = t / steps as f64;
        let mut s = self.clone();
        let axpy = |a: &ChainState, k: &ChainState, c: f64| {
            let mut o = a.clone();
            for i in 0..a.len() {
                o.r[i] += c * k.r[i];
                o.p[i] += c * k.p[i];
            }
            o
        };
        for _ in 0..steps {
            let k1 = s.drift();
            let k2 = axpy(&s, &k1, 0.5 * h).drift();
            let k3 = axpy(&s, &k2, 0.5 * h).drift();
            let k4 = axpy(&s, &k3, h).drift();
            for i in 0..s.len() {
                s.r[i] += h / 6.0 * (k1.r[i] + 2.0 * k2.r[i] + 2.0 * k3.r[i] + k4.r[i]);
                s.p[i] += h / 6.0 * (k1.p[i] + 2.0 * k2.p[i] + 2.0 * k3.p[i] + k4.p[i]);
            }
        }
        s
    }
}

/// Applies `L* = -A + gamma S` to a function given by its value and gradient.
/// `grad` holds `(d/dr, d/dp)` and `f` evaluates the function on any state.
fn adjoint_generator<F>(s: &ChainState, gamma: f64, grad: (&[f64], &[f64]), f: F) -> f64
where
    F: Fn(&ChainState) -> f64,
{
    let d = s.drift();
    let transport: f64 = (0..s.len())
        .map(|i| d.r[i] * grad.0[i] + d.p[i] * grad.1[i])
        .sum();
    let base = f(s);
    let mut flipped = s.clone();
    let mut noise = 0.0;
    for y in 0..s.len() {
        flipped.p[y] = -flipped.p[y];
        noise += f(&flipped) - base;
        flipped.p[y] = -flipped.p[y];
    }
    -transport + gamma * 0.5 * noise
}

/// Residuals of the two fluctuation-dissipation identities at site `x`
/// for the deformation current `p_{x+1}` and the energy current `p_{x+1} r_x`.
pub fn fd_residual(state: &ChainState, x: usize, gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if state.model != Model::Unpinned {
        return Err(Error::InvalidArgument(
            "fluctuation-dissipation identities are stated for the unpinned chain".into(),
        ));
    }
    state.check_site(x)?;
    let n = state.len();
    let xp = next(x, n);
    let (r, p) = (&state.r, &state.p);

    let mut gr = alloc::vec![0.0; n];
    let mut gp = alloc::vec![0.0; n];

    // f_x = -p_{x+1} / gamma
    gp[xp] = -1.0 / gamma;
    let f = |s: &ChainState| -s.p[next(x, n)] / gamma;
    let lf = adjoint_generator(state, gamma, (&gr, &gp), f);
    let res1 = p[xp] - ((-r[xp] + r[x]) / gamma + lf);

    // g_x = -(r_x / (2 gamma)) (p_{x+1} + p_x) - r_x^2 / 4
    gp[xp] = 0.0;
    gr[x] = -(p[xp] + p[x]) / (2.0 * gamma) - 0.5 * r[x];
    gp[x] -= r[x] / (2.0 * gamma);
    gp[xp] -= r[x] / (2.0 * gamma);
    let g = |s: &ChainState| {
        let (rx, pa, pb) = (s.r[x], s.p[next(x, n)], s.p[x]);
        -(rx / (2.0 * gamma)) * (pa + pb) - 0.25 * rx * rx
    };
    let lg = adjoint_generator(state, gamma, (&gr, &gp), g);
    let phi = |y: usize| -(p[y] * p[y] + r[y] * r[prev(y, n)]) / (2.0 * gamma);
    let res2 = p[xp] * r[x] - (phi(xp) - phi(x) + lg);
    Ok((res1, res2))
}

/// Equilibrium position covariance `Gamma(z)` of the pinned chain at inverse
/// temperature `beta`, solving `(nu^2 - Laplacian) Gamma = delta_0 / beta`.
pub fn pinned_covariance_gamma(nu: f64, beta: f64, n: usize) -> Result<Vec<f64>> {
    let model = Model::pinned(nu)?;
    if !(beta > 0.0) {
        return Err(Error::NonPositiveBeta(beta));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("chain must have at least one site".into()));
    }
    let nf = n as f64;
    let symbol: Vec<f64> = (0..n).map(|k| 1.0 / (beta * model.omega_squared(k, n))).collect();
    Ok((0..n)
        .map(|z| {
            symbol
                .iter()
                .enumerate()
                .map(|(k, s)| s * (2.0 * PI * ((k * z) % n) as f64 / nf).cos())
                .sum::<f64>()
                / nf
        })
        .collect())
}
