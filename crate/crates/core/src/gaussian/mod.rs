//! Gaussian laws along the dynamics.
//!
//! Conditionally on a flip sequence the chain is a linear map of its initial
//! state, so a Gaussian initial law stays Gaussian and is described by its
//! mean `m = (rho, pi)` and second-moment matrix `C = E[w w^T]` with blocks
//! `U` (rr), `Z` (pr) and `V` (pp).

mod bounds;
mod flow;
mod mixture;
mod ode;

pub use bounds::{
    verify_moment_bounds, DiagonalMoments, MomentBoundReport, MomentBoundRow, TimeSlice,
};
pub use flow::{
    moment_flip, moment_free_flow, simulate_moments, simulate_moments_with, MomentRun,
    SpectralMoments,
};
pub use mixture::{MixtureComponent, MixtureSpec};
pub use ode::{expected_moment_ode, expected_moment_rhs, ExpectedOde, OdeOptions};

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::profile::PotentialProfile;
use crate::thermo::GibbsParams;
use crate::{Error, Result};

/// Negative centred variances above this are treated as rounding.
pub const VARIANCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub mean: DVector<f64>,
    pub corr: DMatrix<f64>,
}

impl MomentState {
    pub fn new(mean: DVector<f64>, corr: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "mean vector must have even positive length, got {dim}"
            )));
        }
        if corr.nrows() != dim || corr.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: corr.nrows().max(corr.ncols()),
            });
        }
        let scale = corr.amax().max(1.0);
        for i in 0..dim {
            for j in 0..i {
                if (corr[(i, j)] - corr[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotAdmissible(format!(
                        "correlation matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { mean, corr })
    }

    pub fn n(&self) -> usize {
        self.mean.len() / 2
    }

    /// `C - m m^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.corr - &self.mean * self.mean.transpose()
    }

    pub fn min_cov_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.covariance()).eigenvalues.min()
    }

    /// `Tr(C^k)` for `k >= 1`.
    pub fn trace_power(&self, k: u32) -> f64 {
        match k {
            0 => self.corr.nrows() as f64,
            1 => self.corr.trace(),
            2 => self.corr.norm_squared(),
            _ => {
                let mut m = self.corr.clone();
                for _ in 2..k {
                    m = &m * &self.corr;
                }
                m.component_mul(&self.corr).sum()
            }
        }
    }

    pub fn rho(&self, y: usize) -> f64 {
        self.mean[y]
    }

    pub fn pi(&self, y: usize) -> f64 {
        self.mean[self.n() + y]
    }

    pub fn u(&self, y: usize) -> f64 {
        self.corr[(y, y)]
    }

    pub fn v(&self, y: usize) -> f64 {
        let n = self.n();
        self.corr[(n + y, n + y)]
    }

    /// `E[e_y] = (U_yy + V_yy) / 2`.
    pub fn mean_energy(&self, y: usize) -> f64 {
        0.5 * (self.u(y) + self.v(y))
    }

    pub fn mean_energies(&self) -> Vec<f64> {
        (0..self.n()).map(|y| self.mean_energy(y)).collect()
    }

    pub fn mean_deformations(&self) -> Vec<f64> {
        (0..self.n()).map(|y| self.rho(y)).collect()
    }

    /// Scales the second-moment matrix, keeping the mean.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mean: self.mean.clone(),
            corr: &self.corr * factor,
        }
    }
}

/// A point of the admissible set of initial laws: velocity means vanish, the
/// covariance `C - m m^T` is diagonal, `C` has a positive diagonal and
/// `C_ii - m_i^2 = C_{i+N,i+N}`.
///
/// Requiring `C` itself to be diagonal would exclude the local Gibbs states
/// as soon as the tension is nonzero, since there `E[r_x r_y] = rho_x rho_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaNPoint(MomentState);

impl SigmaNPoint {
    pub fn new(state: MomentState) -> Result<Self> {
        let n = state.n();
        let scale = state.corr.amax().max(1.0);
        let tol = 1e-12 * scale;
        for k in 0..n {
            if state.pi(k) != 0.0 {
                return Err(Error::NotAdmissible(format!(
                    "velocity mean at site {k} is {} but must vanish",
                    state.pi(k)
                )));
            }
        }
        for i in 0..2 * n {
            for j in 0..2 * n {
                let cov = state.corr[(i, j)] - state.mean[i] * state.mean[j];
                if i != j && cov.abs() > tol {
                    return Err(Error::NotAdmissible(format!(
                        "covariance C - m m^T is not diagonal at ({i}, {j})"
                    )));
                }
            }
            if !(state.corr[(i, i)] > 0.0) {
                return Err(Error::NotAdmissible(format!(
                    "diagonal entry {i} is {} but must be positive",
                    state.corr[(i, i)]
                )));
            }
        }
        for i in 0..n {
            let lhs = state.u(i) - state.rho(i) * state.rho(i);
            if (lhs - state.v(i)).abs() > tol {
                return Err(Error::NotAdmissible(format!(
                    "C_ii - m_i^2 = {lhs} differs from C_(i+N),(i+N) = {} at site {i}",
                    state.v(i)
                )));
            }
        }
        Ok(Self(state))
    }

    pub fn from_site_params(params: &[GibbsParams]) -> Result<Self> {
        let n = params.len();
        if n == 0 {
            return Err(Error::InvalidArgument("chain must have at least one site".into()));
        }
        let mut mean = DVector::zeros(2 * n);
        for (x, p) in params.iter().enumerate() {
            p.check()?;
            mean[x] = -p.lambda / p.beta;
        }
        let mut corr = &mean * mean.transpose();
        for (x, p) in params.iter().enumerate() {
            corr[(x, x)] += 1.0 / p.beta;
            corr[(n + x, n + x)] += 1.0 / p.beta;
        }
        Self::new(MomentState { mean, corr })
    }

    /// `K(m, C) = max_i C_ii`.
    pub fn k_witness(&self) -> f64 {
        (0..self.0.n()).map(|i| self.0.u(i)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn as_state(&self) -> &MomentState {
        &self.0
    }

    pub fn into_state(self) -> MomentState {
        self.0
    }
}

/// Mean and second moments of the local Gibbs state with profile `profile`
/// sampled at `x / n`.
pub fn gibbs_moments_from_profiles(profile: &PotentialProfile, n: usize) -> Result<SigmaNPoint> {
    SigmaNPoint::from_site_params(&profile.sample(n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteMoments {
    /// `E[p_y^{2k}]`.
    pub p_moment: f64,
    /// `E[r_y^{2k}]`.
    pub r_moment: f64,
    pub energy: f64,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn double_factorial_odd(j: u32) -> f64 {
    // (2j - 1)!!
    (1..=j).fold(1.0, |acc, i| acc * (2 * i - 1) as f64)
}

/// `E[X^{2k}]` for `X ~ N(mean, var)`: binomial sum over centred moments
/// `var^j (2j)! / (j! 2^j)`.
pub fn gaussian_even_moment(mean: f64, var: f64, k: u32) -> f64 {
    (0..=k)
        .map(|j| {
            binomial(2 * k, 2 * j)
                * mean.powi((2 * k - 2 * j) as i32)
                * var.powi(j as i32)
                * double_factorial_odd(j)
        })
        .sum()
}

fn centred_variance(second: f64, mean: f64, what: &str, y: usize) -> Result<f64> {
    let var = second - mean * mean;
    if var < -VARIANCE_TOLERANCE {
        return Err(Error::NotAdmissible(format!(
            "negative centred {what} variance {var} at site {y}"
        )));
    }
    Ok(var.max(0.0))
}

pub fn gaussian_moment_extract(ms: &MomentState, y: usize, k: u32) -> Result<SiteMoments> {
    let n = ms.n();
    if y >= n {
        return Err(Error::SiteOutOfRange { site: y, len: n });
    }
    let vp = centred_variance(ms.v(y), ms.pi(y), "velocity", y)?;
    let vr = centred_variance(ms.u(y), ms.rho(y), "deformation", y)?;
    Ok(SiteMoments {
        p_moment: gaussian_even_moment(ms.pi(y), vp, k),
        r_moment: gaussian_even_moment(ms.rho(y), vr, k),
        energy: ms.mean_energy(y),
    })
}
