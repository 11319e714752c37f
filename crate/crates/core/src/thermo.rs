//! Equilibrium thermodynamics of the one-site Gibbs measure
//! `(2pi/beta)^{-1} exp(-beta (p^2 + r^2)/2 - lambda r)`.

use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::{Error, Result};

/// Chemical potentials `(beta, lambda)` of a product Gibbs state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsParams {
    pub beta: f64,
    pub lambda: f64,
}

impl GibbsParams {
    pub fn new(beta: f64, lambda: f64) -> Result<Self> {
        let p = Self { beta, lambda };
        p.check()?;
        Ok(p)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::NonPositiveBeta(self.beta));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!(
                "lambda must be finite, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Mean site energy `e` and mean deformation `r`.
///
/// Fields are public because the rate function accepts points outside the
/// physical region; every operation that needs `e > r^2/2` checks it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateAverages {
    pub e: f64,
    pub r: f64,
}

impl StateAverages {
    pub fn new(e: f64, r: f64) -> Result<Self> {
        let a = Self { e, r };
        a.check()?;
        Ok(a)
    }

    /// Temperature `e - r^2/2`.
    pub fn temperature(&self) -> f64 {
        self.e - 0.5 * self.r * self.r
    }

    pub fn is_physical(&self) -> bool {
        self.e.is_finite() && self.r.is_finite() && self.temperature() > 0.0
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.is_physical() {
            Ok(())
        } else {
            Err(Error::OutsidePhysicalRegion {
                e: self.e,
                r: self.r,
            })
        }
    }
}

pub fn averages_from_potentials(params: GibbsParams) -> Result<StateAverages> {
    params.check()?;
    let GibbsParams { beta, lambda } = params;
    Ok(StateAverages {
        e: 1.0 / beta + lambda * lambda / (2.0 * beta * beta),
        r: -lambda / beta,
    })
}

pub fn potentials_from_averages(avg: StateAverages) -> Result<GibbsParams> {
    avg.check()?;
    let beta = 1.0 / avg.temperature();
    Ok(GibbsParams {
        beta,
        lambda: -avg.r * beta,
    })
}

/// Thermodynamic entropy `1 + log(2pi) + log(e - r^2/2)`.
pub fn thermodynamic_entropy(avg: StateAverages) -> Result<f64> {
    avg.check()?;
    Ok(1.0 + (2.0 * PI).ln() + avg.temperature().ln())
}

/// Log normalisation of one factor of the product Gibbs measure.
pub fn log_partition_product(params: GibbsParams) -> Result<f64> {
    params.check()?;
    let GibbsParams { beta, lambda } = params;
    Ok((2.0 * PI).ln() - beta.ln() + lambda * lambda / (2.0 * beta))
}

/// Large deviation rate of the pair `(z.e, z.r)` under the Gibbs state with
/// averages `eta`. Infinite outside the physical region.
pub fn rate_function(z: StateAverages, eta: StateAverages) -> Result<f64> {
    let GibbsParams { beta, .. } = potentials_from_averages(eta)?;
    if !z.is_physical() {
        return Ok(f64::INFINITY);
    }
    let r = eta.r;
    Ok(beta * (z.e - r * z.r + 0.5 * r * r) - 1.0 - (z.temperature() * beta).ln())
}

/// The five local currents whose equilibrium expectations enter the
/// macroscopic equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Current {
    J1,
    J2,
    J3,
    J4,
    J5,
}

impl Current {
    pub const ALL: [Current; 5] = [Self::J1, Self::J2, Self::J3, Self::J4, Self::J5];

    pub fn from_index(k: usize) -> Result<Self> {
        match k {
            1 => Ok(Self::J1),
            2 => Ok(Self::J2),
            3 => Ok(Self::J3),
            4 => Ok(Self::J4),
            5 => Ok(Self::J5),
            _ => Err(Error::InvalidCurrentIndex(k)),
        }
    }

    pub fn index(self) -> usize {
        self as usize + 1
    }

    /// Value of the current at the origin from `r_{-1}`, `r_0`, `p_0`.
    pub fn local(self, r_prev: f64, r0: f64, p0: f64, gamma: f64) -> f64 {
        match self {
            Self::J1 => p0 * p0 + r0 * r_prev + 2.0 * gamma * p0 * r_prev,
            Self::J2 => r0 + gamma * p0,
            Self::J3 => {
                let s = r0 + r_prev;
                p0 * p0 * s * s
            }
            Self::J4 => p0 * p0 * (r0 + r_prev),
            Self::J5 => p0 * p0,
        }
    }

    /// Gibbs expectation `H_k(e, r)` and its gradient `(dH/de, dH/dr)`.
    pub fn expectation(self, avg: StateAverages) -> Result<(f64, [f64; 2])> {
        avg.check()?;
        let StateAverages { e, r } = avg;
        let r2 = r * r;
        Ok(match self {
            Self::J1 => (e + 0.5 * r2, [1.0, r]),
            Self::J2 => (r, [0.0, 1.0]),
            Self::J3 => {
                let a = 2.0 * e - r2;
                let b = e + 1.5 * r2;
                (a * b, [4.0 * e + 2.0 * r2, 4.0 * e * r - 6.0 * r2 * r])
            }
            Self::J4 => (r * (2.0 * e - r2), [2.0 * r, 2.0 * e - 3.0 * r2]),
            Self::J5 => (e - 0.5 * r2, [1.0, -r]),
        })
    }
}

pub fn current_expectation(k: usize, avg: StateAverages) -> Result<(f64, [f64; 2])> {
    Current::from_index(k)?.expectation(avg)
}

/// First-order Taylor remainder `H(z) - H(eta) - DH(eta)(z - eta)`.
pub fn taylor_remainder(k: usize, z: StateAverages, eta: StateAverages) -> Result<f64> {
    let current = Current::from_index(k)?;
    let (hz, _) = current.expectation(z)?;
    let (he, grad) = current.expectation(eta)?;
    Ok(hz - he - grad[0] * (z.e - eta.e) - grad[1] * (z.r - eta.r))
}
