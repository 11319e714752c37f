//! Local Gibbs state with its first-order correction.
//!
//! The corrected density multiplies the local equilibrium by the exponential
//! of `-(1/N) sum_x [beta'_x g_x + lambda'_x f_x]` with the local functions
//! `f_x = p_{x+1} / gamma` and `g_x = r_x (p_{x+1} + p_x) / (2 gamma) + r_x^2 / 4`.
//! It is again Gaussian: `exp(-X^T Q X / 2 + l^T X)` with `Q = D + H / N`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::profile::PotentialProfile;
use crate::thermo::{log_partition_product, GibbsParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedGibbs {
    /// Ordered `(r_0..r_{N-1}, p_0..p_{N-1})`.
    pub precision: DMatrix<f64>,
    pub linear: DVector<f64>,
    site_params: Vec<GibbsParams>,
}

impl CorrectedGibbs {
    pub fn new(profile: &PotentialProfile, n: usize, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("chain must have at least one site".into()));
        }
        let nf = n as f64;
        let mut q = DMatrix::zeros(2 * n, 2 * n);
        let mut l = DVector::zeros(2 * n);
        let mut site_params = Vec::with_capacity(n);
        for x in 0..n {
            let pos = x as f64 / nf;
            let [beta, dbeta, _] = profile.beta.jet(pos);
            let [lambda, dlambda, _] = profile.lambda.jet(pos);
            let xp = (x + 1) % n;
            let (rx, px, pxp) = (x, n + x, n + xp);
            q[(rx, rx)] += beta + dbeta / (2.0 * nf);
            q[(px, px)] += beta;
            let c = dbeta / (2.0 * gamma * nf);
            for p in [px, pxp] {
                q[(rx, p)] += c;
                q[(p, rx)] += c;
            }
            l[rx] -= lambda;
            l[pxp] -= dlambda / (gamma * nf);
            site_params.push(GibbsParams { beta, lambda });
        }
        Ok(Self {
            precision: q,
            linear: l,
            site_params,
        })
    }

    /// `log int exp(-X^T Q X / 2 + l^T X) dX`, from a Cholesky factor
    /// `Q = L L^T`: `|L^{-1} l|^2 / 2 + N log 2 pi - sum log L_ii`.
    pub fn log_partition(&self) -> Result<f64> {
        let n = self.site_params.len();
        let chol = self
            .precision
            .clone()
            .cholesky()
            .ok_or(Error::IndefinitePrecision(n))?;
        let lower = chol.l();
        let b = lower
            .solve_lower_triangular(&self.linear)
            .ok_or(Error::IndefinitePrecision(n))?;
        let log_det_half: f64 = (0..2 * n).map(|i| lower[(i, i)].ln()).sum();
        Ok(0.5 * b.norm_squared() + n as f64 * (2.0 * PI).ln() - log_det_half)
    }

    pub fn n(&self) -> usize {
        self.site_params.len()
    }

    /// `D`, the diagonal of the product state: `beta(x/N)` on both blocks.
    pub fn diagonal_part(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            if i == j {
                self.site_params[i % n].beta
            } else {
                0.0
            }
        })
    }

    /// `H = N (Q - D)`, banded with at most three entries per row.
    pub fn correction_part(&self) -> DMatrix<f64> {
        (&self.precision - self.diagonal_part()) * self.n() as f64
    }

    /// Shift `b = L^{-1} l` for the Cholesky factor `Q = L L^T`, so that the
    /// exponent reads `-|L^T X - b|^2 / 2 + |b|^2 / 2`.
    pub fn shift(&self) -> Result<DVector<f64>> {
        let n = self.n();
        let chol = self
            .precision
            .clone()
            .cholesky()
            .ok_or(Error::IndefinitePrecision(n))?;
        chol.l()
            .solve_lower_triangular(&self.linear)
            .ok_or(Error::IndefinitePrecision(n))
    }

    /// Log normalisation of the uncorrected product state.
    pub fn product_log_partition(&self) -> Result<f64> {
        self.site_params.iter().map(|p| log_partition_product(*p)).sum()
    }
}

pub fn corrected_gibbs_build(
    profile: &PotentialProfile,
    n: usize,
    gamma: f64,
) -> Result<CorrectedGibbs> {
    CorrectedGibbs::new(profile, n, gamma)
}

pub fn log_partition_corrected(profile: &PotentialProfile, n: usize, gamma: f64) -> Result<f64> {
    CorrectedGibbs::new(profile, n, gamma)?.log_partition()
}
