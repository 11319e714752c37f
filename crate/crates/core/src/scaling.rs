//! Local equilibrium initial data, empirical profiles and their comparison
//! with the macroscopic solution.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::chain::{ChainState, Model};
use crate::hydro::HydroFields;
use crate::profile::PotentialProfile;
use crate::{Error, Result};

/// Independent Gaussian sites with means and variances of the local Gibbs
/// state: `p_x ~ N(0, 1/beta)`, `r_x ~ N(-lambda/beta, 1/beta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEquilibrium {
    mean_r: Vec<f64>,
    sd: Vec<f64>,
}

impl LocalEquilibrium {
    pub fn new(profile: &PotentialProfile, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("chain must have at least one site".into()));
        }
        let mut mean_r = Vec::with_capacity(n);
        let mut sd = Vec::with_capacity(n);
        for p in profile.sample(n) {
            p.check()?;
            mean_r.push(-p.lambda / p.beta);
            sd.push((1.0 / p.beta).sqrt());
        }
        Ok(Self { mean_r, sd })
    }

    pub fn n(&self) -> usize {
        self.sd.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChainState {
        let n = self.n();
        let mut r = Vec::with_capacity(n);
        let mut p = Vec::with_capacity(n);
        for x in 0..n {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            r.push(self.mean_r[x] + self.sd[x] * a);
            p.push(self.sd[x] * b);
        }
        ChainState {
            model: Model::Unpinned,
            r,
            p,
        }
    }
}

/// Pinned chain started from `q = (nu^2 - Laplacian)^{-1/2} (sqrt(T) xi)` and
/// `p = sqrt(T) eta` for a temperature field `T(x/N)`, so that the mean site
/// energy follows `T` up to the smoothness of the profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnedLocalEquilibrium {
    nu: f64,
    sqrt_t: Vec<f64>,
    /// First column of the circulant `(nu^2 - Laplacian)^{-1/2}`.
    kernel: Vec<f64>,
}

impl PinnedLocalEquilibrium {
    pub fn new(temperature: &[f64], nu: f64) -> Result<Self> {
        let model = Model::pinned(nu)?;
        let n = temperature.len();
        if n == 0 {
            return Err(Error::InvalidArgument("chain must have at least one site".into()));
        }
        if let Some(t) = temperature.iter().find(|t| !(**t > 0.0)) {
            return Err(Error::NonPositiveBeta(1.0 / t));
        }
        let nf = n as f64;
        let kernel = (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        (2.0 * PI * ((j * k) % n) as f64 / nf).cos()
                            / model.omega_squared(k, n).sqrt()
                    })
                    .sum::<f64>()
                    / nf
            })
            .collect();
        Ok(Self {
            nu,
            sqrt_t: temperature.iter().map(|t| t.sqrt()).collect(),
            kernel,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChainState {
        let n = self.sqrt_t.len();
        let xi: Vec<f64> = (0..n)
            .map(|x| self.sqrt_t[x] * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let p = (0..n)
            .map(|x| self.sqrt_t[x] * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let q = (0..n)
            .map(|i| (0..n).map(|j| self.kernel[(i + n - j) % n] * xi[j]).sum())
            .collect();
        ChainState {
            model: Model::Pinned { nu: self.nu },
            r: q,
            p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockedProfiles {
    pub block: usize,
    pub e: Vec<f64>,
    pub r: Vec<f64>,
    /// Share of the total energy carried by sites above the cutoff.
    pub discarded_energy_fraction: f64,
    pub discarded_sites: usize,
}

/// Block means of `xi_{x,M} = xi_x 1{e_x <= M}` over consecutive blocks of
/// width `block`.
pub fn empirical_block_average(
    e: &[f64],
    r: &[f64],
    block: usize,
    cutoff: Option<f64>,
) -> Result<BlockedProfiles> {
    let n = e.len();
    if r.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: r.len(),
        });
    }
    if block == 0 || n % block != 0 {
        return Err(Error::BlockWidth { block, n });
    }
    if let Some(m) = cutoff {
        if !(m > 0.0) {
            return Err(Error::InvalidArgument(format!("cutoff must be positive, got {m}")));
        }
    }
    let keep = |x: usize| cutoff.map_or(true, |m| e[x] <= m);
    let blocks = n / block;
    let mut be = alloc::vec![0.0; blocks];
    let mut br = alloc::vec![0.0; blocks];
    let (mut dropped, mut total, mut sites) = (0.0, 0.0, 0);
    for x in 0..n {
        total += e[x];
        if keep(x) {
            be[x / block] += e[x];
            br[x / block] += r[x];
        } else {
            dropped += e[x];
            sites += 1;
        }
    }
    let w = 1.0 / block as f64;
    be.iter_mut().chain(br.iter_mut()).for_each(|v| *v *= w);
    Ok(BlockedProfiles {
        block,
        e: be,
        r: br,
        discarded_energy_fraction: if total > 0.0 { dropped / total } else { 0.0 },
        discarded_sites: sites,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    One,
    Cos(u32),
    Sin(u32),
}

impl TestFunction {
    pub const ACCEPTANCE: [TestFunction; 3] = [Self::One, Self::Cos(1), Self::Sin(1)];

    pub fn eval(self, q: f64) -> f64 {
        match self {
            Self::One => 1.0,
            Self::Cos(k) => (2.0 * PI * k as f64 * q).cos(),
            Self::Sin(k) => (2.0 * PI * k as f64 * q).sin(),
        }
    }

    pub fn label(self) -> alloc::string::String {
        match self {
            Self::One => "1".into(),
            Self::Cos(k) => format!("cos{k}"),
            Self::Sin(k) => format!("sin{k}"),
        }
    }
}

/// Ensemble estimate of `(1/N) sum_x G(x/N) xi_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalEstimate {
    pub test: TestFunction,
    pub e_mean: f64,
    pub e_se: f64,
    pub r_mean: f64,
    pub r_se: f64,
}

/// Ensemble means of block (or site) values at one macroscopic time.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalProfiles {
    pub t: f64,
    pub n: usize,
    pub block: usize,
    pub e: Vec<f64>,
    pub se_e: Vec<f64>,
    pub r: Vec<f64>,
    pub se_r: Vec<f64>,
    /// Weak functionals estimated member by member, which carry the correct
    /// standard error. Tests without an entry fall back to the site means.
    pub functionals: Vec<FunctionalEstimate>,
    pub discarded_energy_fraction: f64,
}

impl EmpiricalProfiles {
    /// Macroscopic position of block `b`.
    pub fn position(&self, b: usize) -> f64 {
        (b * self.block) as f64 / self.n as f64 + (self.block as f64 - 1.0) / (2.0 * self.n as f64)
    }

    fn estimate(&self, test: TestFunction) -> FunctionalEstimate {
        if let Some(f) = self.functionals.iter().find(|f| f.test == test) {
            return *f;
        }
        let blocks = self.e.len() as f64;
        let (mut em, mut rm, mut ev, mut rv) = (0.0, 0.0, 0.0, 0.0);
        for b in 0..self.e.len() {
            let g = test.eval(self.position(b));
            em += g * self.e[b];
            rm += g * self.r[b];
            ev += (g * self.se_e[b]).powi(2);
            rv += (g * self.se_r[b]).powi(2);
        }
        FunctionalEstimate {
            test,
            e_mean: em / blocks,
            e_se: ev.sqrt() / blocks,
            r_mean: rm / blocks,
            r_se: rv.sqrt() / blocks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakErrorRow {
    pub test: TestFunction,
    pub e_error: f64,
    pub e_se: f64,
    pub r_error: f64,
    pub r_se: f64,
}

/// `int G f dq` by the rectangle rule, exact for trigonometric polynomials
/// of degree below the grid size.
pub fn grid_integral(values: &[f64], test: TestFunction) -> f64 {
    let m = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| test.eval(i as f64 / m) * v)
        .sum::<f64>()
        / m
}

/// Absolute weak errors of empirical profiles against a macroscopic solution
/// at time `pde_time`.
pub fn weak_error(
    profiles: &EmpiricalProfiles,
    pde: &HydroFields,
    pde_time: f64,
    tests: &[TestFunction],
) -> Result<Vec<WeakErrorRow>> {
    if (profiles.t - pde_time).abs() > 1e-12 * (1.0 + pde_time.abs()) {
        return Err(Error::TimeMismatch {
            empirical: profiles.t,
            reference: pde_time,
        });
    }
    Ok(tests
        .iter()
        .map(|&test| {
            let est = profiles.estimate(test);
            WeakErrorRow {
                test,
                e_error: (est.e_mean - grid_integral(&pde.e, test)).abs(),
                e_se: est.e_se,
                r_error: (est.r_mean - grid_integral(&pde.r, test)).abs(),
                r_se: est.r_se,
            }
        })
        .collect())
}

/// `(2/N) sum_x cos(2 pi x / N) e_x`.
pub fn mode_amplitude(values: &[f64]) -> f64 {
    2.0 * grid_integral(values, TestFunction::Cos(1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeAmplitude {
    pub t: f64,
    pub amplitude: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusivityFit {
    pub diffusivity: f64,
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

/// Least-squares fit of `log a(t) = c - D (2 pi)^2 t`, weighted by the
/// standard errors when all are positive.
pub fn fit_diffusivity(samples: &[ModeAmplitude]) -> Result<DiffusivityFit> {
    if samples.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least three times, got {}",
            samples.len()
        )));
    }
    for s in samples {
        let floor = 3.0 * s.se;
        if !(s.amplitude > floor) || !(s.amplitude > 0.0) {
            return Err(Error::BelowNoiseFloor {
                t: s.t,
                amplitude: s.amplitude,
                floor,
            });
        }
    }
    let weighted = samples.iter().all(|s| s.se > 0.0);
    let pts: Vec<(f64, f64, f64)> = samples
        .iter()
        .map(|s| {
            let w = if weighted {
                let rel = s.se / s.amplitude;
                1.0 / (rel * rel)
            } else {
                1.0
            };
            (s.t, s.amplitude.ln(), w)
        })
        .collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mt = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let stt: f64 = pts.iter().map(|p| p.2 * (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| p.2 * (p.0 - mt) * (p.1 - my)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let slope_se = if weighted {
        (1.0 / stt).sqrt()
    } else {
        let rss: f64 = pts
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        (rss / (pts.len() as f64 - 2.0) / stt).sqrt()
    };
    let k2 = 4.0 * PI * PI;
    Ok(DiffusivityFit {
        diffusivity: -slope / k2,
        slope,
        intercept,
        slope_se,
    })
}
