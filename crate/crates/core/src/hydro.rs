//! The limiting diffusion system on the periodic unit interval,
//! `r_t = r_qq / gamma`, `e_t = (e + r^2 / 2)_qq / (2 gamma)`,
//! and the heat equation of the pinned chain.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::profile::{FourierSeries, PotentialProfile};
use crate::thermo::{thermodynamic_entropy, StateAverages};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HydroFields {
    pub e: Vec<f64>,
    pub r: Vec<f64>,
}

impl HydroFields {
    pub fn new(e: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if e.len() != r.len() {
            return Err(Error::DimensionMismatch {
                expected: e.len(),
                found: r.len(),
            });
        }
        if e.len() < 3 {
            return Err(Error::InvalidArgument("grid needs at least three points".into()));
        }
        let f = Self { e, r };
        f.check_physical()?;
        Ok(f)
    }

    pub fn from_profile(profile: &PotentialProfile, m: usize) -> Result<Self> {
        let (e, r) = (0..m)
            .map(|j| {
                let a = profile.averages_at(j as f64 / m as f64);
                (a.e, a.r)
            })
            .unzip();
        Self::new(e, r)
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn temperature(&self) -> Vec<f64> {
        self.e
            .iter()
            .zip(&self.r)
            .map(|(e, r)| e - 0.5 * r * r)
            .collect()
    }

    pub fn min_temperature(&self) -> f64 {
        self.temperature().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn integral_e(&self) -> f64 {
        self.e.iter().sum::<f64>() * self.spacing()
    }

    pub fn integral_r(&self) -> f64 {
        self.r.iter().sum::<f64>() * self.spacing()
    }

    fn check_physical(&self) -> Result<()> {
        for (index, th) in self.temperature().into_iter().enumerate() {
            if !(th > 0.0) {
                return Err(Error::PhysicalRegionExit { index, value: th });
            }
        }
        Ok(())
    }

    /// Entropy density `S(e, r)` at every grid point.
    pub fn entropy_density(&self) -> Vec<f64> {
        self.e
            .iter()
            .zip(&self.r)
            .map(|(&e, &r)| thermodynamic_entropy(StateAverages { e, r }).unwrap_or(f64::NAN))
            .collect()
    }

    /// Trigonometric interpolants of both fields.
    pub fn interpolants(&self) -> Result<(FourierSeries, FourierSeries)> {
        Ok((
            FourierSeries::interpolating(&self.e)?,
            FourierSeries::interpolating(&self.r)?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Forward Euler, stable for `dt <= gamma dq^2 / 2`.
    Explicit,
    /// Crank-Nicolson in the Laplacians; the `r^2/2` term uses the average of
    /// the old and the already updated deformation.
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeConfig {
    pub gamma: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub t_final: f64,
}

impl PdeConfig {
    fn check(&self, m: usize) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.scheme == Scheme::Explicit {
            let dq = 1.0 / m as f64;
            let limit = 0.5 * self.gamma * dq * dq;
            if self.dt > limit * (1.0 + 1e-12) {
                return Err(Error::StepTooLarge { dt: self.dt, limit });
            }
        }
        Ok(())
    }
}

/// Unnormalised periodic Laplacian `u_{i+1} + u_{i-1} - 2 u_i`.
fn laplacian(u: &[f64], out: &mut [f64]) {
    let m = u.len();
    for i in 0..m {
        let a = u[if i == 0 { m - 1 } else { i - 1 }];
        let b = u[if i + 1 == m { 0 } else { i + 1 }];
        out[i] = a + b - 2.0 * u[i];
    }
}

/// Solves `(1 + 2a) x_i - a (x_{i-1} + x_{i+1}) = d_i` on a periodic grid
/// (Thomas algorithm with a Sherman-Morrison correction for the corners).
fn solve_periodic(a: f64, d: &[f64]) -> Vec<f64> {
    let m = d.len();
    let diag = 1.0 + 2.0 * a;
    let off = -a;
    // Corners off*off are removed by the rank-one update u v^T with
    // u = (g, 0, .., 0, off), v = (1, 0, .., 0, off / g).
    let g = -diag;
    let mut b = alloc::vec![diag; m];
    b[0] -= g;
    b[m - 1] -= off * off / g;
    let thomas = |rhs: &[f64]| -> Vec<f64> {
        let mut c = alloc::vec![0.0; m];
        let mut x = alloc::vec![0.0; m];
        c[0] = off / b[0];
        x[0] = rhs[0] / b[0];
        for i in 1..m {
            let den = b[i] - off * c[i - 1];
            c[i] = off / den;
            x[i] = (rhs[i] - off * x[i - 1]) / den;
        }
        for i in (0..m - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    };
    let y = thomas(d);
    let mut u = alloc::vec![0.0; m];
    u[0] = g;
    u[m - 1] = off;
    let z = thomas(&u);
    let vy = y[0] + off / g * y[m - 1];
    let vz = z[0] + off / g * z[m - 1];
    let factor = vy / (1.0 + vz);
    y.iter().zip(&z).map(|(yi, zi)| yi - factor * zi).collect()
}

fn step_with(f: &HydroFields, gamma: f64, dt: f64, scheme: Scheme) -> Result<HydroFields> {
    let m = f.len();
    let dq = 1.0 / m as f64;
    let ar = dt / (gamma * dq * dq);
    let ae = 0.5 * ar;
    let mut lap_r = alloc::vec![0.0; m];
    let mut lap_e = alloc::vec![0.0; m];
    let mut lap_s = alloc::vec![0.0; m];
    laplacian(&f.r, &mut lap_r);
    laplacian(&f.e, &mut lap_e);
    let out = match scheme {
        Scheme::Explicit => {
            let s: Vec<f64> = f.r.iter().map(|r| 0.5 * r * r).collect();
            laplacian(&s, &mut lap_s);
            HydroFields {
                r: (0..m).map(|i| f.r[i] + ar * lap_r[i]).collect(),
                e: (0..m).map(|i| f.e[i] + ae * (lap_e[i] + lap_s[i])).collect(),
            }
        }
        Scheme::SemiImplicit => {
            let rhs: Vec<f64> = (0..m).map(|i| f.r[i] + 0.5 * ar * lap_r[i]).collect();
            let r = solve_periodic(0.5 * ar, &rhs);
            let s: Vec<f64> = (0..m)
                .map(|i| 0.25 * (f.r[i] * f.r[i] + r[i] * r[i]))
                .collect();
            laplacian(&s, &mut lap_s);
            let rhs: Vec<f64> = (0..m)
                .map(|i| f.e[i] + ae * (0.5 * lap_e[i] + lap_s[i]))
                .collect();
            let e = solve_periodic(0.5 * ae, &rhs);
            HydroFields { e, r }
        }
    };
    out.check_physical()?;
    Ok(out)
}

/// One step of length `cfg.dt`.
pub fn hydro_step(f: &HydroFields, cfg: &PdeConfig) -> Result<HydroFields> {
    cfg.check(f.len())?;
    step_with(f, cfg.gamma, cfg.dt, cfg.scheme)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HydroTrajectory {
    pub times: Vec<f64>,
    pub fields: Vec<HydroFields>,
}

fn march<F>(times: &[f64], dt: f64, mut step: F) -> Result<()>
where
    F: FnMut(Option<f64>) -> Result<()>,
{
    let mut now = 0.0;
    for &target in times {
        if target < now - 1e-15 {
            return Err(Error::InvalidArgument("sample times must be nondecreasing".into()));
        }
        while target - now > 1e-12 * dt {
            let h = (target - now).min(dt);
            let h = if target - now - h < 1e-9 * dt { target - now } else { h };
            step(Some(h))?;
            now += h;
        }
        now = target;
        step(None)?;
    }
    Ok(())
}

/// Solves up to each of `times` (nondecreasing, nonnegative), shortening the
/// last step before a sample time to land on it exactly.
pub fn solve_hydro(f0: &HydroFields, cfg: &PdeConfig, times: &[f64]) -> Result<HydroTrajectory> {
    cfg.check(f0.len())?;
    f0.check_physical()?;
    let mut cur = f0.clone();
    let mut out = HydroTrajectory {
        times: Vec::with_capacity(times.len()),
        fields: Vec::with_capacity(times.len()),
    };
    let mut k = 0;
    march(times, cfg.dt, |h| {
        match h {
            Some(h) => cur = step_with(&cur, cfg.gamma, h, cfg.scheme)?,
            None => {
                out.times.push(times[k]);
                out.fields.push(cur.clone());
                k += 1;
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// Times `0, dt, 2 dt, ...` up to `t_final`.
pub fn uniform_times(dt: f64, t_final: f64) -> Vec<f64> {
    let steps = (t_final / dt).round() as usize;
    (0..=steps).map(|i| i as f64 * dt).collect()
}

fn centred_gradient(u: &[f64], dq: f64) -> Vec<f64> {
    let m = u.len();
    (0..m)
        .map(|i| (u[(i + 1) % m] - u[(i + m - 1) % m]) / (2.0 * dq))
        .collect()
}

/// Residual of `theta_t = theta_qq / (2 gamma) + (r_q)^2 / gamma` for the
/// temperature `theta = e - r^2/2`, at every interior sample time.
pub fn temperature_residual(traj: &HydroTrajectory, gamma: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    let mut out = Vec::new();
    for w in 1..traj.times.len().saturating_sub(1) {
        let (t0, t1, t2) = (traj.times[w - 1], traj.times[w], traj.times[w + 1]);
        if !(t2 > t0) {
            return Err(Error::InvalidArgument("sample times must be increasing".into()));
        }
        let f = &traj.fields[w];
        let m = f.len();
        let dq = f.spacing();
        let (th0, th1, th2) = (
            traj.fields[w - 1].temperature(),
            f.temperature(),
            traj.fields[w + 1].temperature(),
        );
        let mut lap = alloc::vec![0.0; m];
        laplacian(&th1, &mut lap);
        let dr = centred_gradient(&f.r, dq);
        let res = (0..m)
            .map(|i| {
                (th2[i] - th0[i]) / (t2 - t0)
                    - lap[i] / (2.0 * gamma * dq * dq)
                    - dr[i] * dr[i] / gamma
            })
            .collect();
        out.push((t1, res));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyProduction {
    pub times: Vec<f64>,
    /// `int S(e, r) dq`.
    pub total: Vec<f64>,
    /// `(1/(2 gamma)) int [(beta_q / beta)^2 + 2 beta (r_q)^2] dq`.
    pub dissipation: Vec<f64>,
}

impl EntropyProduction {
    /// Central-difference `dS/dt` at interior times, paired with the
    /// dissipation there.
    pub fn rate_pairs(&self) -> Vec<(f64, f64, f64)> {
        (1..self.times.len().saturating_sub(1))
            .map(|i| {
                let rate = (self.total[i + 1] - self.total[i - 1])
                    / (self.times[i + 1] - self.times[i - 1]);
                (self.times[i], rate, self.dissipation[i])
            })
            .collect()
    }
}

pub fn entropy_production(traj: &HydroTrajectory, gamma: f64) -> EntropyProduction {
    let mut total = Vec::with_capacity(traj.times.len());
    let mut dissipation = Vec::with_capacity(traj.times.len());
    for f in &traj.fields {
        let dq = f.spacing();
        total.push(f.entropy_density().iter().sum::<f64>() * dq);
        let beta: Vec<f64> = f.temperature().iter().map(|t| 1.0 / t).collect();
        let db = centred_gradient(&beta, dq);
        let dr = centred_gradient(&f.r, dq);
        let d: f64 = (0..f.len())
            .map(|i| {
                let a = db[i] / beta[i];
                a * a + 2.0 * beta[i] * dr[i] * dr[i]
            })
            .sum::<f64>()
            * dq
            / (2.0 * gamma);
        dissipation.push(d);
    }
    EntropyProduction {
        times: traj.times.clone(),
        total,
        dissipation,
    }
}

/// Energy diffusivity of the pinned chain,
/// `(1/gamma) / (2 + nu^2 + sqrt(nu^2 (nu^2 + 4)))`.
pub fn pinned_diffusivity(nu: f64, gamma: f64) -> Result<f64> {
    if !(nu >= 0.0) || !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need nu >= 0 and gamma > 0, got nu = {nu}, gamma = {gamma}"
        )));
    }
    let n2 = nu * nu;
    Ok(1.0 / gamma / (2.0 + n2 + (n2 * (n2 + 4.0)).sqrt()))
}

/// `e_t = D e_qq` with the pinned diffusivity; returns the energy field at
/// each of `times`.
pub fn pinned_heat_solve(
    e0: &[f64],
    nu: f64,
    cfg: &PdeConfig,
    times: &[f64],
) -> Result<Vec<(f64, Vec<f64>)>> {
    let diff = pinned_diffusivity(nu, cfg.gamma)?;
    let m = e0.len();
    if m < 3 {
        return Err(Error::InvalidArgument("grid needs at least three points".into()));
    }
    // The explicit limit for e_t = D e_qq is dq^2 / (2 D).
    if cfg.scheme == Scheme::Explicit {
        let dq = 1.0 / m as f64;
        let limit = 0.5 * dq * dq / diff;
        if cfg.dt > limit {
            return Err(Error::StepTooLarge { dt: cfg.dt, limit });
        }
    }
    let mut cur = e0.to_vec();
    let mut out = Vec::with_capacity(times.len());
    let mut lap = alloc::vec![0.0; m];
    let mut k = 0;
    let dq2 = 1.0 / (m * m) as f64;
    march(times, cfg.dt, |h| {
        match h {
            Some(h) => {
                let a = diff * h / dq2;
                laplacian(&cur, &mut lap);
                cur = match cfg.scheme {
                    Scheme::Explicit => (0..m).map(|i| cur[i] + a * lap[i]).collect(),
                    Scheme::SemiImplicit => {
                        let rhs: Vec<f64> = (0..m).map(|i| cur[i] + 0.5 * a * lap[i]).collect();
                        solve_periodic(0.5 * a, &rhs)
                    }
                };
            }
            None => {
                out.push((times[k], cur.clone()));
                k += 1;
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// Amplitude `2 int f(q) cos(2 pi q) dq` of the first cosine mode on a grid.
pub fn cosine_amplitude(f: &[f64]) -> f64 {
    let m = f.len() as f64;
    f.iter()
        .enumerate()
        .map(|(i, v)| v * (2.0 * PI * i as f64 / m).cos())
        .sum::<f64>()
        * 2.0
        / m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_solver_inverts_operator() {
        let d: Vec<f64> = (0..9).map(|i| ((i * 5) % 7) as f64 - 2.0).collect();
        let a = 1.7;
        let x = solve_periodic(a, &d);
        let m = d.len();
        for i in 0..m {
            let lhs = (1.0 + 2.0 * a) * x[i] - a * (x[(i + m - 1) % m] + x[(i + 1) % m]);
            assert!((lhs - d[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_fields_are_fixed() {
        let f = HydroFields::new(alloc::vec![2.0; 16], alloc::vec![0.5; 16]).unwrap();
        for scheme in [Scheme::Explicit, Scheme::SemiImplicit] {
            let cfg = PdeConfig {
                gamma: 1.0,
                dt: 1e-3,
                scheme,
                t_final: 1.0,
            };
            let g = hydro_step(&f, &cfg).unwrap();
            for (a, b) in g.e.iter().chain(&g.r).zip(f.e.iter().chain(&f.r)) {
                assert!((a - b).abs() < 1e-14, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn explicit_step_limit() {
        let f = HydroFields::new(alloc::vec![2.0; 16], alloc::vec![0.5; 16]).unwrap();
        let cfg = PdeConfig {
            gamma: 1.0,
            dt: 1e-2,
            scheme: Scheme::Explicit,
            t_final: 1.0,
        };
        assert!(matches!(hydro_step(&f, &cfg), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn diffusivity_values() {
        assert!((pinned_diffusivity(0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let d = pinned_diffusivity(1.0, 1.0).unwrap();
        assert!((d - 1.0 / (3.0 + 5f64.sqrt())).abs() < 1e-15);
    }
}
