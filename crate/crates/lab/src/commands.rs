//! The `vflip` subcommands. Each one writes its files into the output
//! directory and returns the summary with every check it ran.

use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use vflip_core::chain::Model;
use vflip_core::gaussian::{
    expected_moment_ode, gibbs_moments_from_profiles, verify_moment_bounds, DiagonalMoments, MomentState, OdeOptions,
};
use vflip_core::harris::{simulate_harris_with, SimulationMode};
use vflip_core::hydro::{
    entropy_production, pinned_diffusivity, pinned_heat_solve, solve_hydro, uniform_times, HydroFields, PdeConfig,
};
use vflip_core::profile::PeriodicField;
use vflip_core::scaling::{fit_diffusivity, weak_error, EmpiricalProfiles, LocalEquilibrium, TestFunction};
use vflip_core::seeds::{stream, Purpose};
use vflip_core::spectral::Propagator;

use crate::config::{Engine, ModelKind, RunConfig};
use crate::error::{LabError, LabResult};
use crate::experiment::{run_diffusive_experiment, run_pinned_experiment, ExperimentPlan};
use crate::identities::{
    duality_errors, fd_residual_max, moment_path_checks, moment_paths, summed_bound_ratio, MomentStart,
};
use crate::output::{json_f64, CheckResult, Csv, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Moments,
    Pde,
    Converge,
    VerifyIdentities,
    FitDiffusivity,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Moments => "moments",
            Self::Pde => "pde",
            Self::Converge => "converge",
            Self::VerifyIdentities => "verify-identities",
            Self::FitDiffusivity => "fit-diffusivity",
        }
    }
}

/// Runs `cmd`, writes its outputs and `summary.json` under `out`.
pub fn run(cmd: Command, cfg: &RunConfig, out: &Path) -> LabResult<Summary> {
    std::fs::create_dir_all(out).map_err(|e| LabError::io(out, e))?;
    let mut summary = Summary::new(cmd.name(), cfg.seed);
    match cmd {
        Command::Simulate => simulate(cfg, out, &mut summary)?,
        Command::Moments => moments(cfg, out, &mut summary)?,
        Command::Pde => pde(cfg, out, &mut summary)?,
        Command::Converge => converge(cfg, out, &mut summary)?,
        Command::VerifyIdentities => verify_identities(cfg, &mut summary)?,
        Command::FitDiffusivity => fit(cfg, out, &mut summary)?,
    }
    summary.write(out)?;
    Ok(summary)
}

fn unpinned_only(cfg: &RunConfig, cmd: &str) -> LabResult<()> {
    match cfg.model {
        ModelKind::Unpinned => Ok(()),
        ModelKind::Pinned { .. } => Err(LabError::Config(format!(
            "model.kind: {cmd} runs the unpinned chain; pinned runs go through pde and fit-diffusivity"
        ))),
    }
}

fn micro(times: &[f64], n: usize) -> Vec<f64> {
    times.iter().map(|t| t * (n * n) as f64).collect()
}

fn simulate(cfg: &RunConfig, out: &Path, summary: &mut Summary) -> LabResult<()> {
    unpinned_only(cfg, "simulate")?;
    let gamma = cfg.chain.gamma;
    for &n in &cfg.chain.sizes {
        budget(&plan_for(cfg, n, Engine::Particle))?;
        let times = micro(&cfg.plan.times, n);
        let le = LocalEquilibrium::new(&cfg.profile, n)?;
        let prop = Propagator::new(Model::Unpinned, n)?;
        let label = n as u64;
        let runs: Vec<(f64, f64, Vec<(f64, Vec<f64>, Vec<f64>)>)> = (0..cfg.plan.ensemble as u64)
            .into_par_iter()
            .map(|m| {
                let s0 = le.sample(&mut stream(cfg.seed, label, m, Purpose::InitialState));
                let c0 = s0.conserved_totals();
                let mut clock = stream(cfg.seed, label, m, Purpose::FlipClock);
                let (mut de, mut dr): (f64, f64) = (0.0, 0.0);
                let mut snaps = Vec::new();
                simulate_harris_with(&prop, &s0, gamma, &times, SimulationMode::EventDriven, &mut clock, |t, s| {
                    let c = s.conserved_totals();
                    de = de.max((c.energy - c0.energy).abs() / c0.energy.abs());
                    dr = dr.max((c.deformation - c0.deformation).abs() / c0.deformation.abs().max(1.0));
                    if m == 0 {
                        snaps.push((t, s.r.clone(), s.p.clone()));
                    }
                })?;
                Ok((de, dr, snaps))
            })
            .collect::<LabResult<_>>()?;
        let mut csv = Csv::new(&["t", "x", "r", "p"]);
        for (t, r, p) in &runs[0].2 {
            for x in 0..n {
                csv.row(&[(*t).into(), x.into(), r[x].into(), p[x].into()]);
            }
        }
        let path = out.join(format!("trajectory_N{n}.csv"));
        csv.write(&path)?;
        summary.files.push(path);
        let de = runs.iter().map(|r| r.0).fold(0.0, f64::max);
        let dr = runs.iter().map(|r| r.1).fold(0.0, f64::max);
        summary.checks.push(CheckResult::at_most(format!("N{n}.energy_drift"), de, 1e-9));
        summary.checks.push(CheckResult::at_most(format!("N{n}.deformation_drift"), dr, 1e-9));
    }
    Ok(())
}

fn budget(plan: &ExperimentPlan) -> LabResult<()> {
    let expected = plan.expected_events();
    if expected > plan.max_events {
        return Err(vflip_core::Error::BudgetExceeded {
            expected,
            ceiling: plan.max_events,
        }
        .into());
    }
    Ok(())
}

fn moment_csv(rows: &[(f64, DiagonalMoments)]) -> Csv {
    let mut csv = Csv::new(&["t", "x", "mean_r", "mean_e", "V_xx", "U_xx"]);
    for (t, d) in rows {
        for x in 0..d.u.len() {
            // E[e_x] = (E[p_x^2] + E[r_x^2]) / 2 = (V_xx + U_xx) / 2.
            let e = 0.5 * (d.v[x] + d.u[x]);
            csv.row(&[(*t).into(), x.into(), d.rho[x].into(), e.into(), d.v[x].into(), d.u[x].into()]);
        }
    }
    csv
}

fn moments(cfg: &RunConfig, out: &Path, summary: &mut Summary) -> LabResult<()> {
    unpinned_only(cfg, "moments")?;
    let gamma = cfg.chain.gamma;
    for &n in &cfg.chain.sizes {
        let point = gibbs_moments_from_profiles(&cfg.profile, n)?;
        let big_k = point.k_witness();
        let ms0 = point.into_state();
        let times = micro(&cfg.plan.times, n);
        let prop = Propagator::new(Model::Unpinned, n)?;
        let rows = match cfg.plan.engine {
            Engine::MomentMc => {
                budget(&plan_for(cfg, n, Engine::MomentMc))?;
                let report = moment_paths(&prop, MomentStart::Point(&ms0), gamma, &times, cfg.plan.ensemble, cfg.seed)?;
                summary.checks.extend(moment_path_checks(&format!("N{n}."), &report));
                let bounds = verify_moment_bounds(&report.slices, 4, big_k);
                summary.checks.push(CheckResult::at_least(
                    format!("N{n}.moment_bound_margin"),
                    bounds.worst_margin(),
                    0.0,
                ));
                summary
                    .extra
                    .insert(format!("N{n}.summed_bound_ratio"), json_f64(summed_bound_ratio(&bounds)));
                report.averages
            }
            Engine::Ode => {
                let opts = OdeOptions {
                    check_halving: true,
                    ..OdeOptions::for_rate(gamma)
                };
                let run = expected_moment_ode(Model::Unpinned, &ms0, gamma, &times, opts)?;
                let eig = run
                    .snapshots
                    .iter()
                    .map(|(_, ms)| ms.min_cov_eigenvalue())
                    .fold(f64::INFINITY, f64::min);
                summary
                    .checks
                    .push(CheckResult::at_least(format!("N{n}.min_cov_eigenvalue"), eig, -1e-10));
                let halving = run.halving_discrepancy.unwrap_or(0.0);
                summary
                    .checks
                    .push(CheckResult::at_most(format!("N{n}.ode_halving_discrepancy"), halving, 1e-6));
                run.snapshots
                    .iter()
                    .map(|(t, ms)| (*t, DiagonalMoments::of(ms)))
                    .collect()
            }
            Engine::Particle => {
                return Err(LabError::Config(
                    "plan.engine: moments needs engine \"moment_mc\" or \"ode\"".into(),
                ))
            }
        };
        let path = out.join(format!("moments_N{n}.csv"));
        moment_csv(&rows).write(&path)?;
        summary.files.push(path);
    }
    Ok(())
}

fn pde_config(cfg: &RunConfig, t_final: f64) -> PdeConfig {
    PdeConfig {
        gamma: cfg.chain.gamma,
        dt: cfg.pde.dt,
        scheme: cfg.pde.scheme,
        t_final,
    }
}

fn pde(cfg: &RunConfig, out: &Path, summary: &mut Summary) -> LabResult<()> {
    let m = cfg.pde.grid;
    let t_final = cfg.pde.t_final;
    let times = uniform_times(t_final / 100.0, t_final);
    let pc = pde_config(cfg, t_final);
    match cfg.model {
        ModelKind::Unpinned => {
            let f0 = HydroFields::from_profile(&cfg.profile, m)?;
            let traj = solve_hydro(&f0, &pc, &times)?;
            let mut csv = Csv::new(&["t", "q", "e", "r", "S_density"]);
            for (t, f) in traj.times.iter().zip(&traj.fields) {
                let s = f.entropy_density();
                for i in 0..m {
                    csv.row(&[(*t).into(), (i as f64 / m as f64).into(), f.e[i].into(), f.r[i].into(), s[i].into()]);
                }
            }
            let path = out.join("pde.csv");
            csv.write(&path)?;
            summary.files.push(path);

            let mins: Vec<f64> = traj.fields.iter().map(HydroFields::min_temperature).collect();
            let worst_drop = mins.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
            summary.checks.push(CheckResult::at_most("minimum_principle_drop", worst_drop, 1e-8));
            let ep = entropy_production(&traj, cfg.chain.gamma);
            let worst_rate = ep.rate_pairs().iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            summary
                .checks
                .push(CheckResult::at_least("entropy_production_rate", worst_rate, -1e-8));
            let gap = ep
                .rate_pairs()
                .iter()
                .map(|(_, rate, d)| (rate - d).abs() / d.abs().max(1e-300))
                .fold(0.0, f64::max);
            summary.extra.insert("entropy_rate_vs_dissipation".into(), json_f64(gap));
            let last = traj.fields.last().expect("at least one time");
            let drift = (last.integral_e() - f0.integral_e())
                .abs()
                .max((last.integral_r() - f0.integral_r()).abs());
            summary.checks.push(CheckResult::at_most("conservation_drift", drift, 1e-10));
        }
        ModelKind::Pinned { nu } => {
            let e0: Vec<f64> = cfg.profile.beta.sample(m).iter().map(|b| 1.0 / b).collect();
            let traj = pinned_heat_solve(&e0, nu, &pc, &times)?;
            let mut csv = Csv::new(&["t", "q", "e"]);
            for (t, e) in &traj {
                for (i, v) in e.iter().enumerate() {
                    csv.row(&[(*t).into(), (i as f64 / m as f64).into(), (*v).into()]);
                }
            }
            let path = out.join("pinned_pde.csv");
            csv.write(&path)?;
            summary.files.push(path);
            let mass0: f64 = e0.iter().sum::<f64>() / m as f64;
            let drift = traj
                .iter()
                .map(|(_, e)| (e.iter().sum::<f64>() / m as f64 - mass0).abs())
                .fold(0.0, f64::max);
            summary.checks.push(CheckResult::at_most("conservation_drift", drift, 1e-10));
            let lo0 = e0.iter().copied().fold(f64::INFINITY, f64::min);
            let lo = traj
                .iter()
                .flat_map(|(_, e)| e.iter().copied())
                .fold(f64::INFINITY, f64::min);
            summary.checks.push(CheckResult::at_most("minimum_principle_drop", lo0 - lo, 1e-8));
            summary
                .extra
                .insert("diffusivity".into(), json_f64(pinned_diffusivity(nu, cfg.chain.gamma)?));
        }
    }
    Ok(())
}

fn plan_for(cfg: &RunConfig, n: usize, engine: Engine) -> ExperimentPlan<'_> {
    ExperimentPlan {
        n,
        gamma: cfg.chain.gamma,
        times: &cfg.plan.times,
        ensemble: cfg.plan.ensemble,
        block_l: cfg.plan.block_l,
        cutoff_m: cfg.plan.cutoff_m,
        profile: &cfg.profile,
        engine,
        seed: cfg.seed,
        max_events: cfg.plan.max_events,
    }
}

/// Weak errors of one `(N, t)` pair, as `(test, field, error, se)`.
pub type WeakRow = (TestFunction, &'static str, f64, f64);

/// Result of the scaling experiment over the N-list.
#[derive(Debug, Clone)]
pub struct Convergence {
    pub sizes: Vec<usize>,
    pub times: Vec<f64>,
    /// `profiles[i][j]`: size `i`, time `j`.
    pub profiles: Vec<Vec<EmpiricalProfiles>>,
    pub pde: Vec<HydroFields>,
    pub weak: Vec<Vec<Vec<WeakRow>>>,
    /// Oscillation amplitudes `(max - min) / 2` of the initial `e` and `r`.
    pub amplitude: (f64, f64),
}

/// Runs the scaling experiment and the macroscopic solution at the plan
/// times, and computes the weak errors.
pub fn convergence(cfg: &RunConfig, engine: Engine) -> LabResult<Convergence> {
    unpinned_only(cfg, "converge")?;
    let f0 = HydroFields::from_profile(&cfg.profile, cfg.pde.grid)?;
    let t_end = *cfg.plan.times.last().expect("nonempty");
    let traj = solve_hydro(&f0, &pde_config(cfg, t_end), &cfg.plan.times)?;
    let osc = |v: &[f64]| {
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        0.5 * (hi - lo)
    };
    let amplitude = (osc(&f0.e), osc(&f0.r));
    let mut profiles = Vec::new();
    let mut weak = Vec::new();
    for &n in &cfg.chain.sizes {
        let p = run_diffusive_experiment(&plan_for(cfg, n, engine))?;
        let mut rows = Vec::new();
        for (emp, (t, field)) in p.iter().zip(traj.times.iter().zip(&traj.fields)) {
            let w = weak_error(emp, field, *t, &TestFunction::ACCEPTANCE)?;
            let mut r = Vec::new();
            for x in w {
                r.push((x.test, "e", x.e_error, x.e_se));
                r.push((x.test, "r", x.r_error, x.r_se));
            }
            rows.push(r);
        }
        weak.push(rows);
        profiles.push(p);
    }
    Ok(Convergence {
        sizes: cfg.chain.sizes.clone(),
        times: cfg.plan.times.clone(),
        profiles,
        pde: traj.fields,
        weak,
        amplitude,
    })
}

impl Convergence {
    /// Monotone trend, allowing steps up by at most `max(3 SE, 1e-9)` where
    /// SE combines both sizes; the bound at the largest size relative to the
    /// amplitude; and `G = 1` within three standard errors.
    pub fn checks(&self, tol: f64) -> Vec<CheckResult> {
        let mut out = Vec::new();
        let last = self.sizes.len() - 1;
        for (j, t) in self.times.iter().enumerate() {
            for k in 0..self.weak[0][j].len() {
                let (test, field, _, _) = self.weak[0][j][k];
                let name = format!("t{t}.G{}.{field}", test.label());
                let mut worst_rise = f64::NEG_INFINITY;
                for i in 0..last {
                    let (_, _, a, sa) = self.weak[i][j][k];
                    let (_, _, b, sb) = self.weak[i + 1][j][k];
                    let floor = (3.0 * (sa * sa + sb * sb).sqrt()).max(1e-9);
                    worst_rise = worst_rise.max(b - a - floor);
                }
                if last > 0 {
                    out.push(CheckResult::at_most(format!("{name}.trend_excess"), worst_rise, 0.0));
                }
                let (_, _, e, se) = self.weak[last][j][k];
                let amp = if field == "e" { self.amplitude.0 } else { self.amplitude.1 };
                out.push(CheckResult::at_most(format!("{name}.relative_error"), e / amp, tol));
                if test == TestFunction::One {
                    out.push(CheckResult::at_most(
                        format!("{name}.conservation_excess"),
                        e - (3.0 * se).max(1e-9),
                        0.0,
                    ));
                }
            }
        }
        out
    }
}

fn converge(cfg: &RunConfig, out: &Path, summary: &mut Summary) -> LabResult<()> {
    let conv = convergence(cfg, cfg.plan.engine)?;
    for (i, &n) in conv.sizes.iter().enumerate() {
        for (j, emp) in conv.profiles[i].iter().enumerate() {
            let field = &conv.pde[j];
            let (ie, ir) = field.interpolants()?;
            let (ie, ir) = (PeriodicField::Series(ie), PeriodicField::Series(ir));
            let mut csv = Csv::new(&["q", "emp_e", "se_e", "emp_r", "se_r", "pde_e", "pde_r"]);
            for b in 0..emp.e.len() {
                let q = emp.position(b);
                csv.row(&[
                    q.into(),
                    emp.e[b].into(),
                    emp.se_e[b].into(),
                    emp.r[b].into(),
                    emp.se_r[b].into(),
                    ie.value(q).into(),
                    ir.value(q).into(),
                ]);
            }
            let path = out.join(format!("profiles_N{n}_t{j}.csv"));
            csv.write(&path)?;
            summary.files.push(path);
        }
    }
    let mut weak = serde_json::Map::new();
    for (i, &n) in conv.sizes.iter().enumerate() {
        for (j, t) in conv.times.iter().enumerate() {
            for (test, field, e, se) in &conv.weak[i][j] {
                weak.insert(
                    format!("N{n}.t{t}.G{}.{field}", test.label()),
                    json!({ "error": json_f64(*e), "se": json_f64(*se) }),
                );
            }
            let d = conv.profiles[i][j].discarded_energy_fraction;
            weak.insert(format!("N{n}.t{t}.discarded_energy_fraction"), json_f64(d));
        }
    }
    summary.extra.insert("engine".into(), json!(cfg.plan.engine.name()));
    summary.extra.insert("weak_errors".into(), serde_json::Value::Object(weak));
    summary.checks.extend(conv.checks(cfg.checks.weak_error));
    Ok(())
}

/// The identity suite of `verify-identities`.
pub fn identity_checks(cfg: &RunConfig) -> LabResult<Vec<CheckResult>> {
    let mut checks = Vec::new();
    let fd = fd_residual_max(cfg.checks.identity_states, 8, &[0.5, 1.0, 2.0], cfg.seed)?;
    checks.push(CheckResult::at_most("fd_residual_max", fd, 1e-12));
    let (bij, fen, grad) = duality_errors(100, cfg.seed)?;
    checks.push(CheckResult::at_most("bijection_error", bij, 1e-12));
    checks.push(CheckResult::at_most("fenchel_error", fen, 1e-12));
    checks.push(CheckResult::at_most("entropy_gradient_error", grad, 1e-6));

    let n = 8;
    let gamma = cfg.chain.gamma;
    let point = gibbs_moments_from_profiles(&cfg.profile, n)?;
    let big_k = point.k_witness();
    let ms0: MomentState = point.into_state();
    let prop = Propagator::new(Model::Unpinned, n)?;
    let times: Vec<f64> = (0..=8).map(|i| 0.05 * (n * n) as f64 * i as f64 / 8.0).collect();
    let report = moment_paths(&prop, MomentStart::Point(&ms0), gamma, &times, 32, cfg.seed)?;
    checks.extend(moment_path_checks("moments.", &report));
    let bounds = verify_moment_bounds(&report.slices, 4, big_k);
    checks.push(CheckResult::at_least("moments.bound_margin", bounds.worst_margin(), 0.0));
    Ok(checks)
}

fn verify_identities(cfg: &RunConfig, summary: &mut Summary) -> LabResult<()> {
    summary.checks.extend(identity_checks(cfg)?);
    Ok(())
}

fn fit(cfg: &RunConfig, out: &Path, summary: &mut Summary) -> LabResult<()> {
    let ModelKind::Pinned { nu } = cfg.model else {
        return Err(LabError::Config("model.kind: fit-diffusivity needs kind = \"pinned\"".into()));
    };
    if cfg.plan.times.len() < 3 {
        return Err(LabError::Config("plan.times: fit-diffusivity needs at least three times".into()));
    }
    let gamma = cfg.chain.gamma;
    let expect = pinned_diffusivity(nu, gamma)?;
    summary.extra.insert("diffusivity_theory".into(), json_f64(expect));
    for &n in &cfg.chain.sizes {
        let run = run_pinned_experiment(
            n,
            nu,
            gamma,
            &cfg.plan.times,
            cfg.plan.ensemble,
            &cfg.profile.beta,
            cfg.seed,
            cfg.plan.max_events,
        )?;
        let mut csv = Csv::new(&["t", "amplitude", "se"]);
        for a in &run.amplitudes {
            csv.row(&[a.t.into(), a.amplitude.into(), a.se.into()]);
        }
        let path = out.join(format!("mode_amplitude_N{n}.csv"));
        csv.write(&path)?;
        summary.files.push(path);
        let f = fit_diffusivity(&run.amplitudes)?;
        let rel = (f.diffusivity - expect).abs() / expect;
        summary.extra.insert(
            format!("N{n}.fit"),
            json!({
                "diffusivity": json_f64(f.diffusivity),
                "slope": json_f64(f.slope),
                "slope_se": json_f64(f.slope_se),
                "intercept": json_f64(f.intercept),
            }),
        );
        summary
            .checks
            .push(CheckResult::at_most(format!("N{n}.diffusivity_relative_error"), rel, cfg.checks.diffusivity));
    }
    Ok(())
}
