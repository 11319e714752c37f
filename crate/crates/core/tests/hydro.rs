use std::f64::consts::PI;

use approx::assert_relative_eq;

use vflip_core::hydro::*;
use vflip_core::profile::PotentialProfile;
use vflip_core::Error;

const TAU: f64 = 2.0 * PI;

fn cfg(gamma: f64, dt: f64, scheme: Scheme) -> PdeConfig {
    PdeConfig {
        gamma,
        dt,
        scheme,
        t_final: 0.0,
    }
}

fn cos_field(m: usize, c: f64, eps: f64) -> Vec<f64> {
    (0..m).map(|i| c + eps * (TAU * i as f64 / m as f64).cos()).collect()
}

/// Relative error of the first-mode decay rate against `rate`.
fn decay_rate_error(m: usize, gamma: f64, deformation: bool) -> f64 {
    let t = 0.01;
    let eps = 0.1;
    let f0 = if deformation {
        HydroFields::new(vec![2.0; m], cos_field(m, 0.0, eps)).unwrap()
    } else {
        HydroFields::new(cos_field(m, 2.0, eps), vec![0.0; m]).unwrap()
    };
    let c = cfg(gamma, 1e-6, Scheme::SemiImplicit);
    let traj = solve_hydro(&f0, &c, &[t]).unwrap();
    let f = &traj.fields[0];
    let amp = if deformation { cosine_amplitude(&f.r) } else { cosine_amplitude(&f.e) };
    let rate = -(amp / eps).ln() / t;
    let expect = if deformation { TAU * TAU / gamma } else { TAU * TAU / (2.0 * gamma) };
    (rate - expect).abs() / expect
}

#[test]
fn manufactured_decay_rates_converge_at_second_order() {
    for (gamma, deformation) in [(1.0, true), (1.0, false), (2.0, true), (0.5, false)] {
        let errs: Vec<f64> =
            [16, 32, 64].iter().map(|&m| decay_rate_error(m, gamma, deformation)).collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.2, "gamma {gamma}, r {deformation}: {errs:?}");
        }
        assert!(errs[2] < 1e-3);
    }
}

#[test]
fn constant_fields_and_conservation() {
    let f = HydroFields::new(vec![1.3; 20], vec![0.4; 20]).unwrap();
    for scheme in [Scheme::Explicit, Scheme::SemiImplicit] {
        let dt = if scheme == Scheme::Explicit { 1e-3 } else { 1e-2 };
        let traj = solve_hydro(&f, &cfg(1.0, dt, scheme), &[0.5]).unwrap();
        let g = &traj.fields[0];
        assert!(g.e.iter().chain(&g.r).zip(f.e.iter().chain(&f.r)).all(|(a, b)| (a - b).abs() < 1e-13));
        let ep = entropy_production(&traj, 1.0);
        assert!(ep.dissipation[0].abs() < 1e-20);
    }

    let prof = PotentialProfile::cosine_temperature(0.2, 0.2).unwrap();
    let f0 = HydroFields::from_profile(&prof, 128).unwrap();
    let times = uniform_times(1e-3, 0.2);
    let traj = solve_hydro(&f0, &cfg(1.0, 1e-3, Scheme::SemiImplicit), &times).unwrap();
    for f in &traj.fields {
        assert!((f.integral_e() - f0.integral_e()).abs() <= 1e-10);
        assert!((f.integral_r() - f0.integral_r()).abs() <= 1e-10);
    }
}

#[test]
fn explicit_and_semi_implicit_agree() {
    let prof = PotentialProfile::cosine_temperature(0.2, 0.2).unwrap();
    let m = 64;
    let f0 = HydroFields::from_profile(&prof, m).unwrap();
    let dq2 = 1.0 / (m * m) as f64;
    let a = solve_hydro(&f0, &cfg(1.0, 0.4 * dq2, Scheme::Explicit), &[0.02]).unwrap();
    let b = solve_hydro(&f0, &cfg(1.0, 0.4 * dq2, Scheme::SemiImplicit), &[0.02]).unwrap();
    let d = a.fields[0]
        .e
        .iter()
        .zip(&b.fields[0].e)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(d < 5e-4, "{d}");
    assert!(matches!(
        hydro_step(&f0, &cfg(1.0, dq2, Scheme::Explicit)),
        Err(Error::StepTooLarge { .. })
    ));
    assert!(matches!(
        HydroFields::new(vec![0.1; 4], vec![1.0; 4]),
        Err(Error::PhysicalRegionExit { .. })
    ));
}

/// Largest residual near `t = 0.01` with time errors made negligible, so
/// that the spatial order shows.
fn temperature_residual_max(m: usize) -> f64 {
    let prof = PotentialProfile::cosine_temperature(0.2, 0.2).unwrap();
    let f0 = HydroFields::from_profile(&prof, m).unwrap();
    let dt = 1e-6;
    let times = [0.01 - 1e-4, 0.01, 0.01 + 1e-4];
    let traj = solve_hydro(&f0, &cfg(1.0, dt, Scheme::SemiImplicit), &times).unwrap();
    temperature_residual(&traj, 1.0)
        .unwrap()
        .iter()
        .flat_map(|(_, r)| r.iter().map(|v| v.abs()))
        .fold(0.0, f64::max)
}

#[test]
fn temperature_residual_is_second_order() {
    let r: Vec<f64> = [32, 64, 128].iter().map(|&m| temperature_residual_max(m)).collect();
    for w in r.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 3.5 && ratio < 4.5, "{r:?}");
    }
    let f = HydroFields::new(vec![1.0; 8], vec![0.2; 8]).unwrap();
    let traj = solve_hydro(&f, &cfg(1.0, 0.01, Scheme::SemiImplicit), &[0.0, 0.01, 0.02]).unwrap();
    assert!(temperature_residual(&traj, 1.0).unwrap()[0].1.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn minimum_principle_and_entropy_production() {
    let prof = PotentialProfile::cosine_temperature(0.2, 0.2).unwrap();
    let mut gaps = Vec::new();
    for m in [32, 64, 128] {
        let f0 = HydroFields::from_profile(&prof, m).unwrap();
        let dt = 4.0 / (m * m) as f64;
        let times = uniform_times(dt, 0.05);
        let traj = solve_hydro(&f0, &cfg(1.0, dt, Scheme::SemiImplicit), &times).unwrap();
        let mins: Vec<f64> = traj.fields.iter().map(HydroFields::min_temperature).collect();
        assert!(mins.windows(2).all(|w| w[1] >= w[0] - 1e-8));
        let ep = entropy_production(&traj, 1.0);
        assert!(ep.total.windows(2).all(|w| w[1] > w[0]));
        let pairs = ep.rate_pairs();
        assert!(pairs.iter().all(|(_, rate, _)| *rate >= -1e-8));
        gaps.push(
            pairs
                .iter()
                .map(|(_, rate, d)| (rate - d).abs() / d)
                .fold(0.0, f64::max),
        );
    }
    // At least second order under refinement.
    for w in gaps.windows(2) {
        assert!(w[0] / w[1] > 3.5, "{gaps:?}");
    }
    assert!(gaps[2] < 1e-3);
}

#[test]
fn pinned_diffusivity_and_heat_solve() {
    assert_relative_eq!(pinned_diffusivity(0.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
    let d = pinned_diffusivity(1.0, 1.0).unwrap();
    assert_relative_eq!(d, 1.0 / (3.0 + 5f64.sqrt()), epsilon = 1e-15);
    assert_relative_eq!(d, 0.190983, epsilon = 1e-6);
    assert_relative_eq!(pinned_diffusivity(1.0, 2.0).unwrap(), d / 2.0, epsilon = 1e-15);
    assert!(pinned_diffusivity(1.0, 0.0).is_err());

    let mut errs = Vec::new();
    for m in [16, 32, 64] {
        let e0 = cos_field(m, 1.0, 0.2);
        let c = cfg(1.0, 1e-5, Scheme::SemiImplicit);
        let out = pinned_heat_solve(&e0, 1.0, &c, &[0.0, 0.05]).unwrap();
        let mass0: f64 = out[0].1.iter().sum();
        let mass1: f64 = out[1].1.iter().sum();
        assert!((mass0 - mass1).abs() <= 1e-10 * m as f64);
        let rate = -(cosine_amplitude(&out[1].1) / 0.2).ln() / 0.05;
        errs.push((rate - d * TAU * TAU).abs() / (d * TAU * TAU));
    }
    for w in errs.windows(2) {
        assert!((w[0] / w[1] - 4.0).abs() < 0.2, "{errs:?}");
    }

    // nu = 0 coincides with the energy equation of the unpinned system at r = 0.
    let m = 32;
    let e0 = cos_field(m, 1.0, 0.2);
    let c = cfg(1.0, 1e-4, Scheme::SemiImplicit);
    let pinned = pinned_heat_solve(&e0, 0.0, &c, &[0.03]).unwrap();
    let full = solve_hydro(&HydroFields::new(e0.clone(), vec![0.0; m]).unwrap(), &c, &[0.03]).unwrap();
    for (a, b) in pinned[0].1.iter().zip(&full.fields[0].e) {
        assert!((a - b).abs() < 1e-13);
    }
    let flat = pinned_heat_solve(&[0.7; 12], 1.0, &c, &[0.1]).unwrap();
    assert!(flat[0].1.iter().all(|v| (v - 0.7).abs() < 1e-12));
}
