use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vflip_core::chain::Model;
use vflip_core::harris::{simulate_harris_with, SimulationMode};
use vflip_core::hydro::*;
use vflip_core::profile::{PeriodicField, PotentialProfile};
use vflip_core::scaling::*;
use vflip_core::spectral::Propagator;
use vflip_core::stats::{FieldAccumulator, MeanVar};
use vflip_core::thermo::GibbsParams;
use vflip_core::Error;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn unit_local_equilibrium_is_standard_normal() {
    let prof = PotentialProfile::homogeneous(GibbsParams::new(1.0, 0.0).unwrap()).unwrap();
    let le = LocalEquilibrium::new(&prof, 8).unwrap();
    let mut g = rng(1);
    let (mut m, mut sq) = (MeanVar::default(), MeanVar::default());
    for _ in 0..20_000 {
        let s = le.sample(&mut g);
        for v in s.r.iter().chain(&s.p) {
            m.push(*v);
            sq.push(v * v);
        }
    }
    assert!(m.mean().abs() < 3.0 * m.std_error());
    assert!((sq.mean() - 1.0).abs() < 3.0 * sq.std_error());
}

#[test]
fn local_equilibrium_site_mean_matches_tension() {
    // beta = 2, lambda = 1: mean deformation -lambda / beta = -0.5.
    let prof = PotentialProfile::homogeneous(GibbsParams::new(2.0, 1.0).unwrap()).unwrap();
    let le = LocalEquilibrium::new(&prof, 4).unwrap();
    let mut g = rng(2);
    let (mut r, mut p) = (MeanVar::default(), MeanVar::default());
    for _ in 0..100_000 {
        let s = le.sample(&mut g);
        r.push(s.r[1]);
        p.push(s.p[1] * s.p[1]);
    }
    assert!((r.mean() + 0.5).abs() < 3.0 * r.std_error(), "{}", r.mean());
    assert!((p.mean() - 0.5).abs() < 3.0 * p.std_error());

    let bad = PotentialProfile {
        beta: PeriodicField::constant(-1.0),
        lambda: PeriodicField::constant(0.0),
    };
    assert!(LocalEquilibrium::new(&bad, 4).is_err());
}

#[test]
fn empirical_profiles_concentrate() {
    let prof = PotentialProfile::cosine_temperature(0.2, 0.2).unwrap();
    let fine: Vec<f64> = (0..4096).map(|i| prof.averages_at(i as f64 / 4096.0).e).collect();
    let target = grid_integral(&fine, TestFunction::Cos(1));
    let mut rms = Vec::new();
    for n in [32, 128, 512] {
        let le = LocalEquilibrium::new(&prof, n).unwrap();
        let mut g = rng(n as u64);
        let mut sq = MeanVar::default();
        for _ in 0..400 {
            let e = le.sample(&mut g).site_energies();
            sq.push((grid_integral(&e, TestFunction::Cos(1)) - target).powi(2));
        }
        rms.push(sq.mean().sqrt());
    }
    // N^{-1/2}: a factor 2 per quadrupling.
    for w in rms.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 1.6 && ratio < 2.5, "{rms:?}");
    }
}

#[test]
fn cutoff_tail_on_unit_temperature() {
    // At unit temperature e_x is Exp(1): E[e; e > M] / E[e] = (1 + M) e^{-M}.
    let m: f64 = 10.0;
    let oracle = (1.0 + m) * (-m).exp();
    assert!(oracle < 1e-3);
    let prof = PotentialProfile::homogeneous(GibbsParams::new(1.0, 0.0).unwrap()).unwrap();
    let le = LocalEquilibrium::new(&prof, 1000).unwrap();
    let mut g = rng(3);
    let mut frac = MeanVar::default();
    for _ in 0..200 {
        let s = le.sample(&mut g);
        let b = empirical_block_average(&s.site_energies(), &s.r, 10, Some(m)).unwrap();
        frac.push(b.discarded_energy_fraction);
    }
    assert!(frac.mean() < 1e-3);
    assert!((frac.mean() - oracle).abs() < 4.0 * frac.std_error(), "{}", frac.mean());

    let e = [1.0, 20.0, 3.0, 4.0];
    let b = empirical_block_average(&e, &[0.0; 4], 2, Some(10.0)).unwrap();
    assert_eq!(b.e, vec![0.5, 3.5]);
    assert_eq!(b.discarded_sites, 1);
    assert!(empirical_block_average(&e, &[0.0; 4], 2, Some(0.0)).is_err());
}

#[test]
fn blocks_of_linear_data_sit_at_their_centres() {
    let n = 64;
    let f = |q: f64| 1.0 + 3.0 * q;
    let e: Vec<f64> = (0..n).map(|x| f(x as f64 / n as f64)).collect();
    for block in [1, 2, 4, 8, 16] {
        let b = empirical_block_average(&e, &e, block, None).unwrap();
        assert_eq!(b.e.len(), n / block);
        let prof = EmpiricalProfiles {
            t: 0.0,
            n,
            block,
            e: b.e.clone(),
            se_e: vec![0.0; b.e.len()],
            r: b.r.clone(),
            se_r: vec![0.0; b.e.len()],
            functionals: Vec::new(),
            discarded_energy_fraction: 0.0,
        };
        for (k, v) in b.e.iter().enumerate() {
            assert!((v - f(prof.position(k))).abs() < 1e-12);
        }
    }
}

#[test]
fn weak_error_self_test_and_time_mismatch() {
    let prof = PotentialProfile::cosine_temperature(0.2, 0.2).unwrap();
    let f0 = HydroFields::from_profile(&prof, 64).unwrap();
    let cfg = PdeConfig {
        gamma: 1.0,
        dt: 1e-4,
        scheme: Scheme::SemiImplicit,
        t_final: 0.01,
    };
    let traj = solve_hydro(&f0, &cfg, &[0.01]).unwrap();
    let pde = &traj.fields[0];
    let own = EmpiricalProfiles {
        t: 0.01,
        n: 64,
        block: 1,
        e: pde.e.clone(),
        se_e: vec![0.0; 64],
        r: pde.r.clone(),
        se_r: vec![0.0; 64],
        functionals: Vec::new(),
        discarded_energy_fraction: 0.0,
    };
    let rows = weak_error(&own, pde, 0.01, &TestFunction::ACCEPTANCE).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|w| w.e_error < 1e-14 && w.r_error < 1e-14));
    assert!(matches!(
        weak_error(&own, pde, 0.05, &TestFunction::ACCEPTANCE),
        Err(Error::TimeMismatch { .. })
    ));
}

#[test]
fn grid_integral_is_exact_for_low_modes() {
    let m = 32;
    let f: Vec<f64> = (0..m)
        .map(|i| {
            let q = i as f64 / m as f64;
            2.0 + 0.3 * (2.0 * PI * q).cos() - 0.7 * (2.0 * PI * q).sin()
        })
        .collect();
    assert!((grid_integral(&f, TestFunction::One) - 2.0).abs() < 1e-14);
    assert!((grid_integral(&f, TestFunction::Cos(1)) - 0.15).abs() < 1e-14);
    assert!((grid_integral(&f, TestFunction::Sin(1)) + 0.35).abs() < 1e-14);
    assert!((mode_amplitude(&f) - 0.3).abs() < 1e-14);
}

#[test]
fn diffusivity_fit_recovers_generating_model() {
    let d = pinned_diffusivity(1.0, 1.0).unwrap();
    let m = 64;
    let e0: Vec<f64> = (0..m).map(|i| 1.0 + 0.2 * (2.0 * PI * i as f64 / m as f64).cos()).collect();
    let cfg = PdeConfig {
        gamma: 1.0,
        dt: 1e-4,
        scheme: Scheme::SemiImplicit,
        t_final: 0.1,
    };
    let times = [0.0, 0.025, 0.05, 0.075, 0.1];
    let out = pinned_heat_solve(&e0, 1.0, &cfg, &times).unwrap();
    let samples: Vec<ModeAmplitude> = out
        .iter()
        .map(|(t, e)| ModeAmplitude {
            t: *t,
            amplitude: mode_amplitude(e),
            se: 0.0,
        })
        .collect();
    let fit = fit_diffusivity(&samples).unwrap();
    assert!((fit.diffusivity - d).abs() / d < 0.01, "{}", fit.diffusivity);
    assert!((fit.diffusivity - 0.190983).abs() / 0.190983 < 0.01);

    // nu = 0: the heat equation with 1 / (2 gamma).
    let out = pinned_heat_solve(&e0, 0.0, &cfg, &times).unwrap();
    let samples: Vec<ModeAmplitude> = out
        .iter()
        .map(|(t, e)| ModeAmplitude {
            t: *t,
            amplitude: mode_amplitude(e),
            se: 0.0,
        })
        .collect();
    let fit = fit_diffusivity(&samples).unwrap();
    assert!((fit.diffusivity - 0.5).abs() / 0.5 < 0.01);
    assert!(fit_diffusivity(&samples[..2]).is_err());
}

#[test]
fn total_functional_is_constant_pathwise() {
    let n = 32;
    let gamma = 1.0;
    let prof = PotentialProfile::cosine_temperature(0.2, 0.2).unwrap();
    let le = LocalEquilibrium::new(&prof, n).unwrap();
    let prop = Propagator::new(Model::Unpinned, n).unwrap();
    let times: Vec<f64> = [0.0, 0.01, 0.05].iter().map(|t| t * (n * n) as f64).collect();
    let mut acc = FieldAccumulator::new(times.len());
    for member in 0..200u64 {
        let mut g = rng(100 + member);
        let s0 = le.sample(&mut g);
        let mut totals = Vec::new();
        simulate_harris_with(&prop, &s0, gamma, &times, SimulationMode::EventDriven, &mut g, |_, s| {
            let e = s.site_energies();
            totals.push((grid_integral(&e, TestFunction::One), grid_integral(&s.r, TestFunction::One)));
        })
        .unwrap();
        for w in totals.windows(2) {
            assert!((w[0].0 - w[1].0).abs() <= 1e-9 * w[0].0.abs().max(1.0));
            assert!((w[0].1 - w[1].1).abs() <= 1e-9);
        }
        acc.push(&totals.iter().map(|t| t.0).collect::<Vec<_>>());
    }
    // The macroscopic total is the same at every time, so the G = 1 weak
    // error is the initial sampling error.
    let f0 = HydroFields::from_profile(&prof, 256).unwrap();
    let means = acc.means();
    let se = acc.std_errors();
    for (m, s) in means.iter().zip(&se) {
        assert!((m - f0.integral_e()).abs() < 3.0 * s + 1e-3, "{m} vs {}", f0.integral_e());
    }
}
