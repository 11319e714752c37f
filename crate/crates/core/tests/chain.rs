use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use vflip_core::chain::{fd_residual, pinned_covariance_gamma, ChainState, Model};
use vflip_core::harris::{
    replay, sample_flip_sequence, simulate_harris, simulate_harris_with, FlipEvent, FlipSequence,
    SimulationMode,
};
use vflip_core::spectral::Propagator;
use vflip_core::stats::MeanVar;
use vflip_core::Error;

fn random_state(model: Model, n: usize, rng: &mut impl Rng) -> ChainState {
    let r = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let p = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    ChainState::new(model, r, p).unwrap()
}

fn norm(s: &ChainState) -> f64 {
    s.r.iter().chain(&s.p).map(|v| v * v).sum::<f64>().sqrt()
}

fn max_diff(a: &ChainState, b: &ChainState) -> f64 {
    a.r.iter()
        .chain(&a.p)
        .zip(b.r.iter().chain(&b.p))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn drift_examples() {
    let s = ChainState::new(Model::Unpinned, vec![0.0; 4], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let d = s.drift();
    assert_eq!(d.r, vec![-1.0, 0.0, 0.0, 1.0]);
    assert_eq!(d.p, vec![0.0; 4]);

    let n = 6;
    let mut q = vec![0.0; n];
    q[0] = 1.0;
    let s = ChainState::new(Model::pinned(1.0).unwrap(), q, vec![0.0; n]).unwrap();
    let d = s.drift();
    assert_eq!(d.p[0], -3.0);
    assert_eq!(d.p[1], 1.0);
    assert_eq!(d.p[n - 1], 1.0);
}

#[test]
fn energies_examples() {
    let z = ChainState::zeros(Model::Unpinned, 5).conserved_totals();
    assert_eq!((z.energy, z.deformation), (0.0, 0.0));
    let s = ChainState::new(Model::Unpinned, vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]).unwrap();
    assert_eq!(s.site_energy(0).unwrap(), 1.0);
    assert_eq!(s.conserved_totals().energy, 1.0);
    assert!(matches!(s.site_energy(3), Err(Error::SiteOutOfRange { .. })));

    // Pinned: the site energies add up to (1/2)<q, (nu^2 - Laplacian) q> + |p|^2 / 2.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let nu = 1.3;
    let s = random_state(Model::pinned(nu).unwrap(), 7, &mut rng);
    let n = s.len();
    let q = &s.r;
    let quad: f64 = (0..n)
        .map(|x| {
            let lap = q[(x + 1) % n] + q[(x + n - 1) % n] - 2.0 * q[x];
            q[x] * (nu * nu * q[x] - lap)
        })
        .sum::<f64>()
        / 2.0
        + s.p.iter().map(|p| p * p).sum::<f64>() / 2.0;
    assert_relative_eq!(s.conserved_totals().energy, quad, epsilon = 1e-12);
    assert!(s.site_energies().iter().all(|e| *e >= 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn drift_conserves_totals(seed in any::<u64>(), n in 2usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(Model::Unpinned, n, &mut rng);
        let d = s.drift();
        let dr: f64 = d.r.iter().sum();
        // d/dt sum e_x = sum (r_x dr_x + p_x dp_x)
        let de: f64 = (0..n).map(|x| s.r[x] * d.r[x] + s.p[x] * d.p[x]).sum();
        prop_assert!(dr.abs() <= 1e-12 && de.abs() <= 1e-12);

        let s = random_state(Model::pinned(0.7).unwrap(), n.max(3), &mut rng);
        let h = 1e-6;
        let mut fwd = s.clone();
        let mut bwd = s.clone();
        let d = s.drift();
        for i in 0..s.len() {
            fwd.r[i] += h * d.r[i];
            fwd.p[i] += h * d.p[i];
            bwd.r[i] -= h * d.r[i];
            bwd.p[i] -= h * d.p[i];
        }
        let de = (fwd.conserved_totals().energy - bwd.conserved_totals().energy) / (2.0 * h);
        prop_assert!(de.abs() <= 1e-6);
    }

    #[test]
    fn flips_are_involutions(seed in any::<u64>(), x in 0usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(Model::Unpinned, 16, &mut rng);
        let mut t = s.clone();
        t.flip_velocity(x).unwrap();
        prop_assert_eq!(t.site_energies(), s.site_energies());
        prop_assert_eq!(t.conserved_totals().deformation, s.conserved_totals().deformation);
        prop_assert_eq!(t.p[x], -s.p[x]);
        t.flip_velocity(x).unwrap();
        prop_assert_eq!(t, s);
    }
}

/// Dormand-Prince 5(4) with step control, on the drift of the chain.
fn dopri(s: &ChainState, t_end: f64, tol: f64) -> ChainState {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] =
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let n = s.len();
    let pack = |s: &ChainState| -> Vec<f64> { s.r.iter().chain(&s.p).copied().collect() };
    let unpack = |v: &[f64]| ChainState {
        model: s.model,
        r: v[..n].to_vec(),
        p: v[n..].to_vec(),
    };
    let f = |v: &[f64]| pack(&unpack(v).drift());
    let mut y = pack(s);
    let (mut t, mut h): (f64, f64) = (0.0, 1e-3);
    while t < t_end {
        h = h.min(t_end - t);
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        for i in 0..7 {
            let yi: Vec<f64> = (0..2 * n)
                .map(|j| y[j] + h * (0..i).map(|l| A[i][l] * k[l][j]).sum::<f64>())
                .collect();
            k.push(f(&yi));
        }
        let y5: Vec<f64> =
            (0..2 * n).map(|j| y[j] + h * (0..7).map(|l| B5[l] * k[l][j]).sum::<f64>()).collect();
        let err = (0..2 * n)
            .map(|j| (h * (0..7).map(|l| (B5[l] - B4[l]) * k[l][j]).sum::<f64>()).abs())
            .fold(0.0, f64::max);
        if err <= tol {
            t += h;
            y = y5;
        }
        h *= (0.9 * (tol / err.max(1e-300)).powf(0.2)).clamp(0.2, 5.0);
    }
    unpack(&y)
}

#[test]
fn free_flow_matches_adaptive_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for model in [Model::Unpinned, Model::pinned(1.0).unwrap()] {
        let prop = Propagator::new(model, 16).unwrap();
        let s = random_state(model, 16, &mut rng);
        let exact = prop.apply(&s, 1.0).unwrap();
        let oracle = dopri(&s, 1.0, 1e-13);
        assert!(max_diff(&exact, &oracle) <= 1e-8, "{}", max_diff(&exact, &oracle));
        let rk = s.rk4_flow(1.0, 400);
        assert!(max_diff(&exact, &rk) <= 1e-8);
    }
}

#[test]
fn free_flow_identity_norm_semigroup_reversal() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for model in [Model::Unpinned, Model::pinned(0.5).unwrap()] {
        let prop = Propagator::new(model, 64).unwrap();
        for _ in 0..5 {
            let s = random_state(model, 64, &mut rng);
            assert!(max_diff(&prop.apply(&s, 0.0).unwrap(), &s) <= 1e-13);
            let a = rng.random_range(0.0..20.0);
            let b = rng.random_range(0.0..20.0);
            let ab = prop.apply(&prop.apply(&s, a).unwrap(), b).unwrap();
            assert!(max_diff(&ab, &prop.apply(&s, a + b).unwrap()) <= 1e-10);
            let back = prop.apply(&prop.apply(&s, a).unwrap(), -a).unwrap();
            assert!(max_diff(&back, &s) <= 1e-10);
            let e0 = s.conserved_totals().energy;
            for t in [1.0, 100.0, 1000.0] {
                let st = prop.apply(&s, t).unwrap();
                assert_relative_eq!(st.conserved_totals().energy, e0, max_relative = 1e-12);
                if model == Model::Unpinned {
                    assert_relative_eq!(norm(&st), norm(&s), max_relative = 1e-12);
                    assert_relative_eq!(
                        st.conserved_totals().deformation,
                        s.conserved_totals().deformation,
                        epsilon = 1e-10
                    );
                }
            }
        }
    }
}

#[test]
fn fluctuation_dissipation_residuals_vanish() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for gamma in [0.5, 1.0, 2.0] {
        let mut worst: f64 = 0.0;
        for _ in 0..2000 {
            let n = rng.random_range(3..12);
            let s = random_state(Model::Unpinned, n, &mut rng);
            let x = rng.random_range(0..n);
            let (a, b) = fd_residual(&s, x, gamma).unwrap();
            worst = worst.max(a.abs()).max(b.abs());
        }
        assert!(worst <= 1e-12, "gamma = {gamma}: {worst}");
    }
    let z = ChainState::zeros(Model::Unpinned, 5);
    assert_eq!(fd_residual(&z, 2, 1.0).unwrap(), (0.0, 0.0));
    assert!(fd_residual(&z, 2, 0.0).is_err());
}

#[test]
fn pinned_covariance_properties() {
    let g = pinned_covariance_gamma(10.0, 1.0, 64).unwrap();
    // Dense oracle: solve (nu^2 - Laplacian) x = e_0 / beta directly.
    let n = 64;
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let d = i.abs_diff(j);
        if i == j {
            102.0
        } else if d == 1 || d == n - 1 {
            -1.0
        } else {
            0.0
        }
    });
    let mut rhs = nalgebra::DVector::zeros(n);
    rhs[0] = 1.0;
    let x = m.lu().solve(&rhs).unwrap();
    for z in 0..n {
        assert_relative_eq!(g[z], x[z], epsilon = 1e-14);
    }
    assert!((g[0] - 0.01).abs() / 0.01 <= 0.02);

    let g = pinned_covariance_gamma(1.0, 1.0, 64).unwrap();
    let logs: Vec<f64> = (0..=20).map(|z| g[z].abs().ln()).collect();
    let slopes: Vec<f64> = logs.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(slopes.iter().all(|s| *s < 0.0));
    // Linear decay: successive slopes agree in the bulk.
    assert_relative_eq!(slopes[5], slopes[15], max_relative = 1e-6);
}

#[test]
fn harris_without_flips_is_free_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let prop = Propagator::new(Model::Unpinned, 32).unwrap();
    let s = random_state(Model::Unpinned, 32, &mut rng);
    let times = [0.0, 0.5, 3.0, 10.0];
    let run = simulate_harris(&prop, &s, 0.0, 10.0, &times, SimulationMode::EventDriven, &mut rng)
        .unwrap();
    assert!(run.flips.is_empty());
    for snap in &run.snapshots {
        assert!(max_diff(&snap.state, &prop.apply(&s, snap.time).unwrap()) <= 1e-12);
    }
}

#[test]
fn flip_counts_are_poisson() {
    let (n, gamma, t) = (16usize, 1.0, 5.0);
    let mean = n as f64 * gamma / 2.0 * t;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut acc = MeanVar::default();
    let mut sites = vec![0usize; n];
    for _ in 0..200 {
        let seq = sample_flip_sequence(n, gamma, t, &mut rng).unwrap();
        acc.push(seq.len() as f64);
        for e in seq.events() {
            sites[e.site] += 1;
        }
    }
    // Mean of 200 Poisson counts: standard deviation sqrt(mean / 200).
    let sd = (mean / 200.0).sqrt();
    assert!((acc.mean() - mean).abs() <= 3.0 * sd, "{} vs {mean}", acc.mean());
    assert_relative_eq!(acc.variance(), mean, max_relative = 0.3);
    assert!(sites.iter().all(|&c| c > 0));
}

#[test]
fn harris_conserves_totals_pathwise() {
    let n = 64;
    let prop = Propagator::new(Model::Unpinned, n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let s = random_state(Model::Unpinned, n, &mut rng);
    let c0 = s.conserved_totals();
    let times: Vec<f64> = (0..=100).map(|i| i as f64).collect();
    let mut worst: (f64, f64) = (0.0, 0.0);
    let count = simulate_harris_with(
        &prop,
        &s,
        1.0,
        &times,
        SimulationMode::EventDriven,
        &mut rng,
        |_, st| {
            let c = st.conserved_totals();
            worst.0 = worst.0.max((c.energy - c0.energy).abs() / c0.energy);
            worst.1 = worst.1.max((c.deformation - c0.deformation).abs());
        },
    )
    .unwrap();
    assert!(count > 2000);
    assert!(worst.0 <= 1e-9 && worst.1 <= 1e-9 * c0.energy, "{worst:?}");
}

#[test]
fn replay_reproduces_composition() {
    let n = 8;
    let prop = Propagator::new(Model::Unpinned, n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let s = random_state(Model::Unpinned, n, &mut rng);
    let flips = FlipSequence::new(
        n,
        vec![
            FlipEvent { time: 0.3, site: 2 },
            FlipEvent { time: 1.1, site: 7 },
            FlipEvent { time: 2.5, site: 2 },
        ],
    )
    .unwrap();
    // Hand composition of flows and flips, with the RK4 flow as propagator.
    let mut cur = s.clone();
    let mut now = 0.0;
    for e in flips.events() {
        cur = cur.rk4_flow(e.time - now, 2000);
        cur.flip_velocity(e.site).unwrap();
        now = e.time;
    }
    cur = cur.rk4_flow(4.0 - now, 2000);
    let out = replay(&prop, &s, &flips, &[4.0, 0.0]).unwrap();
    assert!(max_diff(&out[0], &cur) <= 1e-9);
    assert!(max_diff(&out[1], &s) <= 1e-14);

    // Same seed, same run.
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        simulate_harris(&prop, &s, 1.0, 5.0, &[5.0], SimulationMode::EventDriven, &mut rng)
            .unwrap()
    };
    let (a, b) = (run(1), run(1));
    assert_eq!(a.flips, b.flips);
    assert_eq!(a.snapshots, b.snapshots);
    let again = replay(&prop, &s, &a.flips, &[5.0]).unwrap();
    assert_eq!(again[0], a.snapshots[0].state);
    assert!(max_diff(&a.state_at(&prop, 5.0).unwrap(), &a.snapshots[0].state) <= 1e-14);
}

#[test]
fn stepped_mode_tracks_event_mode() {
    let n = 16;
    let prop = Propagator::new(Model::Unpinned, n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let s = random_state(Model::Unpinned, n, &mut rng);
    let run = |mode| {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        simulate_harris(&prop, &s, 1.0, 5.0, &[5.0], mode, &mut rng).unwrap()
    };
    let exact = run(SimulationMode::EventDriven);
    let mut last = f64::INFINITY;
    for dt in [0.1, 0.01, 0.001] {
        let st = run(SimulationMode::Stepped { dt });
        assert_eq!(st.flips, exact.flips);
        let c = st.snapshots[0].state.conserved_totals();
        assert_relative_eq!(c.energy, s.conserved_totals().energy, max_relative = 1e-12);
        let d = max_diff(&st.snapshots[0].state, &exact.snapshots[0].state);
        assert!(d < last);
        last = d;
    }
    assert!(last < 0.05);
}

#[test]
fn flip_sequence_validation() {
    assert!(matches!(
        FlipSequence::new(4, vec![FlipEvent { time: 1.0, site: 4 }]),
        Err(Error::SiteOutOfRange { site: 4, len: 4 })
    ));
    assert!(FlipSequence::new(
        4,
        vec![FlipEvent { time: 1.0, site: 0 }, FlipEvent { time: 1.0, site: 1 }]
    )
    .is_err());
}
