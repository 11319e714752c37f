//! Ensemble experiments at diffusive times `t N^2`.
//!
//! Members are independent rayon tasks. Each one draws from its own
//! counter-addressed streams, and members are accumulated in fixed chunks
//! that are merged pairwise in index order. The result does not depend on
//! the number of threads.

use rayon::prelude::*;

use vflip_core::chain::Model;
use vflip_core::gaussian::{expected_moment_ode, gibbs_moments_from_profiles, simulate_moments_with, OdeOptions};
use vflip_core::harris::{expected_events, simulate_harris_with, SimulationMode};
use vflip_core::profile::{PeriodicField, PotentialProfile};
use vflip_core::scaling::{
    empirical_block_average, mode_amplitude, EmpiricalProfiles, FunctionalEstimate, LocalEquilibrium,
    ModeAmplitude, PinnedLocalEquilibrium, TestFunction,
};
use vflip_core::seeds::{stream, Purpose};
use vflip_core::spectral::Propagator;
use vflip_core::stats::{tree_reduce, FieldAccumulator, MeanVar};
use vflip_core::Error as CoreError;

use crate::config::Engine;
use crate::error::{LabError, LabResult};

/// Members accumulated sequentially before the pairwise merge.
const CHUNK: usize = 16;

#[derive(Debug, Clone)]
pub struct ExperimentPlan<'a> {
    pub n: usize,
    pub gamma: f64,
    /// Macroscopic times.
    pub times: &'a [f64],
    pub ensemble: usize,
    pub block_l: usize,
    pub cutoff_m: Option<f64>,
    pub profile: &'a PotentialProfile,
    pub engine: Engine,
    pub seed: u64,
    /// Ceiling on the expected number of flips of the whole ensemble.
    pub max_events: f64,
}

impl ExperimentPlan<'_> {
    pub fn micro_times(&self) -> Vec<f64> {
        let scale = (self.n * self.n) as f64;
        self.times.iter().map(|t| t * scale).collect()
    }

    pub fn expected_events(&self) -> f64 {
        let horizon = self.micro_times().last().copied().unwrap_or(0.0);
        expected_events(self.n, self.gamma, horizon) * self.ensemble as f64
    }

    fn check(&self) -> LabResult<()> {
        if self.block_l == 0 || self.n % self.block_l != 0 {
            return Err(CoreError::BlockWidth {
                block: self.block_l,
                n: self.n,
            }
            .into());
        }
        if self.ensemble == 0 {
            return Err(LabError::Config("plan.ensemble: must be at least 1".into()));
        }
        if self.engine != Engine::Ode {
            let expected = self.expected_events();
            if expected > self.max_events {
                return Err(CoreError::BudgetExceeded {
                    expected,
                    ceiling: self.max_events,
                }
                .into());
            }
        }
        Ok(())
    }
}

/// `(1/B) sum_b G(y_b) v_b` over block centres `y_b`.
fn block_functional(values: &[f64], n: usize, block: usize, test: TestFunction) -> f64 {
    let nf = n as f64;
    let offset = (block as f64 - 1.0) / (2.0 * nf);
    values
        .iter()
        .enumerate()
        .map(|(b, v)| test.eval((b * block) as f64 / nf + offset) * v)
        .sum::<f64>()
        / values.len() as f64
}

/// Statistics of one macroscopic time.
#[derive(Debug, Clone, Default)]
struct TimeStats {
    e: FieldAccumulator,
    r: FieldAccumulator,
    functionals: Vec<(MeanVar, MeanVar)>,
    discarded: MeanVar,
}

impl TimeStats {
    fn new(blocks: usize) -> Self {
        Self {
            e: FieldAccumulator::new(blocks),
            r: FieldAccumulator::new(blocks),
            functionals: vec![Default::default(); TestFunction::ACCEPTANCE.len()],
            discarded: MeanVar::default(),
        }
    }

    fn push(&mut self, n: usize, block: usize, e: &[f64], r: &[f64], discarded: f64) {
        self.e.push(e);
        self.r.push(r);
        for (acc, test) in self.functionals.iter_mut().zip(TestFunction::ACCEPTANCE) {
            acc.0.push(block_functional(e, n, block, test));
            acc.1.push(block_functional(r, n, block, test));
        }
        self.discarded.push(discarded);
    }

    fn merge(&mut self, other: &Self) {
        self.e.merge(&other.e);
        self.r.merge(&other.r);
        for (a, b) in self.functionals.iter_mut().zip(&other.functionals) {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
        }
        self.discarded.merge(&other.discarded);
    }

    fn finish(&self, t: f64, n: usize, block: usize) -> EmpiricalProfiles {
        EmpiricalProfiles {
            t,
            n,
            block,
            e: self.e.means(),
            se_e: finite(self.e.std_errors()),
            r: self.r.means(),
            se_r: finite(self.r.std_errors()),
            functionals: self
                .functionals
                .iter()
                .zip(TestFunction::ACCEPTANCE)
                .map(|((e, r), test)| FunctionalEstimate {
                    test,
                    e_mean: e.mean(),
                    e_se: fin(e.std_error()),
                    r_mean: r.mean(),
                    r_se: fin(r.std_error()),
                })
                .collect(),
            discarded_energy_fraction: self.discarded.mean(),
        }
    }
}

/// A single member has no spread estimate; report zero rather than NaN.
fn fin(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

fn finite(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(fin).collect()
}

trait Merge {
    fn merge(&mut self, other: &Self);
}

impl Merge for TimeStats {
    fn merge(&mut self, other: &Self) {
        TimeStats::merge(self, other)
    }
}

/// Runs `member(i, stats)` for every member in fixed chunks and merges the
/// chunks pairwise in order.
fn ensemble<S, F>(count: usize, empty: &[S], member: F) -> LabResult<Vec<S>>
where
    S: Merge + Clone + Send + Sync,
    F: Fn(u64, &mut [S]) -> LabResult<()> + Sync,
{
    let chunks: Vec<(usize, usize)> = (0..count)
        .step_by(CHUNK)
        .map(|a| (a, (a + CHUNK).min(count)))
        .collect();
    let partial: Vec<Vec<S>> = chunks
        .par_iter()
        .map(|&(a, b)| {
            let mut stats = empty.to_vec();
            for i in a..b {
                member(i as u64, &mut stats)?;
            }
            Ok(stats)
        })
        .collect::<LabResult<_>>()?;
    Ok(tree_reduce(partial, |mut x, y| {
        for (a, b) in x.iter_mut().zip(&y) {
            a.merge(b);
        }
        x
    })
    .unwrap_or_else(|| empty.to_vec()))
}

/// Empirical profiles at each macroscopic time of the plan.
pub fn run_diffusive_experiment(plan: &ExperimentPlan) -> LabResult<Vec<EmpiricalProfiles>> {
    plan.check()?;
    let n = plan.n;
    let block = plan.block_l;
    let blocks = n / block;
    let micro = plan.micro_times();
    let label = n as u64;
    let empty = vec![TimeStats::new(blocks); micro.len()];

    let stats = match plan.engine {
        Engine::Particle => {
            let le = LocalEquilibrium::new(plan.profile, n)?;
            let prop = Propagator::new(Model::Unpinned, n)?;
            ensemble(plan.ensemble, &empty, |m, stats| {
                let s0 = le.sample(&mut stream(plan.seed, label, m, Purpose::InitialState));
                let mut clock = stream(plan.seed, label, m, Purpose::FlipClock);
                let mut k = 0;
                let mut failure = None;
                simulate_harris_with(&prop, &s0, plan.gamma, &micro, SimulationMode::EventDriven, &mut clock, |_, s| {
                    match empirical_block_average(&s.site_energies(), &s.r, block, plan.cutoff_m) {
                        Ok(b) => stats[k].push(n, block, &b.e, &b.r, b.discarded_energy_fraction),
                        Err(e) => failure = Some(e),
                    }
                    k += 1;
                })?;
                failure.map_or(Ok(()), |e| Err(e.into()))
            })?
        }
        Engine::MomentMc => {
            let ms0 = gibbs_moments_from_profiles(plan.profile, n)?.into_state();
            let prop = Propagator::new(Model::Unpinned, n)?;
            ensemble(plan.ensemble, &empty, |m, stats| {
                // Same clock stream as the particle member with this index.
                let mut clock = stream(plan.seed, label, m, Purpose::FlipClock);
                let mut k = 0;
                let mut failure = None;
                simulate_moments_with(&prop, &ms0, plan.gamma, &micro, &mut clock, false, |_, ms, ev| {
                    if ev.is_some() {
                        return;
                    }
                    match empirical_block_average(&ms.mean_energies(), &ms.mean_deformations(), block, None) {
                        Ok(b) => stats[k].push(n, block, &b.e, &b.r, 0.0),
                        Err(e) => failure = Some(e),
                    }
                    k += 1;
                })?;
                failure.map_or(Ok(()), |e| Err(e.into()))
            })?
        }
        Engine::Ode => {
            let ms0 = gibbs_moments_from_profiles(plan.profile, n)?.into_state();
            let run = expected_moment_ode(Model::Unpinned, &ms0, plan.gamma, &micro, OdeOptions::for_rate(plan.gamma))?;
            let mut stats = empty;
            for (k, (_, ms)) in run.snapshots.iter().enumerate() {
                let b = empirical_block_average(&ms.mean_energies(), &ms.mean_deformations(), block, None)?;
                stats[k].push(n, block, &b.e, &b.r, 0.0);
            }
            stats
        }
    };
    Ok(stats
        .iter()
        .zip(plan.times)
        .map(|(s, &t)| s.finish(t, n, block))
        .collect())
}

/// Result of the energy-diffusion experiment behind `fit-diffusivity`.
#[derive(Debug, Clone)]
pub struct PinnedRun {
    pub amplitudes: Vec<ModeAmplitude>,
    /// Ensemble-mean site energies at each time.
    pub energies: Vec<Vec<f64>>,
    pub energy_se: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct PinnedStats {
    e: FieldAccumulator,
    amplitude: MeanVar,
}

impl Merge for PinnedStats {
    fn merge(&mut self, other: &Self) {
        self.e.merge(&other.e);
        self.amplitude.merge(&other.amplitude);
    }
}

/// Energy profiles of the chain started from local equilibrium with
/// temperature `1 / beta(x/N)`. For `nu > 0` this is the pinned chain; for
/// `nu = 0` it is the unpinned chain without tension, whose energy obeys the
/// heat equation with diffusivity `1 / (2 gamma)`.
pub fn run_pinned_experiment(
    n: usize,
    nu: f64,
    gamma: f64,
    times: &[f64],
    ensemble: usize,
    beta: &PeriodicField,
    seed: u64,
    max_events: f64,
) -> LabResult<PinnedRun> {
    let scale = (n * n) as f64;
    let micro: Vec<f64> = times.iter().map(|t| t * scale).collect();
    let horizon = micro.last().copied().unwrap_or(0.0);
    let expected = expected_events(n, gamma, horizon) * ensemble as f64;
    if expected > max_events {
        return Err(CoreError::BudgetExceeded {
            expected,
            ceiling: max_events,
        }
        .into());
    }
    let temperature: Vec<f64> = beta.sample(n).iter().map(|b| 1.0 / b).collect();
    enum Sampler {
        Pinned(PinnedLocalEquilibrium),
        Free(LocalEquilibrium),
    }
    let (sampler, model) = if nu > 0.0 {
        (Sampler::Pinned(PinnedLocalEquilibrium::new(&temperature, nu)?), Model::pinned(nu)?)
    } else {
        let profile = PotentialProfile::new(beta.clone(), PeriodicField::constant(0.0))?;
        (Sampler::Free(LocalEquilibrium::new(&profile, n)?), Model::Unpinned)
    };
    let prop = Propagator::new(model, n)?;
    let label = n as u64 ^ (1 << 40);
    let empty = vec![
        PinnedStats {
            e: FieldAccumulator::new(n),
            amplitude: MeanVar::default(),
        };
        micro.len()
    ];
    let stats = self::ensemble(ensemble, &empty, |m, stats| {
        let mut init = stream(seed, label, m, Purpose::InitialState);
        let s0 = match &sampler {
            Sampler::Pinned(s) => s.sample(&mut init),
            Sampler::Free(s) => s.sample(&mut init),
        };
        let mut clock = stream(seed, label, m, Purpose::FlipClock);
        let mut k = 0;
        simulate_harris_with(&prop, &s0, gamma, &micro, SimulationMode::EventDriven, &mut clock, |_, s| {
            let e = s.site_energies();
            stats[k].amplitude.push(mode_amplitude(&e));
            stats[k].e.push(&e);
            k += 1;
        })?;
        Ok(())
    })?;
    Ok(PinnedRun {
        amplitudes: stats
            .iter()
            .zip(times)
            .map(|(s, &t)| ModeAmplitude {
                t,
                amplitude: s.amplitude.mean(),
                se: fin(s.amplitude.std_error()),
            })
            .collect(),
        energies: stats.iter().map(|s| s.e.means()).collect(),
        energy_se: stats.iter().map(|s| finite(s.e.std_errors())).collect(),
    })
}
