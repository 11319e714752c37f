//! Graphical construction of the flip noise: every site carries a Poisson
//! clock of rate `gamma / 2`; between rings the chain follows the exact
//! harmonic flow and at a ring of site `x` the velocity `p_x` is reversed.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::chain::ChainState;
use crate::spectral::Propagator;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipEvent {
    pub time: f64,
    pub site: usize,
}

/// Validated flip times (strictly increasing, nonnegative) and sites.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipSequence {
    n: usize,
    events: Vec<FlipEvent>,
}

impl FlipSequence {
    pub fn new(n: usize, events: Vec<FlipEvent>) -> Result<Self> {
        let mut last = f64::NEG_INFINITY;
        for (i, e) in events.iter().enumerate() {
            if e.site >= n {
                return Err(Error::SiteOutOfRange { site: e.site, len: n });
            }
            if !(e.time >= 0.0) || !e.time.is_finite() || e.time <= last {
                return Err(Error::InvalidFlipSequence(format!(
                    "event {i} at time {} is not after {last}",
                    e.time
                )));
            }
            last = e.time;
        }
        Ok(Self { n, events })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn events(&self) -> &[FlipEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Superposition of the site clocks: exponential gaps of total rate
/// `n gamma / 2` and uniformly chosen sites.
pub struct FlipClock<'r, R: Rng + ?Sized> {
    rng: &'r mut R,
    n: usize,
    gaps: Option<Exp<f64>>,
    time: f64,
}

impl<'r, R: Rng + ?Sized> FlipClock<'r, R> {
    pub fn new(rng: &'r mut R, n: usize, gamma: f64) -> Result<Self> {
        check_rate(gamma)?;
        if n == 0 {
            return Err(Error::InvalidArgument("chain must have at least one site".into()));
        }
        let total = 0.5 * gamma * n as f64;
        let gaps = if total > 0.0 {
            Some(Exp::new(total).map_err(|e| Error::InvalidArgument(format!("{e}")))?)
        } else {
            None
        };
        Ok(Self {
            rng,
            n,
            gaps,
            time: 0.0,
        })
    }
}

impl<R: Rng + ?Sized> Iterator for FlipClock<'_, R> {
    type Item = FlipEvent;

    fn next(&mut self) -> Option<FlipEvent> {
        let gaps = self.gaps.as_ref()?;
        // A zero gap would break strict ordering; it has probability zero
        // but can appear after rounding.
        loop {
            let dt = gaps.sample(self.rng);
            if self.time + dt > self.time {
                self.time += dt;
                break;
            }
        }
        let site = self.rng.random_range(0..self.n);
        Some(FlipEvent {
            time: self.time,
            site,
        })
    }
}

pub(crate) fn check_rate(gamma: f64) -> Result<()> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("flip rate must be nonnegative, got {gamma}")))
    }
}

pub(crate) fn check_times(times: &[f64], horizon: f64) -> Result<()> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be nonnegative, got {horizon}")));
    }
    let mut last = f64::NEG_INFINITY;
    for &t in times {
        if !(t >= 0.0) || t > horizon || t < last {
            return Err(Error::InvalidArgument(format!(
                "sample times must be nondecreasing within [0, {horizon}], got {t}"
            )));
        }
        last = t;
    }
    Ok(())
}

/// Flip events of one realisation on `[0, horizon]`.
pub fn sample_flip_sequence<R: Rng + ?Sized>(
    n: usize,
    gamma: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<FlipSequence> {
    check_times(&[], horizon)?;
    let events = FlipClock::new(rng, n, gamma)?
        .take_while(|e| e.time <= horizon)
        .collect();
    FlipSequence::new(n, events)
}

/// Mean number of flips over `[0, horizon]`.
pub fn expected_events(n: usize, gamma: f64, horizon: f64) -> f64 {
    0.5 * gamma * n as f64 * horizon
}

/// Refuses runs whose mean number of flips exceeds `ceiling`.
pub fn check_budget(n: usize, gamma: f64, horizon: f64, ceiling: f64) -> Result<()> {
    let expected = expected_events(n, gamma, horizon);
    if expected > ceiling {
        Err(Error::BudgetExceeded { expected, ceiling })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimulationMode {
    /// Flow exactly between consecutive flips.
    EventDriven,
    /// Flow exactly over steps of length `dt` and apply the flips of a step
    /// at its end. The flip sequence is the same as in the event-driven mode.
    Stepped { dt: f64 },
}

/// Default ceiling on the mean number of flips handled event by event.
pub const EVENT_CEILING: f64 = 1e7;

impl SimulationMode {
    pub fn auto(n: usize, gamma: f64, horizon: f64, dt: f64) -> Self {
        if expected_events(n, gamma, horizon) > EVENT_CEILING {
            Self::Stepped { dt }
        } else {
            Self::EventDriven
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub state: ChainState,
}

#[derive(Debug, Clone)]
pub struct HarrisRun {
    pub initial: ChainState,
    pub flips: FlipSequence,
    pub snapshots: Vec<Snapshot>,
}

impl HarrisRun {
    /// State at an arbitrary time, recomputed from the stored flips.
    pub fn state_at(&self, prop: &Propagator, t: f64) -> Result<ChainState> {
        let mut v = replay(prop, &self.initial, &self.flips, &[t])?;
        Ok(v.pop().expect("one sample time"))
    }
}

/// Drives the chain through `events` up to the last sample time, invoking
/// `visit` on every sample time.
fn run_events<I, F>(
    prop: &Propagator,
    initial: &ChainState,
    events: I,
    times: &[f64],
    mode: SimulationMode,
    mut visit: F,
) -> Result<()>
where
    I: IntoIterator<Item = FlipEvent>,
    F: FnMut(f64, &crate::spectral::ModeChain<'_>),
{
    let mut modes = prop.modes(initial)?;
    let mut now = 0.0;
    let mut events = events.into_iter().peekable();
    let end = times.last().copied().unwrap_or(0.0);
    match mode {
        SimulationMode::EventDriven => {
            for &s in times {
                while let Some(e) = events.next_if(|e| e.time <= s) {
                    modes.advance(e.time - now);
                    now = e.time;
                    modes.flip(e.site)?;
                }
                modes.advance(s - now);
                now = s;
                visit(s, &modes);
            }
        }
        SimulationMode::Stepped { dt } => {
            if !(dt > 0.0) {
                return Err(Error::InvalidArgument(format!("step must be positive, got {dt}")));
            }
            let mut next_sample = 0;
            while next_sample < times.len() {
                let target = times[next_sample];
                let stop = (now + dt).min(target);
                modes.advance(stop - now);
                now = stop;
                while let Some(e) = events.next_if(|e| e.time <= now) {
                    modes.flip(e.site)?;
                }
                while next_sample < times.len() && times[next_sample] <= now {
                    visit(times[next_sample], &modes);
                    next_sample += 1;
                }
                if now >= end {
                    break;
                }
            }
        }
    }
    Ok(())
}

/// Event-driven simulation on `[0, horizon]` with snapshots at `times`.
pub fn simulate_harris<R: Rng + ?Sized>(
    prop: &Propagator,
    initial: &ChainState,
    gamma: f64,
    horizon: f64,
    times: &[f64],
    mode: SimulationMode,
    rng: &mut R,
) -> Result<HarrisRun> {
    check_times(times, horizon)?;
    let flips = sample_flip_sequence(initial.len(), gamma, horizon, rng)?;
    let mut snapshots = Vec::with_capacity(times.len());
    run_events(
        prop,
        initial,
        flips.events().iter().copied(),
        times,
        mode,
        |t, m| {
            snapshots.push(Snapshot {
                time: t,
                state: m.to_state(),
            })
        },
    )?;
    Ok(HarrisRun {
        initial: initial.clone(),
        flips,
        snapshots,
    })
}

/// Like [`simulate_harris`] but hands each snapshot to `visit` instead of
/// storing it, and does not keep the flip sequence.
pub fn simulate_harris_with<R, F>(
    prop: &Propagator,
    initial: &ChainState,
    gamma: f64,
    times: &[f64],
    mode: SimulationMode,
    rng: &mut R,
    mut visit: F,
) -> Result<usize>
where
    R: Rng + ?Sized,
    F: FnMut(f64, &ChainState),
{
    let horizon = times.last().copied().unwrap_or(0.0);
    check_times(times, horizon)?;
    let mut count = 0;
    let clock = FlipClock::new(rng, initial.len(), gamma)?
        .take_while(|e| e.time <= horizon)
        .inspect(|_| count += 1);
    run_events(prop, initial, clock, times, mode, |t, m| visit(t, &m.to_state()))?;
    Ok(count)
}

/// Deterministic composition of free flows and flips for a given sequence.
pub fn replay(
    prop: &Propagator,
    initial: &ChainState,
    flips: &FlipSequence,
    times: &[f64],
) -> Result<Vec<ChainState>> {
    if flips.n() != initial.len() {
        return Err(Error::DimensionMismatch {
            expected: initial.len(),
            found: flips.n(),
        });
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| times[i]).collect();
    check_times(&sorted, sorted.last().copied().unwrap_or(0.0))?;
    let mut out = alloc::vec![ChainState::zeros(initial.model, 0); times.len()];
    let mut k = 0;
    run_events(
        prop,
        initial,
        flips.events().iter().copied(),
        &sorted,
        SimulationMode::EventDriven,
        |_, m| {
            out[order[k]] = m.to_state();
            k += 1;
        },
    )?;
    Ok(out)
}
