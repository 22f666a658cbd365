//! Gillespie direct-method simulation, used as a statistical cross-check of
//! the numerical bounds and to produce averaged trajectories.
//!
//! Randomness comes from Xoshiro256++. Run `i` of a batch with seed `s` is
//! seeded (via SplitMix64 expansion) from `s + i * 0x9E3779B97F4A7C15`, so
//! every run is reproducible on its own and batches are independent of
//! thread scheduling.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use thiserror::Error;

use crate::csl::{BoundPredicate, CslError, CslProperty, StatePredicate};
use crate::model::{ModelError, SckModel, State};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SsaError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csl(#[from] CslError),
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("print interval must be positive, got {0}")]
    InvalidInterval(f64),
    #[error("at least one run is required")]
    NoRuns,
    #[error("schedule times must be non-negative and non-decreasing")]
    UnsortedSchedule,
    #[error("bad schedule entry `{0}`; expected TIME:SPECIES=COUNT")]
    BadScheduleEntry(String),
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn run_rng(seed: u64, run: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed.wrapping_add(run.wrapping_mul(GOLDEN)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub time: f64,
    pub species: usize,
    pub count: u32,
}

/// Absolute count assignments applied at fixed times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventSchedule(Vec<Perturbation>);

impl EventSchedule {
    pub fn new(model: &SckModel, events: &[(f64, &str, u32)]) -> Result<Self, SsaError> {
        let mut out = Vec::with_capacity(events.len());
        for &(time, name, count) in events {
            let species = model
                .species_index(name)
                .ok_or_else(|| ModelError::UnknownSpecies(name.to_string()))?;
            if !(time >= 0.0) || out.last().is_some_and(|p: &Perturbation| p.time > time) {
                return Err(SsaError::UnsortedSchedule);
            }
            out.push(Perturbation {
                time,
                species,
                count,
            });
        }
        Ok(EventSchedule(out))
    }

    /// Parses `TIME:SPECIES=COUNT` entries separated by commas.
    pub fn parse(model: &SckModel, text: &str) -> Result<Self, SsaError> {
        let mut events = Vec::new();
        for entry in text.split(',').map(str::trim).filter(|e| !e.is_empty()) {
            let bad = || SsaError::BadScheduleEntry(entry.to_string());
            let (time, rest) = entry.split_once(':').ok_or_else(bad)?;
            let (name, count) = rest.split_once('=').ok_or_else(bad)?;
            let time: f64 = time.trim().parse().map_err(|_| bad())?;
            let count: u32 = count.trim().parse().map_err(|_| bad())?;
            events.push((time, name.trim(), count));
        }
        EventSchedule::new(model, &events)
    }

    pub fn events(&self) -> &[Perturbation] {
        &self.0
    }
}

/// States sampled every `interval` seconds from `t = 0` up to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub seed: u64,
}

struct Stepper<'m> {
    model: &'m SckModel,
    props: Vec<f64>,
}

impl<'m> Stepper<'m> {
    fn new(model: &'m SckModel) -> Self {
        Stepper {
            model,
            props: vec![0.0; model.reaction_count()],
        }
    }

    /// Draws the next firing: waiting time and reaction, or `None` when no
    /// reaction is enabled.
    fn draw<R: Rng>(&mut self, state: &State, rng: &mut R) -> Result<Option<(f64, usize)>, SsaError> {
        let total = self.model.propensities(state, &mut self.props)?;
        if total <= 0.0 {
            return Ok(None);
        }
        let u: f64 = 1.0 - rng.random::<f64>();
        let tau = -u.ln() / total;
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        for (i, &a) in self.props.iter().enumerate() {
            if a > 0.0 {
                chosen = Some(i);
                acc += a;
                if target < acc {
                    break;
                }
            }
        }
        Ok(chosen.map(|i| (tau, i)))
    }
}

fn check_horizon(horizon: f64) -> Result<(), SsaError> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(SsaError::InvalidHorizon(horizon))
    }
}

fn simulate_with<R: Rng>(
    model: &SckModel,
    horizon: f64,
    schedule: &EventSchedule,
    interval: f64,
    rng: &mut R,
    seed: u64,
) -> Result<Trajectory, SsaError> {
    check_horizon(horizon)?;
    if !(interval > 0.0) {
        return Err(SsaError::InvalidInterval(interval));
    }
    let samples = (horizon / interval + 1e-9).floor() as usize + 1;
    let mut traj = Trajectory {
        times: Vec::with_capacity(samples),
        states: Vec::with_capacity(samples),
        seed,
    };
    let mut stepper = Stepper::new(model);
    let mut state = model.initial_state();
    let mut t = 0.0;
    let mut events = schedule.events().iter().peekable();
    let mut next_sample = 0usize;
    loop {
        let event_time = events.peek().map_or(f64::INFINITY, |e| e.time);
        let draw = stepper.draw(&state, rng)?;
        let jump_time = draw.map_or(f64::INFINITY, |(tau, _)| t + tau);
        let change = jump_time.min(event_time);
        // Samples strictly before the change see the current state; a sample
        // exactly at an event time sees the perturbed one.
        while next_sample < samples && (next_sample as f64 * interval) < change {
            traj.times.push(next_sample as f64 * interval);
            traj.states.push(state.clone());
            next_sample += 1;
        }
        if change > horizon {
            break;
        }
        if event_time <= jump_time {
            let e = events.next().expect("peeked event");
            let mut counts = state.counts().to_vec();
            counts[e.species] = e.count;
            state = State::new(counts);
            t = e.time;
        } else {
            let (_, r) = draw.expect("finite jump time");
            state = model.apply(r, &state)?;
            t = jump_time;
        }
    }
    Ok(traj)
}

/// One direct-method run sampled every `print_interval` seconds.
pub fn simulate(
    model: &SckModel,
    horizon: f64,
    schedule: &EventSchedule,
    seed: u64,
    print_interval: f64,
) -> Result<Trajectory, SsaError> {
    simulate_with(model, horizon, schedule, print_interval, &mut run_rng(seed, 0), seed)
}

/// Per-species means over `runs` trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedTrajectory {
    pub times: Vec<f64>,
    /// `means[k][j]`: mean count of species `j` at `times[k]`.
    pub means: Vec<Vec<f64>>,
    pub runs: usize,
}

/// Averages `runs` independent trajectories; run `i` uses stream `(seed, i)`.
pub fn average_trajectories(
    model: &SckModel,
    horizon: f64,
    schedule: &EventSchedule,
    seed: u64,
    print_interval: f64,
    runs: usize,
) -> Result<AveragedTrajectory, SsaError> {
    if runs == 0 {
        return Err(SsaError::NoRuns);
    }
    let trajs: Vec<Trajectory> = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            simulate_with(
                model,
                horizon,
                schedule,
                print_interval,
                &mut run_rng(seed, i),
                seed,
            )
        })
        .collect::<Result<_, _>>()?;
    let n = model.species_count();
    let times = trajs[0].times.clone();
    let mut means = vec![vec![0.0; n]; times.len()];
    for tr in &trajs {
        for (row, s) in means.iter_mut().zip(&tr.states) {
            for (m, &c) in row.iter_mut().zip(s.counts()) {
                *m += f64::from(c);
            }
        }
    }
    for row in &mut means {
        for m in row.iter_mut() {
            *m /= runs as f64;
        }
    }
    Ok(AveragedTrajectory { times, means, runs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub estimate: f64,
    /// Binomial standard error `sqrt(p (1 - p) / runs)`.
    pub std_error: f64,
    pub runs: usize,
}

struct PathCheck {
    lower: f64,
    upper: f64,
    left: BoundPredicate,
    right: BoundPredicate,
    complement: bool,
}

impl PathCheck {
    fn new(model: &SckModel, property: &CslProperty) -> Result<Self, SsaError> {
        let (bound, left, right, complement) = match property {
            CslProperty::Until { bound, left, right } => (*bound, left.clone(), right.clone(), false),
            CslProperty::Finally { bound, target } => {
                (*bound, StatePredicate::True, target.clone(), false)
            }
            CslProperty::Globally { bound, target } => {
                (*bound, StatePredicate::True, target.negate(), true)
            }
            CslProperty::SteadyState(_) => {
                return Err(CslError::Unsupported("the steady-state operator").into())
            }
        };
        if !bound.upper.is_finite() {
            return Err(CslError::Unsupported("an unbounded time interval").into());
        }
        Ok(PathCheck {
            lower: bound.lower,
            upper: bound.upper,
            left: left.bind(model)?,
            right: right.bind(model)?,
            complement,
        })
    }

    /// Whether one sampled path satisfies the until formula: some time in
    /// `[lower, upper]` sees the right-hand predicate, with the left-hand
    /// predicate holding at all earlier times.
    fn run<R: Rng>(&self, model: &SckModel, rng: &mut R) -> Result<bool, SsaError> {
        let mut stepper = Stepper::new(model);
        let mut state = model.initial_state();
        let mut t = 0.0;
        loop {
            if t >= self.lower && self.right.evaluate(&state)? {
                return Ok(true);
            }
            if !self.left.evaluate(&state)? {
                return Ok(false);
            }
            let Some((tau, r)) = stepper.draw(&state, rng)? else {
                // Frozen: the current state is also the state at `lower`.
                return Ok(self.right.evaluate(&state)?);
            };
            let next = t + tau;
            if t < self.lower && next >= self.lower && self.right.evaluate(&state)? {
                // The state held across `lower` already satisfies the goal.
                return Ok(true);
            }
            if next > self.upper {
                return Ok(false);
            }
            state = model.apply(r, &state)?;
            t = next;
        }
    }
}

/// Monte-Carlo estimate of the probability of a time-bounded path formula
/// from the model's initial state. Globally is estimated through its dual.
pub fn estimate_probability(
    model: &SckModel,
    property: &CslProperty,
    runs: usize,
    seed: u64,
) -> Result<Estimate, SsaError> {
    if runs == 0 {
        return Err(SsaError::NoRuns);
    }
    let check = PathCheck::new(model, property)?;
    let hits = (0..runs as u64)
        .into_par_iter()
        .map(|i| check.run(model, &mut run_rng(seed, i)).map(usize::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let p = hits as f64 / runs as f64;
    let estimate = if check.complement { 1.0 - p } else { p };
    Ok(Estimate {
        estimate,
        std_error: (p * (1.0 - p) / runs as f64).sqrt(),
        runs,
    })
}

/// `time,<species...>` rows.
pub fn write_trajectory_csv<W: Write>(
    traj: &Trajectory,
    species: &[String],
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "time,{}", species.join(","))?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        write!(out, "{t}")?;
        for c in s.counts() {
            write!(out, ",{c}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// `time,<species...>` rows of mean counts.
pub fn write_average_csv<W: Write>(
    avg: &AveragedTrajectory,
    species: &[String],
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "time,{}", species.join(","))?;
    for (t, row) in avg.times.iter().zip(&avg.means) {
        write!(out, "{t}")?;
        for m in row {
            write!(out, ",{m}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
