//! Finite state graphs for SCK models.
//!
//! [`build_approximate_graph`] grows the graph breadth-first from the initial
//! state, one sweep per iteration. Every state carries a termination indicator
//! `kappa`: the probability mass that reached it along explored paths in the
//! previous sweep. A state whose indicator is below the threshold only keeps
//! transitions into states that already exist. Sweeps repeat until the state
//! count stops changing, then every missing transition is redirected to one
//! absorbing state.
//!
//! [`build_bounded_reference`] enumerates everything reachable inside
//! per-species population bounds instead.

pub mod export;

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::model::{ModelError, SckModel, State};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("termination threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("state count exceeded the cap of {0}")]
    StateCapExceeded(usize),
    #[error("graph already has an absorbing state")]
    AlreadyClosed,
    #[error("no indicator trace was recorded for this graph")]
    TraceUnavailable,
    #[error("bound for `{species}` is {bound} but its initial count is {initial}")]
    BoundBelowInitial {
        species: String,
        bound: u32,
        initial: u32,
    },
}

/// User threshold `delta` on termination indicators, `0 < delta < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TerminationThreshold(f64);

impl TerminationThreshold {
    pub fn new(delta: f64) -> Result<Self, GraphError> {
        if delta > 0.0 && delta < 1.0 {
            Ok(TerminationThreshold(delta))
        } else {
            Err(GraphError::InvalidThreshold(delta))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub max_iterations: usize,
    /// Hard cap on non-absorbing states.
    pub state_cap: usize,
    /// Kahan summation for indicator updates.
    pub compensated: bool,
    /// Record per-depth indicator sums.
    pub trace: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            max_iterations: 10_000,
            state_cap: 10_000_000,
            compensated: false,
            trace: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub source: usize,
    pub reaction: usize,
    pub target: usize,
    /// Propensity of `reaction` at `source`.
    pub rate: f64,
}

/// Sum of termination indicators over the states first discovered at `depth`,
/// taken at the start of `iteration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiSample {
    pub iteration: usize,
    pub depth: usize,
    pub sum: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildReport {
    pub iterations: usize,
    /// False when the iteration limit stopped the build before a fixed point.
    pub converged: bool,
    /// Non-absorbing state count after each iteration, starting with the
    /// singleton initial graph.
    pub state_counts: Vec<usize>,
    pub pi_trace: Option<Vec<PiSample>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateGraph {
    states: Vec<State>,
    index: HashMap<State, usize>,
    /// Sorted by `(source, reaction)`.
    transitions: Vec<Transition>,
    offsets: Vec<usize>,
    kappa: Vec<f64>,
    kappa_next: Vec<f64>,
    depth: Vec<u32>,
    absorbing: Option<usize>,
    report: BuildReport,
}

impl StateGraph {
    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        states: Vec<State>,
        index: HashMap<State, usize>,
        mut transitions: Vec<Transition>,
        kappa: Vec<f64>,
        kappa_next: Vec<f64>,
        depth: Vec<u32>,
        absorbing: Option<usize>,
        report: BuildReport,
    ) -> Self {
        transitions.sort_by_key(|t| (t.source, t.reaction));
        let nodes = states.len() + usize::from(absorbing.is_some());
        let mut offsets = vec![0usize; nodes + 1];
        for t in &transitions {
            offsets[t.source + 1] += 1;
        }
        for i in 0..nodes {
            offsets[i + 1] += offsets[i];
        }
        StateGraph {
            states,
            index,
            transitions,
            offsets,
            kappa,
            kappa_next,
            depth,
            absorbing,
            report,
        }
    }

    /// Number of nodes, including the absorbing state when present.
    pub fn len(&self) -> usize {
        self.states.len() + usize::from(self.absorbing.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of population states (everything but the absorbing state).
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    /// Population vector of node `index`; `None` for the absorbing state.
    pub fn state(&self, index: usize) -> Option<&State> {
        self.states.get(index)
    }

    pub fn index_of(&self, state: &State) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn successors(&self, node: usize) -> &[Transition] {
        &self.transitions[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn absorbing_index(&self) -> Option<usize> {
        self.absorbing
    }

    /// Termination indicators after the last sweep (empty for reference graphs).
    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn kappa_next(&self) -> &[f64] {
        &self.kappa_next
    }

    /// BFS depth at which each population state was first discovered.
    pub fn depths(&self) -> &[u32] {
        &self.depth
    }

    pub fn report(&self) -> &BuildReport {
        &self.report
    }
}

const NONE: u32 = u32::MAX;

/// Incremental form of the approximate construction: holds the current graph
/// `SG^k` together with cached propensities and reverse adjacency.
pub struct Explorer<'m> {
    model: &'m SckModel,
    options: BuildOptions,
    reactions: usize,
    states: Vec<State>,
    index: HashMap<State, usize>,
    props: Vec<f64>,
    totals: Vec<f64>,
    succ: Vec<u32>,
    preds: Vec<Vec<(u32, u32)>>,
    kappa: Vec<f64>,
    kappa_next: Vec<f64>,
    depth: Vec<u32>,
    by_depth: Vec<Vec<u32>>,
    stamp: Vec<u32>,
    iteration: u32,
    state_counts: Vec<usize>,
    trace: Vec<PiSample>,
}

impl<'m> Explorer<'m> {
    /// `SG^0`: the initial state alone, with `kappa = 1`.
    pub fn new(model: &'m SckModel, options: BuildOptions) -> Result<Self, GraphError> {
        let mut ex = Explorer {
            model,
            options,
            reactions: model.reaction_count(),
            states: Vec::new(),
            index: HashMap::new(),
            props: Vec::new(),
            totals: Vec::new(),
            succ: Vec::new(),
            preds: Vec::new(),
            kappa: Vec::new(),
            kappa_next: Vec::new(),
            depth: Vec::new(),
            by_depth: Vec::new(),
            stamp: Vec::new(),
            iteration: 0,
            state_counts: Vec::new(),
            trace: Vec::new(),
        };
        ex.add_state(model.initial_state(), 0)?;
        ex.kappa[0] = 1.0;
        ex.state_counts.push(1);
        Ok(ex)
    }

    fn add_state(&mut self, state: State, depth: u32) -> Result<u32, GraphError> {
        if self.states.len() >= self.options.state_cap {
            return Err(GraphError::StateCapExceeded(self.options.state_cap));
        }
        let idx = self.states.len() as u32;
        let start = self.props.len();
        self.props.resize(start + self.reactions, 0.0);
        let total = self
            .model
            .propensities(&state, &mut self.props[start..])?;
        self.totals.push(total);
        self.succ.resize(self.succ.len() + self.reactions, NONE);
        self.preds.push(Vec::new());
        self.kappa.push(0.0);
        self.kappa_next.push(0.0);
        self.depth.push(depth);
        if self.by_depth.len() <= depth as usize {
            self.by_depth.resize(depth as usize + 1, Vec::new());
        }
        self.by_depth[depth as usize].push(idx);
        self.stamp.push(0);
        self.index.insert(state.clone(), idx as usize);
        self.states.push(state);
        Ok(idx)
    }

    fn recompute(&self, target: usize) -> f64 {
        let mut sum = 0.0;
        let mut carry = 0.0;
        for &(src, r) in &self.preds[target] {
            let src = src as usize;
            let term =
                self.kappa[src] * self.props[src * self.reactions + r as usize] / self.totals[src];
            if self.options.compensated {
                let y = term - carry;
                let t = sum + y;
                carry = (t - sum) - y;
                sum = t;
            } else {
                sum += term;
            }
        }
        sum
    }

    /// One breadth-first sweep from the initial state (`SG^{k-1}` to `SG^k`).
    /// Returns the number of population states afterwards.
    pub fn bfs_expand(&mut self, threshold: TerminationThreshold) -> Result<usize, GraphError> {
        self.iteration += 1;
        let k = self.iteration;
        let delta = threshold.value();
        let m = self.reactions;

        if self.options.trace {
            let d = (k - 1) as usize;
            let sum = self
                .by_depth
                .get(d)
                .map_or(0.0, |ids| ids.iter().map(|&i| self.kappa[i as usize]).sum());
            self.trace.push(PiSample {
                iteration: k as usize,
                depth: d,
                sum,
            });
        }

        let mut queue = VecDeque::new();
        self.stamp[0] = k;
        queue.push_back(0usize);
        while let Some(s) = queue.pop_front() {
            for i in 0..m {
                if self.props[s * m + i] <= 0.0 {
                    continue;
                }
                let known = self.succ[s * m + i];
                let target = if known != NONE {
                    known as usize
                } else {
                    let next = self.model.apply(i, &self.states[s])?;
                    let found = self.index.get(&next).copied();
                    let t = match found {
                        Some(t) => t,
                        None if self.kappa[s] < delta => continue,
                        None => {
                            let d = self.depth[s] + 1;
                            self.add_state(next, d)? as usize
                        }
                    };
                    self.succ[s * m + i] = t as u32;
                    self.preds[t].push((s as u32, i as u32));
                    t
                };
                self.kappa_next[target] = self.recompute(target);
                if self.stamp[target] != k {
                    self.stamp[target] = k;
                    queue.push_back(target);
                }
            }
        }

        std::mem::swap(&mut self.kappa, &mut self.kappa_next);
        self.kappa_next.iter_mut().for_each(|v| *v = 0.0);
        self.state_counts.push(self.states.len());
        Ok(self.states.len())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn iterations(&self) -> usize {
        self.iteration as usize
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    /// The current graph, without an absorbing state.
    pub fn into_graph(self, converged: bool) -> StateGraph {
        let m = self.reactions;
        let mut transitions = Vec::new();
        for s in 0..self.states.len() {
            for i in 0..m {
                let t = self.succ[s * m + i];
                if t != NONE {
                    transitions.push(Transition {
                        source: s,
                        reaction: i,
                        target: t as usize,
                        rate: self.props[s * m + i],
                    });
                }
            }
        }
        let report = BuildReport {
            iterations: self.iteration as usize,
            converged,
            state_counts: self.state_counts,
            pi_trace: self.options.trace.then_some(self.trace),
        };
        StateGraph::from_parts(
            self.states,
            self.index,
            transitions,
            self.kappa,
            self.kappa_next,
            self.depth,
            None,
            report,
        )
    }
}

/// Sweeps until `|SG^k| = |SG^{k-1}|` (or the iteration limit), then closes the
/// graph with an absorbing state. Hitting the limit is not an error; check
/// `report().converged`.
pub fn build_approximate_graph(
    model: &SckModel,
    threshold: TerminationThreshold,
    options: &BuildOptions,
) -> Result<StateGraph, GraphError> {
    let mut explorer = Explorer::new(model, options.clone())?;
    let mut previous = explorer.len();
    let mut converged = false;
    for _ in 0..options.max_iterations {
        let n = explorer.bfs_expand(threshold)?;
        if n == previous {
            converged = true;
            break;
        }
        previous = n;
    }
    add_absorbing_state(model, explorer.into_graph(converged))
}

/// Adds a fresh absorbing node and routes every enabled reaction lacking a
/// transition to it. The absorbing node has no outgoing transitions.
pub fn add_absorbing_state(model: &SckModel, graph: StateGraph) -> Result<StateGraph, GraphError> {
    if graph.absorbing.is_some() {
        return Err(GraphError::AlreadyClosed);
    }
    let absorbing = graph.states.len();
    let m = model.reaction_count();
    let mut props = vec![0.0; m];
    let mut transitions = Vec::with_capacity(graph.transitions.len());
    for s in 0..graph.states.len() {
        model.propensities(&graph.states[s], &mut props)?;
        let existing = graph.successors(s);
        for (i, &a) in props.iter().enumerate() {
            if a <= 0.0 {
                continue;
            }
            match existing.iter().find(|t| t.reaction == i) {
                Some(t) => transitions.push(*t),
                None => transitions.push(Transition {
                    source: s,
                    reaction: i,
                    target: absorbing,
                    rate: a,
                }),
            }
        }
    }
    let StateGraph {
        states,
        index,
        mut kappa,
        mut kappa_next,
        depth,
        report,
        ..
    } = graph;
    if !kappa.is_empty() {
        kappa.push(0.0);
        kappa_next.push(0.0);
    }
    Ok(StateGraph::from_parts(
        states,
        index,
        transitions,
        kappa,
        kappa_next,
        depth,
        Some(absorbing),
        report,
    ))
}

/// Per-species population caps for [`build_bounded_reference`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesBounds(Vec<Option<u32>>);

impl SpeciesBounds {
    /// Species not listed are left unbounded.
    pub fn new(model: &SckModel, bounds: &[(&str, u32)]) -> Result<Self, GraphError> {
        let mut caps = vec![None; model.species_count()];
        let initial = model.initial_state();
        for &(name, bound) in bounds {
            let i = model
                .species_index(name)
                .ok_or_else(|| ModelError::UnknownSpecies(name.to_string()))?;
            if initial.get(i) > bound {
                return Err(GraphError::BoundBelowInitial {
                    species: name.to_string(),
                    bound,
                    initial: initial.get(i),
                });
            }
            caps[i] = Some(bound);
        }
        Ok(SpeciesBounds(caps))
    }

    pub fn admits(&self, state: &State) -> bool {
        self.0
            .iter()
            .zip(state.counts())
            .all(|(cap, &c)| cap.is_none_or(|b| c <= b))
    }
}

/// Enumerates every state reachable from the initial state without leaving
/// the bounds; reactions that would leave them go to the absorbing state.
pub fn build_bounded_reference(
    model: &SckModel,
    bounds: &SpeciesBounds,
    state_cap: usize,
) -> Result<StateGraph, GraphError> {
    const ABS: usize = usize::MAX;
    let m = model.reaction_count();
    let mut states = vec![model.initial_state()];
    let mut index = HashMap::new();
    index.insert(states[0].clone(), 0usize);
    let mut depth = vec![0u32];
    let mut transitions = Vec::new();
    let mut props = vec![0.0; m];
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        model.propensities(&states[s], &mut props)?;
        for (i, &a) in props.iter().enumerate() {
            if a <= 0.0 {
                continue;
            }
            let next = model.apply(i, &states[s])?;
            let target = if !bounds.admits(&next) {
                ABS
            } else if let Some(&t) = index.get(&next) {
                t
            } else {
                if states.len() >= state_cap {
                    return Err(GraphError::StateCapExceeded(state_cap));
                }
                let t = states.len();
                index.insert(next.clone(), t);
                states.push(next);
                depth.push(depth[s] + 1);
                queue.push_back(t);
                t
            };
            transitions.push(Transition {
                source: s,
                reaction: i,
                target,
                rate: a,
            });
        }
    }
    let absorbing = states.len();
    for t in &mut transitions {
        if t.target == ABS {
            t.target = absorbing;
        }
    }
    let report = BuildReport {
        iterations: 1,
        converged: true,
        state_counts: vec![absorbing],
        pi_trace: None,
    };
    Ok(StateGraph::from_parts(
        states,
        index,
        transitions,
        Vec::new(),
        Vec::new(),
        depth,
        Some(absorbing),
        report,
    ))
}

/// Diagonal of the indicator-sum table: for iteration `k`, the summed
/// indicators of depth `k - 1` states.
pub fn depth_indicator_sums(graph: &StateGraph) -> Result<&[PiSample], GraphError> {
    graph
        .report
        .pi_trace
        .as_deref()
        .ok_or(GraphError::TraceUnavailable)
}
