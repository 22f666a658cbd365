//! Stochastic chemical kinetics models: species, reactions with state-change
//! vectors and propensity expressions, and the initial population vector.

mod expr;
mod parse;

use std::fmt;

use thiserror::Error;

pub use expr::{BinOp, EvalFault, ExponentSource, Expr};
pub use parse::parse_model;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: undeclared identifier `{name}`")]
    UndeclaredIdentifier {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("line {line}: duplicate species `{name}`")]
    DuplicateSpecies { name: String, line: usize },
    #[error("line {line}: duplicate parameter `{name}`")]
    DuplicateParameter { name: String, line: usize },
    #[error("line {line}: duplicate reaction `{name}`")]
    DuplicateReaction { name: String, line: usize },
    #[error("line {line}: species `{name}` has negative initial count")]
    NegativeInitialCount { name: String, line: usize },
    #[error("reaction `{reaction}` changes boundary species `{species}`")]
    BoundaryStateChange { reaction: String, species: String },
    #[error("line {line}, column {column}: exponent must be a non-negative integer")]
    InvalidExponent { line: usize, column: usize },
    #[error("model has no {0}")]
    Empty(&'static str),
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("state has {got} entries but the model has {expected} species")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("division by zero evaluating propensity of `{reaction}` at {state}")]
    DivisionByZero { reaction: String, state: State },
    #[error("propensity of `{reaction}` is {value} at {state}")]
    InvalidPropensity {
        reaction: String,
        value: f64,
        state: State,
    },
    #[error("reaction `{reaction}` drives a population negative from {state}")]
    NegativePopulation { reaction: String, state: State },
}

/// Population vector, indexed by the owning model's species order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State(Box<[u32]>);

impl State {
    pub fn new(counts: impl Into<Box<[u32]>>) -> Self {
        State(counts.into())
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, species: usize) -> u32 {
        self.0[species]
    }

    /// `self + delta`, or `None` if any entry would go negative.
    pub fn offset(&self, delta: &[i64]) -> Option<State> {
        let mut out = Vec::with_capacity(self.0.len());
        for (&c, &d) in self.0.iter().zip(delta) {
            let v = i64::from(c) + d;
            out.push(u32::try_from(v).ok()?);
        }
        Some(State(out.into()))
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub name: String,
    pub initial_count: u32,
    /// Non-depleting: no reaction may change its count.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub name: String,
    /// Dense state-change vector, one entry per species.
    pub state_change: Vec<i64>,
    pub propensity: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SckModel {
    species: Vec<Species>,
    parameters: Vec<Parameter>,
    reactions: Vec<Reaction>,
}

impl SckModel {
    /// Assembles a model from resolved parts, checking the structural invariants.
    pub fn new(
        species: Vec<Species>,
        parameters: Vec<Parameter>,
        reactions: Vec<Reaction>,
    ) -> Result<Self, ModelError> {
        if species.is_empty() {
            return Err(ModelError::Empty("species"));
        }
        if reactions.is_empty() {
            return Err(ModelError::Empty("reactions"));
        }
        for r in &reactions {
            if r.state_change.len() != species.len() {
                return Err(ModelError::DimensionMismatch {
                    expected: species.len(),
                    got: r.state_change.len(),
                });
            }
            for (s, &d) in species.iter().zip(&r.state_change) {
                if s.boundary && d != 0 {
                    return Err(ModelError::BoundaryStateChange {
                        reaction: r.name.clone(),
                        species: s.name.clone(),
                    });
                }
            }
        }
        Ok(SckModel {
            species,
            parameters,
            reactions,
        })
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn reaction_count(&self) -> usize {
        self.reactions.len()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn species_names(&self) -> Vec<String> {
        self.species.iter().map(|s| s.name.clone()).collect()
    }

    pub fn initial_state(&self) -> State {
        State::new(
            self.species
                .iter()
                .map(|s| s.initial_count)
                .collect::<Vec<_>>(),
        )
    }

    /// Copy of the model with some initial counts replaced.
    pub fn with_initial(&self, overrides: &[(&str, u32)]) -> Result<SckModel, ModelError> {
        let mut out = self.clone();
        for &(name, count) in overrides {
            let i = self
                .species_index(name)
                .ok_or_else(|| ModelError::UnknownSpecies(name.to_string()))?;
            out.species[i].initial_count = count;
        }
        Ok(out)
    }

    fn check_dimension(&self, state: &State) -> Result<(), ModelError> {
        if state.len() != self.species.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.species.len(),
                got: state.len(),
            });
        }
        Ok(())
    }

    fn param_values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.value).collect()
    }

    /// Propensity `a_i(s)` of one reaction.
    pub fn propensity(&self, reaction: usize, state: &State) -> Result<f64, ModelError> {
        self.check_dimension(state)?;
        let params = self.param_values();
        self.propensity_with(reaction, state, &params)
    }

    fn propensity_with(
        &self,
        reaction: usize,
        state: &State,
        params: &[f64],
    ) -> Result<f64, ModelError> {
        let r = &self.reactions[reaction];
        let value = r
            .propensity
            .eval(state.counts(), params)
            .map_err(|EvalFault::DivisionByZero| ModelError::DivisionByZero {
                reaction: r.name.clone(),
                state: state.clone(),
            })?;
        if !value.is_finite() || value < 0.0 {
            return Err(ModelError::InvalidPropensity {
                reaction: r.name.clone(),
                value,
                state: state.clone(),
            });
        }
        Ok(value)
    }

    /// Writes every reaction's propensity into `out` and returns their sum.
    pub fn propensities(&self, state: &State, out: &mut [f64]) -> Result<f64, ModelError> {
        self.check_dimension(state)?;
        let params = self.param_values();
        let mut total = 0.0;
        for (i, slot) in out.iter_mut().enumerate().take(self.reactions.len()) {
            *slot = self.propensity_with(i, state, &params)?;
            total += *slot;
        }
        Ok(total)
    }

    /// Reporter species: non-boundary species that are co-produced alongside
    /// some other species and whose count is read only by reactions that
    /// change nothing but themselves (their own decay). No rate outside a
    /// reporter's own reactions depends on it.
    pub fn reporter_species(&self) -> Vec<usize> {
        (0..self.species.len())
            .filter(|&x| {
                if self.species[x].boundary {
                    return false;
                }
                let co_produced = self.reactions.iter().any(|r| {
                    r.state_change[x] != 0
                        && r.state_change.iter().enumerate().any(|(j, &d)| j != x && d != 0)
                });
                let feeds_back = self.reactions.iter().any(|r| {
                    let mut refs = Vec::new();
                    r.propensity.species_refs(&mut refs);
                    refs.contains(&x)
                        && r.state_change.iter().enumerate().any(|(j, &d)| j != x && d != 0)
                });
                co_produced && !feeds_back
            })
            .collect()
    }

    /// Lumps away the reporter species not named in `observed`. The remaining
    /// populations form a Markov chain on their own, so every property over
    /// them is preserved exactly. Reactions that only touched removed species
    /// are dropped (they would be self-loops). Returns an unchanged copy if
    /// nothing can be removed.
    pub fn lump_reporters(&self, observed: &[&str]) -> Result<SckModel, ModelError> {
        let mut keep = vec![true; self.species.len()];
        for i in self.reporter_species() {
            keep[i] = false;
        }
        for name in observed {
            let i = self
                .species_index(name)
                .ok_or_else(|| ModelError::UnknownSpecies(name.to_string()))?;
            keep[i] = true;
        }
        if keep.iter().all(|&k| k) {
            return Ok(self.clone());
        }
        let mut map = vec![None; keep.len()];
        let mut next = 0;
        for (slot, &k) in map.iter_mut().zip(&keep) {
            if k {
                *slot = Some(next);
                next += 1;
            }
        }
        let species = self
            .species
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(s, _)| s.clone())
            .collect();
        let reactions = self
            .reactions
            .iter()
            .filter_map(|r| {
                let change: Vec<i64> = r
                    .state_change
                    .iter()
                    .zip(&keep)
                    .filter(|(_, &k)| k)
                    .map(|(&d, _)| d)
                    .collect();
                let emptied = change.iter().all(|&d| d == 0)
                    && r.state_change.iter().any(|&d| d != 0);
                (!emptied).then(|| Reaction {
                    name: r.name.clone(),
                    state_change: change,
                    propensity: r.propensity.remap_species(&map),
                })
            })
            .collect();
        SckModel::new(species, self.parameters.clone(), reactions)
    }

    /// `s + v_i`.
    pub fn apply(&self, reaction: usize, state: &State) -> Result<State, ModelError> {
        self.check_dimension(state)?;
        let r = &self.reactions[reaction];
        state
            .offset(&r.state_change)
            .ok_or_else(|| ModelError::NegativePopulation {
                reaction: r.name.clone(),
                state: state.clone(),
            })
    }
}

impl fmt::Display for SckModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let species = self.species_names();
        let params: Vec<String> = self.parameters.iter().map(|p| p.name.clone()).collect();
        for p in &self.parameters {
            writeln!(f, "param {} = {}", p.name, p.value)?;
        }
        for s in &self.species {
            write!(f, "species {} = {}", s.name, s.initial_count)?;
            if s.boundary {
                f.write_str(" boundary")?;
            }
            writeln!(f)?;
        }
        for r in &self.reactions {
            write!(f, "reaction {}: {{", r.name)?;
            let mut first = true;
            for (i, &d) in r.state_change.iter().enumerate() {
                if d == 0 {
                    continue;
                }
                if !first {
                    f.write_str(", ")?;
                }
                first = false;
                write!(f, "{}: {}", species[i], d)?;
            }
            writeln!(f, "}} @ {}", r.propensity.display(&species, &params))?;
        }
        Ok(())
    }
}
