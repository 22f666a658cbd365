//! Probabilistic model checking for stochastic chemical kinetics models.
//!
//! The infinite-state CTMC of a reaction network is approximated by a finite
//! state graph explored breadth-first, where exploration past a state stops
//! once its accumulated path probability (termination indicator) drops below a
//! threshold. Truncated transitions are redirected to a single absorbing
//! state, so transient analysis yields a guaranteed bound `[l, u]` on the
//! probability of a time-bounded CSL property.

pub mod model;
pub mod stategraph;
pub mod ctmc;
pub mod csl;
pub mod ssa;
pub mod cli;
