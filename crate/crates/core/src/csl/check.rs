//! Reduction of time-bounded path formulas to transient analysis.

use super::{CslError, CslProperty, StatePredicate, TimeBound};
use crate::ctmc::{
    probability_bound, transient_distribution, transient_series, Distribution, ProbabilityBound,
    RateMatrix,
};
use crate::model::SckModel;
use crate::stategraph::StateGraph;

/// Indices of the graph's non-absorbing states satisfying `pred`.
pub fn goal_states(
    model: &SckModel,
    graph: &StateGraph,
    pred: &StatePredicate,
) -> Result<Vec<usize>, CslError> {
    let mask = mask(model, graph, pred)?;
    Ok((0..mask.len()).filter(|&i| mask[i]).collect())
}

fn mask(model: &SckModel, graph: &StateGraph, pred: &StatePredicate) -> Result<Vec<bool>, CslError> {
    let bound = pred.bind(model)?;
    graph.states().iter().map(|s| bound.evaluate(s)).collect()
}

/// Until with interval `[a, ·]`, normalized so all operators share it.
struct UntilProblem {
    lower: f64,
    /// ψ1 mask over non-absorbing states.
    left: Vec<bool>,
    right: Vec<bool>,
    /// Report `[1 - u, 1 - l]` (globally via its dual).
    complement: bool,
}

fn until_problem(
    model: &SckModel,
    graph: &StateGraph,
    property: &CslProperty,
) -> Result<(UntilProblem, TimeBound), CslError> {
    let (bound, left, right, complement) = match property {
        CslProperty::Until { bound, left, right } => (*bound, left.clone(), right.clone(), false),
        CslProperty::Finally { bound, target } => {
            (*bound, StatePredicate::True, target.clone(), false)
        }
        CslProperty::Globally { bound, target } => {
            (*bound, StatePredicate::True, target.negate(), true)
        }
        CslProperty::SteadyState(_) => return Err(CslError::Unsupported("the steady-state operator")),
    };
    if !bound.upper.is_finite() {
        return Err(CslError::Unsupported("an unbounded time interval"));
    }
    Ok((
        UntilProblem {
            lower: bound.lower,
            left: mask(model, graph, &left)?,
            right: mask(model, graph, &right)?,
            complement,
        },
        bound,
    ))
}

impl UntilProblem {
    fn bound(&self, dist: &Distribution, absorbing: usize) -> Result<ProbabilityBound, CslError> {
        let goal: Vec<usize> = (0..self.right.len())
            .filter(|&i| self.right[i])
            .collect();
        let b = probability_bound(dist, &goal, absorbing)?;
        Ok(if self.complement { b.complement() } else { b })
    }

    /// Chain where ψ2 and ¬ψ1 states are made absorbing.
    fn until_chain(&self, base: &RateMatrix) -> RateMatrix {
        let n = self.right.len();
        base.make_absorbing(&|i| i < n && (self.right[i] || !self.left[i]))
    }

    /// Phase one for `a > 0`: run to `a` on the chain where ¬ψ1 states
    /// absorb, then drop mass that left ψ1. The truncation state keeps its
    /// mass, since those paths may still satisfy the formula.
    fn start(
        &self,
        base: &RateMatrix,
        initial: &Distribution,
        tolerance: f64,
    ) -> Result<Distribution, CslError> {
        if self.lower == 0.0 {
            return Ok(initial.clone());
        }
        let n = self.left.len();
        let chain = base.make_absorbing(&|i| i < n && !self.left[i]);
        let mut d = transient_distribution(&chain, initial, self.lower, tolerance)?;
        d.discard(&|i| i < n && !self.left[i]);
        Ok(d)
    }
}

/// Probability bound `[l, u]` for `property` from the graph's initial state.
/// The truncation state never satisfies the goal, so its mass is the width
/// of the window.
pub fn check_property(
    model: &SckModel,
    graph: &StateGraph,
    property: &CslProperty,
    tolerance: f64,
) -> Result<ProbabilityBound, CslError> {
    let upper = property
        .bound()
        .ok_or(CslError::Unsupported("the steady-state operator"))?
        .upper;
    Ok(check_property_series(model, graph, property, &[upper], tolerance)?[0])
}

/// Bounds with the interval's upper end set to each of `times` in turn
/// (non-decreasing, each at least the interval's lower end). One transient
/// sweep serves all time points.
pub fn check_property_series(
    model: &SckModel,
    graph: &StateGraph,
    property: &CslProperty,
    times: &[f64],
    tolerance: f64,
) -> Result<Vec<ProbabilityBound>, CslError> {
    let (problem, bound) = until_problem(model, graph, property)?;
    let absorbing = graph.absorbing_index().ok_or(crate::ctmc::CtmcError::NotClosed)?;
    if let Some(&t) = times.iter().find(|&&t| !(t >= bound.lower) || !t.is_finite()) {
        return Err(CslError::TimeOutOfInterval(t));
    }
    let base = RateMatrix::from_graph(graph)?;
    let initial = Distribution::point(base.dimension(), 0)?;
    let phases = if problem.lower > 0.0 { 2.0 } else { 1.0 };
    let start = problem.start(&base, &initial, tolerance / phases)?;
    let chain = problem.until_chain(&base);
    let offsets: Vec<f64> = times.iter().map(|t| t - problem.lower).collect();
    let dists = transient_series(&chain, &start, &offsets, tolerance / phases)?;
    dists.iter().map(|d| problem.bound(d, absorbing)).collect()
}
