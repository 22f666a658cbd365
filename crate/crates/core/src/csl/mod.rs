//! Time-bounded CSL properties: the `U`/`F`/`G`/`St` grammar, state
//! predicates, and checking against a closed state graph.

mod check;
mod parse;

use std::fmt;

use thiserror::Error;

use crate::ctmc::CtmcError;
use crate::model::{SckModel, State};

pub use check::{check_property, check_property_series, goal_states};
pub use parse::{parse_property, parse_property_file};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CslError {
    #[error("column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("nested property `{0}(...)` inside an expression is not supported")]
    NestedProperty(String),
    #[error("time constraint `{0}` is not a single interval")]
    NonInterval(String),
    #[error("time constraint `{0}` is unsatisfiable")]
    EmptyInterval(String),
    #[error("time constraint: {0}")]
    TimeConstraint(String),
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("division by zero evaluating a predicate at {0}")]
    DivisionByZero(State),
    #[error("{0} is not supported for checking")]
    Unsupported(&'static str),
    #[error("time bound {0} lies outside the property interval")]
    TimeOutOfInterval(f64),
    #[error(transparent)]
    Ctmc(#[from] CtmcError),
    #[error("no property found")]
    NoProperty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl CmpOp {
    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Arithmetic over species counts and constants.
#[derive(Debug, Clone, PartialEq)]
pub enum Arith {
    Num(f64),
    Species(String),
    Neg(Box<Arith>),
    Binary(ArithOp, Box<Arith>, Box<Arith>),
}

/// Boolean state formula over comparisons of [`Arith`] terms.
#[derive(Debug, Clone, PartialEq)]
pub enum StatePredicate {
    True,
    False,
    Not(Box<StatePredicate>),
    And(Box<StatePredicate>, Box<StatePredicate>),
    Or(Box<StatePredicate>, Box<StatePredicate>),
    Compare(CmpOp, Arith, Arith),
}

/// Closed time interval `[lower, upper]`; `upper` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBound {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CslProperty {
    Until {
        bound: TimeBound,
        left: StatePredicate,
        right: StatePredicate,
    },
    Finally {
        bound: TimeBound,
        target: StatePredicate,
    },
    Globally {
        bound: TimeBound,
        target: StatePredicate,
    },
    SteadyState(StatePredicate),
}

impl CslProperty {
    pub fn bound(&self) -> Option<TimeBound> {
        match self {
            CslProperty::Until { bound, .. }
            | CslProperty::Finally { bound, .. }
            | CslProperty::Globally { bound, .. } => Some(*bound),
            CslProperty::SteadyState(_) => None,
        }
    }

    /// Same property with the interval's upper end replaced.
    pub fn with_upper(&self, upper: f64) -> CslProperty {
        let mut p = self.clone();
        match &mut p {
            CslProperty::Until { bound, .. }
            | CslProperty::Finally { bound, .. }
            | CslProperty::Globally { bound, .. } => bound.upper = upper,
            CslProperty::SteadyState(_) => {}
        }
        p
    }

    /// Species named anywhere in the property.
    pub fn species(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            CslProperty::Until { left, right, .. } => {
                left.collect_species(&mut out);
                right.collect_species(&mut out);
            }
            CslProperty::Finally { target, .. }
            | CslProperty::Globally { target, .. }
            | CslProperty::SteadyState(target) => target.collect_species(&mut out),
        }
        out.sort();
        out.dedup();
        out
    }
}

impl Arith {
    fn collect_species(&self, out: &mut Vec<String>) {
        match self {
            Arith::Num(_) => {}
            Arith::Species(s) => out.push(s.clone()),
            Arith::Neg(a) => a.collect_species(out),
            Arith::Binary(_, l, r) => {
                l.collect_species(out);
                r.collect_species(out);
            }
        }
    }

    fn compile(&self, model: &SckModel) -> Result<Compiled, CslError> {
        Ok(match self {
            Arith::Num(v) => Compiled::Num(*v),
            Arith::Species(name) => {
                let i = model
                    .species_index(name)
                    .ok_or_else(|| CslError::UnknownSpecies(name.clone()))?;
                let s = &model.species()[i];
                if s.boundary {
                    Compiled::Num(f64::from(s.initial_count))
                } else {
                    Compiled::Species(i)
                }
            }
            Arith::Neg(a) => Compiled::Neg(Box::new(a.compile(model)?)),
            Arith::Binary(op, l, r) => {
                Compiled::Binary(*op, Box::new(l.compile(model)?), Box::new(r.compile(model)?))
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Arith::Binary(ArithOp::Add | ArithOp::Sub, ..) => 1,
            Arith::Binary(..) => 2,
            Arith::Neg(_) => 3,
            _ => 4,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        let own = self.precedence();
        if own < parent {
            f.write_str("(")?;
        }
        match self {
            Arith::Num(v) => write!(f, "{v}")?,
            Arith::Species(s) => f.write_str(s)?,
            Arith::Neg(a) => {
                f.write_str("-")?;
                a.write(f, 4)?;
            }
            Arith::Binary(op, l, r) => {
                let sym = match op {
                    ArithOp::Add => " + ",
                    ArithOp::Sub => " - ",
                    ArithOp::Mul => " * ",
                    ArithOp::Div => " / ",
                };
                l.write(f, own)?;
                f.write_str(sym)?;
                r.write(f, own + 1)?;
            }
        }
        if own < parent {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Arith {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

/// Predicate resolved against a model; boundary species are constants.
#[derive(Debug, Clone)]
enum Compiled {
    Num(f64),
    Species(usize),
    Neg(Box<Compiled>),
    Binary(ArithOp, Box<Compiled>, Box<Compiled>),
}

impl Compiled {
    fn eval(&self, counts: &[u32]) -> Option<f64> {
        Some(match self {
            Compiled::Num(v) => *v,
            Compiled::Species(i) => f64::from(counts[*i]),
            Compiled::Neg(a) => -a.eval(counts)?,
            Compiled::Binary(op, l, r) => {
                let a = l.eval(counts)?;
                let b = r.eval(counts)?;
                match op {
                    ArithOp::Add => a + b,
                    ArithOp::Sub => a - b,
                    ArithOp::Mul => a * b,
                    ArithOp::Div if b == 0.0 => return None,
                    ArithOp::Div => a / b,
                }
            }
        })
    }
}

#[derive(Debug, Clone)]
enum CompiledPredicate {
    Const(bool),
    Not(Box<CompiledPredicate>),
    And(Box<CompiledPredicate>, Box<CompiledPredicate>),
    Or(Box<CompiledPredicate>, Box<CompiledPredicate>),
    Compare(CmpOp, Compiled, Compiled),
}

impl CompiledPredicate {
    fn eval(&self, counts: &[u32]) -> Option<bool> {
        Some(match self {
            CompiledPredicate::Const(b) => *b,
            CompiledPredicate::Not(p) => !p.eval(counts)?,
            CompiledPredicate::And(a, b) => a.eval(counts)? && b.eval(counts)?,
            CompiledPredicate::Or(a, b) => a.eval(counts)? || b.eval(counts)?,
            CompiledPredicate::Compare(op, l, r) => op.holds(l.eval(counts)?, r.eval(counts)?),
        })
    }
}

/// A [`StatePredicate`] bound to one model's species layout.
#[derive(Debug, Clone)]
pub struct BoundPredicate(CompiledPredicate);

impl BoundPredicate {
    pub fn evaluate(&self, state: &State) -> Result<bool, CslError> {
        self.0
            .eval(state.counts())
            .ok_or_else(|| CslError::DivisionByZero(state.clone()))
    }
}

impl StatePredicate {
    fn collect_species(&self, out: &mut Vec<String>) {
        match self {
            StatePredicate::True | StatePredicate::False => {}
            StatePredicate::Not(p) => p.collect_species(out),
            StatePredicate::And(a, b) | StatePredicate::Or(a, b) => {
                a.collect_species(out);
                b.collect_species(out);
            }
            StatePredicate::Compare(_, l, r) => {
                l.collect_species(out);
                r.collect_species(out);
            }
        }
    }

    /// Resolves species names against `model`.
    pub fn bind(&self, model: &SckModel) -> Result<BoundPredicate, CslError> {
        fn go(p: &StatePredicate, m: &SckModel) -> Result<CompiledPredicate, CslError> {
            Ok(match p {
                StatePredicate::True => CompiledPredicate::Const(true),
                StatePredicate::False => CompiledPredicate::Const(false),
                StatePredicate::Not(a) => CompiledPredicate::Not(Box::new(go(a, m)?)),
                StatePredicate::And(a, b) => {
                    CompiledPredicate::And(Box::new(go(a, m)?), Box::new(go(b, m)?))
                }
                StatePredicate::Or(a, b) => {
                    CompiledPredicate::Or(Box::new(go(a, m)?), Box::new(go(b, m)?))
                }
                StatePredicate::Compare(op, l, r) => {
                    CompiledPredicate::Compare(*op, l.compile(m)?, r.compile(m)?)
                }
            })
        }
        Ok(BoundPredicate(go(self, model)?))
    }

    pub fn negate(&self) -> StatePredicate {
        StatePredicate::Not(Box::new(self.clone()))
    }

    fn precedence(&self) -> u8 {
        match self {
            StatePredicate::Or(..) => 1,
            StatePredicate::And(..) => 2,
            _ => 3,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        let own = self.precedence();
        if own < parent {
            f.write_str("(")?;
        }
        match self {
            StatePredicate::True => f.write_str("true")?,
            StatePredicate::False => f.write_str("false")?,
            StatePredicate::Not(p) => {
                f.write_str("!(")?;
                p.write(f, 0)?;
                f.write_str(")")?;
            }
            StatePredicate::And(a, b) => {
                a.write(f, own)?;
                f.write_str(" & ")?;
                b.write(f, own + 1)?;
            }
            StatePredicate::Or(a, b) => {
                a.write(f, own)?;
                f.write_str(" | ")?;
                b.write(f, own + 1)?;
            }
            StatePredicate::Compare(op, l, r) => write!(f, "{l} {} {r}", op.symbol())?,
        }
        if own < parent {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for StatePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

impl fmt::Display for TimeBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.lower > 0.0, self.upper.is_finite()) {
            (false, true) => write!(f, "t <= {}", self.upper),
            (true, true) => write!(f, "t >= {} & t <= {}", self.lower, self.upper),
            (true, false) => write!(f, "t >= {}", self.lower),
            (false, false) => f.write_str("true"),
        }
    }
}

impl fmt::Display for CslProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CslProperty::Until { bound, left, right } => write!(f, "U({bound}, {left}, {right})"),
            CslProperty::Finally { bound, target } => write!(f, "F({bound}, {target})"),
            CslProperty::Globally { bound, target } => write!(f, "G({bound}, {target})"),
            CslProperty::SteadyState(p) => write!(f, "St({p})"),
        }
    }
}

/// Evaluates `pred` at `state` of `model`.
pub fn evaluate_predicate(
    pred: &StatePredicate,
    model: &SckModel,
    state: &State,
) -> Result<bool, CslError> {
    pred.bind(model)?.evaluate(state)
}
