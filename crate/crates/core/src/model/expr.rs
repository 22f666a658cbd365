//! Propensity expressions.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

/// Where an exponent came from, so the model can be written back out verbatim.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExponentSource {
    Literal,
    Param(usize),
}

/// Expression tree with every identifier resolved to an index into the owning
/// model's species or parameter tables.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Param(usize),
    Species(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Integer power; the exponent is resolved at parse time.
    Pow {
        base: Box<Expr>,
        exponent: u32,
        source: ExponentSource,
    },
}

/// Evaluation failure inside an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalFault {
    DivisionByZero,
}

impl Expr {
    /// Evaluates the expression at a population vector.
    pub fn eval(&self, counts: &[u32], params: &[f64]) -> Result<f64, EvalFault> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Param(i) => params[*i],
            Expr::Species(i) => f64::from(counts[*i]),
            Expr::Neg(e) => -e.eval(counts, params)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(counts, params)?;
                let b = r.eval(counts, params)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalFault::DivisionByZero);
                        }
                        a / b
                    }
                }
            }
            Expr::Pow { base, exponent, .. } => {
                base.eval(counts, params)?.powi(*exponent as i32)
            }
        })
    }

    /// Species indices referenced anywhere in the expression.
    pub fn species_refs(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Species(i) => out.push(*i),
            Expr::Num(_) | Expr::Param(_) => {}
            Expr::Neg(e) => e.species_refs(out),
            Expr::Binary(_, l, r) => {
                l.species_refs(out);
                r.species_refs(out);
            }
            Expr::Pow { base, .. } => base.species_refs(out),
        }
    }

    /// Copy with species indices rewritten through `map`; every referenced
    /// species must map to `Some`.
    pub fn remap_species(&self, map: &[Option<usize>]) -> Expr {
        match self {
            Expr::Species(i) => Expr::Species(map[*i].expect("referenced species is kept")),
            Expr::Num(_) | Expr::Param(_) => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.remap_species(map))),
            Expr::Binary(op, l, r) => Expr::Binary(
                *op,
                Box::new(l.remap_species(map)),
                Box::new(r.remap_species(map)),
            ),
            Expr::Pow {
                base,
                exponent,
                source,
            } => Expr::Pow {
                base: Box::new(base.remap_species(map)),
                exponent: *exponent,
                source: *source,
            },
        }
    }

    /// Renders the expression in model-file syntax.
    pub fn display<'a>(&'a self, species: &'a [String], params: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay {
            expr: self,
            species,
            params,
        }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    species: &'a [String],
    params: &'a [String],
}

impl ExprDisplay<'_> {
    fn write(&self, f: &mut fmt::Formatter<'_>, e: &Expr, parent: u8, right: bool) -> fmt::Result {
        match e {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Param(i) => f.write_str(&self.params[*i]),
            Expr::Species(i) => write!(f, "[{}]", self.species[*i]),
            Expr::Neg(inner) => {
                let paren = parent > 3;
                f.write_str(if paren { "(-" } else { "-" })?;
                self.write(f, inner, 3, false)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                let paren = p < parent || (p == parent && right);
                if paren {
                    f.write_str("(")?;
                }
                self.write(f, l, p, false)?;
                write!(f, " {} ", op.symbol())?;
                self.write(f, r, p, true)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Pow {
                base,
                exponent,
                source,
            } => {
                let paren = parent > 4;
                if paren {
                    f.write_str("(")?;
                }
                self.write(f, base, 5, false)?;
                match source {
                    ExponentSource::Literal => write!(f, "^{exponent}")?,
                    ExponentSource::Param(i) => write!(f, "^{}", self.params[*i])?,
                }
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, self.expr, 0, false)
    }
}
