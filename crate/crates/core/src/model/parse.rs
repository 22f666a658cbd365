//! Line-oriented model file parser.
//!
//! ```text
//! # comment
//! param kd = 0.0075
//! species LacI = 60
//! species IPTG = 100 boundary
//! reaction deg_LacI: {LacI: -1} @ kd * [LacI]
//! ```
//!
//! Declarations may appear in any order; reactions are resolved after every
//! `param` and `species` line has been read.

use std::collections::HashMap;

use super::{BinOp, ExponentSource, Expr, ModelError, Parameter, Reaction, SckModel, Species};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number { value: f64, integral: bool },
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ModelError {
    ModelError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str, line: usize) -> Result<Vec<Token>, ModelError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                column,
            });
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            let mut integral = true;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                integral &= chars[i] != '.';
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    integral = false;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let raw: String = chars[start..i].iter().collect();
            let value: f64 = raw
                .parse()
                .map_err(|_| syntax(line, column, format!("malformed number `{raw}`")))?;
            out.push(Token {
                tok: Tok::Number { value, integral },
                column,
            });
            continue;
        }
        if "=:{},@+-*/^()[]".contains(c) {
            out.push(Token {
                tok: Tok::Sym(c),
                column,
            });
            i += 1;
            continue;
        }
        return Err(syntax(line, column, format!("unexpected character `{c}`")));
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_column: usize,
}

impl<'a> Cursor<'a> {
    fn new(toks: &'a [Token], line: usize, text: &str) -> Self {
        Cursor {
            toks,
            pos: 0,
            line,
            end_column: text.chars().count() + 1,
        }
    }

    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn column(&self) -> usize {
        self.peek().map_or(self.end_column, |t| t.column)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    fn error(&self, message: impl Into<String>) -> ModelError {
        syntax(self.line, self.column(), message)
    }

    fn at_sym(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Sym(s), .. }) if *s == c)
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ModelError> {
        if self.at_sym(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Result<(String, usize), ModelError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(name),
                column,
            }) => {
                self.pos += 1;
                Ok((name.clone(), *column))
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    /// Optionally signed integer literal.
    fn integer(&mut self) -> Result<i64, ModelError> {
        let negative = if self.at_sym('-') {
            self.pos += 1;
            true
        } else {
            false
        };
        match self.peek() {
            Some(Token {
                tok: Tok::Number {
                    value,
                    integral: true,
                },
                ..
            }) if *value <= i64::MAX as f64 => {
                self.pos += 1;
                let v = *value as i64;
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.error("expected integer")),
        }
    }

    fn finish(&self) -> Result<(), ModelError> {
        if self.pos < self.toks.len() {
            Err(self.error("unexpected trailing input"))
        } else {
            Ok(())
        }
    }
}

struct Scope<'a> {
    species: &'a HashMap<String, usize>,
    params: &'a HashMap<String, usize>,
    param_values: &'a [f64],
}

fn parse_expr(c: &mut Cursor<'_>, scope: &Scope<'_>) -> Result<Expr, ModelError> {
    let mut lhs = parse_term(c, scope)?;
    loop {
        let op = if c.at_sym('+') {
            BinOp::Add
        } else if c.at_sym('-') {
            BinOp::Sub
        } else {
            return Ok(lhs);
        };
        c.next();
        let rhs = parse_term(c, scope)?;
        lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_term(c: &mut Cursor<'_>, scope: &Scope<'_>) -> Result<Expr, ModelError> {
    let mut lhs = parse_unary(c, scope)?;
    loop {
        let op = if c.at_sym('*') {
            BinOp::Mul
        } else if c.at_sym('/') {
            BinOp::Div
        } else {
            return Ok(lhs);
        };
        c.next();
        let rhs = parse_unary(c, scope)?;
        lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
    }
}

fn parse_unary(c: &mut Cursor<'_>, scope: &Scope<'_>) -> Result<Expr, ModelError> {
    if c.at_sym('-') {
        c.next();
        return Ok(Expr::Neg(Box::new(parse_unary(c, scope)?)));
    }
    let base = parse_atom(c, scope)?;
    if !c.at_sym('^') {
        return Ok(base);
    }
    c.next();
    let column = c.column();
    let invalid = ModelError::InvalidExponent {
        line: c.line,
        column,
    };
    let (exponent, source) = match c.next() {
        Some(Token {
            tok: Tok::Number { value, integral },
            ..
        }) => {
            if !*integral || *value > f64::from(i32::MAX as u32) {
                return Err(invalid);
            }
            (*value as u32, ExponentSource::Literal)
        }
        Some(Token {
            tok: Tok::Ident(name),
            column,
        }) => {
            let &idx = scope
                .params
                .get(name)
                .ok_or_else(|| ModelError::UndeclaredIdentifier {
                    name: name.clone(),
                    line: c.line,
                    column: *column,
                })?;
            let v = scope.param_values[idx];
            if v < 0.0 || v.fract() != 0.0 || v > f64::from(i32::MAX as u32) {
                return Err(invalid);
            }
            (v as u32, ExponentSource::Param(idx))
        }
        _ => return Err(invalid),
    };
    Ok(Expr::Pow {
        base: Box::new(base),
        exponent,
        source,
    })
}

fn parse_atom(c: &mut Cursor<'_>, scope: &Scope<'_>) -> Result<Expr, ModelError> {
    let line = c.line;
    match c.next() {
        Some(Token {
            tok: Tok::Number { value, .. },
            ..
        }) => Ok(Expr::Num(*value)),
        Some(Token {
            tok: Tok::Ident(name),
            column,
        }) => scope
            .params
            .get(name)
            .map(|&i| Expr::Param(i))
            .ok_or_else(|| ModelError::UndeclaredIdentifier {
                name: name.clone(),
                line,
                column: *column,
            }),
        Some(Token {
            tok: Tok::Sym('['),
            ..
        }) => {
            let (name, column) = c.ident()?;
            c.expect_sym(']')?;
            scope
                .species
                .get(&name)
                .map(|&i| Expr::Species(i))
                .ok_or(ModelError::UndeclaredIdentifier { name, line, column })
        }
        Some(Token {
            tok: Tok::Sym('('),
            ..
        }) => {
            let e = parse_expr(c, scope)?;
            c.expect_sym(')')?;
            Ok(e)
        }
        _ => {
            c.pos -= 1;
            Err(c.error("expected number, parameter, [species] or `(`"))
        }
    }
}

/// Parses a model file.
pub fn parse_model(text: &str) -> Result<SckModel, ModelError> {
    let mut species: Vec<Species> = Vec::new();
    let mut species_idx: HashMap<String, usize> = HashMap::new();
    let mut params: Vec<Parameter> = Vec::new();
    let mut param_idx: HashMap<String, usize> = HashMap::new();
    let mut pending: Vec<(usize, &str, Vec<Token>)> = Vec::new();

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let toks = lex(raw, line)?;
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor::new(&toks, line, raw);
        let (keyword, _) = c.ident()?;
        match keyword.as_str() {
            "param" => {
                let (name, _) = c.ident()?;
                c.expect_sym('=')?;
                let value = match c.next() {
                    Some(Token {
                        tok: Tok::Number { value, .. },
                        ..
                    }) => *value,
                    _ => {
                        c.pos -= 1;
                        return Err(c.error("expected non-negative number"));
                    }
                };
                c.finish()?;
                if param_idx.contains_key(&name) {
                    return Err(ModelError::DuplicateParameter { name, line });
                }
                param_idx.insert(name.clone(), params.len());
                params.push(Parameter { name, value });
            }
            "species" => {
                let (name, _) = c.ident()?;
                c.expect_sym('=')?;
                let count = c.integer()?;
                let boundary = match c.peek() {
                    Some(Token {
                        tok: Tok::Ident(w), ..
                    }) if w == "boundary" => {
                        c.next();
                        true
                    }
                    _ => false,
                };
                c.finish()?;
                if species_idx.contains_key(&name) {
                    return Err(ModelError::DuplicateSpecies { name, line });
                }
                if count < 0 {
                    return Err(ModelError::NegativeInitialCount { name, line });
                }
                let initial_count = u32::try_from(count)
                    .map_err(|_| syntax(line, 1, "initial count out of range"))?;
                species_idx.insert(name.clone(), species.len());
                species.push(Species {
                    name,
                    initial_count,
                    boundary,
                });
            }
            "reaction" => pending.push((line, raw, toks.clone())),
            other => {
                return Err(syntax(
                    line,
                    toks[0].column,
                    format!("unknown declaration `{other}`"),
                ))
            }
        }
    }

    let param_values: Vec<f64> = params.iter().map(|p| p.value).collect();
    let scope = Scope {
        species: &species_idx,
        params: &param_idx,
        param_values: &param_values,
    };
    let mut reactions: Vec<Reaction> = Vec::new();
    for (line, raw, toks) in &pending {
        let mut c = Cursor::new(toks, *line, raw);
        c.next();
        let (name, _) = c.ident()?;
        c.expect_sym(':')?;
        c.expect_sym('{')?;
        let mut state_change = vec![0i64; species.len()];
        if !c.at_sym('}') {
            loop {
                let (sp, column) = c.ident()?;
                let &idx = species_idx
                    .get(&sp)
                    .ok_or_else(|| ModelError::UndeclaredIdentifier {
                        name: sp.clone(),
                        line: *line,
                        column,
                    })?;
                c.expect_sym(':')?;
                state_change[idx] += c.integer()?;
                if c.at_sym(',') {
                    c.next();
                    continue;
                }
                break;
            }
        }
        c.expect_sym('}')?;
        c.expect_sym('@')?;
        let propensity = parse_expr(&mut c, &scope)?;
        c.finish()?;
        if reactions.iter().any(|r| r.name == name) {
            return Err(ModelError::DuplicateReaction { name, line: *line });
        }
        reactions.push(Reaction {
            name,
            state_change,
            propensity,
        });
    }

    SckModel::new(species, params, reactions)
}
