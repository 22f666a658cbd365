//! Recursive-descent parser for property strings.

use super::{Arith, ArithOp, CmpOp, CslError, CslProperty, StatePredicate, TimeBound};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    And,
    Or,
    Not,
    Plus,
    Minus,
    Star,
    Slash,
    Cmp(CmpOp),
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, CslError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        let next = chars.get(i + 1).copied();
        let (tok, width) = match c {
            _ if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            ',' => (Tok::Comma, 1),
            '+' => (Tok::Plus, 1),
            '-' => (Tok::Minus, 1),
            '*' => (Tok::Star, 1),
            '/' => (Tok::Slash, 1),
            '&' if next == Some('&') => (Tok::And, 2),
            '&' => (Tok::And, 1),
            '|' if next == Some('|') => (Tok::Or, 2),
            '|' => (Tok::Or, 1),
            '!' if next == Some('=') => (Tok::Cmp(CmpOp::Ne), 2),
            '!' => (Tok::Not, 1),
            '<' if next == Some('=') => (Tok::Cmp(CmpOp::Le), 2),
            '<' => (Tok::Cmp(CmpOp::Lt), 1),
            '>' if next == Some('=') => (Tok::Cmp(CmpOp::Ge), 2),
            '>' => (Tok::Cmp(CmpOp::Gt), 1),
            '=' if next == Some('=') => (Tok::Cmp(CmpOp::Eq), 2),
            '=' => (Tok::Cmp(CmpOp::Eq), 1),
            _ if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let s: String = chars[i..j].iter().collect();
                let v = s.parse::<f64>().map_err(|_| CslError::Syntax {
                    column: col,
                    message: format!("bad number `{s}`"),
                })?;
                (Tok::Num(v), j - i)
            }
            _ if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                (Tok::Ident(chars[i..j].iter().collect()), j - i)
            }
            _ => {
                return Err(CslError::Syntax {
                    column: col,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((tok, col));
        i += width;
    }
    Ok(out)
}

const OPERATORS: [&str; 5] = ["U", "F", "G", "St", "P"];

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, c)| *c)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, CslError> {
        Err(CslError::Syntax {
            column: self.column(),
            message: message.into(),
        })
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), CslError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn property(&mut self) -> Result<CslProperty, CslError> {
        let op = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return self.error("expected U, F, G or St"),
        };
        self.pos += 1;
        self.expect(Tok::LParen, "`(`")?;
        let prop = match op.as_str() {
            "U" => {
                let bound = self.time_bound()?;
                self.expect(Tok::Comma, "`,`")?;
                let left = self.predicate()?;
                self.expect(Tok::Comma, "`,`")?;
                let right = self.predicate()?;
                CslProperty::Until { bound, left, right }
            }
            "F" | "G" => {
                let bound = self.time_bound()?;
                self.expect(Tok::Comma, "`,`")?;
                let target = self.predicate()?;
                if op == "F" {
                    CslProperty::Finally { bound, target }
                } else {
                    CslProperty::Globally { bound, target }
                }
            }
            "St" => CslProperty::SteadyState(self.predicate()?),
            _ => {
                self.pos -= 2;
                return self.error(format!("unknown operator `{op}`"));
            }
        };
        self.expect(Tok::RParen, "`)`")?;
        if self.pos != self.toks.len() {
            return self.error("trailing input");
        }
        Ok(prop)
    }

    fn time_bound(&mut self) -> Result<TimeBound, CslError> {
        let start = self.pos;
        let formula = self.predicate_with(true)?;
        let text = render_tokens(&self.toks[start..self.pos]);
        time_interval(&formula, &text)
    }

    fn predicate(&mut self) -> Result<StatePredicate, CslError> {
        self.predicate_with(false)
    }

    fn predicate_with(&mut self, time: bool) -> Result<StatePredicate, CslError> {
        let mut lhs = self.conjunction(time)?;
        while self.eat(&Tok::Or) {
            let rhs = self.conjunction(time)?;
            lhs = StatePredicate::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self, time: bool) -> Result<StatePredicate, CslError> {
        let mut lhs = self.unary(time)?;
        while self.eat(&Tok::And) {
            let rhs = self.unary(time)?;
            lhs = StatePredicate::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self, time: bool) -> Result<StatePredicate, CslError> {
        if self.eat(&Tok::Not) {
            return Ok(StatePredicate::Not(Box::new(self.unary(time)?)));
        }
        match self.peek() {
            Some(Tok::Ident(s)) if s == "true" => {
                self.pos += 1;
                return Ok(StatePredicate::True);
            }
            Some(Tok::Ident(s)) if s == "false" => {
                self.pos += 1;
                return Ok(StatePredicate::False);
            }
            _ => {}
        }
        // `(` opens either a parenthesized formula or an arithmetic term;
        // try the comparison first and fall back.
        let save = self.pos;
        match self.comparison() {
            Ok(p) => Ok(p),
            Err(e @ CslError::NestedProperty(_)) => Err(e),
            Err(e) => {
                let furthest = self.pos;
                self.pos = save;
                if self.eat(&Tok::LParen) {
                    let inner = self.predicate_with(time)?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(inner)
                } else {
                    self.pos = furthest;
                    Err(e)
                }
            }
        }
    }

    fn comparison(&mut self) -> Result<StatePredicate, CslError> {
        let lhs = self.sum()?;
        let op = match self.peek() {
            Some(Tok::Cmp(op)) => *op,
            _ => return self.error("expected a comparison operator"),
        };
        self.pos += 1;
        let rhs = self.sum()?;
        Ok(StatePredicate::Compare(op, lhs, rhs))
    }

    fn sum(&mut self) -> Result<Arith, CslError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => ArithOp::Add,
                Some(Tok::Minus) => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Arith::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Arith, CslError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => ArithOp::Mul,
                Some(Tok::Slash) => ArithOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Arith::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Arith, CslError> {
        match self.peek().cloned() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(Arith::Neg(Box::new(self.factor()?)))
            }
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Arith::Num(v))
            }
            Some(Tok::LBracket) => {
                self.pos += 1;
                let name = match self.peek() {
                    Some(Tok::Ident(s)) => s.clone(),
                    _ => return self.error("expected a species name"),
                };
                self.pos += 1;
                self.expect(Tok::RBracket, "`]`")?;
                Ok(Arith::Species(name))
            }
            Some(Tok::Ident(name)) => {
                if matches!(self.toks.get(self.pos + 1), Some((Tok::LParen, _))) {
                    if OPERATORS.contains(&name.as_str()) {
                        return Err(CslError::NestedProperty(name));
                    }
                    return self.error(format!("unknown function `{name}`"));
                }
                if name == "true" || name == "false" {
                    return self.error("expected an arithmetic term");
                }
                self.pos += 1;
                Ok(Arith::Species(name))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.sum()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => self.error("expected an arithmetic term"),
        }
    }
}

fn render_tokens(toks: &[(Tok, usize)]) -> String {
    let parts: Vec<String> = toks
        .iter()
        .map(|(t, _)| match t {
            Tok::Num(v) => v.to_string(),
            Tok::Ident(s) => s.clone(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::LBracket => "[".into(),
            Tok::RBracket => "]".into(),
            Tok::Comma => ",".into(),
            Tok::And => "&".into(),
            Tok::Or => "|".into(),
            Tok::Not => "!".into(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Cmp(op) => op.symbol().into(),
        })
        .collect();
    parts.join(" ")
}

fn constant(a: &Arith) -> Option<f64> {
    match a {
        Arith::Num(v) => Some(*v),
        Arith::Species(_) => None,
        Arith::Neg(x) => constant(x).map(|v| -v),
        Arith::Binary(op, l, r) => {
            let (a, b) = (constant(l)?, constant(r)?);
            Some(match op {
                ArithOp::Add => a + b,
                ArithOp::Sub => a - b,
                ArithOp::Mul => a * b,
                ArithOp::Div => a / b,
            })
        }
    }
}

/// Collects comparison constants and rejects anything but `t op c`.
fn breakpoints(p: &StatePredicate, out: &mut Vec<f64>) -> Result<(), CslError> {
    match p {
        StatePredicate::True | StatePredicate::False => Ok(()),
        StatePredicate::Not(a) => breakpoints(a, out),
        StatePredicate::And(a, b) | StatePredicate::Or(a, b) => {
            breakpoints(a, out)?;
            breakpoints(b, out)
        }
        StatePredicate::Compare(_, l, r) => {
            let is_t = |a: &Arith| matches!(a, Arith::Species(s) if s == "t");
            let c = match (is_t(l), is_t(r)) {
                (true, false) => constant(r),
                (false, true) => constant(l),
                _ => None,
            };
            match c {
                Some(c) if c.is_finite() => {
                    out.push(c);
                    Ok(())
                }
                _ => Err(CslError::TimeConstraint(format!(
                    "`{l} {} {r}` must compare t with a constant",
                    match p {
                        StatePredicate::Compare(op, ..) => op.symbol(),
                        _ => unreachable!(),
                    }
                ))),
            }
        }
    }
}

fn holds_at(p: &StatePredicate, t: f64) -> bool {
    match p {
        StatePredicate::True => true,
        StatePredicate::False => false,
        StatePredicate::Not(a) => !holds_at(a, t),
        StatePredicate::And(a, b) => holds_at(a, t) && holds_at(b, t),
        StatePredicate::Or(a, b) => holds_at(a, t) || holds_at(b, t),
        StatePredicate::Compare(op, l, r) => {
            let v = |a: &Arith| constant(a).unwrap_or(t);
            op.holds(v(l), v(r))
        }
    }
}

/// Reduces a formula over `t >= 0` to one closed interval. The satisfying
/// set is a finite union of points and open segments between breakpoints;
/// its closure must be connected. Endpoints are closed because a single
/// time instant carries no probability mass.
fn time_interval(p: &StatePredicate, text: &str) -> Result<TimeBound, CslError> {
    let mut cuts = vec![0.0];
    breakpoints(p, &mut cuts)?;
    cuts.retain(|&c| c >= 0.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    // Cells alternate point, segment, point, ..., ending with the open ray.
    let mut cells: Vec<(f64, f64, bool)> = Vec::new();
    for (i, &c) in cuts.iter().enumerate() {
        cells.push((c, c, holds_at(p, c)));
        let (hi, mid) = match cuts.get(i + 1) {
            Some(&n) => (n, 0.5 * (c + n)),
            None => (f64::INFINITY, c + 1.0),
        };
        cells.push((c, hi, holds_at(p, mid)));
    }
    let mut components: Vec<(f64, f64)> = Vec::new();
    let mut open = false;
    for &(lo, hi, sat) in &cells {
        if sat {
            match components.last_mut() {
                // Runs whose closures touch at a shared point merge.
                Some(last) if open || last.1 >= lo => last.1 = hi,
                _ => components.push((lo, hi)),
            }
        }
        open = sat;
    }
    match components.as_slice() {
        [] => Err(CslError::EmptyInterval(text.to_string())),
        [(lo, hi)] => Ok(TimeBound {
            lower: *lo,
            upper: *hi,
        }),
        _ => Err(CslError::NonInterval(text.to_string())),
    }
}

/// Parses one property string.
pub fn parse_property(text: &str) -> Result<CslProperty, CslError> {
    let toks = lex(text)?;
    let mut p = Parser {
        end: text.chars().count() + 1,
        toks,
        pos: 0,
    };
    p.property()
}

/// Parses a sidecar file: one property per line, `#` comments.
pub fn parse_property_file(text: &str) -> Result<Vec<CslProperty>, (usize, CslError)> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        out.push(parse_property(body).map_err(|e| (n + 1, e))?);
    }
    Ok(out)
}
