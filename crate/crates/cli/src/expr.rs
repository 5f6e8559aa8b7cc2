//! Arithmetic expressions in `x_i`, `p_i` and `t` with symbolic derivatives.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numbers, `pi`, and the
//! functions `sin`, `cos`, `exp`. Variables are `x`, `p` (first component),
//! `x1`, `x_1`, `p2`, ... (1-based) and `t`. `^` is right-associative and
//! binds tighter than unary minus, so `-x^2` is `-(x^2)`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("{msg} at offset {pos} in `{src}`")]
pub struct ParseError {
    pub src: String,
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X(usize),
    P(usize),
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    /// Only produced by differentiation of variable exponents.
    Ln,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let err = |pos, msg: &str| ParseError {
        src: src.to_string(),
        pos,
        msg: msg.to_string(),
    };
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let v: f64 = src[start..i].parse().map_err(|_| err(start, "malformed number"))?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(err(i, &format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser<'_> {
    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.src.len(), |t| t.0)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            src: self.src.to_string(),
            pos: self.pos(),
            msg: msg.into(),
        }
    }

    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.at) {
            Some((_, Tok::Op(c))) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek_op() == Some(c) {
            self.at += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.at += 1;
            let rhs = self.product()?;
            lhs = if c == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.at += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek_op() {
            Some('-') => {
                self.at += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.at += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.at += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some((_, tok)) = self.toks.get(self.at).cloned() else {
            return Err(self.err("unexpected end of expression"));
        };
        match tok {
            Tok::Num(v) => {
                self.at += 1;
                Ok(Expr::Num(v))
            }
            Tok::Op('(') => {
                self.at += 1;
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op(c) => Err(self.err(format!("unexpected `{c}`"))),
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    _ => None,
                };
                if let Some(f) = func {
                    self.at += 1;
                    self.expect('(')?;
                    let arg = self.sum()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                let e = match name.as_str() {
                    "pi" => Expr::Num(std::f64::consts::PI),
                    "t" => Expr::Var(Var::T),
                    _ => Expr::Var(parse_var(&name).ok_or_else(|| self.err(format!("unknown name `{name}`")))?),
                };
                self.at += 1;
                Ok(e)
            }
        }
    }
}

fn parse_var(name: &str) -> Option<Var> {
    let (head, rest) = name.split_at(1);
    let rest = rest.strip_prefix('_').unwrap_or(rest);
    let index = if rest.is_empty() {
        0
    } else {
        let k: usize = rest.parse().ok()?;
        k.checked_sub(1)?
    };
    match head {
        "x" => Some(Var::X(index)),
        "p" => Some(Var::P(index)),
        _ => None,
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let mut p = Parser {
            src,
            toks: tokenize(src)?,
            at: 0,
        };
        let e = p.sum()?;
        if p.at != p.toks.len() {
            return Err(p.err("trailing input"));
        }
        Ok(e)
    }

    /// Largest position/momentum index used, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(Var::T) => 0,
            Expr::Var(Var::X(i)) | Expr::Var(Var::P(i)) => i + 1,
            Expr::Neg(a) | Expr::Call(_, a) => a.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.arity().max(b.arity())
            }
        }
    }

    pub fn uses(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.uses(v) || b.uses(v)
            }
        }
    }

    /// Evaluates with missing components read as zero.
    pub fn eval(&self, x: &[f64], p: &[f64], t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X(i)) => x.get(*i).copied().unwrap_or(0.0),
            Expr::Var(Var::P(i)) => p.get(*i).copied().unwrap_or(0.0),
            Expr::Var(Var::T) => t,
            Expr::Neg(a) => -a.eval(x, p, t),
            Expr::Add(a, b) => a.eval(x, p, t) + b.eval(x, p, t),
            Expr::Sub(a, b) => a.eval(x, p, t) - b.eval(x, p, t),
            Expr::Mul(a, b) => a.eval(x, p, t) * b.eval(x, p, t),
            Expr::Div(a, b) => a.eval(x, p, t) / b.eval(x, p, t),
            Expr::Pow(a, b) => {
                let base = a.eval(x, p, t);
                match **b {
                    Expr::Num(k) if k.fract() == 0.0 && k.abs() <= i32::MAX as f64 => base.powi(k as i32),
                    _ => base.powf(b.eval(x, p, t)),
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(x, p, t);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln(),
                }
            }
        }
    }

    /// Symbolic partial derivative.
    pub fn diff(&self, v: Var) -> Expr {
        use Expr::*;
        if !self.uses(v) {
            return Num(0.0);
        }
        match self {
            Num(_) => Num(0.0),
            Var(w) => Num(if *w == v { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff(v)),
            Add(a, b) => add(a.diff(v), b.diff(v)),
            Sub(a, b) => sub(a.diff(v), b.diff(v)),
            Mul(a, b) => add(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
            Div(a, b) => div(
                sub(mul(a.diff(v), (**b).clone()), mul((**a).clone(), b.diff(v))),
                pow((**b).clone(), Num(2.0)),
            ),
            Pow(a, b) => {
                if !b.uses(v) {
                    // d(u^c) = c u^(c−1) du
                    mul(
                        mul((**b).clone(), pow((**a).clone(), sub((**b).clone(), Num(1.0)))),
                        a.diff(v),
                    )
                } else {
                    // d(u^w) = u^w (w' ln u + w u'/u)
                    mul(
                        self.clone(),
                        add(
                            mul(b.diff(v), Call(Func::Ln, a.clone())),
                            div(mul((**b).clone(), a.diff(v)), (**a).clone()),
                        ),
                    )
                }
            }
            Call(f, a) => {
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Call(Func::Sin, a.clone())),
                    Func::Exp => self.clone(),
                    Func::Ln => div(Num(1.0), (**a).clone()),
                };
                mul(outer, a.diff(v))
            }
        }
    }
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(w) if *w == v)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        (a, b) if is_num(&a, 0.0) => b,
        (a, b) if is_num(&b, 0.0) => a,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        (a, b) if is_num(&b, 0.0) => a,
        (a, b) if is_num(&a, 0.0) => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        (a, _) if is_num(&a, 0.0) => Expr::Num(0.0),
        (_, b) if is_num(&b, 0.0) => Expr::Num(0.0),
        (a, b) if is_num(&a, 1.0) => b,
        (a, b) if is_num(&b, 1.0) => a,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (a, _) if is_num(&a, 0.0) => Expr::Num(0.0),
        (a, b) if is_num(&b, 1.0) => a,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (_, b) if is_num(&b, 0.0) => Expr::Num(1.0),
        (a, b) if is_num(&b, 1.0) => a,
        (a, b) => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::P(i) => write!(f, "p{}", i + 1),
            Var::T => write!(f, "t"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                    Func::Ln => "ln",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}
