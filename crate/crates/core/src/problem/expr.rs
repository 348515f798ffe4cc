//! Arithmetic expressions for the prescribed function `f`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' base)?
//! base   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' base
//! ```
//!
//! Variables are `r`, `th`, `ph` and `nur`; functions are `sin`, `cos`,
//! `exp`, `log`, `sqrt` and `abs`. Unary minus binds tighter than `^`, so
//! `-r^2` is `(-r)^2`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    R,
    Th,
    Ph,
    Nur,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::R => "r",
            Var::Th => "th",
            Var::Ph => "ph",
            Var::Nur => "nur",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "r" => Var::R,
            "th" => Var::Th,
            "ph" => Var::Ph,
            "nur" => Var::Nur,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        }
    }
}

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub r: f64,
    pub th: f64,
    pub ph: f64,
    pub nur: f64,
}

impl Point {
    fn get(&self, v: Var) -> f64 {
        match v {
            Var::R => self.r,
            Var::Th => self.th,
            Var::Ph => self.ph,
            Var::Nur => self.nur,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FExpr {
    Num(f64),
    Var(Var),
    Neg(Box<FExpr>),
    Add(Box<FExpr>, Box<FExpr>),
    Sub(Box<FExpr>, Box<FExpr>),
    Mul(Box<FExpr>, Box<FExpr>),
    Div(Box<FExpr>, Box<FExpr>),
    Pow(Box<FExpr>, Box<FExpr>),
    Call(Func, Box<FExpr>),
}

use FExpr::*;

pub fn parse_f(text: &str) -> Result<FExpr> {
    let mut p = Parser {
        src: text,
        toks: tokenize(text)?,
        pos: 0,
    };
    let e = p.expr()?;
    match p.peek() {
        None => Ok(e),
        Some(t) => Err(syntax(t.pos, format!("unexpected '{}'", t.text(text)))),
    }
}

fn syntax(pos: usize, msg: impl Into<String>) -> Error {
    Error::Syntax {
        pos,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
    end: usize,
}

impl Token {
    fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.pos..self.end]
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v: f64 = text
                .parse()
                .map_err(|_| syntax(start, format!("bad number '{text}'")))?;
            out.push(Token {
                tok: Tok::Num(v),
                pos: start,
                end: i,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                pos: start,
                end: i,
            });
        } else if "+-*/^()".contains(c) {
            out.push(Token {
                tok: Tok::Op(c),
                pos: i,
                end: i + 1,
            });
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap_or(c);
            return Err(syntax(i, format!("unexpected character '{ch}'")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                tok: Tok::Op(c), ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn end_pos(&self) -> usize {
        self.src.len()
    }

    fn expect(&mut self, op: char) -> Result<()> {
        match self.peek() {
            Some(Token {
                tok: Tok::Op(c), ..
            }) if *c == op => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(syntax(
                t.pos,
                format!("expected '{op}', found '{}'", t.text(self.src)),
            )),
            None => Err(syntax(
                self.end_pos(),
                format!("expected '{op}', found end of input"),
            )),
        }
    }

    fn expr(&mut self) -> Result<FExpr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Add(lhs.into(), rhs.into())
            } else {
                Sub(lhs.into(), rhs.into())
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<FExpr> {
        let mut lhs = self.factor()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if op == '*' {
                Mul(lhs.into(), rhs.into())
            } else {
                Div(lhs.into(), rhs.into())
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<FExpr> {
        let base = self.base()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.base()?;
            return Ok(Pow(base.into(), exp.into()));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<FExpr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(syntax(self.end_pos(), "unexpected end of input"));
        };
        self.pos += 1;
        match tok.tok {
            Tok::Num(v) => Ok(Num(v)),
            Tok::Op('-') => Ok(Neg(self.base()?.into())),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op(c) => Err(syntax(tok.pos, format!("unexpected '{c}'"))),
            Tok::Ident(name) => {
                if self.peek_op() == Some('(') {
                    let Some(f) = Func::parse(&name) else {
                        return Err(Error::UnknownIdentifier { name, pos: tok.pos });
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    Ok(Call(f, arg.into()))
                } else if let Some(v) = Var::parse(&name) {
                    Ok(Var(v))
                } else if Func::parse(&name).is_some() {
                    Err(syntax(tok.end, format!("expected '(' after '{name}'")))
                } else {
                    Err(Error::UnknownIdentifier { name, pos: tok.pos })
                }
            }
        }
    }
}

impl FExpr {
    pub fn eval(&self, p: &Point) -> f64 {
        match self {
            Num(v) => *v,
            Var(v) => p.get(*v),
            Neg(a) => -a.eval(p),
            Add(a, b) => a.eval(p) + b.eval(p),
            Sub(a, b) => a.eval(p) - b.eval(p),
            Mul(a, b) => a.eval(p) * b.eval(p),
            Div(a, b) => a.eval(p) / b.eval(p),
            Pow(a, b) => pow(a.eval(p), b.eval(p)),
            Call(f, a) => f.apply(a.eval(p)),
        }
    }

    pub fn uses(&self, v: Var) -> bool {
        match self {
            Num(_) => false,
            Var(w) => *w == v,
            Neg(a) | Call(_, a) => a.uses(v),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => a.uses(v) || b.uses(v),
        }
    }

    fn constant(&self) -> Option<f64> {
        match self {
            Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Symbolic partial derivative, with light constant folding.
    pub fn derivative(&self, v: Var) -> FExpr {
        if !self.uses(v) {
            return Num(0.0);
        }
        match self {
            Num(_) => Num(0.0),
            Var(w) => Num(if *w == v { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(v)),
            Add(a, b) => add(a.derivative(v), b.derivative(v)),
            Sub(a, b) => sub(a.derivative(v), b.derivative(v)),
            Mul(a, b) => add(
                mul(a.derivative(v), (**b).clone()),
                mul((**a).clone(), b.derivative(v)),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.derivative(v), (**b).clone()),
                    mul((**a).clone(), b.derivative(v)),
                ),
                mul((**b).clone(), (**b).clone()),
            ),
            Pow(a, b) => {
                if let Some(c) = b.constant() {
                    mul(
                        mul(Num(c), pow_expr((**a).clone(), Num(c - 1.0))),
                        a.derivative(v),
                    )
                } else {
                    // a^b (b' ln a + b a' / a)
                    let inner = add(
                        mul(b.derivative(v), Call(Func::Log, a.clone())),
                        div(mul((**b).clone(), a.derivative(v)), (**a).clone()),
                    );
                    mul(self.clone(), inner)
                }
            }
            Call(f, a) => {
                let inner = (**a).clone();
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Call(Func::Sin, a.clone())),
                    Func::Exp => self.clone(),
                    Func::Log => div(Num(1.0), inner),
                    Func::Sqrt => div(Num(0.5), self.clone()),
                    Func::Abs => div(inner.clone(), Call(Func::Abs, Box::new(inner))),
                };
                mul(outer, a.derivative(v))
            }
        }
    }
}

fn pow(x: f64, y: f64) -> f64 {
    if y.fract() == 0.0 && y.abs() <= i32::MAX as f64 {
        x.powi(y as i32)
    } else {
        x.powf(y)
    }
}

fn neg(a: FExpr) -> FExpr {
    match a {
        Num(v) => Num(-v),
        a => Neg(a.into()),
    }
}

fn add(a: FExpr, b: FExpr) -> FExpr {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => Num(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Add(a.into(), b.into()),
    }
}

fn sub(a: FExpr, b: FExpr) -> FExpr {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => Num(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Sub(a.into(), b.into()),
    }
}

fn mul(a: FExpr, b: FExpr) -> FExpr {
    match (a.constant(), b.constant()) {
        (Some(x), Some(y)) => Num(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Num(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        _ => Mul(a.into(), b.into()),
    }
}

fn div(a: FExpr, b: FExpr) -> FExpr {
    match (a.constant(), b.constant()) {
        (Some(x), _) if x == 0.0 => Num(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Div(a.into(), b.into()),
    }
}

fn pow_expr(a: FExpr, b: FExpr) -> FExpr {
    match b.constant() {
        Some(y) if y == 0.0 => Num(1.0),
        Some(y) if y == 1.0 => a,
        _ => Pow(a.into(), b.into()),
    }
}

impl fmt::Display for FExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num(v) if *v < 0.0 => write!(f, "({v})"),
            Num(v) => write!(f, "{v}"),
            Var(v) => f.write_str(v.name()),
            Neg(a) => write!(f, "-({a})"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, b) => write!(f, "({a})^({b})"),
            Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
