//! Expression language for decoherence functions of a single variable `t`.
//!
//! Grammar (ASCII, whitespace ignored):
//!
//! ```text
//! expr    := sum
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?            (right associative)
//! atom    := number | 't' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func    := exp | ln | sin | cos | sqrt
//! ```
//!
//! Evaluation is done on [`Dual`] numbers so every evaluation also yields the
//! exact first derivative with respect to `t`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character '{ch}' at position {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("malformed number '{text}' at position {pos}")]
    BadNumber { text: String, pos: usize },
    #[error("unknown identifier `{name}` at position {pos} (only `t` is bound)")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("expected {expected} at position {pos}, found {found}")]
    Expected {
        expected: &'static str,
        found: String,
        pos: usize,
    },
}

impl ParseError {
    /// Byte offset of the offending token, if any.
    pub fn position(&self) -> Option<usize> {
        match self {
            ParseError::Empty => None,
            ParseError::UnexpectedChar { pos, .. }
            | ParseError::BadNumber { pos, .. }
            | ParseError::UnknownIdentifier { pos, .. }
            | ParseError::Expected { pos, .. } => Some(*pos),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error in {op} at t = {t}")]
pub struct DomainError {
    pub op: &'static str,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "ln" => Some(Func::Ln),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Parsed expression tree. Leaves are literals or the variable `t`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

/// Value together with its derivative with respect to `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub derivative: f64,
}

impl Dual {
    pub const fn new(value: f64, derivative: f64) -> Self {
        Dual { value, derivative }
    }

    pub const fn constant(value: f64) -> Self {
        Dual::new(value, 0.0)
    }

    pub const fn variable(t: f64) -> Self {
        Dual::new(t, 1.0)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        Dual::new(e, e * self.derivative)
    }

    pub fn sin(self) -> Self {
        Dual::new(self.value.sin(), self.value.cos() * self.derivative)
    }

    pub fn cos(self) -> Self {
        Dual::new(self.value.cos(), -self.value.sin() * self.derivative)
    }

    /// Natural log; caller guarantees a positive value.
    pub fn ln(self) -> Self {
        Dual::new(self.value.ln(), self.derivative / self.value)
    }

    pub fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        Dual::new(s, self.derivative / (2.0 * s))
    }

    pub fn is_finite(self) -> bool {
        self.value.is_finite() && self.derivative.is_finite()
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.value + rhs.value, self.derivative + rhs.derivative)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.value - rhs.value, self.derivative - rhs.derivative)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(
            self.value * rhs.value,
            self.derivative * rhs.value + self.value * rhs.derivative,
        )
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        let v = self.value / rhs.value;
        Dual::new(v, (self.derivative - v * rhs.derivative) / rhs.value)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.derivative)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, rhs: f64) -> Dual {
        Dual::new(self.value * rhs, self.derivative * rhs)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
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
            // exponent part: e.g. 1e-3, 2.5E+4
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
            let value = text.parse::<f64>().map_err(|_| ParseError::BadNumber {
                text: text.to_string(),
                pos: start,
            })?;
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    // report the full (possibly non-ASCII) character
                    let ch = src[i..].chars().next().unwrap_or(c);
                    return Err(ParseError::UnexpectedChar { ch, pos: i });
                }
            };
            out.push((tok, i));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.idx).map_or(self.end, |(_, p)| *p)
    }

    fn found(&self) -> String {
        match self.peek() {
            None => "end of input".to_string(),
            Some(Tok::Num(v)) => format!("number {v}"),
            Some(Tok::Ident(s)) => format!("`{s}`"),
            Some(Tok::Op(c)) => format!("'{c}'"),
            Some(Tok::LParen) => "'('".to_string(),
            Some(Tok::RParen) => "')'".to_string(),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.peek() == Some(&Tok::RParen) {
            self.idx += 1;
            Ok(())
        } else {
            Err(ParseError::Expected {
                expected: "')'",
                found: self.found(),
                pos: self.pos(),
            })
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.idx += 1;
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.idx += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.idx += 1;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.idx += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.idx += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.idx += 1;
                if name == "t" {
                    return Ok(Expr::Var);
                }
                if name == "pi" {
                    return Ok(Expr::Num(std::f64::consts::PI));
                }
                match Func::from_name(&name) {
                    Some(f) => {
                        if self.peek() != Some(&Tok::LParen) {
                            return Err(ParseError::Expected {
                                expected: "'(' after function name",
                                found: self.found(),
                                pos: self.pos(),
                            });
                        }
                        self.idx += 1;
                        let arg = self.sum()?;
                        self.expect_rparen()?;
                        Ok(Expr::Call(f, Box::new(arg)))
                    }
                    None => Err(ParseError::UnknownIdentifier { name, pos }),
                }
            }
            Some(Tok::LParen) => {
                self.idx += 1;
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            _ => Err(ParseError::Expected {
                expected: "a number, `t`, a function or '('",
                found: self.found(),
                pos,
            }),
        }
    }
}

/// Parses `source` into an expression tree.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let toks = tokenize(source)?;
    if toks.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut parser = Parser {
        toks,
        idx: 0,
        end: source.len(),
    };
    let expr = parser.sum()?;
    if parser.idx != parser.toks.len() {
        return Err(ParseError::Expected {
            expected: "an operator or end of input",
            found: parser.found(),
            pos: parser.pos(),
        });
    }
    Ok(expr)
}

fn pow_dual(base: Dual, exp: Dual, t: f64) -> Result<Dual, DomainError> {
    let err = || DomainError { op: "^", t };
    if exp.derivative == 0.0 {
        // constant exponent: negative bases allowed for integer powers
        let n = exp.value;
        if base.value < 0.0 && n.fract() != 0.0 {
            return Err(err());
        }
        let value = base.value.powf(n);
        let derivative = if n == 0.0 || base.derivative == 0.0 {
            0.0
        } else {
            n * base.value.powf(n - 1.0) * base.derivative
        };
        Ok(Dual::new(value, derivative))
    } else {
        if base.value <= 0.0 {
            return Err(err());
        }
        let value = base.value.powf(exp.value);
        let ln_b = base.value.ln();
        let derivative =
            value * (exp.derivative * ln_b + exp.value * base.derivative / base.value);
        Ok(Dual::new(value, derivative))
    }
}

impl Expr {
    /// Evaluates the expression and its `t`-derivative at `t`.
    pub fn eval_dual(&self, t: f64) -> Result<Dual, DomainError> {
        let out = match self {
            Expr::Num(v) => Dual::constant(*v),
            Expr::Var => Dual::variable(t),
            Expr::Neg(e) => -e.eval_dual(t)?,
            Expr::Call(f, arg) => {
                let u = arg.eval_dual(t)?;
                match f {
                    Func::Exp => u.exp(),
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Ln => {
                        if u.value <= 0.0 {
                            return Err(DomainError { op: "ln", t });
                        }
                        u.ln()
                    }
                    Func::Sqrt => {
                        if u.value < 0.0 {
                            return Err(DomainError { op: "sqrt", t });
                        }
                        u.sqrt()
                    }
                }
            }
            Expr::Bin(op, a, b) => {
                let x = a.eval_dual(t)?;
                let y = b.eval_dual(t)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y.value == 0.0 {
                            return Err(DomainError { op: "/", t });
                        }
                        x / y
                    }
                    BinOp::Pow => pow_dual(x, y, t)?,
                }
            }
        };
        if !out.is_finite() {
            let op = match self {
                Expr::Call(f, _) => f.name(),
                Expr::Bin(BinOp::Pow, ..) => "^",
                Expr::Bin(BinOp::Div, ..) => "/",
                _ => "arithmetic",
            };
            return Err(DomainError { op, t });
        }
        Ok(out)
    }

    /// Value only.
    pub fn eval(&self, t: f64) -> Result<f64, DomainError> {
        self.eval_dual(t).map(|d| d.value)
    }
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        Expr::Num(v) if *v < 0.0 => 3,
        _ => 5,
    }
}

/// Renders back into the grammar; `parse(&e.to_string())` yields an
/// equivalent tree (literals are printed in shortest round-trip form).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| -> fmt::Result {
            if precedence(e) < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "-{:?}", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var => write!(f, "t"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                wrap(f, e, 3)
            }
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
            Expr::Bin(op, a, b) => {
                let (lmin, rmin) = match op {
                    BinOp::Add => (1, 2),
                    BinOp::Sub => (1, 2),
                    BinOp::Mul => (2, 3),
                    BinOp::Div => (2, 3),
                    BinOp::Pow => (5, 3),
                };
                wrap(f, a, lmin)?;
                write!(f, "{}", op.symbol())?;
                wrap(f, b, rmin)
            }
        }
    }
}
