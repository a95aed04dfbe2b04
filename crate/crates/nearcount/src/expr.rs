//! Closed-form expression trees over box coordinates.
//!
//! Charts are described by textual formulas in the variables `x1, …, xn`
//! built from rational literals, `+ - * / ^`, and the unary functions `exp`,
//! `sin`, `cos`. Parsing produces an [`Expr`]; differentiation is symbolic,
//! so gradients and Hessians are themselves expression trees and can be
//! evaluated without finite-difference noise. Two evaluators are provided:
//!
//! - [`Expr::eval_f64`] / [`Program::eval`] — double precision, the compiled
//!   form being a flat postfix program for hot loops (both walk the tree in
//!   the same order, so their results are bit-identical);
//! - [`Expr::eval_rational`] — exact arithmetic over arbitrary-precision
//!   rationals, available exactly when the tree is polynomial-rational
//!   (no `exp`/`sin`/`cos`, division only by nonzero constants, integer
//!   exponents).
//!
//! Exponents are constant by construction: `u ^ p` requires `p` to fold to a
//! rational constant at parse time, and keeps polynomial status only when `p`
//! is a nonnegative integer.

use crate::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

/// A scalar expression in the coordinates `x1..xn` (internally 0-indexed).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Rational constant.
    Const(BigRational),
    /// Coordinate `x{i+1}`.
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    /// `base ^ exponent` with a constant rational exponent.
    Pow(Box<Expr>, BigRational),
    Exp(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl Expr {
    /// Rational constant from an integer.
    pub fn int(n: i64) -> Expr {
        Expr::Const(big(n))
    }

    /// Rational constant `p/q`.
    pub fn ratio(p: i64, q: i64) -> Expr {
        Expr::Const(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    /// Coordinate `x{i+1}` (0-indexed argument).
    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    // ---- simplifying constructors ------------------------------------
    // These fold constants and drop identity operands so that symbolic
    // derivatives stay small enough to evaluate millions of times.

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
            (Expr::Const(x), b) if x.is_zero() => b,
            (a, Expr::Const(y)) if y.is_zero() => a,
            (a, b) => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
            (a, Expr::Const(y)) if y.is_zero() => a,
            (Expr::Const(x), b) if x.is_zero() => Expr::neg(b),
            (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
            (Expr::Const(x), _) | (_, Expr::Const(x)) if x.is_zero() => Expr::Const(x),
            (Expr::Const(x), b) if x.is_one() => b,
            (a, Expr::Const(y)) if y.is_one() => a,
            (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a, b) {
            (Expr::Const(x), Expr::Const(y)) if !y.is_zero() => Expr::Const(x / y),
            (Expr::Const(x), b) if x.is_zero() && !matches!(b, Expr::Const(ref c) if c.is_zero()) => {
                Expr::Const(x)
            }
            (a, Expr::Const(y)) if y.is_one() => a,
            (a, b) => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(-x),
            Expr::Neg(inner) => *inner,
            a => Expr::Neg(Box::new(a)),
        }
    }

    pub fn pow(a: Expr, p: BigRational) -> Expr {
        if p.is_zero() {
            return Expr::int(1);
        }
        if p.is_one() {
            return a;
        }
        if let Expr::Const(ref c) = a {
            if p.is_integer() {
                if let Some(e) = p.to_i32() {
                    return Expr::Const(rational_powi(c, e));
                }
            }
        }
        Expr::Pow(Box::new(a), p)
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::Exp(Box::new(a))
    }

    pub fn sin(a: Expr) -> Expr {
        Expr::Sin(Box::new(a))
    }

    pub fn cos(a: Expr) -> Expr {
        Expr::Cos(Box::new(a))
    }

    // ---- parsing ------------------------------------------------------

    /// Parse an expression from the chart grammar.
    pub fn parse(src: &str) -> Result<Expr> {
        Parser::new(src)?.parse_all()
    }

    // ---- structure ----------------------------------------------------

    /// One past the highest coordinate index used (0 for constants).
    pub fn arity_floor(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                self_max(a.arity_floor(), b.arity_floor())
            }
            Expr::Neg(a) | Expr::Exp(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Pow(a, _) => {
                a.arity_floor()
            }
        }
    }

    /// The constant value of a variable-free tree, if it is one.
    pub fn const_value(&self) -> Option<BigRational> {
        match self {
            Expr::Const(c) => Some(c.clone()),
            Expr::Var(_) => None,
            Expr::Add(a, b) => Some(a.const_value()? + b.const_value()?),
            Expr::Sub(a, b) => Some(a.const_value()? - b.const_value()?),
            Expr::Mul(a, b) => Some(a.const_value()? * b.const_value()?),
            Expr::Div(a, b) => {
                let d = b.const_value()?;
                if d.is_zero() {
                    None
                } else {
                    Some(a.const_value()? / d)
                }
            }
            Expr::Neg(a) => Some(-a.const_value()?),
            Expr::Pow(a, p) => {
                let base = a.const_value()?;
                let e = p.to_i32().filter(|_| p.is_integer())?;
                if base.is_zero() && e < 0 {
                    return None;
                }
                Some(rational_powi(&base, e))
            }
            Expr::Exp(_) | Expr::Sin(_) | Expr::Cos(_) => None,
        }
    }

    /// Whether exact rational evaluation is possible: polynomial with
    /// rational coefficients (division only by nonzero constants, nonnegative
    /// integer exponents, no transcendentals).
    pub fn is_polynomial(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.is_polynomial() && b.is_polynomial()
            }
            Expr::Div(a, b) => {
                a.is_polynomial()
                    && b.const_value().map(|c| !c.is_zero()).unwrap_or(false)
            }
            Expr::Neg(a) => a.is_polynomial(),
            Expr::Pow(a, p) => a.is_polynomial() && p.is_integer() && !p.is_negative(),
            Expr::Exp(_) | Expr::Sin(_) | Expr::Cos(_) => false,
        }
    }

    // ---- differentiation ----------------------------------------------

    /// Symbolic partial derivative with respect to `x{i+1}`.
    pub fn partial(&self, i: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::int(0),
            Expr::Var(j) => {
                if *j == i {
                    Expr::int(1)
                } else {
                    Expr::int(0)
                }
            }
            Expr::Add(a, b) => Expr::add(a.partial(i), b.partial(i)),
            Expr::Sub(a, b) => Expr::sub(a.partial(i), b.partial(i)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.partial(i), (**b).clone()),
                Expr::mul((**a).clone(), b.partial(i)),
            ),
            Expr::Div(a, b) => {
                // (a/b)' = a'/b - a b' / b^2
                let da = a.partial(i);
                let db = b.partial(i);
                Expr::sub(
                    Expr::div(da, (**b).clone()),
                    Expr::div(
                        Expr::mul((**a).clone(), db),
                        Expr::pow((**b).clone(), big(2)),
                    ),
                )
            }
            Expr::Neg(a) => Expr::neg(a.partial(i)),
            Expr::Pow(a, p) => {
                // (u^p)' = p u^(p-1) u'
                let du = a.partial(i);
                Expr::mul(
                    Expr::mul(Expr::Const(p.clone()), Expr::pow((**a).clone(), p - big(1))),
                    du,
                )
            }
            Expr::Exp(a) => Expr::mul(Expr::exp((**a).clone()), a.partial(i)),
            Expr::Sin(a) => Expr::mul(Expr::cos((**a).clone()), a.partial(i)),
            Expr::Cos(a) => Expr::neg(Expr::mul(Expr::sin((**a).clone()), a.partial(i))),
        }
    }

    // ---- evaluation ----------------------------------------------------

    /// Double-precision evaluation. Division by zero and fractional powers
    /// of negative numbers follow IEEE semantics (`inf`/`nan`).
    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => rational_to_f64(c),
            Expr::Var(i) => x[*i],
            Expr::Add(a, b) => a.eval_f64(x) + b.eval_f64(x),
            Expr::Sub(a, b) => a.eval_f64(x) - b.eval_f64(x),
            Expr::Mul(a, b) => a.eval_f64(x) * b.eval_f64(x),
            Expr::Div(a, b) => a.eval_f64(x) / b.eval_f64(x),
            Expr::Neg(a) => -a.eval_f64(x),
            Expr::Pow(a, p) => {
                let base = a.eval_f64(x);
                match integer_exponent(p) {
                    Some(e) => base.powi(e),
                    None => base.powf(rational_to_f64(p)),
                }
            }
            Expr::Exp(a) => a.eval_f64(x).exp(),
            Expr::Sin(a) => a.eval_f64(x).sin(),
            Expr::Cos(a) => a.eval_f64(x).cos(),
        }
    }

    /// Exact rational evaluation; errors on any non-polynomial operation.
    pub fn eval_rational(&self, x: &[BigRational]) -> Result<BigRational> {
        match self {
            Expr::Const(c) => Ok(c.clone()),
            Expr::Var(i) => Ok(x[*i].clone()),
            Expr::Add(a, b) => Ok(a.eval_rational(x)? + b.eval_rational(x)?),
            Expr::Sub(a, b) => Ok(a.eval_rational(x)? - b.eval_rational(x)?),
            Expr::Mul(a, b) => Ok(a.eval_rational(x)? * b.eval_rational(x)?),
            Expr::Div(a, b) => {
                let d = b.eval_rational(x)?;
                if d.is_zero() {
                    return Err(Error::NotExact("division by zero".into()));
                }
                Ok(a.eval_rational(x)? / d)
            }
            Expr::Neg(a) => Ok(-a.eval_rational(x)?),
            Expr::Pow(a, p) => {
                let e = integer_exponent(p)
                    .ok_or_else(|| Error::NotExact(format!("fractional exponent {p}")))?;
                let base = a.eval_rational(x)?;
                if base.is_zero() && e < 0 {
                    return Err(Error::NotExact("zero to negative power".into()));
                }
                Ok(rational_powi(&base, e))
            }
            Expr::Exp(_) => Err(Error::NotExact("exp".into())),
            Expr::Sin(_) => Err(Error::NotExact("sin".into())),
            Expr::Cos(_) => Err(Error::NotExact("cos".into())),
        }
    }

    /// Flatten to a postfix program for repeated evaluation.
    pub fn compile(&self) -> Program {
        let mut code = Vec::new();
        flatten(self, &mut code);
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for instr in &code {
            match instr {
                Instr::Const(_) | Instr::Var(_) => depth += 1,
                Instr::Add | Instr::Sub | Instr::Mul | Instr::Div => depth -= 1,
                _ => {}
            }
            max_depth = max_depth.max(depth);
        }
        Program { code, max_stack: max_depth }
    }
}

fn self_max(a: usize, b: usize) -> usize {
    if a > b {
        a
    } else {
        b
    }
}

/// `c^e` for integer `e` (negative allowed on nonzero `c`).
fn rational_powi(c: &BigRational, e: i32) -> BigRational {
    if e >= 0 {
        c.pow(e)
    } else {
        BigRational::one() / c.pow(-e)
    }
}

fn integer_exponent(p: &BigRational) -> Option<i32> {
    if p.is_integer() {
        p.to_i32()
    } else {
        None
    }
}

/// Exact conversion of a rational to the nearest `f64`.
pub fn rational_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

// ---- compiled form -----------------------------------------------------

/// One stack-machine instruction of a compiled expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Instr {
    Const(f64),
    Var(u32),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    PowI(i32),
    PowF(f64),
    Exp,
    Sin,
    Cos,
}

/// A compiled expression: postfix instructions plus the stack bound.
///
/// Evaluation order matches [`Expr::eval_f64`] exactly, so compiled and tree
/// evaluation agree bit for bit — counting relies on this when it mixes the
/// fast path with the reference path.
#[derive(Debug, Clone)]
pub struct Program {
    code: Vec<Instr>,
    max_stack: usize,
}

fn flatten(e: &Expr, out: &mut Vec<Instr>) {
    match e {
        Expr::Const(c) => out.push(Instr::Const(rational_to_f64(c))),
        Expr::Var(i) => out.push(Instr::Var(*i as u32)),
        Expr::Add(a, b) => {
            flatten(a, out);
            flatten(b, out);
            out.push(Instr::Add);
        }
        Expr::Sub(a, b) => {
            flatten(a, out);
            flatten(b, out);
            out.push(Instr::Sub);
        }
        Expr::Mul(a, b) => {
            flatten(a, out);
            flatten(b, out);
            out.push(Instr::Mul);
        }
        Expr::Div(a, b) => {
            flatten(a, out);
            flatten(b, out);
            out.push(Instr::Div);
        }
        Expr::Neg(a) => {
            flatten(a, out);
            out.push(Instr::Neg);
        }
        Expr::Pow(a, p) => {
            flatten(a, out);
            match integer_exponent(p) {
                Some(e) => out.push(Instr::PowI(e)),
                None => out.push(Instr::PowF(rational_to_f64(p))),
            }
        }
        Expr::Exp(a) => {
            flatten(a, out);
            out.push(Instr::Exp);
        }
        Expr::Sin(a) => {
            flatten(a, out);
            out.push(Instr::Sin);
        }
        Expr::Cos(a) => {
            flatten(a, out);
            out.push(Instr::Cos);
        }
    }
}

impl Program {
    /// Evaluate at `x`, reusing `stack` as scratch space.
    #[inline]
    pub fn eval(&self, x: &[f64], stack: &mut Vec<f64>) -> f64 {
        stack.clear();
        stack.reserve(self.max_stack);
        for instr in &self.code {
            match *instr {
                Instr::Const(c) => stack.push(c),
                Instr::Var(i) => stack.push(x[i as usize]),
                Instr::Add => {
                    let b = stack.pop().unwrap();
                    *stack.last_mut().unwrap() += b;
                }
                Instr::Sub => {
                    let b = stack.pop().unwrap();
                    *stack.last_mut().unwrap() -= b;
                }
                Instr::Mul => {
                    let b = stack.pop().unwrap();
                    *stack.last_mut().unwrap() *= b;
                }
                Instr::Div => {
                    let b = stack.pop().unwrap();
                    *stack.last_mut().unwrap() /= b;
                }
                Instr::Neg => {
                    let t = stack.last_mut().unwrap();
                    *t = -*t;
                }
                Instr::PowI(e) => {
                    let t = stack.last_mut().unwrap();
                    *t = t.powi(e);
                }
                Instr::PowF(p) => {
                    let t = stack.last_mut().unwrap();
                    *t = t.powf(p);
                }
                Instr::Exp => {
                    let t = stack.last_mut().unwrap();
                    *t = t.exp();
                }
                Instr::Sin => {
                    let t = stack.last_mut().unwrap();
                    *t = t.sin();
                }
                Instr::Cos => {
                    let t = stack.last_mut().unwrap();
                    *t = t.cos();
                }
            }
        }
        stack.pop().unwrap()
    }

    /// Evaluate with a fresh scratch buffer.
    pub fn eval_alloc(&self, x: &[f64]) -> f64 {
        let mut stack = Vec::with_capacity(self.max_stack);
        self.eval(x, &mut stack)
    }

    /// Instruction count (useful for cost models).
    pub fn len(&self) -> usize {
        self.code.len()
    }

    /// Whether the program is empty (never true for compiled expressions).
    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }
}

// ---- pretty printing ---------------------------------------------------

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prec(self, f, 0)
    }
}

/// Precedence levels: 0 additive, 1 multiplicative, 2 unary, 3 power/atom.
fn write_prec(e: &Expr, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
    let prec = match e {
        Expr::Add(..) | Expr::Sub(..) => 0,
        Expr::Mul(..) | Expr::Div(..) => 1,
        Expr::Neg(..) => 2,
        Expr::Pow(..) => 3,
        Expr::Const(c) if c.is_negative() => 2,
        _ => 4,
    };
    let need = prec < parent;
    if need {
        write!(f, "(")?;
    }
    match e {
        Expr::Const(c) => {
            if c.is_integer() {
                write!(f, "{}", c.numer())?;
            } else {
                write!(f, "{}/{}", c.numer(), c.denom())?;
            }
        }
        Expr::Var(i) => write!(f, "x{}", i + 1)?,
        Expr::Add(a, b) => {
            write_prec(a, f, 0)?;
            write!(f, " + ")?;
            write_prec(b, f, 1)?;
        }
        Expr::Sub(a, b) => {
            write_prec(a, f, 0)?;
            write!(f, " - ")?;
            write_prec(b, f, 1)?;
        }
        Expr::Mul(a, b) => {
            write_prec(a, f, 1)?;
            write!(f, "*")?;
            write_prec(b, f, 2)?;
        }
        Expr::Div(a, b) => {
            write_prec(a, f, 1)?;
            write!(f, "/")?;
            write_prec(b, f, 2)?;
        }
        Expr::Neg(a) => {
            write!(f, "-")?;
            write_prec(a, f, 2)?;
        }
        Expr::Pow(a, p) => {
            write_prec(a, f, 4)?;
            if p.is_integer() && !p.is_negative() {
                write!(f, "^{}", p.numer())?;
            } else {
                write!(f, "^({})", Expr::Const(p.clone()))?;
            }
        }
        Expr::Exp(a) => write!(f, "exp({a})")?,
        Expr::Sin(a) => write!(f, "sin({a})")?,
        Expr::Cos(a) => write!(f, "cos({a})")?,
    }
    if need {
        write!(f, ")")?;
    }
    Ok(())
}

// ---- parser ------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(BigRational),
    Var(usize),
    Func(&'static str),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Parser> {
        let mut tokens = Vec::new();
        let bytes = src.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            match c {
                ' ' | '\t' | '\n' | '\r' => i += 1,
                '+' => {
                    tokens.push(Token::Plus);
                    i += 1;
                }
                '-' => {
                    tokens.push(Token::Minus);
                    i += 1;
                }
                '*' => {
                    tokens.push(Token::Star);
                    i += 1;
                }
                '/' => {
                    tokens.push(Token::Slash);
                    i += 1;
                }
                '^' => {
                    tokens.push(Token::Caret);
                    i += 1;
                }
                '(' => {
                    tokens.push(Token::LParen);
                    i += 1;
                }
                ')' => {
                    tokens.push(Token::RParen);
                    i += 1;
                }
                '0'..='9' | '.' => {
                    let start = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    let mut frac_digits = 0usize;
                    if i < bytes.len() && bytes[i] == b'.' {
                        i += 1;
                        let fs = i;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                        frac_digits = i - fs;
                        if frac_digits == 0 && i - start == 1 {
                            return Err(Error::Parse(format!("bare '.' at byte {start}")));
                        }
                    }
                    let text: String =
                        src[start..i].chars().filter(|&ch| ch != '.').collect();
                    let numer: BigInt = text.parse().map_err(|_| {
                        Error::Parse(format!("bad number {:?}", &src[start..i]))
                    })?;
                    let denom = BigInt::from(10u32).pow(frac_digits as u32);
                    tokens.push(Token::Num(BigRational::new(numer, denom)));
                }
                'a'..='z' | 'A'..='Z' => {
                    let start = i;
                    while i < bytes.len()
                        && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                    {
                        i += 1;
                    }
                    let word = &src[start..i];
                    match word {
                        "exp" => tokens.push(Token::Func("exp")),
                        "sin" => tokens.push(Token::Func("sin")),
                        "cos" => tokens.push(Token::Func("cos")),
                        _ => {
                            let idx = word
                                .strip_prefix('x')
                                .and_then(|d| d.parse::<usize>().ok())
                                .filter(|&d| d >= 1);
                            match idx {
                                Some(d) => tokens.push(Token::Var(d - 1)),
                                None => {
                                    return Err(Error::Parse(format!(
                                        "unknown identifier {word:?} (expected x1..xn, exp, sin, cos)"
                                    )))
                                }
                            }
                        }
                    }
                }
                other => {
                    return Err(Error::Parse(format!("unexpected character {other:?}")))
                }
            }
        }
        Ok(Parser { tokens, pos: 0 })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Token) -> Result<()> {
        match self.next() {
            Some(ref got) if *got == t => Ok(()),
            got => Err(Error::Parse(format!("expected {t:?}, found {got:?}"))),
        }
    }

    fn parse_all(&mut self) -> Result<Expr> {
        let e = self.parse_additive()?;
        if let Some(t) = self.peek() {
            return Err(Error::Parse(format!("trailing input at {t:?}")));
        }
        Ok(e)
    }

    fn parse_additive(&mut self) -> Result<Expr> {
        let mut acc = self.parse_multiplicative()?;
        while let Some(t) = self.peek() {
            match t {
                Token::Plus => {
                    self.pos += 1;
                    acc = Expr::add(acc, self.parse_multiplicative()?);
                }
                Token::Minus => {
                    self.pos += 1;
                    acc = Expr::sub(acc, self.parse_multiplicative()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn parse_multiplicative(&mut self) -> Result<Expr> {
        let mut acc = self.parse_unary()?;
        while let Some(t) = self.peek() {
            match t {
                Token::Star => {
                    self.pos += 1;
                    acc = Expr::mul(acc, self.parse_unary()?);
                }
                Token::Slash => {
                    self.pos += 1;
                    acc = Expr::div(acc, self.parse_unary()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.pos += 1;
            return Ok(Expr::neg(self.parse_unary()?));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr> {
        let base = self.parse_atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.pos += 1;
            // the exponent is any unary expression that folds to a constant
            let raw = self.parse_unary()?;
            let p = raw.const_value().ok_or_else(|| {
                Error::Parse(format!("exponent must be a rational constant, got {raw}"))
            })?;
            return Ok(Expr::pow(base, p));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(c)) => Ok(Expr::Const(c)),
            Some(Token::Var(i)) => Ok(Expr::Var(i)),
            Some(Token::Func(name)) => {
                self.expect(Token::LParen)?;
                let arg = self.parse_additive()?;
                self.expect(Token::RParen)?;
                Ok(match name {
                    "exp" => Expr::exp(arg),
                    "sin" => Expr::sin(arg),
                    _ => Expr::cos(arg),
                })
            }
            Some(Token::LParen) => {
                let e = self.parse_additive()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            got => Err(Error::Parse(format!("expected a value, found {got:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    #[test]
    fn parses_and_evaluates_basic_forms() {
        let e = Expr::parse("(x1^2 - x2^2)/2").unwrap();
        assert_eq!(e.arity_floor(), 2);
        let v = e
            .eval_rational(&[rat(3, 5), rat(4, 5)])
            .unwrap();
        assert_eq!(v, rat(-7, 50));
        assert!((e.eval_f64(&[0.6, 0.8]) - (-0.14)).abs() < 1e-15);
    }

    #[test]
    fn decimal_literals_are_exact_rationals() {
        let e = Expr::parse("3.25*x1").unwrap();
        let v = e.eval_rational(&[rat(4, 1)]).unwrap();
        assert_eq!(v, rat(13, 1));
    }

    #[test]
    fn parse_errors_are_reported() {
        assert!(matches!(Expr::parse("x1 +"), Err(Error::Parse(_))));
        assert!(matches!(Expr::parse("foo(x1)"), Err(Error::Parse(_))));
        assert!(matches!(Expr::parse("x0"), Err(Error::Parse(_))));
        assert!(matches!(Expr::parse("x1 ^ x2"), Err(Error::Parse(_))));
        assert!(matches!(Expr::parse("2 @ 3"), Err(Error::Parse(_))));
        assert!(matches!(Expr::parse(""), Err(Error::Parse(_))));
    }

    #[test]
    fn negative_and_fractional_exponents_parse() {
        let e = Expr::parse("x1^-2").unwrap();
        assert!((e.eval_f64(&[2.0]) - 0.25).abs() < 1e-15);
        assert!(!e.is_polynomial());
        let s = Expr::parse("(1 - x1^2)^(1/2)").unwrap();
        assert!((s.eval_f64(&[0.6]) - 0.8).abs() < 1e-15);
        assert!(!s.is_polynomial());
    }

    #[test]
    fn polynomial_detection() {
        assert!(Expr::parse("x1*x2 - 3/4*x1^3").unwrap().is_polynomial());
        assert!(Expr::parse("(x1 + x2)/5").unwrap().is_polynomial());
        assert!(!Expr::parse("exp(x1)").unwrap().is_polynomial());
        assert!(!Expr::parse("x1/x2").unwrap().is_polynomial());
        assert!(!Expr::parse("sin(x1)*x2").unwrap().is_polynomial());
    }

    #[test]
    fn exact_eval_refuses_transcendentals() {
        let e = Expr::parse("exp(x1)").unwrap();
        assert!(matches!(
            e.eval_rational(&[rat(1, 2)]),
            Err(Error::NotExact(_))
        ));
    }

    /// Central-difference oracle for the symbolic derivatives.
    fn fd_partial(e: &Expr, x: &[f64], i: usize) -> f64 {
        let h = 1e-5 * x[i].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        (e.eval_f64(&xp) - e.eval_f64(&xm)) / (2.0 * h)
    }

    #[test]
    fn symbolic_derivatives_match_central_differences() {
        let samples = [
            "x1^3 - 2*x1*x2 + x2^2/3",
            "sin(x1*x2) + cos(x1)^2",
            "exp(x1/2 - x2^2)",
            "(x1^2 + x2^2)/2",
            "x1*x2*(1 - x1)",
            "(1 + x1^2)^(1/2)",
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for src in samples {
            let e = Expr::parse(src).unwrap();
            for _ in 0..20 {
                let x = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
                for i in 0..2 {
                    let sym = e.partial(i).eval_f64(&x);
                    let fd = fd_partial(&e, &x, i);
                    let scale = 1.0 + sym.abs();
                    assert!(
                        (sym - fd).abs() / scale < 1e-7,
                        "{src} d/dx{} at {x:?}: symbolic {sym}, fd {fd}",
                        i + 1
                    );
                }
            }
        }
    }

    #[test]
    fn mixed_partials_commute() {
        let e = Expr::parse("exp(x1*x2) + x1^3*x2^2").unwrap();
        let d12 = e.partial(0).partial(1);
        let d21 = e.partial(1).partial(0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let a = d12.eval_f64(&x);
            let b = d21.eval_f64(&x);
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn compiled_matches_tree_bit_for_bit() {
        let samples = [
            "x1^3 - 2*x1*x2 + x2^2/3",
            "sin(x1*x2) + cos(x1)^2",
            "exp(x1/2 - x2^2)",
            "-(x1 - 1/3)^2/(1 + x2^2)",
            "(1 + x1^2)^(1/2)",
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut stack = Vec::new();
        for src in samples {
            let e = Expr::parse(src).unwrap();
            let prog = e.compile();
            for _ in 0..200 {
                let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
                let a = e.eval_f64(&x);
                let b = prog.eval(&x, &mut stack);
                assert_eq!(a.to_bits(), b.to_bits(), "{src} at {x:?}");
            }
        }
    }

    #[test]
    fn display_round_trips_through_parser() {
        let samples = [
            "x1*x2",
            "(x1^2 - x2^2)/2",
            "-x1 + 3/4*x2^3",
            "exp(x1)*sin(x2) - cos(x1*x2)",
            "(1 - x1^2 - x2^2)^(1/2)",
            "x1^-3",
        ];
        for src in samples {
            let e = Expr::parse(src).unwrap();
            let printed = e.to_string();
            let re = Expr::parse(&printed).unwrap_or_else(|err| {
                panic!("printed form {printed:?} failed to reparse: {err}")
            });
            // structural equality after one round trip
            assert_eq!(e, re, "{src} -> {printed}");
        }
    }

    #[test]
    fn constant_folding_keeps_trees_small() {
        let e = Expr::parse("0*x1 + 1*x2 + (3 - 3)").unwrap();
        assert_eq!(e, Expr::Var(1));
        let p = Expr::parse("x1^2").unwrap().partial(0);
        // derivative should be 2*x1, not 2*x1^1*1
        assert_eq!(p, Expr::mul(Expr::int(2), Expr::var(0)));
    }
}
