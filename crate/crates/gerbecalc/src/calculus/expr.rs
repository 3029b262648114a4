//! Expression mini-language for smooth functions of chart coordinates.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := atom ("^" integer)?
//! atom   := number | "pi" | "i" | ident | func "(" expr ")" | "(" expr ")"
//! ident  := "x1".."x9" | "t"
//! func   := "sin" | "cos" | "exp" | "log"
//! ```
//!
//! Expressions are immutable trees shared through `Arc`. Evaluation goes
//! through second-order forward jets (see [`crate::calculus::jet`]); the
//! symbolic operations here (derivative, conjugate, coordinate shift) are
//! used only when new cocycle data is materialized.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

/// A parsed scalar expression over chart coordinates `x1..x9` and up to two
/// path parameters (`t`, and a second one used internally for bigons).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Complex64),
    Pi,
    ImUnit,
    /// Chart coordinate, 0-based (`x1` is `Coord(0)`).
    Coord(u8),
    /// Path parameter level: `Param(0)` is `t`, `Param(1)` the bigon parameter.
    Param(u8),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    Exp(Arc<Expr>),
    Log(Arc<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdent { offset: usize, name: String },
}

pub type ExprRef = Arc<Expr>;

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if c.re == 0.0 && c.im == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if c.re == 1.0 && c.im == 0.0)
}

impl Expr {
    pub fn constant(c: Complex64) -> ExprRef {
        Arc::new(Expr::Const(c))
    }

    pub fn real(x: f64) -> ExprRef {
        Self::constant(Complex64::new(x, 0.0))
    }

    pub fn zero() -> ExprRef {
        Self::real(0.0)
    }

    pub fn one() -> ExprRef {
        Self::real(1.0)
    }

    pub fn coord(k: usize) -> ExprRef {
        Arc::new(Expr::Coord(k as u8))
    }

    pub fn param(level: usize) -> ExprRef {
        Arc::new(Expr::Param(level as u8))
    }

    pub fn add(a: &ExprRef, b: &ExprRef) -> ExprRef {
        if is_zero(a) {
            return b.clone();
        }
        if is_zero(b) {
            return a.clone();
        }
        if let (Expr::Const(x), Expr::Const(y)) = (a.as_ref(), b.as_ref()) {
            return Expr::constant(x + y);
        }
        Arc::new(Expr::Add(a.clone(), b.clone()))
    }

    pub fn sub(a: &ExprRef, b: &ExprRef) -> ExprRef {
        if is_zero(b) {
            return a.clone();
        }
        if let (Expr::Const(x), Expr::Const(y)) = (a.as_ref(), b.as_ref()) {
            return Expr::constant(x - y);
        }
        Arc::new(Expr::Sub(a.clone(), b.clone()))
    }

    pub fn mul(a: &ExprRef, b: &ExprRef) -> ExprRef {
        if is_zero(a) || is_zero(b) {
            return Expr::zero();
        }
        if is_one(a) {
            return b.clone();
        }
        if is_one(b) {
            return a.clone();
        }
        if let (Expr::Const(x), Expr::Const(y)) = (a.as_ref(), b.as_ref()) {
            return Expr::constant(x * y);
        }
        Arc::new(Expr::Mul(a.clone(), b.clone()))
    }

    pub fn div(a: &ExprRef, b: &ExprRef) -> ExprRef {
        if is_one(b) {
            return a.clone();
        }
        Arc::new(Expr::Div(a.clone(), b.clone()))
    }

    pub fn neg(a: &ExprRef) -> ExprRef {
        Self::mul(&Expr::real(-1.0), a)
    }

    pub fn powi(a: &ExprRef, n: i32) -> ExprRef {
        match n {
            0 => Expr::one(),
            1 => a.clone(),
            _ => Arc::new(Expr::Pow(a.clone(), n)),
        }
    }

    pub fn sin(a: &ExprRef) -> ExprRef {
        Arc::new(Expr::Sin(a.clone()))
    }

    pub fn cos(a: &ExprRef) -> ExprRef {
        Arc::new(Expr::Cos(a.clone()))
    }

    pub fn exp(a: &ExprRef) -> ExprRef {
        Arc::new(Expr::Exp(a.clone()))
    }

    pub fn log(a: &ExprRef) -> ExprRef {
        Arc::new(Expr::Log(a.clone()))
    }

    /// Symbolic partial derivative with respect to coordinate `k`.
    ///
    /// Used when constructions need a closed-form derivative (`d log chi`,
    /// `phi^{-1} d phi`, `d Pi`); runtime derivatives go through jets.
    pub fn diff_coord(self: &ExprRef, k: usize) -> ExprRef {
        self.diff(&Expr::Coord(k as u8))
    }

    pub fn diff_param(self: &ExprRef, level: usize) -> ExprRef {
        self.diff(&Expr::Param(level as u8))
    }

    fn diff(self: &ExprRef, var: &Expr) -> ExprRef {
        match self.as_ref() {
            Expr::Const(_) | Expr::Pi | Expr::ImUnit => Expr::zero(),
            Expr::Coord(_) | Expr::Param(_) => {
                if self.as_ref() == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Expr::Add(a, b) => Expr::add(&a.diff(var), &b.diff(var)),
            Expr::Sub(a, b) => Expr::sub(&a.diff(var), &b.diff(var)),
            Expr::Mul(a, b) => Expr::add(&Expr::mul(&a.diff(var), b), &Expr::mul(a, &b.diff(var))),
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let num = Expr::sub(&Expr::mul(&a.diff(var), b), &Expr::mul(a, &b.diff(var)));
                Expr::div(&num, &Expr::powi(b, 2))
            }
            Expr::Pow(a, n) => {
                let da = a.diff(var);
                Expr::mul(
                    &Expr::mul(&Expr::real(*n as f64), &Expr::powi(a, n - 1)),
                    &da,
                )
            }
            Expr::Sin(a) => Expr::mul(&Expr::cos(a), &a.diff(var)),
            Expr::Cos(a) => Expr::neg(&Expr::mul(&Expr::sin(a), &a.diff(var))),
            Expr::Exp(a) => Expr::mul(self, &a.diff(var)),
            Expr::Log(a) => Expr::div(&a.diff(var), a),
        }
    }

    /// Complex conjugate as an expression. All functions in the grammar have
    /// real Taylor coefficients, so conjugation commutes with them (for `log`
    /// this holds away from the branch cut, where our data lives).
    pub fn conj(self: &ExprRef) -> ExprRef {
        match self.as_ref() {
            Expr::Const(c) => Expr::constant(c.conj()),
            Expr::Pi | Expr::Coord(_) | Expr::Param(_) => self.clone(),
            Expr::ImUnit => Expr::constant(Complex64::new(0.0, -1.0)),
            Expr::Add(a, b) => Expr::add(&a.conj(), &b.conj()),
            Expr::Sub(a, b) => Expr::sub(&a.conj(), &b.conj()),
            Expr::Mul(a, b) => Expr::mul(&a.conj(), &b.conj()),
            Expr::Div(a, b) => Expr::div(&a.conj(), &b.conj()),
            Expr::Pow(a, n) => Expr::powi(&a.conj(), *n),
            Expr::Sin(a) => Expr::sin(&a.conj()),
            Expr::Cos(a) => Expr::cos(&a.conj()),
            Expr::Exp(a) => Expr::exp(&a.conj()),
            Expr::Log(a) => Expr::log(&a.conj()),
        }
    }

    /// Substitute `x_k -> x_k + offset[k]`. Pulls chart data between charts
    /// of a torus cover, where transitions are translations.
    pub fn shift_coords(self: &ExprRef, offset: &[f64]) -> ExprRef {
        if offset.iter().all(|&c| c == 0.0) {
            return self.clone();
        }
        match self.as_ref() {
            Expr::Const(_) | Expr::Pi | Expr::ImUnit | Expr::Param(_) => self.clone(),
            Expr::Coord(k) => {
                let c = offset.get(*k as usize).copied().unwrap_or(0.0);
                if c == 0.0 {
                    self.clone()
                } else {
                    Expr::add(&Expr::coord(*k as usize), &Expr::real(c))
                }
            }
            Expr::Add(a, b) => Expr::add(&a.shift_coords(offset), &b.shift_coords(offset)),
            Expr::Sub(a, b) => Expr::sub(&a.shift_coords(offset), &b.shift_coords(offset)),
            Expr::Mul(a, b) => Expr::mul(&a.shift_coords(offset), &b.shift_coords(offset)),
            Expr::Div(a, b) => Expr::div(&a.shift_coords(offset), &b.shift_coords(offset)),
            Expr::Pow(a, n) => Expr::powi(&a.shift_coords(offset), *n),
            Expr::Sin(a) => Expr::sin(&a.shift_coords(offset)),
            Expr::Cos(a) => Expr::cos(&a.shift_coords(offset)),
            Expr::Exp(a) => Expr::exp(&a.shift_coords(offset)),
            Expr::Log(a) => Expr::log(&a.shift_coords(offset)),
        }
    }

    /// Substitute the highest path parameter by a constant (used to restrict
    /// a path of connections to an endpoint).
    pub fn subst_param(self: &ExprRef, level: usize, value: f64) -> ExprRef {
        match self.as_ref() {
            Expr::Param(l) if *l as usize == level => Expr::real(value),
            Expr::Const(_) | Expr::Pi | Expr::ImUnit | Expr::Coord(_) | Expr::Param(_) => {
                self.clone()
            }
            Expr::Add(a, b) => {
                Expr::add(&a.subst_param(level, value), &b.subst_param(level, value))
            }
            Expr::Sub(a, b) => {
                Expr::sub(&a.subst_param(level, value), &b.subst_param(level, value))
            }
            Expr::Mul(a, b) => {
                Expr::mul(&a.subst_param(level, value), &b.subst_param(level, value))
            }
            Expr::Div(a, b) => {
                Expr::div(&a.subst_param(level, value), &b.subst_param(level, value))
            }
            Expr::Pow(a, n) => Expr::powi(&a.subst_param(level, value), *n),
            Expr::Sin(a) => Expr::sin(&a.subst_param(level, value)),
            Expr::Cos(a) => Expr::cos(&a.subst_param(level, value)),
            Expr::Exp(a) => Expr::exp(&a.subst_param(level, value)),
            Expr::Log(a) => Expr::log(&a.subst_param(level, value)),
        }
    }
}

// ---------------------------------------------------------------------------
// printing
// ---------------------------------------------------------------------------

fn fmt_real(x: f64, out: &mut String) {
    if x < 0.0 {
        // The grammar has no unary minus; print `(0 - v)`.
        out.push_str("(0 - ");
        out.push_str(&format!("{}", -x));
        out.push(')');
    } else {
        out.push_str(&format!("{}", x));
    }
}

fn fmt_const(c: Complex64, out: &mut String) {
    if c.im == 0.0 {
        fmt_real(c.re, out);
    } else if c.re == 0.0 {
        out.push('(');
        fmt_real(c.im, out);
        out.push_str("*i)");
    } else {
        out.push('(');
        fmt_real(c.re, out);
        out.push_str(" + ");
        fmt_real(c.im, out);
        out.push_str("*i)");
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Pow(..) => 3,
        _ => 4,
    }
}

fn fmt_expr(e: &Expr, parent_prec: u8, out: &mut String) {
    let p = prec(e);
    let need_paren = p < parent_prec;
    if need_paren {
        out.push('(');
    }
    match e {
        Expr::Const(c) => fmt_const(*c, out),
        Expr::Pi => out.push_str("pi"),
        Expr::ImUnit => out.push('i'),
        Expr::Coord(k) => out.push_str(&format!("x{}", k + 1)),
        Expr::Param(0) => out.push('t'),
        Expr::Param(l) => out.push_str(&format!("t{}", l + 1)),
        Expr::Add(a, b) => {
            fmt_expr(a, 1, out);
            out.push_str(" + ");
            fmt_expr(b, 2, out);
        }
        Expr::Sub(a, b) => {
            fmt_expr(a, 1, out);
            out.push_str(" - ");
            fmt_expr(b, 2, out);
        }
        Expr::Mul(a, b) => {
            fmt_expr(a, 2, out);
            out.push('*');
            fmt_expr(b, 3, out);
        }
        Expr::Div(a, b) => {
            fmt_expr(a, 2, out);
            out.push('/');
            fmt_expr(b, 3, out);
        }
        Expr::Pow(a, n) => {
            fmt_expr(a, 4, out);
            out.push('^');
            if *n < 0 {
                out.push_str(&format!("({})", n));
            } else {
                out.push_str(&format!("{}", n));
            }
        }
        Expr::Sin(a) => {
            out.push_str("sin(");
            fmt_expr(a, 0, out);
            out.push(')');
        }
        Expr::Cos(a) => {
            out.push_str("cos(");
            fmt_expr(a, 0, out);
            out.push(')');
        }
        Expr::Exp(a) => {
            out.push_str("exp(");
            fmt_expr(a, 0, out);
            out.push(')');
        }
        Expr::Log(a) => {
            out.push_str("log(");
            fmt_expr(a, 0, out);
            out.push(')');
        }
    }
    if need_paren {
        out.push(')');
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        fmt_expr(self, 0, &mut s);
        f.write_str(&s)
    }
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_expr(&mut self) -> Result<ExprRef, ParseError> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Arc::new(Expr::Add(lhs, rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Arc::new(Expr::Sub(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<ExprRef, ParseError> {
        let mut lhs = self.parse_factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    lhs = Arc::new(Expr::Mul(lhs, rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    lhs = Arc::new(Expr::Div(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_factor(&mut self) -> Result<ExprRef, ParseError> {
        let atom = self.parse_atom()?;
        if self.eat(b'^') {
            let n = self.parse_int_exponent()?;
            Ok(Arc::new(Expr::Pow(atom, n)))
        } else {
            Ok(atom)
        }
    }

    fn parse_int_exponent(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let paren = self.eat(b'(');
        self.skip_ws();
        let neg = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return self.err("expected integer exponent");
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let mut n: i32 = digits.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: "integer exponent out of range".into(),
        })?;
        if neg {
            n = -n;
        }
        if paren && !self.eat(b')') {
            return self.err("expected `)` after exponent");
        }
        Ok(n)
    }

    fn parse_atom(&mut self) -> Result<ExprRef, ParseError> {
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.parse_expr()?;
                if !self.eat(b')') {
                    return self.err("expected `)`");
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() => self.parse_ident(),
            Some(c) => self.err(format!("unexpected character `{}`", c as char)),
        }
    }

    fn parse_number(&mut self) -> Result<ExprRef, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len()
                && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            let dstart = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == dstart {
                // Not an exponent after all (e.g. `2*exp(...)` tokenized wrong).
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) => Ok(Expr::real(v)),
            Err(_) => Err(ParseError::Syntax {
                offset: start,
                message: format!("invalid number `{}`", text),
            }),
        }
    }

    fn parse_ident(&mut self) -> Result<ExprRef, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "pi" => Ok(Arc::new(Expr::Pi)),
            "i" => Ok(Arc::new(Expr::ImUnit)),
            "t" => Ok(Expr::param(0)),
            "sin" | "cos" | "exp" | "log" => {
                if !self.eat(b'(') {
                    return self.err(format!("expected `(` after `{}`", name));
                }
                let arg = self.parse_expr()?;
                if !self.eat(b')') {
                    return self.err("expected `)`");
                }
                Ok(match name {
                    "sin" => Expr::sin(&arg),
                    "cos" => Expr::cos(&arg),
                    "exp" => Expr::exp(&arg),
                    _ => Expr::log(&arg),
                })
            }
            _ => {
                if name.len() == 2 && name.starts_with('x') {
                    if let Some(d) = name[1..].parse::<u8>().ok().filter(|d| (1..=9).contains(d)) {
                        return Ok(Expr::coord((d - 1) as usize));
                    }
                }
                Err(ParseError::UnknownIdent {
                    offset: start,
                    name: name.to_string(),
                })
            }
        }
    }
}

/// Parse an expression conforming to the grammar above.
pub fn parse_expr(text: &str) -> Result<ExprRef, ParseError> {
    let mut p = Parser::new(text);
    let e = p.parse_expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::jet::{eval_value, EvalCtx};

    fn val(e: &ExprRef, pt: &[f64]) -> Complex64 {
        eval_value(e, pt, &EvalCtx::space(pt.len())).unwrap()
    }

    #[test]
    fn parses_and_evaluates() {
        let e = parse_expr("sin(2*pi*x1)").unwrap();
        let v = val(&e, &[0.25]);
        assert!((v.re - 1.0).abs() < 1e-15 && v.im.abs() < 1e-15);
    }

    #[test]
    fn exponent_and_number_forms() {
        let e = parse_expr("x1^3 + 1.5e-1").unwrap();
        let v = val(&e, &[2.0]);
        assert!((v.re - 8.15).abs() < 1e-12);
        let e = parse_expr("x1^(-2)").unwrap();
        let v = val(&e, &[2.0]);
        assert!((v.re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn reports_offset_on_syntax_error() {
        match parse_expr("sin(2*pi*x1") {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 11),
            other => panic!("expected syntax error, got {:?}", other),
        }
        match parse_expr("x1 + y2") {
            Err(ParseError::UnknownIdent { name, .. }) => assert_eq!(name, "y2"),
            other => panic!("expected unknown identifier, got {:?}", other),
        }
    }

    #[test]
    fn print_parse_round_trip() {
        let samples = [
            "sin(2*pi*x1)*cos(2*pi*x2)",
            "x1*x2 + x1^3 - 2/x2",
            "exp(i*x1) + log(x2 + 2)",
            "(x1 + x2)^2 / (1 + x1^2)",
        ];
        let pts: [[f64; 2]; 3] = [[0.3, 0.7], [0.11, 0.52], [0.9, 0.25]];
        for s in samples {
            let e = parse_expr(s).unwrap();
            let printed = e.to_string();
            let e2 = parse_expr(&printed).unwrap();
            for p in &pts {
                let a = val(&e, p);
                let b = val(&e2, p);
                assert!((a - b).norm() < 1e-14, "{s} -> {printed}");
            }
        }
    }

    #[test]
    fn negative_constants_print_in_grammar() {
        let e = Expr::mul(&Expr::constant(Complex64::new(-2.0, -3.0)), &Expr::coord(0));
        let printed = e.to_string();
        let e2 = parse_expr(&printed).unwrap();
        let p = [0.37];
        assert!((val(&e, &p) - val(&e2, &p)).norm() < 1e-15);
    }

    #[test]
    fn symbolic_diff_matches_product_rule() {
        let e = parse_expr("x1*x2").unwrap();
        let d1 = e.diff_coord(0);
        let d2 = e.diff_coord(1);
        let p = [2.0, 3.0];
        assert!((val(&d1, &p).re - 3.0).abs() < 1e-15);
        assert!((val(&d2, &p).re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn conj_is_pointwise_conjugate() {
        let e = parse_expr("exp(i*x1) + i*sin(x2)").unwrap();
        let c = e.conj();
        let p = [0.4, 1.3];
        assert!((val(&c, &p) - val(&e, &p).conj()).norm() < 1e-15);
    }

    #[test]
    fn shift_substitutes_coordinates() {
        let e = parse_expr("sin(2*pi*x1) + x2").unwrap();
        let s = e.shift_coords(&[1.0, -2.0]);
        let p = [0.2, 0.9];
        let q = [1.2, -1.1];
        assert!((val(&s, &p) - val(&e, &q)).norm() < 1e-12);
    }
}
