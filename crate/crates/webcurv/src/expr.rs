//! A small smooth-expression language for declaring web models.
//!
//! Grammar (recursive descent, standard precedence, left-associative):
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := factor (("*" | "/") factor)*
//! factor := atom ("^" int)?
//! atom   := number | ident | ident "(" expr ")" | "(" expr ")" | "-" atom
//! ```
//!
//! Variables resolve against a declared name list at parse time; named
//! parameters are bound the same way, as zero-degree variables.  Every
//! expression is smooth in its variables, so it can be evaluated both in
//! plain `f64` arithmetic and in jet arithmetic, and differentiated
//! symbolically (used to build closed-form curve derivatives γ', γ'' and
//! graph gradients without an extra jet order).

use std::fmt::Write as _;

use thiserror::Error;

use crate::jets::{Jet, JetError};

/// Smooth unary functions available in the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

impl UnaryFn {
    fn name(self) -> &'static str {
        match self {
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::Exp => "exp",
            UnaryFn::Log => "log",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "sqrt" => Some(UnaryFn::Sqrt),
            "exp" => Some(UnaryFn::Exp),
            "log" => Some(UnaryFn::Log),
            "sin" => Some(UnaryFn::Sin),
            "cos" => Some(UnaryFn::Cos),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Parsed expression tree.  Variable references carry the index into the
/// declared variable list.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Unary(UnaryFn, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
}

#[derive(Debug, Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("binding supplies {got} values for {expected} variables")]
    BindingArity { got: usize, expected: usize },
    #[error("sqrt of negative value {0}")]
    SqrtNegative(f64),
    #[error("log of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("zero raised to a negative power")]
    ZeroToNegativePower,
    #[error(transparent)]
    Jet(#[from] JetError),
}

struct Tokenizer<'a> {
    src: &'a [u8],
    pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl<'a> Tokenizer<'a> {
    fn new(src: &'a str) -> Self {
        Tokenizer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn err(&self, offset: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            offset,
            message: message.into(),
        }
    }

    /// Next token plus the byte offset where it starts.
    fn next(&mut self) -> Result<(Token, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Token::End, start));
        }
        let c = self.src[self.pos];
        let simple = match c {
            b'+' => Some(Token::Plus),
            b'-' => Some(Token::Minus),
            b'*' => Some(Token::Star),
            b'/' => Some(Token::Slash),
            b'^' => Some(Token::Caret),
            b'(' => Some(Token::LParen),
            b')' => Some(Token::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            self.pos += 1;
            return Ok((t, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            let mut end = self.pos;
            let mut seen_e = false;
            while end < self.src.len() {
                let d = self.src[end];
                if d.is_ascii_digit() || d == b'.' {
                    end += 1;
                } else if (d == b'e' || d == b'E') && !seen_e {
                    seen_e = true;
                    end += 1;
                    if end < self.src.len() && (self.src[end] == b'+' || self.src[end] == b'-') {
                        end += 1;
                    }
                } else {
                    break;
                }
            }
            let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
            let value: f64 = text
                .parse()
                .map_err(|_| self.err(start, format!("malformed number `{text}`")))?;
            self.pos = end;
            return Ok((Token::Num(value), start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = self.pos;
            while end < self.src.len()
                && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
            {
                end += 1;
            }
            let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap().to_owned();
            self.pos = end;
            return Ok((Token::Ident(text), start));
        }
        Err(self.err(start, format!("unexpected character `{}`", c as char)))
    }
}

struct Parser<'a> {
    tokens: Tokenizer<'a>,
    lookahead: (Token, usize),
    variables: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, variables: &'a [&'a str]) -> Result<Self, ParseError> {
        let mut tokens = Tokenizer::new(src);
        let lookahead = tokens.next()?;
        Ok(Parser {
            tokens,
            lookahead,
            variables,
        })
    }

    fn advance(&mut self) -> Result<(Token, usize), ParseError> {
        let next = self.tokens.next()?;
        Ok(std::mem::replace(&mut self.lookahead, next))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.lookahead.0 {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.lookahead.0 {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.lookahead.0 != Token::Caret {
            return Ok(base);
        }
        self.advance()?;
        let negative = if self.lookahead.0 == Token::Minus {
            self.advance()?;
            true
        } else {
            false
        };
        let (tok, offset) = self.advance()?;
        let exp = match tok {
            Token::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
            Token::Num(v) => {
                return Err(ParseError {
                    offset,
                    message: format!("exponent must be an integer literal, got {v}"),
                })
            }
            other => {
                return Err(ParseError {
                    offset,
                    message: format!("expected integer exponent, got {other:?}"),
                })
            }
        };
        Ok(Expr::Pow(
            Box::new(base),
            if negative { -exp } else { exp },
        ))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, offset) = self.advance()?;
        match tok {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::Minus => Ok(Expr::Neg(Box::new(self.atom()?))),
            Token::LParen => {
                let inner = self.expr()?;
                let (close, off) = self.advance()?;
                if close != Token::RParen {
                    return Err(ParseError {
                        offset: off,
                        message: "expected `)`".into(),
                    });
                }
                Ok(inner)
            }
            Token::Ident(name) => {
                if self.lookahead.0 == Token::LParen {
                    let func = UnaryFn::from_name(&name).ok_or_else(|| ParseError {
                        offset,
                        message: format!("unknown function `{name}`"),
                    })?;
                    self.advance()?;
                    let arg = self.expr()?;
                    let (close, off) = self.advance()?;
                    if close != Token::RParen {
                        return Err(ParseError {
                            offset: off,
                            message: "expected `)` after function argument".into(),
                        });
                    }
                    Ok(Expr::Unary(func, Box::new(arg)))
                } else {
                    let index = self
                        .variables
                        .iter()
                        .position(|v| *v == name)
                        .ok_or_else(|| ParseError {
                            offset,
                            message: format!("unknown identifier `{name}`"),
                        })?;
                    Ok(Expr::Var(index))
                }
            }
            other => Err(ParseError {
                offset,
                message: format!("expected an atom, got {other:?}"),
            }),
        }
    }
}

/// Parse `source` against the ordered variable list.
pub fn parse(source: &str, variables: &[&str]) -> Result<Expr, ParseError> {
    if source.trim().is_empty() {
        return Err(ParseError {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut parser = Parser::new(source, variables)?;
    let expr = parser.expr()?;
    let (tok, offset) = parser.advance()?;
    if tok != Token::End {
        return Err(ParseError {
            offset,
            message: format!("trailing input starting with {tok:?}"),
        });
    }
    Ok(expr)
}

/// Fully parenthesized form that re-parses to a structurally identical tree.
pub fn pretty(e: &Expr, variables: &[&str]) -> String {
    let mut out = String::new();
    write_pretty(e, variables, &mut out);
    out
}

fn write_pretty(e: &Expr, vars: &[&str], out: &mut String) {
    match e {
        Expr::Num(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Var(i) => out.push_str(vars[*i]),
        Expr::Neg(a) => {
            out.push('-');
            // The grammar's unary minus binds an atom, so parenthesize.
            out.push('(');
            write_pretty(a, vars, out);
            out.push(')');
        }
        Expr::Unary(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_pretty(a, vars, out);
            out.push(')');
        }
        Expr::Bin(op, a, b) => {
            out.push('(');
            write_pretty(a, vars, out);
            out.push_str(match op {
                BinOp::Add => " + ",
                BinOp::Sub => " - ",
                BinOp::Mul => "*",
                BinOp::Div => "/",
            });
            write_pretty(b, vars, out);
            out.push(')');
        }
        Expr::Pow(a, k) => {
            out.push('(');
            write_pretty(a, vars, out);
            out.push_str(")^");
            if *k < 0 {
                let _ = write!(out, "-{}", k.unsigned_abs());
            } else {
                let _ = write!(out, "{k}");
            }
        }
    }
}

/// Evaluate in plain real arithmetic.
pub fn eval_real(e: &Expr, values: &[f64]) -> Result<f64, EvalError> {
    Ok(match e {
        Expr::Num(v) => *v,
        Expr::Var(i) => *values.get(*i).ok_or(EvalError::BindingArity {
            got: values.len(),
            expected: *i + 1,
        })?,
        Expr::Neg(a) => -eval_real(a, values)?,
        Expr::Unary(f, a) => {
            let x = eval_real(a, values)?;
            match f {
                UnaryFn::Sqrt if x < 0.0 => return Err(EvalError::SqrtNegative(x)),
                UnaryFn::Sqrt => x.sqrt(),
                UnaryFn::Exp => x.exp(),
                UnaryFn::Log if x <= 0.0 => return Err(EvalError::LogNonPositive(x)),
                UnaryFn::Log => x.ln(),
                UnaryFn::Sin => x.sin(),
                UnaryFn::Cos => x.cos(),
            }
        }
        Expr::Bin(op, a, b) => {
            let x = eval_real(a, values)?;
            let y = eval_real(b, values)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
            }
        }
        Expr::Pow(a, k) => {
            let x = eval_real(a, values)?;
            if x == 0.0 && *k < 0 {
                return Err(EvalError::ZeroToNegativePower);
            }
            x.powi(*k)
        }
    })
}

/// Evaluate in jet arithmetic; the result carries all partial derivatives
/// through the binding's context order.
pub fn eval_jet(e: &Expr, values: &[Jet]) -> Result<Jet, EvalError> {
    Ok(match e {
        Expr::Num(v) => {
            let ctx = values
                .first()
                .map(|j| j.context())
                .ok_or(EvalError::BindingArity {
                    got: 0,
                    expected: 1,
                })?;
            Jet::constant(ctx, *v)
        }
        Expr::Var(i) => values
            .get(*i)
            .ok_or(EvalError::BindingArity {
                got: values.len(),
                expected: *i + 1,
            })?
            .clone(),
        Expr::Neg(a) => eval_jet(a, values)?.neg(),
        Expr::Unary(f, a) => {
            let x = eval_jet(a, values)?;
            match f {
                UnaryFn::Sqrt => x.sqrt()?,
                UnaryFn::Exp => x.exp(),
                UnaryFn::Log => x.log()?,
                UnaryFn::Sin => x.sin(),
                UnaryFn::Cos => x.cos(),
            }
        }
        Expr::Bin(op, a, b) => {
            let x = eval_jet(a, values)?;
            let y = eval_jet(b, values)?;
            match op {
                BinOp::Add => x.add(&y),
                BinOp::Sub => x.sub(&y),
                BinOp::Mul => x.mul(&y),
                BinOp::Div => x.div(&y)?,
            }
        }
        Expr::Pow(a, k) => eval_jet(a, values)?.powi(*k)?,
    })
}

/// Symbolic partial derivative with respect to variable `var`.
///
/// No simplification beyond dropping structurally obvious zero/one factors;
/// the result is only ever evaluated numerically.
pub fn derivative(e: &Expr, var: usize) -> Expr {
    match e {
        Expr::Num(_) => Expr::Num(0.0),
        Expr::Var(i) => Expr::Num(if *i == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(derivative(a, var)),
        Expr::Unary(f, a) => {
            let da = derivative(a, var);
            let inner = match f {
                UnaryFn::Sqrt => bin(
                    BinOp::Div,
                    Expr::Num(0.5),
                    Expr::Unary(UnaryFn::Sqrt, a.clone()),
                ),
                UnaryFn::Exp => Expr::Unary(UnaryFn::Exp, a.clone()),
                UnaryFn::Log => bin(BinOp::Div, Expr::Num(1.0), (**a).clone()),
                UnaryFn::Sin => Expr::Unary(UnaryFn::Cos, a.clone()),
                UnaryFn::Cos => neg(Expr::Unary(UnaryFn::Sin, a.clone())),
            };
            mul(inner, da)
        }
        Expr::Bin(op, a, b) => {
            let da = derivative(a, var);
            let db = derivative(b, var);
            match op {
                BinOp::Add => add(da, db),
                BinOp::Sub => bin(BinOp::Sub, da, db),
                BinOp::Mul => add(mul(da, (**b).clone()), mul((**a).clone(), db)),
                BinOp::Div => {
                    // (a/b)' = a'/b - a b'/b^2
                    let first = bin(BinOp::Div, da, (**b).clone());
                    let second = bin(
                        BinOp::Div,
                        mul((**a).clone(), db),
                        Expr::Pow(b.clone(), 2),
                    );
                    bin(BinOp::Sub, first, second)
                }
            }
        }
        Expr::Pow(a, k) => {
            if *k == 0 {
                return Expr::Num(0.0);
            }
            let da = derivative(a, var);
            mul(
                mul(Expr::Num(*k as f64), Expr::Pow(a.clone(), k - 1)),
                da,
            )
        }
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 1.0)
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        b
    } else if is_zero(&b) {
        a
    } else {
        Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        Expr::Num(0.0)
    } else if is_one(&a) {
        b
    } else if is_one(&b) {
        a
    } else {
        Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
    }
}

fn neg(a: Expr) -> Expr {
    if is_zero(&a) {
        a
    } else {
        Expr::Neg(Box::new(a))
    }
}

fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
    Expr::Bin(op, Box::new(a), Box::new(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{Jet, JetContext};
    use approx::assert_relative_eq;

    #[test]
    fn arithmetic_example() {
        let e = parse("s1^2 + 2*s1*s2", &["s1", "s2"]).unwrap();
        assert_relative_eq!(eval_real(&e, &[2.0, 1.0]).unwrap(), 8.0);
    }

    #[test]
    fn sphere_graph_shape_parses() {
        parse("sqrt(r^2 - s1^2 - s2^2)", &["s1", "s2", "r"]).unwrap();
    }

    #[test]
    fn syntax_error_offset() {
        let err = parse("s1 +", &["s1"]).unwrap_err();
        assert_eq!(err.offset, 4);
        assert!(parse("", &[]).is_err());
        assert!(parse("foo(1)", &[]).is_err());
        assert!(parse("s1^1.5", &["s1"]).is_err());
        assert!(parse("s1 s1", &["s1"]).is_err());
    }

    #[test]
    fn jet_eval_exp_st() {
        let ctx = JetContext::new(2, 3).unwrap();
        let e = parse("exp(s*t)", &["s", "t"]).unwrap();
        let s = Jet::variable(ctx, 0, 0.0).unwrap();
        let t = Jet::variable(ctx, 1, 0.0).unwrap();
        let j = eval_jet(&e, &[s, t]).unwrap();
        assert_relative_eq!(j.partial(&[1, 1]).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn self_division() {
        let e = parse("x/x", &["x"]).unwrap();
        assert_relative_eq!(eval_real(&e, &[5.0]).unwrap(), 1.0);
    }

    #[test]
    fn monomial_partial() {
        let ctx = JetContext::new(2, 6).unwrap();
        let e = parse("s^2 * t^3", &["s", "t"]).unwrap();
        let s = Jet::variable(ctx, 0, 1.0).unwrap();
        let t = Jet::variable(ctx, 1, 1.0).unwrap();
        let j = eval_jet(&e, &[s, t]).unwrap();
        assert_relative_eq!(j.partial(&[2, 2]).unwrap(), 12.0, max_relative = 1e-13);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse("-x^2", &["x"]).unwrap();
        // unary minus of an atom, then ^: grammar gives (-x)^2
        assert_relative_eq!(eval_real(&e, &[3.0]).unwrap(), 9.0);
        let e2 = parse("2 - x^2", &["x"]).unwrap();
        assert_relative_eq!(eval_real(&e2, &[3.0]).unwrap(), -7.0);
        let e3 = parse("x^-2", &["x"]).unwrap();
        assert_relative_eq!(eval_real(&e3, &[2.0]).unwrap(), 0.25);
    }

    #[test]
    fn round_trip_corpus() {
        let vars = ["x", "y", "s1", "s2"];
        let corpus = [
            "x + y",
            "x - y - s1",
            "x*y/s1",
            "-(x + y)",
            "sqrt(x^2 + y^2)",
            "exp(x*y)",
            "log(2 + s1^2)",
            "sin(x)*cos(y)",
            "1.5e-3 * x",
            "x^-3",
            "((x))",
            "x/(y + 1)",
            "2 - -(x)",
            "s1^2*s2^3 - 0.5",
            "exp(sin(cos(x)))",
        ];
        for src in corpus {
            let e = parse(src, &vars).unwrap();
            let printed = pretty(&e, &vars);
            let e2 = parse(&printed, &vars).unwrap();
            assert_eq!(e, e2, "round trip failed for `{src}` -> `{printed}`");
        }
    }

    #[test]
    fn jet_constant_term_matches_real_eval() {
        let vars = ["x", "y"];
        let ctx = JetContext::new(2, 3).unwrap();
        let p = [0.7, -0.3];
        for src in ["exp(x*y)", "sqrt(2 + x)", "sin(x)/cos(y)", "x^3 - y^-1"] {
            let e = parse(src, &vars).unwrap();
            let jets: Vec<Jet> = (0..2)
                .map(|i| Jet::variable(ctx, i, p[i]).unwrap())
                .collect();
            let jet_val = eval_jet(&e, &jets).unwrap().value();
            let real_val = eval_real(&e, &p).unwrap();
            assert_relative_eq!(jet_val, real_val, max_relative = 1e-14);
        }
    }

    #[test]
    fn symbolic_derivative_matches_jet() {
        let vars = ["x", "y"];
        let ctx = JetContext::new(2, 4).unwrap();
        let p = [0.4, 1.3];
        for src in [
            "exp(x*y) + sqrt(3 + x)",
            "sin(x*y)/(2 + cos(x))",
            "x^3*y - y^-2",
            "log(1 + x^2 + y^2)",
        ] {
            let e = parse(src, &vars).unwrap();
            for var in 0..2 {
                let de = derivative(&e, var);
                let dval = eval_real(&de, &p).unwrap();
                let jets: Vec<Jet> = (0..2)
                    .map(|i| Jet::variable(ctx, i, p[i]).unwrap())
                    .collect();
                let j = eval_jet(&e, &jets).unwrap();
                let mut alpha = [0u8; 2];
                alpha[var] = 1;
                assert_relative_eq!(
                    dval,
                    j.partial(&alpha).unwrap(),
                    max_relative = 1e-12,
                    epsilon = 1e-12
                );
            }
        }
    }
}
