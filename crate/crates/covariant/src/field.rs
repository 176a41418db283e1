//! Closed-form scalar expressions of chart coordinates.
//!
//! The grammar is deliberately tiny — every metric component and test field
//! in this crate is expressible with `+ - * /`, integer `^`, unary minus,
//! and `sin / cos / exp / sqrt / log`:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' uint)? | '-' factor
//! atom   := number | ident | func '(' expr ')' | '(' expr ')'
//! ident  := x0..x9 | t | chi | theta | phi   (aliases only when dim = 4)
//! ```
//!
//! Expressions evaluate to [`Jet`]s at a point; all differentiation happens
//! in jet space, never on the AST.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;

use crate::error::{Error, Result};
use crate::jet::{multi_indices_up_to, Jet, MultiIndex};

/// Denominator constant terms closer to zero than this make division fail
/// loudly rather than produce near-singular garbage.
pub const EPS_DENOM: f64 = 1e-9;

/// A point of the coordinate chart. Entries must be finite.
#[derive(Clone, PartialEq)]
pub struct EvalPoint {
    coords: Vec<f64>,
}

impl EvalPoint {
    pub fn new(coords: Vec<f64>) -> EvalPoint {
        assert!(
            coords.iter().all(|c| c.is_finite()),
            "evaluation point has non-finite coordinates"
        );
        EvalPoint { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coord(&self, axis: usize) -> f64 {
        self.coords[axis]
    }
}

impl fmt::Debug for EvalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords)
    }
}

impl From<Vec<f64>> for EvalPoint {
    fn from(coords: Vec<f64>) -> EvalPoint {
        EvalPoint::new(coords)
    }
}

/// Abstract syntax tree of a scalar expression in chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldExpr {
    Const(f64),
    Var(usize),
    Neg(Box<FieldExpr>),
    Add(Box<FieldExpr>, Box<FieldExpr>),
    Sub(Box<FieldExpr>, Box<FieldExpr>),
    Mul(Box<FieldExpr>, Box<FieldExpr>),
    Div(Box<FieldExpr>, Box<FieldExpr>),
    Pow(Box<FieldExpr>, u32),
    Sin(Box<FieldExpr>),
    Cos(Box<FieldExpr>),
    Exp(Box<FieldExpr>),
    Sqrt(Box<FieldExpr>),
    Log(Box<FieldExpr>),
}

impl FieldExpr {
    pub fn constant(v: f64) -> FieldExpr {
        FieldExpr::Const(v)
    }

    pub fn var(axis: usize) -> FieldExpr {
        FieldExpr::Var(axis)
    }

    pub fn add(a: FieldExpr, b: FieldExpr) -> FieldExpr {
        FieldExpr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: FieldExpr, b: FieldExpr) -> FieldExpr {
        FieldExpr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: FieldExpr, b: FieldExpr) -> FieldExpr {
        FieldExpr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: FieldExpr, b: FieldExpr) -> FieldExpr {
        FieldExpr::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(base: FieldExpr, exponent: u32) -> FieldExpr {
        FieldExpr::Pow(Box::new(base), exponent)
    }

    pub fn neg(a: FieldExpr) -> FieldExpr {
        FieldExpr::Neg(Box::new(a))
    }

    pub fn sin(a: FieldExpr) -> FieldExpr {
        FieldExpr::Sin(Box::new(a))
    }

    pub fn cos(a: FieldExpr) -> FieldExpr {
        FieldExpr::Cos(Box::new(a))
    }

    pub fn exp(a: FieldExpr) -> FieldExpr {
        FieldExpr::Exp(Box::new(a))
    }

    pub fn sqrt(a: FieldExpr) -> FieldExpr {
        FieldExpr::Sqrt(Box::new(a))
    }

    pub fn log(a: FieldExpr) -> FieldExpr {
        FieldExpr::Log(Box::new(a))
    }

    /// The order-`order` jet of this expression at `x`. Coordinate `x_i`
    /// evaluates to the jet `x.coord(i) + e_i`.
    pub fn eval_jet(&self, x: &EvalPoint, order: usize) -> Result<Jet> {
        if order > crate::jet::MAX_ORDER {
            return Err(Error::OrderTooHigh(order));
        }
        let dim = x.dim();
        match self {
            FieldExpr::Const(v) => Ok(Jet::constant(dim, order, *v)),
            FieldExpr::Var(i) => {
                assert!(*i < dim, "variable x{i} out of range for dimension {dim}");
                Ok(Jet::variable(dim, order, *i, x.coord(*i)))
            }
            FieldExpr::Neg(a) => Ok(a.eval_jet(x, order)?.scale(-1.0)),
            FieldExpr::Add(a, b) => Ok(&a.eval_jet(x, order)? + &b.eval_jet(x, order)?),
            FieldExpr::Sub(a, b) => Ok(&a.eval_jet(x, order)? - &b.eval_jet(x, order)?),
            FieldExpr::Mul(a, b) => Ok(&a.eval_jet(x, order)? * &b.eval_jet(x, order)?),
            FieldExpr::Div(a, b) => {
                let den = b.eval_jet(x, order)?;
                if den.value().abs() <= EPS_DENOM {
                    return Err(Error::Domain {
                        func: "div",
                        value: den.value(),
                    });
                }
                Ok(&a.eval_jet(x, order)? * &den.recip()?)
            }
            FieldExpr::Pow(base, e) => Ok(base.eval_jet(x, order)?.powi(*e)),
            FieldExpr::Sin(a) => Ok(a.eval_jet(x, order)?.sin()),
            FieldExpr::Cos(a) => Ok(a.eval_jet(x, order)?.cos()),
            FieldExpr::Exp(a) => Ok(a.eval_jet(x, order)?.exp()),
            FieldExpr::Sqrt(a) => a.eval_jet(x, order)?.sqrt(),
            FieldExpr::Log(a) => a.eval_jet(x, order)?.log(),
        }
    }

    /// Plain pointwise evaluation (order-0 jet).
    pub fn eval(&self, x: &EvalPoint) -> Result<f64> {
        Ok(self.eval_jet(x, 0)?.value())
    }

    fn precedence(&self) -> u8 {
        match self {
            FieldExpr::Add(..) | FieldExpr::Sub(..) => 1,
            FieldExpr::Mul(..) | FieldExpr::Div(..) => 2,
            FieldExpr::Neg(..) => 3,
            FieldExpr::Pow(..) => 4,
            FieldExpr::Const(v) if *v < 0.0 => 3,
            _ => 5,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldExpr::Const(v) => write!(f, "{v}"),
            FieldExpr::Var(i) => write!(f, "x{i}"),
            FieldExpr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_child(f, 3)
            }
            FieldExpr::Add(a, b) => {
                a.fmt_child(f, 1)?;
                write!(f, " + ")?;
                b.fmt_child(f, 2)
            }
            FieldExpr::Sub(a, b) => {
                a.fmt_child(f, 1)?;
                write!(f, " - ")?;
                b.fmt_child(f, 2)
            }
            FieldExpr::Mul(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, "*")?;
                b.fmt_child(f, 3)
            }
            FieldExpr::Div(a, b) => {
                a.fmt_child(f, 2)?;
                write!(f, "/")?;
                b.fmt_child(f, 3)
            }
            FieldExpr::Pow(base, e) => {
                base.fmt_child(f, 5)?;
                write!(f, "^{e}")
            }
            FieldExpr::Sin(a) => write!(f, "sin({a})"),
            FieldExpr::Cos(a) => write!(f, "cos({a})"),
            FieldExpr::Exp(a) => write!(f, "exp({a})"),
            FieldExpr::Sqrt(a) => write!(f, "sqrt({a})"),
            FieldExpr::Log(a) => write!(f, "log({a})"),
        }
    }
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
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                tokens.push((Token::Plus, i));
                i += 1;
            }
            '-' => {
                tokens.push((Token::Minus, i));
                i += 1;
            }
            '*' => {
                tokens.push((Token::Star, i));
                i += 1;
            }
            '/' => {
                tokens.push((Token::Slash, i));
                i += 1;
            }
            '^' => {
                tokens.push((Token::Caret, i));
                i += 1;
            }
            '(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let slice = &text[start..i];
                let value: f64 = slice.parse().map_err(|_| Error::Parse {
                    pos: start,
                    msg: format!("invalid number literal '{slice}'"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Parse {
                        pos: start,
                        msg: format!("number literal '{slice}' out of range"),
                    });
                }
                tokens.push((Token::Num(value), start));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(Error::Parse {
                    pos: i,
                    msg: format!("unexpected character '{c}'"),
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [(Token, usize)],
    pos: usize,
    dim: usize,
    text_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, p)| *p)
            .unwrap_or(self.text_len)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<()> {
        let pos = self.here();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            _ => Err(Error::Parse {
                pos,
                msg: format!("expected {what}"),
            }),
        }
    }

    fn expr(&mut self) -> Result<FieldExpr> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    acc = FieldExpr::add(acc, self.term()?);
                }
                Some(Token::Minus) => {
                    self.bump();
                    acc = FieldExpr::sub(acc, self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<FieldExpr> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.bump();
                    acc = FieldExpr::mul(acc, self.factor()?);
                }
                Some(Token::Slash) => {
                    self.bump();
                    acc = FieldExpr::div(acc, self.factor()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<FieldExpr> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.bump();
            return Ok(FieldExpr::neg(self.factor()?));
        }
        let atom = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.bump();
            let pos = self.here();
            match self.bump() {
                Some(Token::Num(v)) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                    Ok(FieldExpr::pow(atom, v as u32))
                }
                _ => Err(Error::Parse {
                    pos,
                    msg: "exponent must be a non-negative integer".to_string(),
                }),
            }
        } else {
            Ok(atom)
        }
    }

    fn atom(&mut self) -> Result<FieldExpr> {
        let pos = self.here();
        match self.bump() {
            Some(Token::Num(v)) => Ok(FieldExpr::Const(v)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "')'")?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "sin" | "cos" | "exp" | "sqrt" | "log" => {
                    self.expect(Token::LParen, "'(' after function name")?;
                    let arg = self.expr()?;
                    self.expect(Token::RParen, "')'")?;
                    Ok(match name.as_str() {
                        "sin" => FieldExpr::sin(arg),
                        "cos" => FieldExpr::cos(arg),
                        "exp" => FieldExpr::exp(arg),
                        "sqrt" => FieldExpr::sqrt(arg),
                        _ => FieldExpr::log(arg),
                    })
                }
                _ => self.ident_to_var(&name, pos),
            },
            _ => Err(Error::Parse {
                pos,
                msg: "expected a number, identifier, function call, or '('".to_string(),
            }),
        }
    }

    fn ident_to_var(&self, name: &str, pos: usize) -> Result<FieldExpr> {
        let alias = match name {
            "t" => Some(0),
            "chi" => Some(1),
            "theta" => Some(2),
            "phi" => Some(3),
            _ => None,
        };
        if let Some(axis) = alias {
            if self.dim != 4 {
                return Err(Error::Parse {
                    pos,
                    msg: format!("alias '{name}' is only valid in dimension 4, got {}", self.dim),
                });
            }
            return Ok(FieldExpr::Var(axis));
        }
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(idx) = rest.parse::<usize>() {
                if rest.len() == 1 {
                    if idx >= self.dim {
                        return Err(Error::Parse {
                            pos,
                            msg: format!("variable x{idx} out of range for dimension {}", self.dim),
                        });
                    }
                    return Ok(FieldExpr::Var(idx));
                }
            }
        }
        Err(Error::Parse {
            pos,
            msg: format!("unknown identifier '{name}'"),
        })
    }
}

/// Parse an expression in `dim` chart variables.
pub fn parse(text: &str, dim: usize) -> Result<FieldExpr> {
    if text.trim().is_empty() {
        return Err(Error::Parse {
            pos: 0,
            msg: "empty expression".to_string(),
        });
    }
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        dim,
        text_len: text.len(),
    };
    let expr = parser.expr()?;
    if parser.pos != tokens.len() {
        return Err(Error::Parse {
            pos: parser.here(),
            msg: "unexpected trailing input".to_string(),
        });
    }
    Ok(expr)
}

fn monomial(coefficient: f64, index: &MultiIndex) -> FieldExpr {
    let mut expr = FieldExpr::Const(coefficient);
    for axis in 0..index.len() {
        let e = index.exponent(axis);
        let factor = match e {
            0 => continue,
            1 => FieldExpr::Var(axis),
            _ => FieldExpr::pow(FieldExpr::Var(axis), e as u32),
        };
        expr = FieldExpr::mul(expr, factor);
    }
    expr
}

fn uniform(rng: &mut ChaCha8Rng, amplitude: f64) -> f64 {
    if amplitude == 0.0 {
        0.0
    } else {
        rng.gen_range(-amplitude..=amplitude)
    }
}

/// Deterministic-in-seed smooth test field: a dense polynomial of total
/// degree at most `degree` plus one `sin` and one `cos` term per axis. Every
/// coefficient lies in `[-amplitude, amplitude]`.
pub fn random_field(seed: u64, dim: usize, degree: usize, amplitude: f64) -> FieldExpr {
    assert!(degree <= 3, "random fields are capped at degree 3");
    assert!(amplitude >= 0.0, "amplitude must be non-negative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut expr: Option<FieldExpr> = None;
    let push = |e: FieldExpr, acc: &mut Option<FieldExpr>| {
        *acc = Some(match acc.take() {
            None => e,
            Some(prev) => FieldExpr::add(prev, e),
        });
    };
    for index in multi_indices_up_to(dim, degree) {
        let c = uniform(&mut rng, amplitude);
        push(monomial(c, &index), &mut expr);
    }
    for axis in 0..dim {
        let s = uniform(&mut rng, amplitude);
        push(
            FieldExpr::mul(FieldExpr::Const(s), FieldExpr::sin(FieldExpr::Var(axis))),
            &mut expr,
        );
        let c = uniform(&mut rng, amplitude);
        push(
            FieldExpr::mul(FieldExpr::Const(c), FieldExpr::cos(FieldExpr::Var(axis))),
            &mut expr,
        );
    }
    expr.expect("dimension must be positive")
}

/// A strictly positive conformal factor: `exp(r)` with `r` a small random
/// field of degree at most 2. Positivity holds everywhere by construction.
pub fn random_positive_factor(seed: u64, dim: usize, amplitude: f64) -> FieldExpr {
    assert!(
        (0.0..=1.0).contains(&amplitude),
        "factor amplitude must lie in [0, 1]"
    );
    FieldExpr::exp(random_field(seed, dim, 2, amplitude))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_respects_precedence() {
        // sin(x0)^2 + 1 -> Add(Pow(Sin(Var 0), 2), 1)
        let e = parse("sin(x0)^2 + 1", 2).unwrap();
        assert_eq!(
            e,
            FieldExpr::add(
                FieldExpr::pow(FieldExpr::sin(FieldExpr::Var(0)), 2),
                FieldExpr::Const(1.0)
            )
        );
    }

    #[test]
    fn parse_left_associativity() {
        let e = parse("1 - 2 - 3", 1).unwrap();
        assert_eq!(
            e,
            FieldExpr::sub(
                FieldExpr::sub(FieldExpr::Const(1.0), FieldExpr::Const(2.0)),
                FieldExpr::Const(3.0)
            )
        );
        let x = EvalPoint::new(vec![0.0]);
        assert_eq!(e.eval(&x).unwrap(), -4.0);
    }

    #[test]
    fn unary_minus_binds_below_pow() {
        // -x0^2 = -(x0^2)
        let e = parse("-x0^2", 1).unwrap();
        let x = EvalPoint::new(vec![3.0]);
        assert_eq!(e.eval(&x).unwrap(), -9.0);
    }

    #[test]
    fn variable_out_of_range_is_an_error() {
        let err = parse("x9", 4).unwrap_err();
        match err {
            Error::Parse { msg, .. } => assert!(msg.contains("out of range")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn aliases_require_dimension_four() {
        assert!(parse("cos(t)", 4).is_ok());
        let err = parse("cos(t)", 3).unwrap_err();
        match err {
            Error::Parse { msg, .. } => assert!(msg.contains("dimension 4")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse("1 + * 2", 1).unwrap_err();
        match err {
            Error::Parse { pos, .. } => assert_eq!(pos, 4),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_fractional_exponent() {
        assert!(parse("x0^1.5", 1).is_err());
        assert!(parse("x0^-2", 1).is_err());
    }

    #[test]
    fn rejects_trailing_input() {
        assert!(parse("1 + 2 )", 1).is_err());
        assert!(parse("", 1).is_err());
    }

    #[test]
    fn eval_bilinear_example() {
        // x0*x1 at (2, 3), order 2: 6 + 3 e0 + 2 e1 + e0 e1
        let e = parse("x0*x1", 2).unwrap();
        let j = e.eval_jet(&EvalPoint::new(vec![2.0, 3.0]), 2).unwrap();
        assert_eq!(j.value(), 6.0);
        assert_eq!(j.coeff(&MultiIndex::unit(2, 0)), 3.0);
        assert_eq!(j.coeff(&MultiIndex::unit(2, 1)), 2.0);
        assert_eq!(j.coeff(&MultiIndex::new(vec![1, 1])), 1.0);
        assert_eq!(j.coeff(&MultiIndex::new(vec![2, 0])), 0.0);
    }

    #[test]
    fn eval_exp_maclaurin() {
        let e = parse("exp(x0)", 1).unwrap();
        let j = e.eval_jet(&EvalPoint::new(vec![0.0]), 4).unwrap();
        let expected = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0];
        for (m, &c) in expected.iter().enumerate() {
            assert!((j.coeff(&MultiIndex::new(vec![m as u8])) - c).abs() < 1e-15);
        }
    }

    #[test]
    fn eval_order_zero_is_pointwise() {
        let e = parse("sin(x0)*exp(x1) - x1^3/2", 2).unwrap();
        let x = EvalPoint::new(vec![0.7, -0.4]);
        let direct = 0.7f64.sin() * (-0.4f64).exp() - (-0.4f64).powi(3) / 2.0;
        assert!((e.eval(&x).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn division_near_zero_denominator_errors() {
        let e = parse("1/x0", 1).unwrap();
        assert!(e.eval(&EvalPoint::new(vec![1e-12])).is_err());
        assert!(e.eval(&EvalPoint::new(vec![0.5])).is_ok());
    }

    #[test]
    fn sqrt_of_negative_propagates() {
        let e = parse("sqrt(x0)", 1).unwrap();
        assert!(matches!(
            e.eval(&EvalPoint::new(vec![-2.0])),
            Err(Error::Domain { func: "sqrt", .. })
        ));
    }

    #[test]
    fn random_field_is_deterministic_and_bounded() {
        let a = random_field(7, 3, 3, 0.1);
        let b = random_field(7, 3, 3, 0.1);
        assert_eq!(a, b);

        fn walk(e: &FieldExpr, check: &mut impl FnMut(f64)) {
            match e {
                FieldExpr::Const(v) => check(*v),
                FieldExpr::Var(_) => {}
                FieldExpr::Neg(a)
                | FieldExpr::Sin(a)
                | FieldExpr::Cos(a)
                | FieldExpr::Exp(a)
                | FieldExpr::Sqrt(a)
                | FieldExpr::Log(a)
                | FieldExpr::Pow(a, _) => walk(a, check),
                FieldExpr::Add(a, b)
                | FieldExpr::Sub(a, b)
                | FieldExpr::Mul(a, b)
                | FieldExpr::Div(a, b) => {
                    walk(a, check);
                    walk(b, check);
                }
            }
        }
        let mut count = 0;
        walk(&a, &mut |v| {
            count += 1;
            assert!(v.abs() <= 0.1, "coefficient {v} exceeds the amplitude");
        });
        assert!(count > 0);
    }

    #[test]
    fn random_field_seeds_do_not_collide() {
        let mut seen = std::collections::HashSet::new();
        for seed in 0..1000 {
            let e = random_field(seed, 2, 2, 1.0);
            assert!(seen.insert(format!("{e}")), "seed {seed} collided");
        }
    }

    #[test]
    fn positive_factor_is_positive_and_degenerates_to_one() {
        let p = random_positive_factor(3, 3, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let x = EvalPoint::new((0..3).map(|_| rng.gen_range(-2.0..2.0)).collect());
            assert!(p.eval(&x).unwrap() > 0.0);
        }
        let one = random_positive_factor(3, 3, 0.0);
        let x = EvalPoint::new(vec![0.3, -0.7, 1.1]);
        assert_eq!(one.eval(&x).unwrap(), 1.0);
    }

    #[test]
    fn factor_product_evaluates_as_plain_product() {
        let p = random_positive_factor(11, 2, 0.4);
        let q = random_positive_factor(12, 2, 0.4);
        let prod = FieldExpr::mul(p.clone(), q.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = EvalPoint::new(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            let lhs = prod.eval(&x).unwrap();
            let rhs = p.eval(&x).unwrap() * q.eval(&x).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn print_parse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for seed in 0..40 {
            let e = random_field(seed, 3, 3, 1.0);
            let printed = format!("{e}");
            let reparsed = parse(&printed, 3).unwrap();
            for _ in 0..5 {
                let x = EvalPoint::new((0..3).map(|_| rng.gen_range(-1.5..1.5)).collect());
                let a = e.eval_jet(&x, 4).unwrap();
                let b = reparsed.eval_jet(&x, 4).unwrap();
                for ((_, c1), (_, c2)) in a.iter().zip(b.iter()) {
                    assert!(
                        (c1 - c2).abs() <= 1e-13 * c1.abs().max(1.0),
                        "seed {seed}: {c1} vs {c2}"
                    );
                }
            }
        }
    }

    #[test]
    fn round_trip_handles_nested_operators() {
        let cases = [
            "1 - (2 - 3)",
            "(x0 + x1)^3",
            "-(x0 + 1)*x1",
            "2/(x0^2 + 1)/3",
            "sqrt(exp(x0) + 2)*log(x1 + 3)",
            "-0.5*cos(x0)^2",
        ];
        for text in cases {
            let e = parse(text, 2).unwrap();
            let printed = format!("{e}");
            let reparsed = parse(&printed, 2).unwrap();
            let x = EvalPoint::new(vec![0.37, 0.82]);
            let a = e.eval_jet(&x, 3).unwrap();
            let b = reparsed.eval_jet(&x, 3).unwrap();
            for ((_, c1), (_, c2)) in a.iter().zip(b.iter()) {
                assert!((c1 - c2).abs() < 1e-13, "{text}: {c1} vs {c2}");
            }
        }
    }
}
