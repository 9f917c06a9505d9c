//! Tiny interpreted arithmetic expressions for configuration fields.
//!
//! Grammar: variables `x1 x2 y1 y2 t`, constant `pi`, functions
//! `sin cos exp sqrt`, operators `+ - * / ^` (with `^` right-associative),
//! parentheses, and decimal literals. Expressions are parsed once and
//! interpreted; they are sampled onto grids, never on the hot path.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X1,
    X2,
    Y1,
    Y2,
    T,
}

#[derive(Debug, Clone, Copy)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

#[derive(Debug, Clone)]
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

/// Values bound to the variables at evaluation time; unused entries can be
/// left at zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env {
    pub x1: f64,
    pub x2: f64,
    pub y1: f64,
    pub y2: f64,
    pub t: f64,
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
        };
        p.skip_ws();
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X1) => env.x1,
            Expr::Var(Var::X2) => env.x2,
            Expr::Var(Var::Y1) => env.y1,
            Expr::Var(Var::Y2) => env.y2,
            Expr::Var(Var::T) => env.t,
            Expr::Neg(e) => -e.eval(env),
            Expr::Add(a, b) => a.eval(env) + b.eval(env),
            Expr::Sub(a, b) => a.eval(env) - b.eval(env),
            Expr::Mul(a, b) => a.eval(env) * b.eval(env),
            Expr::Div(a, b) => a.eval(env) / b.eval(env),
            Expr::Pow(a, b) => a.eval(env).powf(b.eval(env)),
            Expr::Call(Func::Sin, e) => e.eval(env).sin(),
            Expr::Call(Func::Cos, e) => e.eval(env).cos(),
            Expr::Call(Func::Exp, e) => e.eval(env).exp(),
            Expr::Call(Func::Sqrt, e) => e.eval(env).sqrt(),
        }
    }

    /// True when the expression references any of the given variables.
    pub fn uses(&self, vars: &[Var]) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => vars.contains(v),
            Expr::Neg(e) | Expr::Call(_, e) => e.uses(vars),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.uses(vars) || b.uses(vars),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> Error {
        Error::ExprParse {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    // '^' binds tighter than unary minus: -x^2 is -(x^2)
    fn factor(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.factor()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.eat(b'^') {
            let exp = self.factor()?; // right-associative, sign allowed
            Ok(Expr::Pow(Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err("expected a number, variable, function, or '('")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && self.pos > start {
                self.pos += 1;
                if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| Error::ExprParse {
            position: start,
            message: format!("bad numeric literal {text:?}"),
        })?;
        self.skip_ws();
        Ok(Expr::Num(value))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
        self.skip_ws();
        let var = match name.as_str() {
            "x1" => Some(Var::X1),
            "x2" => Some(Var::X2),
            "y1" => Some(Var::Y1),
            "y2" => Some(Var::Y2),
            "t" => Some(Var::T),
            _ => None,
        };
        if let Some(v) = var {
            return Ok(Expr::Var(v));
        }
        if name == "pi" {
            return Ok(Expr::Num(std::f64::consts::PI));
        }
        let func = match name.as_str() {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        };
        match func {
            Some(f) => {
                if !self.eat(b'(') {
                    return Err(self.err("expected '(' after function name"));
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(Expr::Call(f, Box::new(arg)))
            }
            None => Err(Error::ExprParse {
                position: start,
                message: format!("unknown identifier {name:?}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(text: &str, env: Env) -> f64 {
        Expr::parse(text).unwrap().eval(&env)
    }

    #[test]
    fn arithmetic_and_precedence() {
        let env = Env::default();
        assert_eq!(eval("1 + 2 * 3", env), 7.0);
        assert_eq!(eval("(1 + 2) * 3", env), 9.0);
        assert_eq!(eval("2 ^ 3 ^ 2", env), 512.0); // right-associative
        assert_eq!(eval("-2 ^ 2", env), -4.0); // exponent binds tighter than the sign
        assert_eq!(eval("2 ^ -1", env), 0.5);
        assert_eq!(eval("6 / 3 / 2", env), 1.0);
    }

    #[test]
    fn variables_and_functions() {
        let env = Env {
            x1: 0.25,
            x2: 0.5,
            t: 2.0,
            ..Default::default()
        };
        assert!((eval("sin(pi * x1)", env) - (std::f64::consts::PI * 0.25).sin()).abs() < 1e-15);
        assert_eq!(eval("x2 * t", env), 1.0);
        assert_eq!(eval("sqrt(x2 * 2)", env), 1.0);
        assert!((eval("exp(-(x1 - 0.5)^2 / 0.01)", env)
            - (-(0.25f64 - 0.5).powi(2) / 0.01).exp())
        .abs()
            < 1e-15);
    }

    #[test]
    fn errors_carry_positions() {
        match Expr::parse("1 + foo") {
            Err(Error::ExprParse { position, .. }) => assert_eq!(position, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        match Expr::parse("sin 0.5") {
            Err(Error::ExprParse { position, .. }) => assert!(position >= 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 + 2)").is_err());
        assert!(Expr::parse("").is_err());
    }

    #[test]
    fn variable_usage_query() {
        let e = Expr::parse("sin(x1) + t").unwrap();
        assert!(e.uses(&[Var::X1]));
        assert!(e.uses(&[Var::T]));
        assert!(!e.uses(&[Var::Y1, Var::Y2]));
    }
}
