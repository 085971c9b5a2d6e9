//! Closed-form scalar expressions in `x, y, z`.
//!
//! Grammar (usual precedence, `^` right-associative):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'x' | 'y' | 'z' | 'pi' | func '(' args ')' | '(' expr ')'
//! func    := cos | sin | abs | sqrt | exp | log | atan2
//! ```
//!
//! `atan2(a, b)` is the four-quadrant angle of the point `(a, b)`, that is the
//! arctangent of `b / a`. This is the reverse of the argument order of
//! `f64::atan2`.

use std::fmt;

use super::jet::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Cos,
    Sin,
    Abs,
    Sqrt,
    Exp,
    Log,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Cos => "cos",
            Func::Sin => "sin",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    /// Angle of the point `(first, second)`.
    Atan2(Box<Expr>, Box<Expr>),
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("expression error at byte {pos}: {msg}")]
pub struct ParseExprError {
    pub pos: usize,
    pub msg: String,
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn parse(src: &str) -> Result<Self, ParseExprError> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if let Some(t) = p.tokens.get(p.pos) {
            return Err(ParseExprError {
                pos: t.pos,
                msg: format!("unexpected {:?}", t.kind),
            });
        }
        Ok(e)
    }

    pub fn eval<T: Scalar>(&self, x: T, y: T, z: T) -> T {
        match self {
            Expr::Const(c) => T::constant(*c),
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::Z) => z,
            Expr::Neg(a) => -a.eval(x, y, z),
            Expr::Add(a, b) => a.eval(x, y, z) + b.eval(x, y, z),
            Expr::Sub(a, b) => a.eval(x, y, z) - b.eval(x, y, z),
            Expr::Mul(a, b) => a.eval(x, y, z) * b.eval(x, y, z),
            Expr::Div(a, b) => a.eval(x, y, z) / b.eval(x, y, z),
            Expr::Pow(a, b) => {
                let base = a.eval(x, y, z);
                match b.const_value() {
                    Some(c) if c.fract() == 0.0 && c.abs() < 64.0 => base.powi(c as i32),
                    Some(c) => base.powf(c),
                    None => (b.eval(x, y, z) * base.ln()).exp(),
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(x, y, z);
                match f {
                    Func::Cos => v.cos(),
                    Func::Sin => v.sin(),
                    Func::Abs => v.abs(),
                    Func::Sqrt => v.sqrt(),
                    Func::Exp => v.exp(),
                    Func::Log => v.ln(),
                }
            }
            Expr::Atan2(a, b) => T::angle(a.eval(x, y, z), b.eval(x, y, z)),
        }
    }

    pub fn eval_f64(&self, x: f64, y: f64, z: f64) -> f64 {
        self.eval(x, y, z)
    }

    /// Value of a variable-free expression.
    pub fn const_value(&self) -> Option<f64> {
        if self.has_vars() {
            None
        } else {
            Some(self.eval_f64(0.0, 0.0, 0.0))
        }
    }

    fn has_vars(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(_) => true,
            Expr::Neg(a) | Expr::Call(_, a) => a.has_vars(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b)
            | Expr::Atan2(a, b) => a.has_vars() || b.has_vars(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if *c < 0.0 => 3,
            _ => 5,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(Var::X) => write!(f, "x"),
            Expr::Var(Var::Y) => write!(f, "y"),
            Expr::Var(Var::Z) => write!(f, "z"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 4)
            }
            Expr::Add(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, b, 2)
            }
            Expr::Sub(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " - ")?;
                wrap(f, b, 2)
            }
            Expr::Mul(a, b) => {
                wrap(f, a, 2)?;
                write!(f, " * ")?;
                wrap(f, b, 3)
            }
            Expr::Div(a, b) => {
                wrap(f, a, 2)?;
                write!(f, " / ")?;
                wrap(f, b, 3)
            }
            Expr::Pow(a, b) => {
                wrap(f, a, 5)?;
                write!(f, "^")?;
                wrap(f, b, 4)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Atan2(a, b) => write!(f, "atan2({a}, {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    pos: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseExprError> {
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
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ParseExprError {
                pos: start,
                msg: format!("bad number '{text}'"),
            })?;
            out.push(Token {
                kind: TokKind::Num(v),
                pos: start,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            out.push(Token {
                kind: TokKind::Ident(src[start..i].to_ascii_lowercase()),
                pos: start,
            });
        } else if "+-*/^(),".contains(c) {
            out.push(Token {
                kind: TokKind::Op(c),
                pos: i,
            });
            i += 1;
        } else {
            return Err(ParseExprError {
                pos: i,
                msg: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token {
                kind: TokKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn here(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.pos)
            .unwrap_or_else(|| self.tokens.last().map(|t| t.pos + 1).unwrap_or(0))
    }

    fn expect(&mut self, op: char) -> Result<(), ParseExprError> {
        if self.peek_op() == Some(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ParseExprError {
                pos: self.here(),
                msg: format!("expected '{op}'"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseExprError> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseExprError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Const(c) => Expr::Const(-c),
                e => Expr::Neg(Box::new(e)),
            });
        }
        if self.peek_op() == Some('+') {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseExprError> {
        let base = self.primary()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseExprError> {
        let tok = self.tokens.get(self.pos).cloned().ok_or(ParseExprError {
            pos: self.here(),
            msg: "unexpected end of expression".into(),
        })?;
        self.pos += 1;
        match tok.kind {
            TokKind::Num(v) => Ok(Expr::Const(v)),
            TokKind::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            TokKind::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::Var(Var::X)),
                "y" => Ok(Expr::Var(Var::Y)),
                "z" => Ok(Expr::Var(Var::Z)),
                "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                "atan2" => {
                    self.expect('(')?;
                    let a = self.expr()?;
                    self.expect(',')?;
                    let b = self.expr()?;
                    self.expect(')')?;
                    Ok(Expr::Atan2(Box::new(a), Box::new(b)))
                }
                other => {
                    let func = match other {
                        "cos" => Func::Cos,
                        "sin" => Func::Sin,
                        "abs" => Func::Abs,
                        "sqrt" => Func::Sqrt,
                        "exp" => Func::Exp,
                        "log" | "ln" => Func::Log,
                        _ => {
                            return Err(ParseExprError {
                                pos: tok.pos,
                                msg: format!("unknown identifier '{other}'"),
                            })
                        }
                    };
                    self.expect('(')?;
                    let a = self.expr()?;
                    self.expect(')')?;
                    Ok(Expr::Call(func, Box::new(a)))
                }
            },
            TokKind::Op(c) => Err(ParseExprError {
                pos: tok.pos,
                msg: format!("unexpected '{c}'"),
            }),
        }
    }
}
