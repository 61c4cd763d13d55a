//! Arithmetic over the sample coordinates `x` and `y`.
//!
//! Grammar:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | 'inf' | 'x' | 'y' | '(' expr ')' | name '(' expr (',' expr)* ')'
//! ```
//!
//! `min`, `max` (any arity ≥ 1) and `abs` are always available. With the
//! float profile, `exp`, `ln`, `sqrt`, `sin`, `cos` and `pow` are added;
//! their results depend on the platform libm, hence opt-in.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
    Abs,
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Pow,
}

impl Func {
    fn lookup(name: &str, float_profile: bool) -> Option<Func> {
        let f = match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "abs" => Func::Abs,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "pow" => Func::Pow,
            _ => return None,
        };
        (float_profile || matches!(f, Func::Min | Func::Max | Func::Abs)).then_some(f)
    }

    fn arity(self) -> Option<usize> {
        match self {
            Func::Min | Func::Max => None,
            Func::Pow => Some(2),
            _ => Some(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at character {}: {}", self.pos + 1, self.msg)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            if i < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j].1, '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let end = chars.get(i).map_or(src.len(), |c| c.0);
            let text = &src[pos..end];
            let v: f64 = text.parse().map_err(|_| ParseError {
                pos: chars[start].0,
                msg: format!("bad number {text:?}"),
            })?;
            out.push((pos, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let end = chars.get(i).map_or(src.len(), |c| c.0);
            out.push((pos, Tok::Ident(src[pos..end].to_string())));
        } else if "+-*/(),".contains(c) {
            out.push((pos, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(ParseError {
                pos,
                msg: format!("unexpected character {c:?}"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
    float_profile: bool,
    uses_inf: bool,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.1)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.0)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                Op::Add
            } else if self.eat('-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                Op::Mul
            } else if self.eat('/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.at += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Sym('(')) => {
                self.at += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                match name.as_str() {
                    "x" => return Ok(Expr::X),
                    "y" => return Ok(Expr::Y),
                    "inf" => {
                        self.uses_inf = true;
                        return Ok(Expr::Num(f64::INFINITY));
                    }
                    _ => {}
                }
                let Some(func) = Func::lookup(&name, self.float_profile) else {
                    return Err(ParseError {
                        pos,
                        msg: if Func::lookup(&name, true).is_some() {
                            format!("function {name} needs the float profile")
                        } else {
                            format!("unknown name {name:?}")
                        },
                    });
                };
                self.expect('(')?;
                let mut args = vec![self.expr()?];
                while self.eat(',') {
                    args.push(self.expr()?);
                }
                self.expect(')')?;
                if let Some(n) = func.arity() {
                    if args.len() != n {
                        return Err(ParseError {
                            pos,
                            msg: format!("{name} takes {n} argument(s), got {}", args.len()),
                        });
                    }
                }
                Ok(Expr::Call(func, args))
            }
            Some(Tok::Sym(c)) => self.err(format!("unexpected '{c}'")),
            None => self.err("unexpected end of expression"),
        }
    }
}

/// A parsed expression plus whether it may produce infinite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    pub expr: Expr,
    /// True when the source mentions `inf`; only then are infinite
    /// results accepted.
    pub allows_infinite: bool,
}

pub fn compile(src: &str, float_profile: bool) -> Result<Compiled, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: src.len(),
        float_profile,
        uses_inf: false,
    };
    let expr = p.expr()?;
    if p.at != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(Compiled {
        expr,
        allows_infinite: p.uses_inf,
    })
}

impl Expr {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Y => y,
            Expr::Neg(e) => -e.eval(x, y),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, y), b.eval(x, y));
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div => a / b,
                }
            }
            Expr::Call(f, args) => {
                let mut vals = args.iter().map(|a| a.eval(x, y));
                match f {
                    // NaN must not be swallowed by f64::min/max.
                    Func::Min => vals.fold(
                        f64::INFINITY,
                        |m, v| if v.is_nan() || v < m { v } else { m },
                    ),
                    Func::Max => {
                        vals.fold(
                            f64::NEG_INFINITY,
                            |m, v| if v.is_nan() || v > m { v } else { m },
                        )
                    }
                    Func::Abs => vals.next().unwrap().abs(),
                    Func::Exp => vals.next().unwrap().exp(),
                    Func::Ln => vals.next().unwrap().ln(),
                    Func::Sqrt => vals.next().unwrap().sqrt(),
                    Func::Sin => vals.next().unwrap().sin(),
                    Func::Cos => vals.next().unwrap().cos(),
                    Func::Pow => {
                        let a = vals.next().unwrap();
                        a.powf(vals.next().unwrap())
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: f64, y: f64) -> f64 {
        compile(src, false).unwrap().expr.eval(x, y)
    }

    #[test]
    fn precedence_and_unary_minus() {
        assert_eq!(ev("x - y", 0.75, 0.25), 0.5);
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(ev("-x * -y", 2.0, 3.0), 6.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(ev("2 - 3 - 4", 0.0, 0.0), -5.0);
        assert_eq!(ev("1e-3 * 1E3", 0.0, 0.0), 1.0);
    }

    #[test]
    fn functions() {
        assert_eq!(ev("min(x, y, 0.5)", 1.0, 2.0), 0.5);
        assert_eq!(ev("max(x)", 1.0, 2.0), 1.0);
        assert_eq!(ev("abs(x - y)", 1.0, 3.0), 2.0);
        assert!(ev("min(x, 0/0)", 1.0, 0.0).is_nan());
    }

    #[test]
    fn inf_literal_marks_guard() {
        let c = compile("max(x, -inf)", false).unwrap();
        assert!(c.allows_infinite);
        assert_eq!(c.expr.eval(1.0, 0.0), 1.0);
        assert!(!compile("x / y", false).unwrap().allows_infinite);
    }

    #[test]
    fn float_profile_gates_transcendentals() {
        let e = compile("exp(x)", false).unwrap_err();
        assert!(e.msg.contains("float profile"));
        assert_eq!(compile("pow(x, 2)", true).unwrap().expr.eval(3.0, 0.0), 9.0);
        assert!(compile("pow(x)", true).is_err());
    }

    #[test]
    fn parse_errors_carry_positions() {
        let e = compile("x + * y", false).unwrap_err();
        assert_eq!(e.pos, 4);
        assert!(compile("x + z", false).unwrap_err().msg.contains("unknown"));
        assert!(compile("(x", false).is_err());
        assert!(compile("x y", false).unwrap_err().msg.contains("trailing"));
        assert!(compile("x $ y", false).is_err());
        assert!(compile("", false).is_err());
    }
}
