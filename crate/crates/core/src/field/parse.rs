//! Recursive-descent parser for scalar field expressions.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' ['-'] integer)*
//! atom   := number | 'pi' | 'x' | 'y' | 'z'
//!         | ('sin' | 'cos' | 'exp' | 'neg') '(' expr ')'
//!         | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`. Function
//! application requires parentheses. Errors carry the byte offset at which
//! parsing stopped and the set of tokens that would have been accepted there.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryFn {
    Sin,
    Cos,
    Exp,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldExpr {
    Number(f64),
    Pi,
    Var(Var),
    Unary(UnaryFn, Box<FieldExpr>),
    Binary(BinOp, Box<FieldExpr>, Box<FieldExpr>),
    Pow(Box<FieldExpr>, i32),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParseError {
    Syntax {
        offset: usize,
        expected: Vec<&'static str>,
        found: String,
    },
    UnknownIdentifier {
        offset: usize,
        name: String,
    },
    BadNumber {
        offset: usize,
        text: String,
    },
    ExponentOutOfRange {
        offset: usize,
        text: String,
    },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax {
                offset,
                expected,
                found,
            } => write!(
                f,
                "syntax error at byte {offset}: found {found}, expected {}",
                expected.join(" | ")
            ),
            ParseError::UnknownIdentifier { offset, name } => {
                write!(f, "unknown identifier `{name}` at byte {offset}")
            }
            ParseError::BadNumber { offset, text } => {
                write!(f, "malformed number `{text}` at byte {offset}")
            }
            ParseError::ExponentOutOfRange { offset, text } => {
                write!(f, "exponent `{text}` at byte {offset} does not fit in i32")
            }
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
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

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::End, start));
        }
        let c = self.src[self.pos];
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            self.pos += 1;
            return Ok((t, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
            {
                self.pos += 1;
            }
            // Optional exponent part: e or E, optional sign, digits.
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
                let mut probe = self.pos + 1;
                if probe < self.src.len() && matches!(self.src[probe], b'+' | b'-') {
                    probe += 1;
                }
                if probe < self.src.len() && self.src[probe].is_ascii_digit() {
                    self.pos = probe;
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                }
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok((Tok::Num(v), start)),
                _ => Err(ParseError::BadNumber {
                    offset: start,
                    text: text.to_string(),
                }),
            };
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return Ok((Tok::Ident(text.to_string()), start));
        }
        Err(ParseError::Syntax {
            offset: start,
            expected: vec!["number", "identifier", "operator", "`(`", "`)`"],
            found: format!("`{}`", c as char),
        })
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.at]
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err_here(&self, expected: Vec<&'static str>) -> ParseError {
        let (tok, off) = self.peek();
        ParseError::Syntax {
            offset: *off,
            expected,
            found: tok.describe(),
        }
    }

    fn expr(&mut self) -> Result<FieldExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().0 {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = FieldExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<FieldExpr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().0 {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = FieldExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<FieldExpr, ParseError> {
        if matches!(self.peek().0, Tok::Minus) {
            self.bump();
            let inner = self.unary()?;
            return Ok(FieldExpr::Unary(UnaryFn::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<FieldExpr, ParseError> {
        let mut base = self.atom()?;
        while matches!(self.peek().0, Tok::Caret) {
            self.bump();
            let neg = if matches!(self.peek().0, Tok::Minus) {
                self.bump();
                true
            } else {
                false
            };
            let (tok, off) = self.bump();
            let n = match tok {
                Tok::Num(v) => {
                    if v.fract() != 0.0 {
                        return Err(ParseError::Syntax {
                            offset: off,
                            expected: vec!["integer exponent"],
                            found: format!("number `{v}`"),
                        });
                    }
                    if v.abs() > i32::MAX as f64 {
                        return Err(ParseError::ExponentOutOfRange {
                            offset: off,
                            text: format!("{v}"),
                        });
                    }
                    v as i32
                }
                other => {
                    return Err(ParseError::Syntax {
                        offset: off,
                        expected: vec!["integer exponent"],
                        found: other.describe(),
                    })
                }
            };
            base = FieldExpr::Pow(Box::new(base), if neg { -n } else { n });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<FieldExpr, ParseError> {
        match self.peek().0.clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(FieldExpr::Number(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if !matches!(self.peek().0, Tok::RParen) {
                    return Err(self.err_here(vec!["`)`"]));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                let (_, off) = self.bump();
                match name.as_str() {
                    "x" => Ok(FieldExpr::Var(Var::X)),
                    "y" => Ok(FieldExpr::Var(Var::Y)),
                    "z" => Ok(FieldExpr::Var(Var::Z)),
                    "pi" => Ok(FieldExpr::Pi),
                    "sin" | "cos" | "exp" | "neg" => {
                        let func = match name.as_str() {
                            "sin" => UnaryFn::Sin,
                            "cos" => UnaryFn::Cos,
                            "exp" => UnaryFn::Exp,
                            _ => UnaryFn::Neg,
                        };
                        if !matches!(self.peek().0, Tok::LParen) {
                            return Err(self.err_here(vec!["`(`"]));
                        }
                        self.bump();
                        let arg = self.expr()?;
                        if !matches!(self.peek().0, Tok::RParen) {
                            return Err(self.err_here(vec!["`)`"]));
                        }
                        self.bump();
                        Ok(FieldExpr::Unary(func, Box::new(arg)))
                    }
                    _ => Err(ParseError::UnknownIdentifier { offset: off, name }),
                }
            }
            _ => Err(self.err_here(vec!["number", "identifier", "`(`", "`-`"])),
        }
    }
}

pub fn parse(src: &str) -> Result<FieldExpr, ParseError> {
    let mut lx = Lexer::new(src);
    let mut toks = Vec::new();
    loop {
        let (t, off) = lx.next()?;
        let done = t == Tok::End;
        toks.push((t, off));
        if done {
            break;
        }
    }
    let mut p = Parser { toks, at: 0 };
    let e = p.expr()?;
    if !matches!(p.peek().0, Tok::End) {
        return Err(p.err_here(vec!["operator", "end of input"]));
    }
    Ok(e)
}

fn precedence(e: &FieldExpr) -> u8 {
    match e {
        FieldExpr::Binary(BinOp::Add | BinOp::Sub, _, _) => 1,
        FieldExpr::Binary(BinOp::Mul | BinOp::Div, _, _) => 2,
        FieldExpr::Unary(UnaryFn::Neg, _) => 3,
        FieldExpr::Pow(_, _) => 4,
        _ => 5,
    }
}

fn print_into(e: &FieldExpr, out: &mut String) {
    match e {
        FieldExpr::Number(v) => {
            out.push_str(&format!("{v}"));
        }
        FieldExpr::Pi => out.push_str("pi"),
        FieldExpr::Var(Var::X) => out.push('x'),
        FieldExpr::Var(Var::Y) => out.push('y'),
        FieldExpr::Var(Var::Z) => out.push('z'),
        FieldExpr::Unary(UnaryFn::Neg, inner) => {
            out.push('-');
            // The parser reads `-` before `^` as negating the whole power,
            // so only strictly looser-binding children need parentheses.
            if precedence(inner) < 3 {
                out.push('(');
                print_into(inner, out);
                out.push(')');
            } else {
                print_into(inner, out);
            }
        }
        FieldExpr::Unary(func, inner) => {
            out.push_str(match func {
                UnaryFn::Sin => "sin",
                UnaryFn::Cos => "cos",
                UnaryFn::Exp => "exp",
                UnaryFn::Neg => unreachable!(),
            });
            out.push('(');
            print_into(inner, out);
            out.push(')');
        }
        FieldExpr::Binary(op, l, r) => {
            let my = precedence(e);
            if precedence(l) < my {
                out.push('(');
                print_into(l, out);
                out.push(')');
            } else {
                print_into(l, out);
            }
            out.push_str(match op {
                BinOp::Add => " + ",
                BinOp::Sub => " - ",
                BinOp::Mul => "*",
                BinOp::Div => "/",
            });
            // -, / are left-associative: equal precedence on the right
            // must be parenthesized to survive a round trip.
            let right_needs = match op {
                BinOp::Add | BinOp::Mul => precedence(r) < my,
                BinOp::Sub | BinOp::Div => precedence(r) <= my,
            };
            if right_needs {
                out.push('(');
                print_into(r, out);
                out.push(')');
            } else {
                print_into(r, out);
            }
        }
        FieldExpr::Pow(base, n) => {
            // A negative literal prints with a leading minus, which the
            // parser reads as looser-binding negation: (-2)^2 != -2^2.
            let negative_literal =
                matches!(**base, FieldExpr::Number(v) if v.is_sign_negative());
            if precedence(base) < 5 || negative_literal {
                out.push('(');
                print_into(base, out);
                out.push(')');
            } else {
                print_into(base, out);
            }
            out.push('^');
            out.push_str(&format!("{n}"));
        }
    }
}

/// Render back to source. `parse(print(e))` reproduces `e` exactly.
pub fn print(e: &FieldExpr) -> String {
    let mut s = String::new();
    print_into(e, &mut s);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(src: &str) -> FieldExpr {
        let e = parse(src).unwrap();
        let printed = print(&e);
        let e2 = parse(&printed).unwrap_or_else(|err| {
            panic!("printed form `{printed}` failed to re-parse: {err}");
        });
        assert_eq!(e, e2, "round trip changed `{src}` -> `{printed}`");
        e
    }

    #[test]
    fn precedence_shape() {
        // -x^2 negates the square
        let e = roundtrip("-x^2");
        assert_eq!(
            e,
            FieldExpr::Unary(
                UnaryFn::Neg,
                Box::new(FieldExpr::Pow(Box::new(FieldExpr::Var(Var::X)), 2))
            )
        );
        // unary minus binds tighter than *
        let e = roundtrip("-x*y");
        match e {
            FieldExpr::Binary(BinOp::Mul, l, _) => {
                assert!(matches!(*l, FieldExpr::Unary(UnaryFn::Neg, _)))
            }
            other => panic!("unexpected shape {other:?}"),
        }
    }

    #[test]
    fn subtraction_associates_left() {
        let e = roundtrip("x - y - z");
        match e {
            FieldExpr::Binary(BinOp::Sub, l, r) => {
                assert!(matches!(*l, FieldExpr::Binary(BinOp::Sub, _, _)));
                assert_eq!(*r, FieldExpr::Var(Var::Z));
            }
            other => panic!("unexpected shape {other:?}"),
        }
        roundtrip("x - (y - z)");
    }

    #[test]
    fn dangling_operator_offset() {
        let err = parse("x +").unwrap_err();
        match err {
            ParseError::Syntax { offset, .. } => assert_eq!(offset, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_offset() {
        let err = parse("2*foo + 1").unwrap_err();
        match err {
            ParseError::UnknownIdentifier { offset, name } => {
                assert_eq!(offset, 2);
                assert_eq!(name, "foo");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn function_requires_parentheses() {
        let err = parse("sin x").unwrap_err();
        match err {
            ParseError::Syntax { expected, .. } => assert_eq!(expected, vec!["`(`"]),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn negative_exponent_and_scientific() {
        roundtrip("x^-2");
        roundtrip("1.5e-3*y");
        let e = parse("2^3").unwrap();
        assert_eq!(e, FieldExpr::Pow(Box::new(FieldExpr::Number(2.0)), 3));
    }

    #[test]
    fn fractional_exponent_rejected() {
        assert!(matches!(
            parse("x^1.5").unwrap_err(),
            ParseError::Syntax { .. }
        ));
    }

    #[test]
    fn pi_and_functions() {
        let e = roundtrip("sin(2*pi*y)");
        assert!(matches!(e, FieldExpr::Unary(UnaryFn::Sin, _)));
        roundtrip("neg(cos(x) + exp(z))");
        roundtrip("2*x*z - x^2*y");
    }
}
