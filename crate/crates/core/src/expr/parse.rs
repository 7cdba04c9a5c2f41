//! Recursive-descent parser for the constraint expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right-associative, literal exponent
//! primary := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! A bare numeric literal is folded into a constant when it follows a minus
//! sign: `-2` is `Const(-2)` and `x - 1` is `Add(x, Const(-1))`.

use thiserror::Error;

use super::Expr;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedToken(String),
    UnexpectedEnd,
    InvalidNumber(String),
    UnknownIdentifier(String),
    UnknownFunction(String),
    Arity { function: String, got: usize },
    VariableExponent,
    NonLiteralExponent,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{} at position {position}", describe(.kind))]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
}

fn describe(kind: &ParseErrorKind) -> String {
    match kind {
        ParseErrorKind::UnexpectedChar(c) => format!("unexpected character `{c}`"),
        ParseErrorKind::UnexpectedToken(t) => format!("unexpected `{t}`"),
        ParseErrorKind::UnexpectedEnd => "unexpected end of input".to_string(),
        ParseErrorKind::InvalidNumber(s) => format!("invalid number `{s}`"),
        ParseErrorKind::UnknownIdentifier(s) => format!("unknown identifier `{s}`"),
        ParseErrorKind::UnknownFunction(s) => format!("unknown function `{s}`"),
        ParseErrorKind::Arity { function, got } => {
            format!("function `{function}` takes 1 argument, got {got}")
        }
        ParseErrorKind::VariableExponent => "variable exponent unsupported".to_string(),
        ParseErrorKind::NonLiteralExponent => "exponent must be a numeric literal".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
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
    Comma,
}

impl Tok {
    fn text(&self) -> String {
        match self {
            Tok::Num(v) => format!("{v}"),
            Tok::Ident(s) => s.clone(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Caret => "^".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::Comma => ",".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, start)),
            b'-' => out.push((Tok::Minus, start)),
            b'*' => out.push((Tok::Star, start)),
            b'/' => out.push((Tok::Slash, start)),
            b'^' => out.push((Tok::Caret, start)),
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
            b',' => out.push((Tok::Comma, start)),
            b'0'..=b'9' | b'.' => {
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
                let v: f64 = text.parse().map_err(|_| ParseError {
                    kind: ParseErrorKind::InvalidNumber(text.to_string()),
                    position: start,
                })?;
                if !v.is_finite() {
                    return Err(ParseError {
                        kind: ParseErrorKind::InvalidNumber(text.to_string()),
                        position: start,
                    });
                }
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    kind: ParseErrorKind::UnexpectedChar(ch),
                    position: start,
                });
            }
        }
        i += 1;
    }
    Ok(out)
}

struct Parser<'a, S> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    vars: &'a [S],
}

/// Parse `source` over the variable names `vars` (index = position in `vars`).
pub fn parse<S: AsRef<str>>(source: &str, vars: &[S]) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: source.len(),
        vars,
    };
    let e = p.expr()?;
    if let Some((t, at)) = p.toks.get(p.pos) {
        return Err(ParseError {
            kind: ParseErrorKind::UnexpectedToken(t.text()),
            position: *at,
        });
    }
    Ok(e)
}

impl<S: AsRef<str>> Parser<'_, S> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            position: self.here(),
        }
    }

    fn unexpected(&self) -> ParseError {
        match self.peek() {
            Some(t) => self.err(ParseErrorKind::UnexpectedToken(t.text())),
            None => self.err(ParseErrorKind::UnexpectedEnd),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    /// Parses with `f` and reports whether it consumed exactly one number token.
    fn spanned(
        &mut self,
        f: fn(&mut Self) -> Result<Expr, ParseError>,
    ) -> Result<(Expr, bool), ParseError> {
        let start = self.pos;
        let e = f(self)?;
        let bare = self.pos == start + 1 && matches!(self.toks[start].0, Tok::Num(_));
        Ok((e, bare))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::add(lhs, rhs);
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let (rhs, bare) = self.spanned(Self::term)?;
                    lhs = match rhs {
                        Expr::Const(c) if bare => Expr::add(lhs, Expr::Const(-c)),
                        rhs => Expr::sub(lhs, rhs),
                    };
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::mul(lhs, rhs);
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::div(lhs, rhs);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            let (e, bare) = self.spanned(Self::unary)?;
            return Ok(match e {
                Expr::Const(c) if bare => Expr::Const(-c),
                e => Expr::neg(e),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let at = self.here();
        let exponent = self.unary()?;
        match exponent {
            Expr::Const(p) => Ok(Expr::pow(base, p)),
            e if e.max_var().is_some() => Err(ParseError {
                kind: ParseErrorKind::VariableExponent,
                position: at,
            }),
            _ => Err(ParseError {
                kind: ParseErrorKind::NonLiteralExponent,
                position: at,
            }),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.here();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if self.peek() != Some(&Tok::RParen) {
                        args.push(self.expr()?);
                        while self.peek() == Some(&Tok::Comma) {
                            self.pos += 1;
                            args.push(self.expr()?);
                        }
                    }
                    self.expect(Tok::RParen)?;
                    let build: fn(Expr) -> Expr = match name.as_str() {
                        "exp" => Expr::exp,
                        "log" => Expr::log,
                        "sqrt" => Expr::sqrt,
                        _ => {
                            return Err(ParseError {
                                kind: ParseErrorKind::UnknownFunction(name),
                                position: at,
                            })
                        }
                    };
                    if args.len() != 1 {
                        return Err(ParseError {
                            kind: ParseErrorKind::Arity {
                                function: name,
                                got: args.len(),
                            },
                            position: at,
                        });
                    }
                    return Ok(build(args.pop().expect("one argument")));
                }
                match self.vars.iter().position(|v| v.as_ref() == name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None if matches!(name.as_str(), "exp" | "log" | "sqrt") => Err(ParseError {
                        kind: ParseErrorKind::Arity {
                            function: name,
                            got: 0,
                        },
                        position: at,
                    }),
                    None => Err(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier(name),
                        position: at,
                    }),
                }
            }
            _ => Err(self.unexpected()),
        }
    }
}
