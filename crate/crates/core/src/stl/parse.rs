//! Parser for the textual formula syntax used in mission configs.
//!
//! ```text
//! formula := until ( "->" formula )?
//! until   := or ( "U" interval? until )?
//! or      := and ( "|" and )*
//! and     := unary ( "&" unary )*
//! unary   := "!" unary | "F" interval? unary | "G" interval? unary | atom
//! atom    := "true" | "false" | "(" formula ")" | name ( ">=" | "<=" ) number
//! interval:= "[" number "," ( number | "inf" ) "]"
//! ```
//!
//! Omitted intervals default to `[0, inf]`.

use super::{Formula, Interval, StlError};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    Ge,
    Le,
    Not,
    And,
    Or,
    Implies,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, StlError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '(' => out.push((start, Token::LParen)),
            ')' => out.push((start, Token::RParen)),
            '[' => out.push((start, Token::LBracket)),
            ']' => out.push((start, Token::RBracket)),
            ',' => out.push((start, Token::Comma)),
            '&' => out.push((start, Token::And)),
            '|' => out.push((start, Token::Or)),
            '!' => out.push((start, Token::Not)),
            '>' | '<' => {
                if bytes.get(i + 1) != Some(&b'=') {
                    return Err(StlError::Parse {
                        position: start,
                        message: format!("expected `{c}=`"),
                    });
                }
                out.push((start, if c == '>' { Token::Ge } else { Token::Le }));
                i += 1;
            }
            '-' if bytes.get(i + 1) == Some(&b'>') => {
                out.push((start, Token::Implies));
                i += 1;
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                i += 1;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    let exp_sign = (d == '-' || d == '+') && matches!(bytes[i - 1], b'e' | b'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| StlError::Parse {
                    position: start,
                    message: format!("bad number `{text}`"),
                })?;
                out.push((start, Token::Number(v)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                i += 1;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Token::Ident(src[start..i].to_string())));
                continue;
            }
            other => {
                return Err(StlError::Parse {
                    position: start,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    channels: &'a [&'a str],
    len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.len, |(p, _)| *p)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, StlError> {
        Err(StlError::Parse {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Token) -> Result<(), StlError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {tok:?}"))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token::Ident(s)) if s == kw)
    }

    fn formula(&mut self) -> Result<Formula, StlError> {
        let lhs = self.until()?;
        if self.peek() == Some(&Token::Implies) {
            self.pos += 1;
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, StlError> {
        let lhs = self.or()?;
        if self.is_keyword("U") {
            self.pos += 1;
            let interval = self.opt_interval()?;
            let rhs = self.until()?;
            return Ok(Formula::until(interval, lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Token::Or) {
            self.pos += 1;
            let rhs = self.and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Token::And) {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, StlError> {
        if self.peek() == Some(&Token::Not) {
            self.pos += 1;
            return Ok(Formula::not(self.unary()?));
        }
        if self.is_keyword("F") || self.is_keyword("G") {
            let always = self.is_keyword("G");
            self.pos += 1;
            let interval = self.opt_interval()?;
            let body = self.unary()?;
            return Ok(if always {
                Formula::always(interval, body)
            } else {
                Formula::eventually(interval, body)
            });
        }
        self.atom()
    }

    fn opt_interval(&mut self) -> Result<Interval, StlError> {
        if self.peek() != Some(&Token::LBracket) {
            return Ok(Interval::unbounded());
        }
        self.pos += 1;
        let lower = self.number()?;
        self.expect(Token::Comma)?;
        let upper = if self.is_keyword("inf") {
            self.pos += 1;
            f64::INFINITY
        } else {
            self.number()?
        };
        self.expect(Token::RBracket)?;
        Interval::new(lower, upper)
    }

    fn number(&mut self) -> Result<f64, StlError> {
        match self.peek() {
            Some(Token::Number(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => self.error("expected a number"),
        }
    }

    fn atom(&mut self) -> Result<Formula, StlError> {
        match self.peek().cloned() {
            Some(Token::LParen) => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(Token::RParen)?;
                Ok(f)
            }
            Some(Token::Ident(name)) if name == "true" => {
                self.pos += 1;
                Ok(Formula::True)
            }
            Some(Token::Ident(name)) if name == "false" => {
                self.pos += 1;
                Ok(Formula::falsity())
            }
            Some(Token::Ident(name)) => {
                let channel = match self.channels.iter().position(|c| *c == name) {
                    Some(c) => c,
                    None => return self.error(format!("unknown channel `{name}`")),
                };
                self.pos += 1;
                let op = self.peek().cloned();
                self.pos += 1;
                let threshold = self.number()?;
                match op {
                    Some(Token::Ge) => Ok(Formula::ge(channel, threshold)),
                    Some(Token::Le) => Ok(Formula::le(channel, threshold)),
                    _ => {
                        self.pos -= 2;
                        self.error("expected `>=` or `<=`")
                    }
                }
            }
            _ => self.error("expected a formula"),
        }
    }
}

/// Parse `src`, resolving predicate names against `channels`.
pub fn parse_formula(src: &str, channels: &[&str]) -> Result<Formula, StlError> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        channels,
        len: src.len(),
    };
    let f = p.formula()?;
    if p.pos != p.tokens.len() {
        return p.error("trailing input");
    }
    Ok(f)
}
