// Grammar:
//   spec   := term (";" term)*
//   term   := factor ("or" factor)*
//   factor := atom ("ensuring" pred)*
//   atom   := "achieve"? pred | "(" spec ")" | "[" spec "]"
//   pred   := ("reach_lo" | "reach_gl") "(" num ("," num)* ")"

use super::{Predicate, Scope, Spec};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct ParseOptions {
    /// Agent-state dimension; targets are checked against it when set.
    pub dim: Option<usize>,
    /// Agent count, needed to accept joint (non-broadcast) global targets.
    pub agents: Option<usize>,
    pub tolerance: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            dim: None,
            agents: None,
            tolerance: Predicate::DEFAULT_TOLERANCE,
        }
    }
}

pub fn parse(text: &str) -> Result<Spec> {
    parse_with(text, &ParseOptions::default())
}

pub fn parse_with(text: &str, opts: &ParseOptions) -> Result<Spec> {
    let tokens = lex(text)?;
    if tokens.is_empty() {
        return Err(Error::EmptySpec);
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        opts,
        end: text.len(),
    };
    let spec = p.spec()?;
    if let Some(t) = p.tokens.get(p.pos) {
        return Err(Error::Syntax {
            pos: t.pos,
            msg: format!("unexpected {:?}", t.kind),
        });
    }
    if let Some(dim) = opts.dim {
        spec.check_dims(dim, opts.agents)?;
    }
    Ok(spec)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
}

#[derive(Debug)]
struct Token {
    kind: Tok,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let kind = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    kind: Tok::Ident(text[start..i].to_string()),
                    pos: start,
                });
                continue;
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                i += 1;
                while i < bytes.len() {
                    let d = bytes[i];
                    let exp_sign = (d == b'-' || d == b'+') && matches!(bytes[i - 1], b'e' | b'E');
                    if d.is_ascii_digit() || d == b'.' || d == b'e' || d == b'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| Error::Syntax {
                    pos: start,
                    msg: format!("bad number `{s}`"),
                })?;
                out.push(Token {
                    kind: Tok::Num(v),
                    pos: start,
                });
                continue;
            }
            other => {
                return Err(Error::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push(Token { kind, pos: start });
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    opts: &'a ParseOptions,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map(|t| t.pos).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            pos: self.here(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {want:?}"))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn spec(&mut self) -> Result<Spec> {
        let mut lhs = self.term()?;
        while self.peek() == Some(&Tok::Semi) {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Spec::seq(lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Spec> {
        let mut lhs = self.factor()?;
        while self.at_keyword("or") {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Spec::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Spec> {
        let mut lhs = self.atom()?;
        while self.at_keyword("ensuring") {
            self.pos += 1;
            let p = self.pred()?;
            if p.is_global() {
                return Err(Error::GlobalEnsuring);
            }
            lhs = Spec::ensuring(lhs, p);
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Spec> {
        match self.peek() {
            Some(Tok::LParen) | Some(Tok::LBracket) => {
                let close = if self.peek() == Some(&Tok::LParen) {
                    Tok::RParen
                } else {
                    Tok::RBracket
                };
                self.pos += 1;
                let inner = self.spec()?;
                self.expect(close)?;
                Ok(inner)
            }
            Some(Tok::Ident(s)) if s == "achieve" => {
                self.pos += 1;
                // `achieve(reach_lo(..))` and `achieve reach_lo(..)` are both accepted
                let wrapped = self.peek() == Some(&Tok::LParen);
                if wrapped {
                    self.pos += 1;
                }
                let p = self.pred()?;
                if wrapped {
                    self.expect(Tok::RParen)?;
                }
                Ok(Spec::Achieve(p))
            }
            Some(Tok::Ident(_)) => Ok(Spec::Achieve(self.pred()?)),
            Some(t) => {
                let t = t.clone();
                self.err(format!("unexpected {t:?}"))
            }
            None => self.err("unexpected end of input"),
        }
    }

    fn pred(&mut self) -> Result<Predicate> {
        let scope = match self.peek() {
            Some(Tok::Ident(s)) if s == "reach_lo" => Scope::Local,
            Some(Tok::Ident(s)) if s == "reach_gl" => Scope::Global,
            _ => return self.err("expected `reach_lo` or `reach_gl`"),
        };
        self.pos += 1;
        self.expect(Tok::LParen)?;
        let mut target = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Num(v)) => {
                    target.push(*v);
                    self.pos += 1;
                }
                _ => return self.err("expected a number"),
            }
            match self.peek() {
                Some(Tok::Comma) => self.pos += 1,
                Some(Tok::RParen) => {
                    self.pos += 1;
                    break;
                }
                _ => return self.err("expected `,` or `)`"),
            }
        }
        Ok(Predicate {
            scope,
            target,
            tolerance: self.opts.tolerance,
        })
    }
}
