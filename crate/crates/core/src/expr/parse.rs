//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' int)?
//! base   := number | ident | func '(' expr ')' | '(' expr ')' | '-' factor
//! ```
//!
//! Unary minus takes a whole factor, so `-x1^2` is `-(x1^2)`.

use std::fmt;

use thiserror::Error;

use super::{ExprError, Func, Node};

/// Deepest syntax tree the parser will build.
pub const MAX_DEPTH: usize = 512;
/// Deepest nesting of parentheses and unary minus.
pub const MAX_NESTING: usize = 64;
/// Largest exponent magnitude accepted after `^`.
pub const MAX_EXPONENT: i32 = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("parse error at byte {offset}: expected {}, found {found}", expected.join(" | "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Num(f64, &'a str),
    Ident(&'a str),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(_, s) => write!(f, "number `{s}`"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    /// Returns the next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok<'a>, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let Some(&c) = bytes.get(start) else {
            return Ok((Tok::End, start));
        };
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += 1;
            return Ok((tok, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let len = bytes[start..]
                .iter()
                .take_while(|b| b.is_ascii_alphanumeric() || **b == b'_')
                .count();
            self.pos += len;
            return Ok((Tok::Ident(&self.src[start..start + len]), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ParseError {
            offset: start,
            expected: vec!["token".into()],
            found: format!("character {ch:?}"),
        })
    }

    fn number(&mut self, start: usize) -> Result<(Tok<'a>, usize), ParseError> {
        let bytes = self.src.as_bytes();
        let mut end = start;
        let digits = |from: usize| bytes[from..].iter().take_while(|b| b.is_ascii_digit()).count();
        let int_len = digits(end);
        end += int_len;
        let mut frac_len = 0;
        if bytes.get(end) == Some(&b'.') {
            end += 1;
            frac_len = digits(end);
            end += frac_len;
        }
        if int_len + frac_len == 0 {
            return Err(ParseError {
                offset: start,
                expected: vec!["digit".into()],
                found: "`.`".into(),
            });
        }
        if matches!(bytes.get(end), Some(b'e' | b'E')) {
            let mut exp_end = end + 1;
            if matches!(bytes.get(exp_end), Some(b'+' | b'-')) {
                exp_end += 1;
            }
            let exp_digits = digits(exp_end);
            if exp_digits == 0 {
                return Err(ParseError {
                    offset: exp_end,
                    expected: vec!["exponent digits".into()],
                    found: describe_at(self.src, exp_end),
                });
            }
            end = exp_end + exp_digits;
        }
        let text = &self.src[start..end];
        let value: f64 = text.parse().map_err(|_| ParseError {
            offset: start,
            expected: vec!["number".into()],
            found: format!("`{text}`"),
        })?;
        if !value.is_finite() {
            return Err(ParseError {
                offset: start,
                expected: vec!["finite number".into()],
                found: format!("`{text}`"),
            });
        }
        self.pos = end;
        Ok((Tok::Num(value, text), start))
    }
}

fn describe_at(src: &str, offset: usize) -> String {
    match src[offset..].chars().next() {
        Some(c) => format!("{c:?}"),
        None => "end of input".into(),
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok<'a>,
    at: usize,
    n: usize,
    k: usize,
    depth: usize,
}

const OPERAND: &[&str] = &["number", "variable", "function", "`(`", "`-`"];

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ExprError> {
        let (tok, at) = self.lexer.next()?;
        self.tok = tok;
        self.at = at;
        Ok(())
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T, ExprError> {
        Err(ParseError {
            offset: self.at,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.tok.to_string(),
        }
        .into())
    }

    fn enter(&mut self) -> Result<(), ExprError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(ParseError {
                offset: self.at,
                expected: vec![format!("expression nested at most {MAX_NESTING} deep")],
                found: self.tok.to_string(),
            }
            .into());
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<(Node, usize), ExprError> {
        self.enter()?;
        let (mut lhs, mut depth) = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Plus => Node::Add as fn(Box<Node>, Box<Node>) -> Node,
                Tok::Minus => Node::Sub,
                _ => break,
            };
            self.bump()?;
            let (rhs, d) = self.term()?;
            depth = self.grow(depth.max(d))?;
            lhs = op(Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok((lhs, depth))
    }

    fn term(&mut self) -> Result<(Node, usize), ExprError> {
        let (mut lhs, mut depth) = self.factor()?;
        loop {
            let op = match self.tok {
                Tok::Star => Node::Mul as fn(Box<Node>, Box<Node>) -> Node,
                Tok::Slash => Node::Div,
                _ => break,
            };
            self.bump()?;
            let (rhs, d) = self.factor()?;
            depth = self.grow(depth.max(d))?;
            lhs = op(Box::new(lhs), Box::new(rhs));
        }
        Ok((lhs, depth))
    }

    /// Depth of a new node over children of depth `child`.
    fn grow(&self, child: usize) -> Result<usize, ExprError> {
        if child + 1 > MAX_DEPTH {
            return Err(ParseError {
                offset: self.at,
                expected: vec![format!("expression tree at most {MAX_DEPTH} deep")],
                found: self.tok.to_string(),
            }
            .into());
        }
        Ok(child + 1)
    }

    fn factor(&mut self) -> Result<(Node, usize), ExprError> {
        let (base, depth) = self.base()?;
        if self.tok != Tok::Caret {
            return Ok((base, depth));
        }
        self.bump()?;
        let negative = self.tok == Tok::Minus;
        if negative {
            self.bump()?;
        }
        let exponent = match self.tok {
            Tok::Num(_, text) if text.bytes().all(|b| b.is_ascii_digit()) => match text.parse::<i32>() {
                Ok(e) if e <= MAX_EXPONENT => {
                    if negative {
                        -e
                    } else {
                        e
                    }
                }
                _ => {
                    return Err(ParseError {
                        offset: self.at,
                        expected: vec![format!("integer exponent of magnitude <= {MAX_EXPONENT}")],
                        found: self.tok.to_string(),
                    }
                    .into())
                }
            },
            _ => return self.fail(&["integer exponent"]),
        };
        self.bump()?;
        let depth = self.grow(depth)?;
        Ok((Node::Pow(Box::new(base), exponent), depth))
    }

    fn base(&mut self) -> Result<(Node, usize), ExprError> {
        match self.tok.clone() {
            Tok::Num(value, _) => {
                self.bump()?;
                Ok((Node::Num(value), 1))
            }
            Tok::Minus => {
                self.enter()?;
                self.bump()?;
                let (inner, depth) = self.factor()?;
                self.depth -= 1;
                match inner {
                    Node::Num(c) => Ok((Node::Num(-c), depth)),
                    other => {
                        let depth = self.grow(depth)?;
                        Ok((Node::Neg(Box::new(other)), depth))
                    }
                }
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                self.close()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let at = self.at;
                self.bump()?;
                if let Some(func) = Func::from_name(name) {
                    if self.tok != Tok::LParen {
                        return self.fail(&["`(`"]);
                    }
                    self.bump()?;
                    let (arg, depth) = self.expr()?;
                    self.close()?;
                    let depth = self.grow(depth)?;
                    return Ok((Node::Call(func, Box::new(arg)), depth));
                }
                self.variable(name, at).map(|node| (node, 1))
            }
            _ => self.fail(OPERAND),
        }
    }

    fn close(&mut self) -> Result<(), ExprError> {
        if self.tok != Tok::RParen {
            return self.fail(&["`)`", "operator"]);
        }
        self.bump()
    }

    fn variable(&self, name: &str, at: usize) -> Result<Node, ExprError> {
        let unknown = || -> ExprError {
            ParseError {
                offset: at,
                expected: vec!["x<index>".into(), "p<index>".into(), "function name".into()],
                found: format!("identifier `{name}`"),
            }
            .into()
        };
        let (kind, digits) = name.split_at(1);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(unknown());
        }
        let (limit, make): (usize, fn(usize) -> Node) = match kind {
            "x" => (self.n, Node::Var),
            "p" => (self.k, Node::Param),
            _ => return Err(unknown()),
        };
        match digits.parse::<usize>() {
            Ok(i) if i >= 1 && i <= limit => Ok(make(i - 1)),
            _ => Err(ExprError::Dimension {
                offset: at,
                name: name.to_string(),
                limit,
            }),
        }
    }
}

pub(super) fn parse(text: &str, n: usize, k: usize) -> Result<Node, ExprError> {
    let mut parser = Parser {
        lexer: Lexer { src: text, pos: 0 },
        tok: Tok::End,
        at: 0,
        n,
        k,
        depth: 0,
    };
    parser.bump()?;
    let (node, _) = parser.expr()?;
    if parser.tok != Tok::End {
        return parser.fail(&["operator", "end of input"]);
    }
    Ok(node)
}
