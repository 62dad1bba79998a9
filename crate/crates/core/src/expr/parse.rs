//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' exponent)?
//! exponent:= '-'? INT | '(' '-'? INT ')'
//! primary := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
//! ```

use super::{Func, Node, NodeKind};
use crate::error::{Error, Result};

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

pub(super) fn parse(src: &str) -> Result<Node> {
    let mut p = Parser {
        src,
        bytes: src.as_bytes(),
        pos: 0,
    };
    let node = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok(node)
}

impl<'a> Parser<'a> {
    fn error(&self, expected: &[&str]) -> Error {
        Error::Syntax {
            offset: self.pos,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => NodeKind::Add as fn(Box<Node>, Box<Node>) -> NodeKind,
                Some(b'-') => NodeKind::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            let span = (lhs.span.0, rhs.span.1);
            lhs = Node::new(op(Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => NodeKind::Mul as fn(Box<Node>, Box<Node>) -> NodeKind,
                Some(b'/') => NodeKind::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            let span = (lhs.span.0, rhs.span.1);
            lhs = Node::new(op(Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peek() == Some(b'-') {
            let start = self.pos;
            self.pos += 1;
            let inner = self.unary()?;
            let span = (start, inner.span.1);
            return Ok(Node::new(NodeKind::Neg(Box::new(inner)), span));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let paren = self.eat(b'(');
        let neg = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error(&["integer exponent"]));
        }
        let mut n: i32 = self.src[start..self.pos].parse().map_err(|_| Error::Syntax {
            offset: start,
            expected: vec!["integer exponent within i32 range".into()],
        })?;
        if self.bytes.get(self.pos) == Some(&b'.') {
            return Err(self.error(&["integer exponent"]));
        }
        if neg {
            n = -n;
        }
        if paren && !self.eat(b')') {
            return Err(self.error(&["')'"]));
        }
        let span = (base.span.0, self.pos);
        Ok(Node::new(NodeKind::Pow(Box::new(base), n), span))
    }

    fn primary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error(&["')'"]));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            _ => Err(self.error(&["number", "name", "'('", "'-'"])),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.bytes.len() && p.bytes[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            return Err(Error::Syntax {
                offset: start,
                expected: vec!["digit".into()],
            });
        }
        if matches!(self.bytes.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.bytes.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        let value: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            expected: vec!["number".into()],
        })?;
        Ok(Node::new(NodeKind::Num(value), (start, self.pos)))
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if self.peek() == Some(b'(') {
            let func = Func::from_name(name).ok_or_else(|| Error::UnknownFunction {
                name: name.to_string(),
                offset: start,
            })?;
            self.pos += 1;
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error(&["')'"]));
            }
            return Ok(Node::new(NodeKind::Call(func, Box::new(arg)), (start, self.pos)));
        }
        let end = start + name.len();
        if name == "pi" {
            return Ok(Node::new(NodeKind::Num(std::f64::consts::PI), (start, end)));
        }
        Ok(Node::new(NodeKind::Var(name.to_string()), (start, end)))
    }
}
