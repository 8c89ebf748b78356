//! Infix printing and parsing of GP trees.
//!
//! Grammar (whitespace is ignored):
//!
//! ```text
//! top     := inner EOF
//! inner   := postfix (binop postfix)?
//! postfix := primary ("^2")*
//! primary := terminal | "sqrt(" inner ")" | "(" inner ")"
//! terminal:= "w" ["_"] digits
//! binop   := "+" | "-" | "*" | "/"
//! ```
//!
//! The printer fully parenthesizes binary nodes, so `parse_expression` inverts
//! `to_expression` exactly. The parser also accepts the typeset forms
//! `−`, `·`, `×`, `÷`, `√(..)` and `²`.

use super::{BinaryOp, GpTree, Node, UnaryOp};
use crate::{Error, Result};

pub fn to_expression(tree: &GpTree) -> String {
    let mut out = String::with_capacity(tree.size() * 4);
    write_node(tree, 0, &mut out);
    out
}

fn write_node(tree: &GpTree, i: usize, out: &mut String) {
    match tree.nodes()[i] {
        Node::Terminal(slot) => {
            out.push('w');
            out.push_str(&slot.to_string());
        }
        Node::Binary(_) => {
            out.push('(');
            write_bare_binary(tree, i, out);
            out.push(')');
        }
        Node::Unary(UnaryOp::Square) => {
            write_node(tree, i + 1, out);
            out.push_str("^2");
        }
        Node::Unary(UnaryOp::Sqrt) => {
            out.push_str("sqrt(");
            if matches!(tree.nodes()[i + 1], Node::Binary(_)) {
                write_bare_binary(tree, i + 1, out);
            } else {
                write_node(tree, i + 1, out);
            }
            out.push(')');
        }
    }
}

fn write_bare_binary(tree: &GpTree, i: usize, out: &mut String) {
    let Node::Binary(op) = tree.nodes()[i] else { unreachable!() };
    let right = tree.subtree_end(i + 1);
    write_node(tree, i + 1, out);
    out.push(op.symbol());
    write_node(tree, right, out);
}

/// Parses an expression whose terminals must be below `k`.
pub fn parse_expression(s: &str, k: usize) -> Result<GpTree> {
    let mut p = Parser { chars: s.chars().collect(), pos: 0, k };
    let nodes = p.inner()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error(format!("unexpected {:?}", p.chars[p.pos])));
    }
    Ok(GpTree::from_prefix_unchecked(nodes))
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    k: usize,
}

impl Parser {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse { position: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat_str(&mut self, s: &str) -> bool {
        self.skip_ws();
        let n = s.chars().count();
        if self.pos + n <= self.chars.len() && self.chars[self.pos..self.pos + n].iter().copied().eq(s.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            Some(x) => Err(self.error(format!("expected {c:?}, found {x:?}"))),
            None => Err(self.error(format!("expected {c:?}, found end of input"))),
        }
    }

    fn binop(&mut self) -> Option<BinaryOp> {
        let op = match self.peek()? {
            '+' => BinaryOp::Add,
            '-' | '−' => BinaryOp::Sub,
            '*' | '·' | '×' => BinaryOp::Mul,
            '/' | '÷' => BinaryOp::Div,
            _ => return None,
        };
        self.pos += 1;
        Some(op)
    }

    fn inner(&mut self) -> Result<Vec<Node>> {
        let left = self.postfix()?;
        match self.binop() {
            None => Ok(left),
            Some(op) => {
                let right = self.postfix()?;
                let mut nodes = Vec::with_capacity(1 + left.len() + right.len());
                nodes.push(Node::Binary(op));
                nodes.extend(left);
                nodes.extend(right);
                Ok(nodes)
            }
        }
    }

    fn postfix(&mut self) -> Result<Vec<Node>> {
        let mut nodes = self.primary()?;
        loop {
            if self.eat_str("^2") || self.eat_str("²") {
                nodes.insert(0, Node::Unary(UnaryOp::Square));
            } else {
                return Ok(nodes);
            }
        }
    }

    fn primary(&mut self) -> Result<Vec<Node>> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let nodes = self.inner()?;
                self.expect(')')?;
                Ok(nodes)
            }
            Some('w') => self.terminal(),
            Some(_) if self.eat_str("sqrt(") || self.eat_str("√(") => {
                let mut nodes = vec![Node::Unary(UnaryOp::Sqrt)];
                nodes.extend(self.inner()?);
                self.expect(')')?;
                Ok(nodes)
            }
            Some(c) => Err(self.error(format!("unexpected {c:?}"))),
        }
    }

    fn terminal(&mut self) -> Result<Vec<Node>> {
        let start = self.pos;
        self.pos += 1;
        if self.chars.get(self.pos) == Some(&'_') {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if digits_start == self.pos {
            return Err(self.error("expected terminal index after 'w'"));
        }
        let digits: String = self.chars[digits_start..self.pos].iter().collect();
        let slot: usize = digits.parse().map_err(|_| self.error("terminal index too large"))?;
        if slot >= self.k || slot > u8::MAX as usize {
            return Err(Error::Parse {
                position: start,
                message: format!("terminal w{slot} out of range for {} inputs", self.k),
            });
        }
        Ok(vec![Node::Terminal(slot as u8)])
    }
}
