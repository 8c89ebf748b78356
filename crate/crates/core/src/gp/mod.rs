//! Expression trees over word vectors.
//!
//! A tree is stored as a flat prefix (Polish) sequence of [`Node`]s, so every
//! subtree occupies a contiguous range starting at its root. Terminals refer to
//! one of the `k` input word vectors; internal nodes are component-wise
//! operators whose result is normalized to unit length.

mod expr;
pub(crate) mod init;

pub use expr::{parse_expression, to_expression};
pub use init::{random_tree, InitMethod};

use std::fmt;

use crate::embedding::normalize_in_place;
use crate::{Error, Result, Scalar};

/// Denominator magnitude below which protected division returns the numerator.
pub const PROTECTED_DIV_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    /// Protected division.
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Square,
    /// Sign-preserving square root, `sign(x) * sqrt(|x|)`.
    Sqrt,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 4] = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div];

    #[inline]
    pub fn scalar<T: Scalar>(self, a: T, b: T) -> T {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => {
                if b.abs() < T::of(PROTECTED_DIV_EPS) {
                    a
                } else {
                    a / b
                }
            }
        }
    }

    /// Component-wise application followed by unit normalization. A zero
    /// result is returned as is.
    pub fn apply<T: Scalar>(self, u: &[T], v: &[T]) -> Vec<T> {
        assert_eq!(u.len(), v.len(), "operands must share a dimension");
        let mut out: Vec<T> = u.iter().zip(v).map(|(&a, &b)| self.scalar(a, b)).collect();
        unit_or_zero(&mut out);
        out
    }

    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 2] = [UnaryOp::Square, UnaryOp::Sqrt];

    #[inline]
    pub fn scalar<T: Scalar>(self, x: T) -> T {
        match self {
            UnaryOp::Square => x * x,
            UnaryOp::Sqrt => {
                let r = x.abs().sqrt();
                if x < T::zero() {
                    -r
                } else {
                    r
                }
            }
        }
    }

    pub fn apply<T: Scalar>(self, u: &[T]) -> Vec<T> {
        let mut out: Vec<T> = u.iter().map(|&x| self.scalar(x)).collect();
        unit_or_zero(&mut out);
        out
    }
}

/// Normalizes `v` to unit length; an all-zero vector stays zero.
///
/// The vector is first rescaled by its largest magnitude so that tiny but
/// non-zero results cannot underflow to a zero norm.
fn unit_or_zero<T: Scalar>(v: &mut [T]) {
    let max = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if max == T::zero() {
        for x in v.iter_mut() {
            *x = T::zero();
        }
        return;
    }
    for x in v.iter_mut() {
        *x = *x / max;
    }
    normalize_in_place(v);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Terminal(u8),
    Binary(BinaryOp),
    Unary(UnaryOp),
}

impl Node {
    pub fn arity(self) -> usize {
        match self {
            Node::Terminal(_) => 0,
            Node::Unary(_) => 1,
            Node::Binary(_) => 2,
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Node::Terminal(_))
    }
}

/// A well-formed GP expression tree in prefix order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GpTree {
    nodes: Vec<Node>,
}

impl GpTree {
    pub fn terminal(slot: u8) -> Self {
        Self { nodes: vec![Node::Terminal(slot)] }
    }

    pub fn unary(op: UnaryOp, child: GpTree) -> Self {
        let mut nodes = Vec::with_capacity(child.len() + 1);
        nodes.push(Node::Unary(op));
        nodes.extend(child.nodes);
        Self { nodes }
    }

    pub fn binary(op: BinaryOp, left: GpTree, right: GpTree) -> Self {
        let mut nodes = Vec::with_capacity(left.len() + right.len() + 1);
        nodes.push(Node::Binary(op));
        nodes.extend(left.nodes);
        nodes.extend(right.nodes);
        Self { nodes }
    }

    /// Validates arity consistency of a prefix sequence.
    pub fn from_prefix(nodes: Vec<Node>) -> Result<Self> {
        let mut open = 1usize;
        for (i, n) in nodes.iter().enumerate() {
            if open == 0 {
                return Err(Error::InvalidParameter(format!("trailing node at prefix position {i}")));
            }
            open = open - 1 + n.arity();
        }
        if open != 0 {
            return Err(Error::InvalidParameter(format!("prefix sequence is missing {open} operand(s)")));
        }
        Ok(Self { nodes })
    }

    pub(crate) fn from_prefix_unchecked(nodes: Vec<Node>) -> Self {
        debug_assert!(Self::from_prefix(nodes.clone()).is_ok());
        Self { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> Node {
        self.nodes[0]
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        self.node_depths().into_iter().max().unwrap_or(0)
    }

    /// Depth of every node, aligned with [`nodes`](Self::nodes).
    pub fn node_depths(&self) -> Vec<usize> {
        let mut depths = Vec::with_capacity(self.nodes.len());
        // remaining child slots of each open ancestor
        let mut stack: Vec<usize> = Vec::new();
        for n in &self.nodes {
            depths.push(stack.len());
            if let Some(top) = stack.last_mut() {
                *top -= 1;
            }
            if n.arity() > 0 {
                stack.push(n.arity());
            } else {
                while stack.last() == Some(&0) {
                    stack.pop();
                }
            }
        }
        depths
    }

    /// One past the last prefix index of the subtree rooted at `i`.
    pub fn subtree_end(&self, i: usize) -> usize {
        let mut open = 1usize;
        let mut j = i;
        while open > 0 {
            open = open - 1 + self.nodes[j].arity();
            j += 1;
        }
        j
    }

    pub fn subtree(&self, i: usize) -> GpTree {
        GpTree { nodes: self.nodes[i..self.subtree_end(i)].to_vec() }
    }

    /// Prefix indices of the children of node `i`.
    pub fn children(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2);
        let mut c = i + 1;
        for _ in 0..self.nodes[i].arity() {
            out.push(c);
            c = self.subtree_end(c);
        }
        out
    }

    /// Copy of `self` with the subtree at `i` replaced by `replacement`.
    pub fn replace_subtree(&self, i: usize, replacement: &GpTree) -> GpTree {
        let end = self.subtree_end(i);
        let mut nodes = Vec::with_capacity(self.nodes.len() - (end - i) + replacement.len());
        nodes.extend_from_slice(&self.nodes[..i]);
        nodes.extend_from_slice(&replacement.nodes);
        nodes.extend_from_slice(&self.nodes[end..]);
        GpTree { nodes }
    }

    /// Copy of `self` with the single node at `i` swapped for `node` of equal arity.
    pub fn with_node(&self, i: usize, node: Node) -> GpTree {
        assert_eq!(self.nodes[i].arity(), node.arity(), "node swap must preserve arity");
        let mut nodes = self.nodes.clone();
        nodes[i] = node;
        GpTree { nodes }
    }

    /// Highest terminal slot referenced, if any.
    pub fn max_slot(&self) -> Option<u8> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Terminal(s) => Some(*s),
                _ => None,
            })
            .max()
    }

    pub fn to_expression(&self) -> String {
        to_expression(self)
    }
}

impl fmt::Display for GpTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&to_expression(self))
    }
}

impl fmt::Debug for GpTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GpTree({})", to_expression(self))
    }
}

/// Stack machine that evaluates trees without per-node allocation.
#[derive(Clone, Debug, Default)]
pub struct Evaluator<T> {
    stack: Vec<T>,
}

impl<T: Scalar> Evaluator<T> {
    pub fn new() -> Self {
        Self { stack: Vec::new() }
    }

    /// Evaluates `tree` on the given input vectors and returns the output,
    /// which is either a unit vector or the zero vector.
    ///
    /// Panics if a terminal refers to a missing input or inputs differ in length.
    pub fn evaluate(&mut self, tree: &GpTree, inputs: &[&[T]]) -> &[T] {
        let dim = inputs.first().map_or(0, |v| v.len());
        let need = tree.size() * dim;
        if self.stack.len() < need {
            self.stack.resize(need, T::zero());
        }
        let mut sp = 0usize;
        for node in tree.nodes.iter().rev() {
            match *node {
                Node::Terminal(slot) => {
                    let input = inputs[slot as usize];
                    assert_eq!(input.len(), dim, "input vectors must share a dimension");
                    self.stack[sp * dim..(sp + 1) * dim].copy_from_slice(input);
                    sp += 1;
                }
                Node::Unary(op) => {
                    let top = &mut self.stack[(sp - 1) * dim..sp * dim];
                    for x in top.iter_mut() {
                        *x = op.scalar(*x);
                    }
                    unit_or_zero(top);
                }
                Node::Binary(op) => {
                    // the left operand was pushed last and sits on top
                    let (below, top) = self.stack.split_at_mut((sp - 1) * dim);
                    let left = &top[..dim];
                    let right = &mut below[(sp - 2) * dim..];
                    for (r, &l) in right.iter_mut().zip(left) {
                        *r = op.scalar(l, *r);
                    }
                    unit_or_zero(right);
                    sp -= 1;
                }
            }
        }
        debug_assert_eq!(sp, 1);
        &self.stack[..dim]
    }
}

/// Convenience wrapper around [`Evaluator::evaluate`] that allocates.
pub fn evaluate<T: Scalar>(tree: &GpTree, inputs: &[&[T]]) -> Vec<T> {
    Evaluator::new().evaluate(tree, inputs).to_vec()
}
