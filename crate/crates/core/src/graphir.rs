//! Expression front end: parsing, lowering to a computational graph, and
//! qubit sizing.
//!
//! The grammar is ordinary infix arithmetic over the single variable `x`:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | 'x' | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! There is no power operator; write `x*x`. Binary minus parses to
//! `plus(a, minus(b))` and division to `times(a, reciprocal(b))`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QadError, Result};
use crate::fixedpoint::FixedPointFormat;
use crate::primitives::Primitive;
use crate::registers::ResetMode;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var,
    Lit(f64),
    /// Any of the ten primitives, including `minus` (negation) and
    /// `reciprocal`.
    Unary(Primitive, Box<Expr>),
    Plus(Box<Expr>, Box<Expr>),
    Times(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn unary(p: Primitive, e: Expr) -> Self {
        Expr::Unary(p, Box::new(e))
    }

    pub fn plus(a: Expr, b: Expr) -> Self {
        Expr::Plus(Box::new(a), Box::new(b))
    }

    pub fn times(a: Expr, b: Expr) -> Self {
        Expr::Times(Box::new(a), Box::new(b))
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Var | Expr::Lit(_) => 0,
            Expr::Unary(_, e) => 1 + e.depth(),
            Expr::Plus(a, b) | Expr::Times(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

fn surface_name(p: Primitive) -> &'static str {
    match p {
        Primitive::Arcsin => "asin",
        Primitive::Arctan => "atan",
        Primitive::Reciprocal => "recip",
        p => p.name(),
    }
}

/// Canonical, fully parenthesised rendering that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var => f.write_str("x"),
            Expr::Lit(c) => write!(f, "{c}"),
            Expr::Unary(Primitive::Minus, e) => write!(f, "-{e}"),
            Expr::Unary(p, e) => write!(f, "{}({e})", surface_name(*p)),
            Expr::Plus(a, b) => write!(f, "({a} + {b})"),
            Expr::Times(a, b) => write!(f, "({a} * {b})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

const PRIMARY: &[&str] = &["number", "x", "function", "(", "-"];

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn error(&self, position: usize, expected: &[&str]) -> QadError {
        QadError::Parse {
            position,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::plus(lhs, self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::plus(lhs, Expr::unary(Primitive::Minus, self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::times(lhs, self.unary()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::times(lhs, Expr::unary(Primitive::Reciprocal, self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::unary(Primitive::Minus, self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        let start = match self.peek() {
            Some(_) => self.pos,
            None => return Err(self.error(self.pos, PRIMARY)),
        };
        let c = self.src[start];
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            self.expect_close()?;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            if ident == "x" {
                return Ok(Expr::Var);
            }
            let p = ident
                .parse::<Primitive>()
                .map_err(|_| self.error(start, &["x", "function"]))?;
            if self.peek() != Some(b'(') {
                return Err(self.error(self.pos, &["("]));
            }
            self.pos += 1;
            let arg = self.expr()?;
            self.expect_close()?;
            return Ok(Expr::unary(p, arg));
        }
        Err(self.error(start, PRIMARY))
    }

    fn expect_close(&mut self) -> Result<()> {
        if self.peek() == Some(b')') {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(self.pos, &["+", "-", "*", "/", ")"]))
        }
    }

    fn number(&mut self, start: usize) -> Result<Expr> {
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let int_digits = digits(self);
        let mut frac_digits = 0;
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            frac_digits = digits(self);
        }
        if int_digits + frac_digits == 0 {
            return Err(self.error(start, &["digit"]));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Lit)
            .map_err(|_| self.error(start, &["number"]))
    }
}

pub fn parse(text: &str) -> Result<Expr> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err(p.error(p.pos, &["+", "-", "*", "/", "end of input"]));
    }
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArithOp {
    Plus,
    Minus,
    Times,
    Reciprocal,
}

impl ArithOp {
    pub fn name(self) -> &'static str {
        match self {
            ArithOp::Plus => "plus",
            ArithOp::Minus => "minus",
            ArithOp::Times => "times",
            ArithOp::Reciprocal => "reciprocal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    Input,
    /// A literal, carried as a constant valder state with zero derivative.
    Const(f64),
    /// An elementary function evaluated through a Transfer / AD(f) / Reset block.
    Primitive(Primitive),
    Arith(ArithOp),
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub predecessors: Vec<NodeId>,
}

impl Node {
    pub fn op_name(&self) -> String {
        match self.kind {
            NodeKind::Input => "x".into(),
            NodeKind::Const(c) => format!("{c}"),
            NodeKind::Primitive(p) => p.name().into(),
            NodeKind::Arith(op) => op.name().into(),
        }
    }
}

/// Topologically ordered DAG. Node 0 is always the input `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompGraph {
    nodes: Vec<Node>,
    output: NodeId,
}

impl CompGraph {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn output(&self) -> NodeId {
        self.output
    }

    /// Number of nodes beyond the input.
    pub fn r(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn primitive_nodes(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Primitive(_)))
            .count()
    }

    pub fn arith_nodes(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Arith(_)))
            .count()
    }

    /// Index of the last node reading each node; the output is held to the end.
    pub fn last_use(&self) -> Vec<NodeId> {
        let mut last = vec![0; self.nodes.len()];
        for (k, n) in self.nodes.iter().enumerate() {
            for &p in &n.predecessors {
                last[p] = last[p].max(k);
            }
        }
        last[self.output] = self.nodes.len();
        last
    }

    /// Label in the `s_k ≡ op(...)` convention, 1-based.
    pub fn label(&self, id: NodeId) -> String {
        let n = &self.nodes[id];
        let args: Vec<String> = n
            .predecessors
            .iter()
            .map(|p| format!("s_{}", p + 1))
            .collect();
        match n.kind {
            NodeKind::Input | NodeKind::Const(_) => format!("s_{} ≡ {}", id + 1, n.op_name()),
            _ => format!("s_{} ≡ {}({})", id + 1, n.op_name(), args.join(", ")),
        }
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph qad {\n  rankdir=BT;\n");
        for id in 0..self.nodes.len() {
            out.push_str(&format!("  n{id} [label=\"{}\"];\n", self.label(id)));
        }
        for (id, n) in self.nodes.iter().enumerate() {
            for p in &n.predecessors {
                out.push_str(&format!("  n{p} -> n{id};\n"));
            }
        }
        out.push_str("}\n");
        out
    }
}

pub fn build_graph(e: &Expr) -> CompGraph {
    fn lower(e: &Expr, nodes: &mut Vec<Node>) -> NodeId {
        let node = match e {
            Expr::Var => return 0,
            Expr::Lit(c) => Node {
                kind: NodeKind::Const(*c),
                predecessors: vec![],
            },
            Expr::Unary(p, a) => {
                let a = lower(a, nodes);
                let kind = match p {
                    Primitive::Minus => NodeKind::Arith(ArithOp::Minus),
                    Primitive::Reciprocal => NodeKind::Arith(ArithOp::Reciprocal),
                    p => NodeKind::Primitive(*p),
                };
                Node {
                    kind,
                    predecessors: vec![a],
                }
            }
            Expr::Plus(a, b) | Expr::Times(a, b) => {
                let a = lower(a, nodes);
                let b = lower(b, nodes);
                let op = if matches!(e, Expr::Plus(..)) {
                    ArithOp::Plus
                } else {
                    ArithOp::Times
                };
                Node {
                    kind: NodeKind::Arith(op),
                    predecessors: vec![a, b],
                }
            }
        };
        nodes.push(node);
        nodes.len() - 1
    }

    let mut nodes = vec![Node {
        kind: NodeKind::Input,
        predecessors: vec![],
    }];
    let output = lower(e, &mut nodes);
    CompGraph { nodes, output }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizingPlan {
    pub format: FixedPointFormat,
    pub reset_mode: ResetMode,
    /// Ancilla qubits consumed by swap resets; zero in hybrid mode.
    pub ancilla_budget: usize,
    /// Registers live at peak (three per valder state).
    pub register_count: usize,
    pub resets: usize,
}

/// Whether node `k` needs freshly allocated registers. A primitive node
/// reuses its operand's registers in place when it is the operand's last
/// reader; otherwise the operand is fanned out first.
pub fn allocates_fresh(g: &CompGraph, last_use: &[NodeId], k: NodeId) -> bool {
    match g.node(k).kind {
        NodeKind::Input => true,
        NodeKind::Primitive(_) => last_use[g.node(k).predecessors[0]] != k,
        NodeKind::Const(_) | NodeKind::Arith(_) => true,
    }
}

pub fn size_plan(g: &CompGraph, fmt: FixedPointFormat, reset_mode: ResetMode) -> SizingPlan {
    let last = g.last_use();
    let mut peak = 0;
    for k in 0..g.len() {
        let live_before = (0..k).filter(|&j| last[j] >= k).count();
        peak = peak.max(live_before + allocates_fresh(g, &last, k) as usize);
    }
    let resets = g.primitive_nodes();
    SizingPlan {
        format: fmt,
        reset_mode,
        ancilla_budget: match reset_mode {
            ResetMode::Swap => resets * fmt.width(),
            ResetMode::Hybrid => 0,
        },
        register_count: 3 * peak,
        resets,
    }
}
