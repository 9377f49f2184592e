#![allow(dead_code)]

use qad::{build_graph, oracle_trace, ArithOp, CompGraph, Expr, NodeKind, Primitive};
use rand::Rng;
use std::collections::BTreeSet;

/// Magnitude cap on every node value and derivative. Keeps Q(8, b) far from
/// overflow even after two-term products.
pub const MAG_CAP: f64 = 20.0;

pub fn random_expr<R: Rng>(rng: &mut R, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.8) {
            Expr::Var
        } else {
            Expr::Lit(rng.gen_range(1..=24) as f64 / 8.0)
        };
    }
    match rng.gen_range(0..10) {
        0..=5 => {
            let p = Primitive::ALL[rng.gen_range(0..Primitive::ALL.len())];
            Expr::unary(p, random_expr(rng, depth - 1))
        }
        6 | 7 => Expr::plus(random_expr(rng, depth - 1), random_expr(rng, depth - 1)),
        _ => Expr::times(random_expr(rng, depth - 1), random_expr(rng, depth - 1)),
    }
}

/// True when every node stays clear of domain edges, poles and the value
/// range by a comfortable margin, so floor truncation at b = 8 cannot push an
/// argument across an edge.
pub fn well_conditioned(g: &CompGraph, x0: f64) -> bool {
    let Ok(trace) = oracle_trace(g, x0) else {
        return false;
    };
    for (k, node) in g.nodes().iter().enumerate() {
        let out = trace[k];
        if !(out.v.abs() <= MAG_CAP && out.d.abs() <= MAG_CAP) {
            return false;
        }
        let Some(&pred) = node.predecessors.first() else {
            continue;
        };
        let a = trace[pred].v;
        let ok = match node.kind {
            NodeKind::Primitive(Primitive::Log) | NodeKind::Primitive(Primitive::Sqrt) => a > 0.25,
            NodeKind::Primitive(Primitive::Arcsin) => a.abs() < 0.9,
            NodeKind::Primitive(Primitive::Tan) => a.cos().abs() > 0.3,
            NodeKind::Arith(ArithOp::Reciprocal) => a.abs() > 0.25,
            _ => true,
        };
        if !ok {
            return false;
        }
    }
    true
}

/// Draws a graph of depth at most `max_depth` and an input point where it is
/// well conditioned. When `grid` is set the input lies on the 2^-grid lattice.
pub fn random_case<R: Rng>(rng: &mut R, max_depth: usize, grid: Option<u32>) -> (CompGraph, f64) {
    loop {
        let depth = rng.gen_range(1..=max_depth);
        let e = random_expr(rng, depth);
        let g = build_graph(&e);
        for _ in 0..8 {
            let mut x0 = rng.gen_range(-3.0..3.0);
            if let Some(b) = grid {
                let s = (1u64 << b) as f64;
                x0 = (x0 * s).floor() / s;
            }
            if well_conditioned(&g, x0) {
                return (g, x0);
            }
        }
    }
}

/// Operation names exercised by a graph, for coverage accounting.
pub fn ops_used(g: &CompGraph) -> BTreeSet<String> {
    g.nodes()
        .iter()
        .filter_map(|n| match n.kind {
            NodeKind::Primitive(p) => Some(p.name().to_string()),
            NodeKind::Arith(op) => Some(op.name().to_string()),
            _ => None,
        })
        .collect()
}

/// Every operation the generator must reach.
pub fn all_ops() -> BTreeSet<String> {
    let mut s: BTreeSet<String> = Primitive::ALL
        .iter()
        .map(|p| p.name().to_string())
        .collect();
    for op in [
        ArithOp::Plus,
        ArithOp::Minus,
        ArithOp::Times,
        ArithOp::Reciprocal,
    ] {
        s.insert(op.name().to_string());
    }
    s
}
