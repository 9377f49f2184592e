//! Classical reference evaluations and the first-order error/cost model.
//!
//! [`oracle_eval`] is plain forward-mode AD with dual numbers. [`oracle_fixed`]
//! repeats the same recurrence on the fixed-point grid, flooring every node
//! output exactly where the register pipeline does; it is the bit-exact
//! reference for the engine.
//!
//! [`error_bounds`] perturbs every node value by `ε_k` and every node
//! derivative by `δ_k`, and bounds the output error by
//! `Σ |∂F/∂ε_k|·ε_k` (value) and `Σ |∂G/∂ε_k|·ε_k + Σ |∂G/∂δ_k|·δ_k`
//! (derivative). The partials are accumulated by a reverse sweep over the
//! graph at the exact trajectory.

use std::ops::{Add, Mul, Neg};

use serde::{Deserialize, Serialize};

use crate::error::{QadError, Result};
use crate::fixedpoint::{encode, FixedPointFormat, FixedPointValue};
use crate::graphir::{ArithOp, CompGraph, NodeId, NodeKind};
use crate::primitives::{CostTable, Primitive};
use crate::scalar::Real;

/// A (value, derivative) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dual<T> {
    pub v: T,
    pub d: T,
}

impl<T: Real> Dual<T> {
    pub fn new(v: T, d: T) -> Self {
        Self { v, d }
    }

    pub fn constant(v: T) -> Self {
        Self { v, d: T::zero() }
    }

    pub fn variable(v: T) -> Self {
        Self { v, d: T::one() }
    }

    /// `(f(v), f'(v)·d)` with a domain check on `v`.
    pub fn apply(self, p: Primitive) -> Result<Self> {
        p.check_domain(self.v)?;
        let out = Self {
            v: p.eval(self.v),
            d: p.deriv(self.v) * self.d,
        };
        if !out.v.is_finite() || !out.d.is_finite() {
            return Err(QadError::Domain {
                primitive: p.name().into(),
                value: self.v.to_f64_lossy(),
            });
        }
        Ok(out)
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.v + rhs.v, self.d + rhs.d)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(self.v * rhs.v, self.d * rhs.v + self.v * rhs.d)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.v, -self.d)
    }
}

fn unary_primitive(kind: NodeKind) -> Option<Primitive> {
    match kind {
        NodeKind::Primitive(p) => Some(p),
        NodeKind::Arith(ArithOp::Minus) => Some(Primitive::Minus),
        NodeKind::Arith(ArithOp::Reciprocal) => Some(Primitive::Reciprocal),
        _ => None,
    }
}

/// Exact forward sweep; one entry per node including the input.
pub fn oracle_trace<T: Real>(g: &CompGraph, x0: T) -> Result<Vec<Dual<T>>> {
    let mut vals: Vec<Dual<T>> = Vec::with_capacity(g.len());
    for (k, node) in g.nodes().iter().enumerate() {
        let arg = |i: usize| vals[node.predecessors[i]];
        let out = match node.kind {
            NodeKind::Input => Ok(Dual::variable(x0)),
            NodeKind::Const(c) => Ok(Dual::constant(T::from_f64_lossy(c))),
            NodeKind::Arith(ArithOp::Plus) => Ok(arg(0) + arg(1)),
            NodeKind::Arith(ArithOp::Times) => Ok(arg(0) * arg(1)),
            kind => arg(0).apply(unary_primitive(kind).expect("unary node")),
        };
        vals.push(out.map_err(|e| e.at_node(k, node.op_name()))?);
    }
    Ok(vals)
}

pub fn oracle_eval<T: Real>(g: &CompGraph, x0: T) -> Result<Dual<T>> {
    Ok(oracle_trace(g, x0)?[g.output()])
}

/// One primitive step on the grid: `floor(f(v))`, then
/// `floor(d · floor(f'(v)))`.
fn fixed_primitive(
    p: Primitive,
    v: FixedPointValue,
    d: FixedPointValue,
) -> Result<(FixedPointValue, FixedPointValue)> {
    let fmt = v.format();
    let x = v.to_f64();
    let floor_of = |y: f64| -> Result<FixedPointValue> {
        p.check_domain(x)?;
        if !y.is_finite() {
            return Err(QadError::Domain {
                primitive: p.name().into(),
                value: x,
            });
        }
        encode(y, fmt)
    };
    let value = floor_of(p.eval(x))?;
    let slope = floor_of(p.deriv(x))?;
    Ok((value, d.checked_mul(slope)?))
}

/// Fixed-point forward sweep; one `(value, derivative)` per node including
/// the input.
pub fn oracle_fixed_trace(
    g: &CompGraph,
    x0: f64,
    fmt: FixedPointFormat,
) -> Result<Vec<(FixedPointValue, FixedPointValue)>> {
    let zero = FixedPointValue::zero(fmt);
    let mut vals: Vec<(FixedPointValue, FixedPointValue)> = Vec::with_capacity(g.len());
    for (k, node) in g.nodes().iter().enumerate() {
        let arg = |i: usize| vals[node.predecessors[i]];
        let out = match node.kind {
            NodeKind::Input => encode(x0, fmt).and_then(|v| Ok((v, encode(1.0, fmt)?))),
            NodeKind::Const(c) => encode(c, fmt).map(|v| (v, zero)),
            NodeKind::Primitive(p) => fixed_primitive(p, arg(0).0, arg(0).1),
            NodeKind::Arith(ArithOp::Plus) => {
                let ((v1, d1), (v2, d2)) = (arg(0), arg(1));
                v1.checked_add(v2)
                    .and_then(|v| Ok((v, d1.checked_add(d2)?)))
            }
            NodeKind::Arith(ArithOp::Times) => {
                let ((v1, d1), (v2, d2)) = (arg(0), arg(1));
                v1.checked_mul(v2)
                    .and_then(|v| Ok((v, FixedPointValue::mul_add_pair(d1, v2, v1, d2)?)))
            }
            NodeKind::Arith(ArithOp::Minus) => {
                let (v, d) = arg(0);
                v.checked_neg().and_then(|nv| Ok((nv, d.checked_neg()?)))
            }
            NodeKind::Arith(ArithOp::Reciprocal) => {
                let (v, d) = arg(0);
                v.recip()
                    .and_then(|rv| Ok((rv, FixedPointValue::recip_deriv(v, d)?)))
            }
        };
        vals.push(out.map_err(|e| e.at_node(k, node.op_name()))?);
    }
    Ok(vals)
}

pub fn oracle_fixed(g: &CompGraph, x0: f64, fmt: FixedPointFormat) -> Result<Dual<f64>> {
    let (v, d) = oracle_fixed_trace(g, x0, fmt)?[g.output()];
    Ok(Dual::new(v.to_f64(), d.to_f64()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    /// Sum of declared gate costs over all nodes.
    pub total: u64,
    pub r: usize,
    /// Largest per-node cost in the graph.
    pub c_max: u64,
    /// `r · c_max`.
    pub bound: u64,
}

pub fn node_cost(kind: NodeKind, costs: &CostTable) -> u64 {
    match kind {
        NodeKind::Input | NodeKind::Const(_) => 0,
        NodeKind::Primitive(p) => costs.cost(p.name()),
        NodeKind::Arith(op) => costs.cost(op.name()),
    }
}

pub fn cost_estimate(g: &CompGraph, costs: &CostTable) -> CostReport {
    let per_node: Vec<u64> = g.nodes().iter().map(|n| node_cost(n.kind, costs)).collect();
    let c_max = per_node.iter().copied().max().unwrap_or(0);
    CostReport {
        total: per_node.iter().sum(),
        r: g.r(),
        c_max,
        bound: g.r() as u64 * c_max,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    /// Sensitivities above this produce a warning in the report.
    pub singularity_threshold: f64,
    pub costs: CostTable,
}

impl Default for ErrorModel {
    fn default() -> Self {
        Self {
            singularity_threshold: 1e3,
            costs: CostTable::default(),
        }
    }
}

/// Per-node truncation budgets, first-order sensitivities and the assembled
/// bounds. All per-node lists have one entry per graph node (index 0 is the
/// input); `delta[0]` is always 0 because the seed derivative is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub frac_bits: u32,
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
    #[serde(rename = "F_sens")]
    pub f_sens: Vec<f64>,
    #[serde(rename = "G_sens_eps")]
    pub g_sens_eps: Vec<f64>,
    #[serde(rename = "G_sens_delta")]
    pub g_sens_delta: Vec<f64>,
    pub bound_value: f64,
    pub bound_deriv: f64,
    pub cost_bound: CostReport,
    pub max_sensitivity: f64,
    pub warnings: Vec<String>,
}

/// Truncation budget of the reciprocal block, `(2 + log2 b) / 2^b`.
pub fn reciprocal_error(fmt: FixedPointFormat) -> f64 {
    let b = fmt.frac_bits().max(1) as f64;
    (2.0 + b.log2()) * fmt.resolution()
}

/// Local partial derivatives of one node.
struct Partials {
    /// `∂v_k/∂v_j`
    value: Vec<(NodeId, f64)>,
    /// `∂d_k/∂v_j`
    deriv_by_value: Vec<(NodeId, f64)>,
    /// `∂d_k/∂d_j`
    deriv_by_deriv: Vec<(NodeId, f64)>,
}

fn partials(g: &CompGraph, k: NodeId, traj: &[Dual<f64>]) -> Partials {
    let node = g.node(k);
    let pred = |i: usize| (node.predecessors[i], traj[node.predecessors[i]]);
    match node.kind {
        NodeKind::Input | NodeKind::Const(_) => Partials {
            value: vec![],
            deriv_by_value: vec![],
            deriv_by_deriv: vec![],
        },
        NodeKind::Arith(ArithOp::Plus) => {
            let (a, b) = (node.predecessors[0], node.predecessors[1]);
            Partials {
                value: vec![(a, 1.0), (b, 1.0)],
                deriv_by_value: vec![],
                deriv_by_deriv: vec![(a, 1.0), (b, 1.0)],
            }
        }
        NodeKind::Arith(ArithOp::Times) => {
            let ((a, x), (b, y)) = (pred(0), pred(1));
            Partials {
                value: vec![(a, y.v), (b, x.v)],
                deriv_by_value: vec![(a, y.d), (b, x.d)],
                deriv_by_deriv: vec![(a, y.v), (b, x.v)],
            }
        }
        kind => {
            let p = unary_primitive(kind).expect("unary node");
            let (j, x) = pred(0);
            Partials {
                value: vec![(j, p.deriv(x.v))],
                deriv_by_value: vec![(j, p.deriv2(x.v) * x.d)],
                deriv_by_deriv: vec![(j, p.deriv(x.v))],
            }
        }
    }
}

/// Truncation budgets `(ε_k, δ_k)` for one node.
fn budgets(
    g: &CompGraph,
    k: NodeId,
    traj: &[Dual<f64>],
    x0: f64,
    fmt: FixedPointFormat,
) -> Result<(f64, f64)> {
    let ulp = fmt.resolution();
    let node = g.node(k);
    Ok(match node.kind {
        NodeKind::Input => ((x0 - encode(x0, fmt)?.to_f64()).abs(), 0.0),
        NodeKind::Const(c) => ((c - encode(c, fmt)?.to_f64()).abs(), 0.0),
        NodeKind::Primitive(_) => {
            // d_k = floor(d_j · floor(f'(v_j))): one floor on f' scaled by |d_j|
            // plus the floor of the product.
            let dj = traj[node.predecessors[0]].d.abs();
            (ulp, ulp * (1.0 + dj))
        }
        NodeKind::Arith(ArithOp::Reciprocal) => {
            let e = reciprocal_error(fmt);
            (e, e)
        }
        NodeKind::Arith(_) => (ulp, ulp),
    })
}

pub fn error_bounds(g: &CompGraph, x0: f64, fmt: FixedPointFormat) -> Result<ErrorReport> {
    error_bounds_with(g, x0, fmt, &ErrorModel::default())
}

pub fn error_bounds_with(
    g: &CompGraph,
    x0: f64,
    fmt: FixedPointFormat,
    model: &ErrorModel,
) -> Result<ErrorReport> {
    let traj = oracle_trace::<f64>(g, x0)?;
    let n = g.len();

    let mut eps = vec![0.0; n];
    let mut delta = vec![0.0; n];
    for k in 0..n {
        let (e, d) =
            budgets(g, k, &traj, x0, fmt).map_err(|e| e.at_node(k, g.node(k).op_name()))?;
        eps[k] = e;
        delta[k] = d;
    }

    // Adjoints of the output value (F) and of the output derivative (G).
    let mut adj_f = vec![0.0; n];
    let mut adj_gv = vec![0.0; n];
    let mut adj_gd = vec![0.0; n];
    adj_f[g.output()] = 1.0;
    adj_gd[g.output()] = 1.0;
    for k in (0..n).rev() {
        let p = partials(g, k, &traj);
        for &(j, c) in &p.value {
            adj_f[j] += adj_f[k] * c;
            adj_gv[j] += adj_gv[k] * c;
        }
        for &(j, c) in &p.deriv_by_value {
            adj_gv[j] += adj_gd[k] * c;
        }
        for &(j, c) in &p.deriv_by_deriv {
            adj_gd[j] += adj_gd[k] * c;
        }
    }

    let f_sens: Vec<f64> = adj_f.iter().map(|a| a.abs()).collect();
    let g_sens_eps: Vec<f64> = adj_gv.iter().map(|a| a.abs()).collect();
    let g_sens_delta: Vec<f64> = adj_gd.iter().map(|a| a.abs()).collect();

    let bound_value = f_sens.iter().zip(&eps).map(|(s, e)| s * e).sum();
    let bound_deriv = g_sens_eps.iter().zip(&eps).map(|(s, e)| s * e).sum::<f64>()
        + g_sens_delta
            .iter()
            .zip(&delta)
            .map(|(s, d)| s * d)
            .sum::<f64>();

    let max_sensitivity = f_sens
        .iter()
        .chain(&g_sens_eps)
        .chain(&g_sens_delta)
        .fold(0.0f64, |m, &s| m.max(s));
    let mut warnings = Vec::new();
    for (k, ((f, ge), gd)) in f_sens
        .iter()
        .zip(&g_sens_eps)
        .zip(&g_sens_delta)
        .enumerate()
    {
        let s = f.max(*ge).max(*gd);
        if s > model.singularity_threshold || !s.is_finite() {
            warnings.push(format!(
                "near-singular sensitivity {s:e} at {} (first-order bound unreliable)",
                g.label(k)
            ));
        }
    }

    Ok(ErrorReport {
        frac_bits: fmt.frac_bits(),
        eps,
        delta,
        f_sens,
        g_sens_eps,
        g_sens_delta,
        bound_value,
        bound_deriv,
        cost_bound: cost_estimate(g, &model.costs),
        max_sensitivity,
        warnings,
    })
}
