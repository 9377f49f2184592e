//! Forward-mode algorithmic differentiation on simulated qubit registers.
//!
//! Numbers live in fixed-point registers held in computational basis states.
//! A function of one variable is parsed into a computational graph and
//! evaluated node by node: Transfer (CNOT fan-out), AD(f), Reset for every
//! elementary function and the valder operators for `+`, unary `-`, `*` and
//! reciprocal. The third register of the final state holds the derivative.
//!
//! ```
//! use qad::{build_graph, parse, run, FixedPointFormat, RunConfig};
//!
//! let g = build_graph(&parse("x*cos(log(x))").unwrap());
//! let fmt = FixedPointFormat::new(8, 32).unwrap();
//! let r = run(&g, &RunConfig::new(2.0, fmt)).unwrap();
//! let exact = 2f64.ln().cos() - 2f64.ln().sin();
//! assert!((r.derivative - exact).abs() < 1e-8);
//! ```

pub mod analysis;
pub mod engine;
pub mod error;
pub mod fixedpoint;
pub mod graphir;
pub mod primitives;
pub mod registers;
pub mod scalar;

pub use analysis::{
    cost_estimate, error_bounds, error_bounds_with, oracle_eval, oracle_fixed, oracle_fixed_trace,
    oracle_trace, CostReport, Dual, ErrorModel, ErrorReport,
};
pub use engine::{fanout_valder, run, BlockRecord, NodeRecord, RunConfig, RunResult};
pub use error::{ErrorKind, QadError, Result};
pub use fixedpoint::{decode, encode, truncate_to, FixedPointFormat, FixedPointValue};
pub use graphir::{
    build_graph, parse, size_plan, ArithOp, CompGraph, Expr, Node, NodeKind, SizingPlan,
};
pub use primitives::{CostTable, Primitive, ValderState};
pub use registers::{GateEvent, GateKind, RegId, RegisterMachine, ResetMode};
pub use scalar::Real;

pub type Dual64 = Dual<f64>;
pub type Dual32 = Dual<f32>;
