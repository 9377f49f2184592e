//! Runs a computational graph on the register machine.
//!
//! The input valder state is `|x0> ⊗ |0> ⊗ |1>`. Nodes run in topological
//! order: every elementary-function node is one block (Transfer value onto
//! the zero register, AD(f), Reset the zero register), every arithmetic node
//! writes a fresh valder state from its operands. A node whose operand is
//! still needed later works on a fan-out copy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{QadError, Result};
use crate::fixedpoint::{encode, FixedPointFormat, FixedPointValue};
use crate::graphir::{allocates_fresh, size_plan, ArithOp, CompGraph, NodeKind, SizingPlan};
use crate::primitives::{
    ad_apply, ad_minus, ad_plus, ad_reciprocal, ad_times, CostTable, ValderState,
};
use crate::registers::{GateEvent, GateKind, RegisterMachine, ResetMode};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub x0: f64,
    pub format: FixedPointFormat,
    pub reset_mode: ResetMode,
    pub trace_enabled: bool,
    pub costs: CostTable,
}

impl RunConfig {
    pub fn new(x0: f64, format: FixedPointFormat) -> Self {
        Self {
            x0,
            format,
            reset_mode: ResetMode::Hybrid,
            trace_enabled: false,
            costs: CostTable::default(),
        }
    }

    pub fn reset_mode(mut self, mode: ResetMode) -> Self {
        self.reset_mode = mode;
        self
    }

    pub fn trace(mut self, enabled: bool) -> Self {
        self.trace_enabled = enabled;
        self
    }

    pub fn costs(mut self, costs: CostTable) -> Self {
        self.costs = costs;
        self
    }
}

/// Decoded valder state after one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: usize,
    pub label: String,
    pub v: f64,
    pub d: f64,
    pub v_bits: FixedPointValue,
    pub d_bits: FixedPointValue,
}

/// Gates spent on one node, and whether its zero register was clear at the
/// block boundary. Fan-out copies made before the block are counted apart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub node: usize,
    pub fanout: BTreeMap<GateKind, u64>,
    pub gates: BTreeMap<GateKind, u64>,
    pub zero_register_clear: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub value: f64,
    pub derivative: f64,
    pub value_bits: FixedPointValue,
    pub derivative_bits: FixedPointValue,
    pub gate_counts: BTreeMap<GateKind, u64>,
    pub ancilla_used: usize,
    pub retired_registers: usize,
    pub peak_live_registers: usize,
    pub per_node: Vec<NodeRecord>,
    pub blocks: Vec<BlockRecord>,
    #[serde(skip)]
    pub trace: Option<Vec<GateEvent>>,
}

impl RunResult {
    pub fn gate_count_of(&self, kind: GateKind) -> u64 {
        self.gate_counts.get(&kind).copied().unwrap_or(0)
    }
}

/// Copies a valder state onto three fresh registers with CNOT fan-out.
pub fn fanout_valder(s: &ValderState, machine: &mut RegisterMachine) -> Result<ValderState> {
    let copy = ValderState::alloc_zeroed(machine, s.format);
    for (src, dst) in s.registers().into_iter().zip(copy.registers()) {
        machine.apply_transfer(src, dst)?;
    }
    Ok(copy)
}

fn gate_delta(
    before: &BTreeMap<GateKind, u64>,
    after: &BTreeMap<GateKind, u64>,
) -> BTreeMap<GateKind, u64> {
    after
        .iter()
        .map(|(k, &n)| (*k, n - before.get(k).copied().unwrap_or(0)))
        .filter(|&(_, n)| n > 0)
        .collect()
}

pub fn run(g: &CompGraph, cfg: &RunConfig) -> Result<RunResult> {
    let fmt = cfg.format;
    let plan: SizingPlan = size_plan(g, fmt, cfg.reset_mode);
    let last_use = g.last_use();
    let mut machine = RegisterMachine::new(plan.ancilla_budget, cfg.trace_enabled);
    let mut states: Vec<Option<ValderState>> = vec![None; g.len()];
    let mut per_node = Vec::with_capacity(g.r());
    let mut blocks = Vec::with_capacity(g.r());

    let x0 = encode(cfg.x0, fmt).map_err(|e| e.at_node(0, "x"))?;
    let one = encode(1.0, fmt).map_err(|e| e.at_node(0, "x"))?;
    if one.to_f64() != 1.0 {
        return Err(QadError::InvalidFormat(format!(
            "{fmt} cannot hold 1 exactly"
        )));
    }
    states[0] = Some(ValderState::alloc(&mut machine, x0, one));

    for k in 1..g.len() {
        let node = g.node(k);
        let before = machine.gate_counts().clone();
        let mut after_fanout = None;
        let state = |states: &[Option<ValderState>], i: usize| {
            states[node.predecessors[i]].expect("operand computed and not yet retired")
        };
        let mut step = || -> Result<(ValderState, bool)> {
            Ok(match node.kind {
                NodeKind::Input => unreachable!("input is node 0"),
                NodeKind::Const(c) => {
                    let s = ValderState::alloc(
                        &mut machine,
                        encode(c, fmt)?,
                        FixedPointValue::zero(fmt),
                    );
                    (s, true)
                }
                NodeKind::Primitive(p) => {
                    let operand = node.predecessors[0];
                    let s = if allocates_fresh(g, &last_use, k) {
                        let copy = fanout_valder(&state(&states, 0), &mut machine)?;
                        after_fanout = Some(machine.gate_counts().clone());
                        copy
                    } else {
                        states[operand].take().expect("operand present")
                    };
                    machine.apply_transfer(s.val_reg, s.zero_reg)?;
                    ad_apply(p, &s, &mut machine, &cfg.costs)?;
                    machine.reset(s.zero_reg, cfg.reset_mode)?;
                    (s, machine.is_zero(s.zero_reg)?)
                }
                NodeKind::Arith(op) => {
                    let a = state(&states, 0);
                    let s = match op {
                        ArithOp::Plus => ad_plus(&a, &state(&states, 1), &mut machine, &cfg.costs)?,
                        ArithOp::Times => {
                            ad_times(&a, &state(&states, 1), &mut machine, &cfg.costs)?
                        }
                        ArithOp::Minus => ad_minus(&a, &mut machine, &cfg.costs)?,
                        ArithOp::Reciprocal => ad_reciprocal(&a, &mut machine, &cfg.costs)?,
                    };
                    let mut done = node.predecessors.clone();
                    done.dedup();
                    for j in done {
                        if last_use[j] == k {
                            if let Some(old) = states[j].take() {
                                old.retire(&mut machine)?;
                            }
                        }
                    }
                    (s, machine.is_zero(s.zero_reg)?)
                }
            })
        };
        let (s, clear) = step().map_err(|e| e.at_node(k, node.op_name()))?;
        states[k] = Some(s);

        let (v, d) = (s.value(&machine)?, s.derivative(&machine)?);
        per_node.push(NodeRecord {
            node: k,
            label: g.label(k),
            v: v.to_f64(),
            d: d.to_f64(),
            v_bits: v,
            d_bits: d,
        });
        let block_start = after_fanout.as_ref().unwrap_or(&before);
        blocks.push(BlockRecord {
            node: k,
            fanout: gate_delta(&before, block_start),
            gates: gate_delta(block_start, machine.gate_counts()),
            zero_register_clear: clear,
        });
    }

    let out = states[g.output()].expect("output state is live");
    let (v, d) = (out.value(&machine)?, out.derivative(&machine)?);
    Ok(RunResult {
        value: v.to_f64(),
        derivative: d.to_f64(),
        value_bits: v,
        derivative_bits: d,
        gate_counts: machine.gate_counts().clone(),
        ancilla_used: machine.ancilla_used(),
        retired_registers: machine.retired_registers(),
        peak_live_registers: machine.peak_live_registers(),
        per_node,
        blocks,
        trace: machine.take_trace(),
    })
}
