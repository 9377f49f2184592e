//! Qubit registers restricted to computational basis states.
//!
//! Each register is one bit-string. The gate set (X, CNOT, SWAP with a fresh
//! ancilla, Z-basis measurement) maps basis states to basis states, so the
//! simulation is exact and measurement is deterministic.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{QadError, Result};
use crate::fixedpoint::{FixedPointFormat, FixedPointValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RegId(pub usize);

impl fmt::Display for RegId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GateKind {
    X,
    #[serde(rename = "CNOT")]
    Cnot,
    #[serde(rename = "SWAP")]
    Swap,
    #[serde(rename = "MEASURE")]
    Measure,
    #[serde(rename = "PRIM_BLOCK")]
    PrimBlock,
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateKind::X => "X",
            GateKind::Cnot => "CNOT",
            GateKind::Swap => "SWAP",
            GateKind::Measure => "MEASURE",
            GateKind::PrimBlock => "PRIM_BLOCK",
        })
    }
}

/// How a register is returned to all zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResetMode {
    /// Swap every qubit with a fresh zeroed ancilla.
    Swap,
    /// Measure, flip, and flip back when the outcome was 0.
    Hybrid,
}

impl FromStr for ResetMode {
    type Err = QadError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swap" => Ok(ResetMode::Swap),
            "hybrid" => Ok(ResetMode::Hybrid),
            _ => Err(QadError::Config(format!(
                "unknown reset mode {s:?} (expected swap or hybrid)"
            ))),
        }
    }
}

impl fmt::Display for ResetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResetMode::Swap => "swap",
            ResetMode::Hybrid => "hybrid",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateDetail {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_cost: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<u8>,
}

/// One trace record. Qubit operands are written `r<reg>[<bit>]` with bit 0 the
/// least significant; ancillas are `a<index>`; whole registers are `r<reg>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateEvent {
    pub kind: GateKind,
    pub operands: Vec<String>,
    pub detail: Option<GateDetail>,
}

#[derive(Debug, Clone)]
struct Register {
    width: usize,
    bits: u64,
    retired: bool,
}

fn mask(width: usize) -> u64 {
    if width == 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn bit_string(bits: u64, width: usize) -> String {
    (0..width)
        .rev()
        .map(|i| if (bits >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn qubit(reg: RegId, i: usize) -> String {
    format!("{reg}[{i}]")
}

#[derive(Debug, Clone, Default)]
pub struct RegisterMachine {
    registers: Vec<Register>,
    classical_bits: BTreeMap<RegId, String>,
    ancilla_pool: usize,
    ancilla_used: usize,
    gate_counter: BTreeMap<GateKind, u64>,
    trace: Option<Vec<GateEvent>>,
    live: usize,
    peak_live: usize,
}

impl RegisterMachine {
    pub fn new(ancilla_pool: usize, trace_enabled: bool) -> Self {
        Self {
            ancilla_pool,
            trace: trace_enabled.then(Vec::new),
            ..Default::default()
        }
    }

    pub fn alloc_register(&mut self, width: usize, init: &str) -> Result<RegId> {
        if !(1..=64).contains(&width) {
            return Err(QadError::Register(format!("width {width} outside 1..=64")));
        }
        if init.len() != width {
            return Err(QadError::Register(format!(
                "initial state {init:?} has length {} but width is {width}",
                init.len()
            )));
        }
        let mut bits = 0u64;
        for c in init.chars() {
            bits = (bits << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => {
                        return Err(QadError::Register(format!(
                            "initial state {init:?} is not a bit-string"
                        )))
                    }
                };
        }
        Ok(self.push(width, bits))
    }

    pub fn alloc_zeroed(&mut self, width: usize) -> Result<RegId> {
        self.alloc_register(width, &"0".repeat(width))
    }

    /// Allocates a register already holding `v`. State preparation is not
    /// counted as gates.
    pub fn alloc_value(&mut self, v: FixedPointValue) -> RegId {
        self.push(v.format().width(), v.bits())
    }

    fn push(&mut self, width: usize, bits: u64) -> RegId {
        self.registers.push(Register {
            width,
            bits,
            retired: false,
        });
        self.live += 1;
        self.peak_live = self.peak_live.max(self.live);
        RegId(self.registers.len() - 1)
    }

    fn reg(&self, id: RegId) -> Result<&Register> {
        match self.registers.get(id.0) {
            Some(r) if !r.retired => Ok(r),
            Some(_) => Err(QadError::Register(format!("{id} has been retired"))),
            None => Err(QadError::Register(format!("{id} does not exist"))),
        }
    }

    fn reg_mut(&mut self, id: RegId) -> Result<&mut Register> {
        self.reg(id)?;
        Ok(&mut self.registers[id.0])
    }

    pub fn width(&self, id: RegId) -> Result<usize> {
        Ok(self.reg(id)?.width)
    }

    pub fn bits(&self, id: RegId) -> Result<u64> {
        Ok(self.reg(id)?.bits)
    }

    pub fn bit_string(&self, id: RegId) -> Result<String> {
        let r = self.reg(id)?;
        Ok(bit_string(r.bits, r.width))
    }

    pub fn is_zero(&self, id: RegId) -> Result<bool> {
        Ok(self.reg(id)?.bits == 0)
    }

    pub fn read_value(&self, id: RegId, format: FixedPointFormat) -> Result<FixedPointValue> {
        let r = self.reg(id)?;
        if r.width != format.width() {
            return Err(QadError::Register(format!(
                "{id} has width {} but {format} needs {}",
                r.width,
                format.width()
            )));
        }
        Ok(FixedPointValue::from_bits(r.bits, format))
    }

    /// Marks a register as no longer in use. Its qubits are not recycled.
    pub fn retire(&mut self, id: RegId) -> Result<()> {
        self.reg_mut(id)?.retired = true;
        self.live -= 1;
        Ok(())
    }

    fn count(&mut self, kind: GateKind, n: u64) {
        *self.gate_counter.entry(kind).or_insert(0) += n;
    }

    fn record(&mut self, kind: GateKind, operands: Vec<String>, detail: Option<GateDetail>) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(GateEvent {
                kind,
                operands,
                detail,
            });
        }
    }

    pub fn x(&mut self, id: RegId, i: usize) -> Result<()> {
        let r = self.reg_mut(id)?;
        if i >= r.width {
            return Err(QadError::Register(format!("qubit {i} outside {id}")));
        }
        r.bits ^= 1 << i;
        self.count(GateKind::X, 1);
        self.record(GateKind::X, vec![qubit(id, i)], None);
        Ok(())
    }

    pub fn cnot(&mut self, ctrl: (RegId, usize), target: (RegId, usize)) -> Result<()> {
        let c = self.reg(ctrl.0)?;
        if ctrl.1 >= c.width {
            return Err(QadError::Register(format!(
                "qubit {} outside {}",
                ctrl.1, ctrl.0
            )));
        }
        let bit = (c.bits >> ctrl.1) & 1;
        let t = self.reg_mut(target.0)?;
        if target.1 >= t.width {
            return Err(QadError::Register(format!(
                "qubit {} outside {}",
                target.1, target.0
            )));
        }
        t.bits ^= bit << target.1;
        self.count(GateKind::Cnot, 1);
        self.record(
            GateKind::Cnot,
            vec![qubit(ctrl.0, ctrl.1), qubit(target.0, target.1)],
            None,
        );
        Ok(())
    }

    /// Z-basis measurement of one qubit; on a basis state the outcome is the
    /// stored bit with certainty.
    pub fn measure(&mut self, id: RegId, i: usize) -> Result<u8> {
        let r = self.reg(id)?;
        if i >= r.width {
            return Err(QadError::Register(format!("qubit {i} outside {id}")));
        }
        let outcome = ((r.bits >> i) & 1) as u8;
        self.count(GateKind::Measure, 1);
        self.record(
            GateKind::Measure,
            vec![qubit(id, i)],
            Some(GateDetail {
                name: None,
                gate_cost: None,
                outcome: Some(outcome),
            }),
        );
        Ok(outcome)
    }

    /// CNOT fan-out of `src` onto the low bits of an all-zero `dst`.
    pub fn apply_transfer(&mut self, src: RegId, dst: RegId) -> Result<()> {
        let src_width = self.width(src)?;
        let dst_reg = self.reg(dst)?;
        if dst_reg.width < src_width {
            return Err(QadError::Width {
                src: src_width,
                dst: dst_reg.width,
            });
        }
        if dst_reg.bits != 0 {
            return Err(QadError::ResetRequired { register: dst.0 });
        }
        for i in 0..src_width {
            self.cnot((src, i), (dst, i))?;
        }
        Ok(())
    }

    /// Fully quantum reset: each qubit is swapped with a fresh ancilla, which
    /// carries the old bit away and is never reused.
    pub fn reset_swap(&mut self, target: RegId) -> Result<()> {
        let width = self.width(target)?;
        if self.ancilla_pool < width {
            return Err(QadError::AncillaExhausted {
                needed: width,
                available: self.ancilla_pool,
            });
        }
        for i in 0..width {
            let ancilla = self.ancilla_used;
            self.ancilla_pool -= 1;
            self.ancilla_used += 1;
            self.reg_mut(target)?.bits &= !(1u64 << i);
            self.count(GateKind::Swap, 1);
            self.record(
                GateKind::Swap,
                vec![qubit(target, i), format!("a{ancilla}")],
                None,
            );
        }
        Ok(())
    }

    /// Hybrid reset: measure into a classical bit, apply X, and apply X again
    /// when the outcome was 0. Returns the measured bit-string.
    pub fn reset_hybrid(&mut self, target: RegId) -> Result<String> {
        let width = self.width(target)?;
        let mut outcomes = 0u64;
        for i in 0..width {
            let c = self.measure(target, i)?;
            outcomes |= (c as u64) << i;
            self.x(target, i)?;
            if c == 0 {
                self.x(target, i)?;
            }
        }
        debug_assert_eq!(self.reg(target)?.bits, 0);
        let s = bit_string(outcomes, width);
        self.classical_bits.insert(target, s.clone());
        Ok(s)
    }

    pub fn reset(&mut self, target: RegId, mode: ResetMode) -> Result<()> {
        match mode {
            ResetMode::Swap => self.reset_swap(target),
            ResetMode::Hybrid => self.reset_hybrid(target).map(|_| ()),
        }
    }

    /// Applies an opaque block that maps the basis states of `inputs` to new
    /// basis states of `outputs`. The block counts as one PRIM_BLOCK gate with
    /// the declared cost recorded in the trace.
    pub fn apply_prim_block<F>(
        &mut self,
        name: &str,
        gate_cost: u64,
        inputs: &[RegId],
        outputs: &[RegId],
        compute: F,
    ) -> Result<()>
    where
        F: FnOnce(&[u64]) -> Result<Vec<u64>>,
    {
        let ins = inputs
            .iter()
            .map(|&id| self.bits(id))
            .collect::<Result<Vec<_>>>()?;
        for &id in outputs {
            self.reg(id)?;
        }
        let outs = compute(&ins)?;
        if outs.len() != outputs.len() {
            return Err(QadError::Register(format!(
                "block {name} produced {} outputs for {} registers",
                outs.len(),
                outputs.len()
            )));
        }
        for (&id, bits) in outputs.iter().zip(outs) {
            let r = self.reg_mut(id)?;
            r.bits = bits & mask(r.width);
        }
        self.count(GateKind::PrimBlock, 1);
        let mut operands: Vec<String> = inputs.iter().map(|r| r.to_string()).collect();
        operands.push("->".into());
        operands.extend(outputs.iter().map(|r| r.to_string()));
        self.record(
            GateKind::PrimBlock,
            operands,
            Some(GateDetail {
                name: Some(name.to_string()),
                gate_cost: Some(gate_cost),
                outcome: None,
            }),
        );
        Ok(())
    }

    pub fn gate_count(&self, kind: GateKind) -> u64 {
        self.gate_counter.get(&kind).copied().unwrap_or(0)
    }

    pub fn gate_counts(&self) -> &BTreeMap<GateKind, u64> {
        &self.gate_counter
    }

    pub fn ancilla_pool(&self) -> usize {
        self.ancilla_pool
    }

    pub fn ancilla_used(&self) -> usize {
        self.ancilla_used
    }

    pub fn classical_bits(&self) -> &BTreeMap<RegId, String> {
        &self.classical_bits
    }

    pub fn register_count(&self) -> usize {
        self.registers.len()
    }

    pub fn live_registers(&self) -> usize {
        self.live
    }

    pub fn peak_live_registers(&self) -> usize {
        self.peak_live
    }

    pub fn retired_registers(&self) -> usize {
        self.registers.iter().filter(|r| r.retired).count()
    }

    pub fn trace(&self) -> Option<&[GateEvent]> {
        self.trace.as_deref()
    }

    pub fn take_trace(&mut self) -> Option<Vec<GateEvent>> {
        self.trace.take()
    }
}

/// Writes a trace as JSON lines, one event per line.
pub fn write_trace_jsonl<W: Write>(events: &[GateEvent], mut w: W) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
