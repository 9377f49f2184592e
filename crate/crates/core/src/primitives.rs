//! Primitive functions and the valder operators acting on register triples.
//!
//! Elementary functions are opaque fixed-point blocks: they are evaluated in
//! double precision and floored onto the register grid, with a declared gate
//! cost standing in for the reversible circuit that would implement them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{QadError, Result};
use crate::fixedpoint::{encode, FixedPointFormat, FixedPointValue};
use crate::registers::{RegId, RegisterMachine};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Arcsin,
    Arctan,
    Reciprocal,
    Minus,
}

pub const DEFAULT_TRANSCENDENTAL_COST: u64 = 10;
pub const DEFAULT_ARITHMETIC_COST: u64 = 1;

impl Primitive {
    pub const ALL: [Primitive; 10] = [
        Primitive::Exp,
        Primitive::Log,
        Primitive::Sqrt,
        Primitive::Sin,
        Primitive::Cos,
        Primitive::Tan,
        Primitive::Arcsin,
        Primitive::Arctan,
        Primitive::Reciprocal,
        Primitive::Minus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Sqrt => "sqrt",
            Primitive::Sin => "sin",
            Primitive::Cos => "cos",
            Primitive::Tan => "tan",
            Primitive::Arcsin => "arcsin",
            Primitive::Arctan => "arctan",
            Primitive::Reciprocal => "reciprocal",
            Primitive::Minus => "minus",
        }
    }

    /// Reciprocal and minus are arithmetic valder operators; the rest run
    /// through a Transfer / AD(f) / Reset block.
    pub fn is_arithmetic(self) -> bool {
        matches!(self, Primitive::Reciprocal | Primitive::Minus)
    }

    pub fn default_cost(self) -> u64 {
        if self.is_arithmetic() {
            DEFAULT_ARITHMETIC_COST
        } else {
            DEFAULT_TRANSCENDENTAL_COST
        }
    }

    pub fn domain_description(self) -> &'static str {
        match self {
            Primitive::Log | Primitive::Sqrt => "x > 0",
            Primitive::Arcsin => "-1 < x < 1",
            Primitive::Tan => "cos(x) != 0",
            Primitive::Reciprocal => "x != 0",
            _ => "all reals",
        }
    }

    pub fn in_domain<T: Real>(self, x: T) -> bool {
        if !x.is_finite() {
            return false;
        }
        match self {
            Primitive::Log | Primitive::Sqrt => x > T::zero(),
            Primitive::Arcsin => x.abs() < T::one(),
            Primitive::Tan => x.cos() != T::zero(),
            Primitive::Reciprocal => x != T::zero(),
            _ => true,
        }
    }

    pub fn check_domain<T: Real>(self, x: T) -> Result<()> {
        if self.in_domain(x) {
            Ok(())
        } else {
            Err(self.domain_error(x.to_f64_lossy()))
        }
    }

    fn domain_error(self, value: f64) -> QadError {
        QadError::Domain {
            primitive: self.name().into(),
            value,
        }
    }

    pub fn eval<T: Real>(self, x: T) -> T {
        match self {
            Primitive::Exp => x.exp(),
            Primitive::Log => x.ln(),
            Primitive::Sqrt => x.sqrt(),
            Primitive::Sin => x.sin(),
            Primitive::Cos => x.cos(),
            Primitive::Tan => x.tan(),
            Primitive::Arcsin => x.asin(),
            Primitive::Arctan => x.atan(),
            Primitive::Reciprocal => x.recip(),
            Primitive::Minus => -x,
        }
    }

    pub fn deriv<T: Real>(self, x: T) -> T {
        let one = T::one();
        match self {
            Primitive::Exp => x.exp(),
            Primitive::Log => x.recip(),
            Primitive::Sqrt => T::from_f64_lossy(0.5) / x.sqrt(),
            Primitive::Sin => x.cos(),
            Primitive::Cos => -x.sin(),
            Primitive::Tan => (x.cos() * x.cos()).recip(),
            Primitive::Arcsin => (one - x * x).sqrt().recip(),
            Primitive::Arctan => (one + x * x).recip(),
            Primitive::Reciprocal => -(x * x).recip(),
            Primitive::Minus => -one,
        }
    }

    /// Second derivative, used by the first-order error analysis.
    pub fn deriv2<T: Real>(self, x: T) -> T {
        let one = T::one();
        let two = one + one;
        match self {
            Primitive::Exp => x.exp(),
            Primitive::Log => -(x * x).recip(),
            Primitive::Sqrt => -(T::from_f64_lossy(4.0) * x * x.sqrt()).recip(),
            Primitive::Sin => -x.sin(),
            Primitive::Cos => -x.cos(),
            Primitive::Tan => {
                let c = x.cos();
                two * x.tan() / (c * c)
            }
            Primitive::Arcsin => {
                let s = one - x * x;
                x / (s * s.sqrt())
            }
            Primitive::Arctan => {
                let s = one + x * x;
                -two * x / (s * s)
            }
            Primitive::Reciprocal => two / (x * x * x),
            Primitive::Minus => T::zero(),
        }
    }

    /// `floor(f(a))` on the register grid.
    pub fn eval_fixed(self, a: FixedPointValue) -> Result<FixedPointValue> {
        match self {
            Primitive::Minus => a.checked_neg(),
            Primitive::Reciprocal => a.recip(),
            _ => self.floor_real(a, self.eval(a.to_f64())),
        }
    }

    /// `floor(f'(b))` on the register grid.
    pub fn deriv_fixed(self, b: FixedPointValue) -> Result<FixedPointValue> {
        match self {
            Primitive::Minus => encode(-1.0, b.format()),
            Primitive::Reciprocal => {
                let one = encode(1.0, b.format())?;
                FixedPointValue::recip_deriv(b, one)
            }
            _ => self.floor_real(b, self.deriv(b.to_f64())),
        }
    }

    fn floor_real(self, arg: FixedPointValue, y: f64) -> Result<FixedPointValue> {
        let x = arg.to_f64();
        self.check_domain(x)?;
        if !y.is_finite() {
            return Err(self.domain_error(x));
        }
        encode(y, arg.format())
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Primitive {
    type Err = QadError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exp" => Primitive::Exp,
            "log" => Primitive::Log,
            "sqrt" => Primitive::Sqrt,
            "sin" => Primitive::Sin,
            "cos" => Primitive::Cos,
            "tan" => Primitive::Tan,
            "arcsin" | "asin" => Primitive::Arcsin,
            "arctan" | "atan" => Primitive::Arctan,
            "reciprocal" | "recip" => Primitive::Reciprocal,
            "minus" | "neg" => Primitive::Minus,
            _ => return Err(QadError::Config(format!("unknown primitive {s:?}"))),
        })
    }
}

/// Declared gate cost per operation name: the ten primitives plus `plus`
/// and `times`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTable(BTreeMap<String, u64>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimitiveEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    pub gate_cost: u64,
}

impl Default for CostTable {
    fn default() -> Self {
        let mut map: BTreeMap<String, u64> = Primitive::ALL
            .iter()
            .map(|p| (p.name().to_string(), p.default_cost()))
            .collect();
        map.insert("plus".into(), DEFAULT_ARITHMETIC_COST);
        map.insert("times".into(), DEFAULT_ARITHMETIC_COST);
        CostTable(map)
    }
}

impl CostTable {
    pub fn cost(&self, op: &str) -> u64 {
        self.0.get(op).copied().unwrap_or(DEFAULT_ARITHMETIC_COST)
    }

    pub fn set(&mut self, op: &str, cost: u64) -> Result<()> {
        if !self.0.contains_key(op) {
            return Err(QadError::Config(format!("unknown operation {op:?}")));
        }
        if cost == 0 {
            return Err(QadError::Config(format!(
                "gate cost of {op} must be positive"
            )));
        }
        self.0.insert(op.to_string(), cost);
        Ok(())
    }

    pub fn max_cost(&self) -> u64 {
        self.0.values().copied().max().unwrap_or(0)
    }

    /// Loads overrides from a JSON array of `{"name", "gate_cost", "domain"?}`
    /// entries on top of the defaults. A `domain` field, when present, must
    /// match the built-in domain.
    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<PrimitiveEntry> =
            serde_json::from_str(text).map_err(|e| QadError::Config(e.to_string()))?;
        let mut table = Self::default();
        for e in entries {
            if let (Some(d), Ok(p)) = (&e.domain, e.name.parse::<Primitive>()) {
                if d != p.domain_description() {
                    return Err(QadError::Config(format!(
                        "domain of {} is fixed to {:?}",
                        p,
                        p.domain_description()
                    )));
                }
            }
            let name = e
                .name
                .parse::<Primitive>()
                .map(|p| p.name().to_string())
                .unwrap_or(e.name);
            table.set(&name, e.gate_cost)?;
        }
        Ok(table)
    }

    pub fn to_entries(&self) -> Vec<PrimitiveEntry> {
        self.0
            .iter()
            .map(|(name, &gate_cost)| PrimitiveEntry {
                domain: name
                    .parse::<Primitive>()
                    .ok()
                    .map(|p| p.domain_description().to_string()),
                name: name.clone(),
                gate_cost,
            })
            .collect()
    }
}

/// Three registers `|v> ⊗ |0> ⊗ |d>` sharing one format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValderState {
    pub val_reg: RegId,
    pub zero_reg: RegId,
    pub der_reg: RegId,
    pub format: FixedPointFormat,
}

impl ValderState {
    pub fn alloc(
        machine: &mut RegisterMachine,
        value: FixedPointValue,
        derivative: FixedPointValue,
    ) -> Self {
        let format = value.format();
        Self {
            val_reg: machine.alloc_value(value),
            zero_reg: machine.alloc_value(FixedPointValue::zero(format)),
            der_reg: machine.alloc_value(derivative),
            format,
        }
    }

    pub fn alloc_zeroed(machine: &mut RegisterMachine, format: FixedPointFormat) -> Self {
        let z = FixedPointValue::zero(format);
        Self::alloc(machine, z, z)
    }

    pub fn value(&self, machine: &RegisterMachine) -> Result<FixedPointValue> {
        machine.read_value(self.val_reg, self.format)
    }

    pub fn derivative(&self, machine: &RegisterMachine) -> Result<FixedPointValue> {
        machine.read_value(self.der_reg, self.format)
    }

    pub fn registers(&self) -> [RegId; 3] {
        [self.val_reg, self.zero_reg, self.der_reg]
    }

    pub fn retire(&self, machine: &mut RegisterMachine) -> Result<()> {
        for r in self.registers() {
            machine.retire(r)?;
        }
        Ok(())
    }
}

fn unpack(bits: &[u64], fmt: FixedPointFormat) -> Vec<FixedPointValue> {
    bits.iter()
        .map(|&b| FixedPointValue::from_bits(b, fmt))
        .collect()
}

/// The AD(f) operator: `|a>|b>|c> -> |f(a)>|f'(b)>|c·f'(b)>`, as the
/// `f⊗f'` multigate followed by the product block.
pub fn ad_apply(
    p: Primitive,
    s: &ValderState,
    machine: &mut RegisterMachine,
    costs: &CostTable,
) -> Result<()> {
    let fmt = s.format;
    machine.apply_prim_block(
        &format!("{p}⊗{p}'"),
        costs.cost(p.name()),
        &[s.val_reg, s.zero_reg],
        &[s.val_reg, s.zero_reg],
        |bits| {
            let ab = unpack(bits, fmt);
            let fa = p.eval_fixed(ab[0])?;
            let dfb = p.deriv_fixed(ab[1])?;
            Ok(vec![fa.bits(), dfb.bits()])
        },
    )?;
    machine.apply_prim_block(
        "times",
        costs.cost("times"),
        &[s.zero_reg, s.der_reg],
        &[s.der_reg],
        |bits| {
            let bc = unpack(bits, fmt);
            Ok(vec![bc[1].checked_mul(bc[0])?.bits()])
        },
    )
}

fn check_formats(s1: &ValderState, s2: &ValderState) -> Result<()> {
    if s1.format != s2.format {
        return Err(QadError::InvalidFormat(format!(
            "valder states use different formats {} and {}",
            s1.format, s2.format
        )));
    }
    Ok(())
}

/// Runs an arithmetic block reading `inputs` and writing a fresh valder state.
fn arith_block<F>(
    machine: &mut RegisterMachine,
    name: &str,
    costs: &CostTable,
    fmt: FixedPointFormat,
    inputs: &[RegId],
    compute: F,
) -> Result<ValderState>
where
    F: FnOnce(&[FixedPointValue]) -> Result<(FixedPointValue, FixedPointValue)>,
{
    let out = ValderState::alloc_zeroed(machine, fmt);
    machine.apply_prim_block(
        name,
        costs.cost(name),
        inputs,
        &[out.val_reg, out.der_reg],
        |bits| {
            let (v, d) = compute(&unpack(bits, fmt))?;
            Ok(vec![v.bits(), d.bits()])
        },
    )?;
    Ok(out)
}

/// `|v1 + v2> ⊗ |0> ⊗ |d1 + d2>`
pub fn ad_plus(
    s1: &ValderState,
    s2: &ValderState,
    machine: &mut RegisterMachine,
    costs: &CostTable,
) -> Result<ValderState> {
    check_formats(s1, s2)?;
    arith_block(
        machine,
        "plus",
        costs,
        s1.format,
        &[s1.val_reg, s1.der_reg, s2.val_reg, s2.der_reg],
        |x| Ok((x[0].checked_add(x[2])?, x[1].checked_add(x[3])?)),
    )
}

/// `|-v> ⊗ |0> ⊗ |-d>`, exact.
pub fn ad_minus(
    s: &ValderState,
    machine: &mut RegisterMachine,
    costs: &CostTable,
) -> Result<ValderState> {
    arith_block(
        machine,
        "minus",
        costs,
        s.format,
        &[s.val_reg, s.der_reg],
        |x| Ok((x[0].checked_neg()?, x[1].checked_neg()?)),
    )
}

/// `|v1·v2> ⊗ |0> ⊗ |d1·v2 + v1·d2>`
pub fn ad_times(
    s1: &ValderState,
    s2: &ValderState,
    machine: &mut RegisterMachine,
    costs: &CostTable,
) -> Result<ValderState> {
    check_formats(s1, s2)?;
    arith_block(
        machine,
        "times",
        costs,
        s1.format,
        &[s1.val_reg, s1.der_reg, s2.val_reg, s2.der_reg],
        |x| {
            let (v1, d1, v2, d2) = (x[0], x[1], x[2], x[3]);
            Ok((
                v1.checked_mul(v2)?,
                FixedPointValue::mul_add_pair(d1, v2, v1, d2)?,
            ))
        },
    )
}

/// `|1/v> ⊗ |0> ⊗ |-d/v²>`
pub fn ad_reciprocal(
    s: &ValderState,
    machine: &mut RegisterMachine,
    costs: &CostTable,
) -> Result<ValderState> {
    arith_block(
        machine,
        "reciprocal",
        costs,
        s.format,
        &[s.val_reg, s.der_reg],
        |x| Ok((x[0].recip()?, FixedPointValue::recip_deriv(x[0], x[1])?)),
    )
}
