//! Two's-complement fixed-point numbers as housed in a qubit register.
//!
//! A format `Q(m, b)` has `m` integer bits (sign bit included) and `b`
//! fractional bits. Every conversion from a real number floors toward
//! negative infinity, so the truncation error of a single conversion lies in
//! `[0, 2^-b)`.
//!
//! Arithmetic kernels compute at double width (or exactly, for the
//! reciprocal) and truncate once per result.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{QadError, Result};
use crate::scalar::Real;

pub const MAX_TOTAL_BITS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedPointFormat {
    int_bits: u32,
    frac_bits: u32,
}

impl FixedPointFormat {
    pub fn new(int_bits: u32, frac_bits: u32) -> Result<Self> {
        if int_bits < 1 {
            return Err(QadError::InvalidFormat(
                "int_bits must be at least 1 (it holds the sign bit)".into(),
            ));
        }
        if int_bits + frac_bits > MAX_TOTAL_BITS {
            return Err(QadError::InvalidFormat(format!(
                "int_bits + frac_bits = {} exceeds {MAX_TOTAL_BITS}",
                int_bits + frac_bits
            )));
        }
        Ok(Self {
            int_bits,
            frac_bits,
        })
    }

    pub fn int_bits(&self) -> u32 {
        self.int_bits
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    pub fn total_bits(&self) -> u32 {
        self.int_bits + self.frac_bits
    }

    /// Register width in qubits.
    pub fn width(&self) -> usize {
        self.total_bits() as usize
    }

    /// One unit in the last place, `2^-b`.
    pub fn resolution(&self) -> f64 {
        pow2(-(self.frac_bits as i32))
    }

    pub fn min_raw(&self) -> i64 {
        if self.total_bits() == 64 {
            i64::MIN
        } else {
            -(1i64 << (self.total_bits() - 1))
        }
    }

    pub fn max_raw(&self) -> i64 {
        if self.total_bits() == 64 {
            i64::MAX
        } else {
            (1i64 << (self.total_bits() - 1)) - 1
        }
    }

    pub fn min_value(&self) -> f64 {
        -pow2(self.int_bits as i32 - 1)
    }

    pub fn max_value(&self) -> f64 {
        pow2(self.int_bits as i32 - 1) - self.resolution()
    }

    fn mask(&self) -> u64 {
        if self.total_bits() == 64 {
            u64::MAX
        } else {
            (1u64 << self.total_bits()) - 1
        }
    }

    fn overflow(&self, value: f64) -> QadError {
        QadError::Overflow {
            value,
            min: self.min_value(),
            max: self.max_value(),
        }
    }

    /// Range-checks a raw integer (scaled by `2^b`) computed at wider precision.
    fn fit(&self, raw: i128) -> Result<FixedPointValue> {
        if raw < self.min_raw() as i128 || raw > self.max_raw() as i128 {
            return Err(self.overflow(raw as f64 * self.resolution()));
        }
        Ok(FixedPointValue {
            raw: raw as i64,
            format: *self,
        })
    }
}

impl fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q({},{})", self.int_bits, self.frac_bits)
    }
}

fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// A bit pattern of `format.total_bits()` bits, read as two's complement and
/// scaled by `2^-frac_bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedPointValue {
    raw: i64,
    format: FixedPointFormat,
}

impl FixedPointValue {
    pub fn zero(format: FixedPointFormat) -> Self {
        Self { raw: 0, format }
    }

    pub fn from_raw(raw: i64, format: FixedPointFormat) -> Result<Self> {
        format.fit(raw as i128)
    }

    /// Sign-extends the low `total_bits` of `bits`. Higher bits are ignored.
    pub fn from_bits(bits: u64, format: FixedPointFormat) -> Self {
        let shift = 64 - format.total_bits();
        let raw = ((bits << shift) as i64) >> shift;
        Self { raw, format }
    }

    pub fn raw(&self) -> i64 {
        self.raw
    }

    /// The unsigned register pattern, occupying the low `total_bits` bits.
    pub fn bits(&self) -> u64 {
        (self.raw as u64) & self.format.mask()
    }

    pub fn format(&self) -> FixedPointFormat {
        self.format
    }

    pub fn is_zero(&self) -> bool {
        self.raw == 0
    }

    pub fn to_real<T: Real>(&self) -> T {
        T::from_f64_lossy(self.to_f64())
    }

    pub fn to_f64(&self) -> f64 {
        self.raw as f64 * self.format.resolution()
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self> {
        self.format.fit(self.raw as i128 + rhs.raw as i128)
    }

    /// Exact negation; fails only at the most negative pattern.
    pub fn checked_neg(self) -> Result<Self> {
        self.format.fit(-(self.raw as i128))
    }

    /// Product at double width, floored once.
    pub fn checked_mul(self, rhs: Self) -> Result<Self> {
        let wide = self.raw as i128 * rhs.raw as i128;
        self.format.fit(wide >> self.format.frac_bits)
    }

    /// `a*b + c*d` at double width with a single final floor.
    pub fn mul_add_pair(a: Self, b: Self, c: Self, d: Self) -> Result<Self> {
        let fmt = a.format;
        let wide = (a.raw as i128 * b.raw as i128)
            .checked_add(c.raw as i128 * d.raw as i128)
            .ok_or_else(|| fmt.overflow(a.to_f64() * b.to_f64() + c.to_f64() * d.to_f64()))?;
        fmt.fit(wide >> fmt.frac_bits)
    }

    /// `floor(1/v)` to the format's resolution, computed exactly.
    pub fn recip(self) -> Result<Self> {
        if self.raw == 0 {
            return Err(QadError::Domain {
                primitive: "reciprocal".into(),
                value: 0.0,
            });
        }
        let num = 1i128 << (2 * self.format.frac_bits);
        self.format
            .fit(Integer::div_floor(&num, &(self.raw as i128)))
    }

    /// `floor(-d / v^2)` to the format's resolution, computed exactly.
    pub fn recip_deriv(v: Self, d: Self) -> Result<Self> {
        if v.raw == 0 {
            return Err(QadError::Domain {
                primitive: "reciprocal".into(),
                value: 0.0,
            });
        }
        let fmt = v.format;
        let num = -(BigInt::from(d.raw) << (2 * fmt.frac_bits as usize));
        let den = BigInt::from(v.raw) * BigInt::from(v.raw);
        let q = num.div_floor(&den);
        match q.to_i128() {
            Some(raw) => fmt.fit(raw),
            None => Err(fmt.overflow(-d.to_f64() / (v.to_f64() * v.to_f64()))),
        }
    }
}

/// Floors `x` onto the grid of `fmt`.
pub fn encode(x: f64, fmt: FixedPointFormat) -> Result<FixedPointValue> {
    if !x.is_finite() {
        return Err(fmt.overflow(x));
    }
    // Scaling by a power of two is exact, so the floor is exact as well.
    let scaled = (x * pow2(fmt.frac_bits as i32)).floor();
    let limit = pow2(fmt.total_bits() as i32 - 1);
    if scaled < -limit || scaled >= limit {
        return Err(fmt.overflow(x));
    }
    Ok(FixedPointValue {
        raw: scaled as i64,
        format: fmt,
    })
}

pub fn decode(v: FixedPointValue) -> f64 {
    v.to_f64()
}

/// The truncation model applied to every node output.
pub fn truncate_to(x: f64, fmt: FixedPointFormat) -> Result<f64> {
    encode(x, fmt).map(decode)
}

impl fmt::Display for FixedPointValue {
    /// Big-endian bits with the radix point after the integer part,
    /// e.g. `0010.1000`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.format.total_bits() as usize;
        let bits = self.bits();
        let mut s = String::with_capacity(n + 1);
        for i in (0..n).rev() {
            s.push(if (bits >> i) & 1 == 1 { '1' } else { '0' });
            if i == self.format.frac_bits as usize && i != 0 {
                s.push('.');
            }
        }
        f.write_str(&s)
    }
}

impl FromStr for FixedPointValue {
    type Err = QadError;

    fn from_str(s: &str) -> Result<Self> {
        let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
        let format = FixedPointFormat::new(int_part.len() as u32, frac_part.len() as u32)?;
        let mut bits = 0u64;
        for c in int_part.chars().chain(frac_part.chars()) {
            bits = (bits << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => {
                        return Err(QadError::InvalidFormat(format!(
                            "unexpected character {c:?} in bit string {s:?}"
                        )))
                    }
                };
        }
        Ok(Self::from_bits(bits, format))
    }
}

impl Serialize for FixedPointValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FixedPointValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
