//! Unsigned machine words of configurable bit width with wrapping arithmetic.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// Bit width used by campaigns unless configured otherwise.
pub const DEFAULT_WIDTH: u32 = 256;

/// Smallest width the tooling accepts. Small widths keep property tests fast.
pub const MIN_WIDTH: u32 = 8;

/// Largest accepted width.
pub const MAX_WIDTH: u32 = 512;

/// An unsigned integer value. Every arithmetic entry point reduces modulo
/// 2^width, so a `Value` produced by those entry points always satisfies
/// 0 <= magnitude < 2^width for the width it was built with.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Value(BigUint);

impl Value {
    pub fn zero() -> Self {
        Value(BigUint::zero())
    }

    pub fn one() -> Self {
        Value(BigUint::one())
    }

    pub fn from_u64(x: u64) -> Self {
        Value(BigUint::from(x))
    }

    /// Builds a value from an arbitrary magnitude, reducing modulo 2^width.
    pub fn from_biguint_wrapped(x: BigUint, width: u32) -> Self {
        Value(x % modulus(width))
    }

    /// 2^width - 1.
    pub fn max_for(width: u32) -> Self {
        Value(modulus(width) - BigUint::one())
    }

    pub fn magnitude(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Result plus a flag reporting whether the sum wrapped.
    pub fn wrapping_add(&self, rhs: &Value, width: u32) -> (Value, bool) {
        let sum = &self.0 + &rhs.0;
        let m = modulus(width);
        if sum >= m {
            (Value(sum - m), true)
        } else {
            (Value(sum), false)
        }
    }

    pub fn wrapping_sub(&self, rhs: &Value, width: u32) -> (Value, bool) {
        if self.0 >= rhs.0 {
            (Value(&self.0 - &rhs.0), false)
        } else {
            (Value(modulus(width) + &self.0 - &rhs.0), true)
        }
    }

    pub fn wrapping_mul(&self, rhs: &Value, width: u32) -> (Value, bool) {
        let product = &self.0 * &rhs.0;
        let m = modulus(width);
        if product >= m {
            (Value(product % m), true)
        } else {
            (Value(product), false)
        }
    }

    /// The value with one bit inverted. `bit` must be below `width`.
    pub fn bit_flipped(&self, bit: u32, width: u32) -> Value {
        debug_assert!(bit < width);
        let mask = BigUint::one() << bit;
        Value(&self.0 ^ mask)
    }

    pub fn to_u64_saturating(&self) -> u64 {
        use num_traits::ToPrimitive;
        self.0.to_u64().unwrap_or(u64::MAX)
    }

    pub fn parse_decimal(s: &str) -> Option<Value> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        s.parse::<BigUint>().ok().map(Value)
    }

    /// Typed counterpart of `parse_decimal`: admits any magnitude without
    /// reducing it. Arithmetic entry points wrap later as usual.
    pub fn from_biguint(x: BigUint) -> Value {
        Value(x)
    }
}

/// 2^width.
pub fn modulus(width: u32) -> BigUint {
    BigUint::one() << width
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::from_u64(x)
    }
}
