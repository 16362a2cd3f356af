//! Dyadic rationals `k / 2^level` in `[0, 1]`, and exact rational states.

use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedSub, One, Zero};

use crate::error::{Error, Result};

/// Exact rational state or action in `[0, 1]`.
pub type Rational = Ratio<u64>;

/// Deepest representable lattice: `2^63` is the largest power of two in `u64`.
pub const MAX_LEVEL: u32 = 63;

/// A dyadic rational `k / 2^level` in `[0, 1]`, kept in lowest terms.
///
/// Canonical form has `k` odd, except for zero (`0/2^0`) and one (`1/2^0`).
/// So `level` is the number of bits of the terminating binary expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dyadic {
    k: u64,
    level: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { k: 0, level: 0 };
    pub const ONE: Dyadic = Dyadic { k: 1, level: 0 };
    pub const HALF: Dyadic = Dyadic { k: 1, level: 1 };

    pub fn new(k: u64, level: u32) -> Result<Self> {
        if level > MAX_LEVEL || k > (1u64 << level) {
            return Err(Error::InvalidDyadic { k, level });
        }
        if k == 0 {
            return Ok(Self::ZERO);
        }
        let shift = k.trailing_zeros().min(level);
        Ok(Self { k: k >> shift, level: level - shift })
    }

    /// The unit step `2^-level`.
    pub fn unit(level: u32) -> Result<Self> {
        Self::new(1, level)
    }

    /// Numerator in lowest terms.
    pub fn numerator(&self) -> u64 {
        self.k
    }

    /// Denominator exponent in lowest terms: the position of the last 1-bit.
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn is_zero(&self) -> bool {
        self.k == 0
    }

    pub fn is_one(&self) -> bool {
        self.k == 1 && self.level == 0
    }

    /// Interior lattice point, i.e. a member of some `G_l`.
    pub fn is_interior(&self) -> bool {
        !self.is_zero() && !self.is_one()
    }

    /// Numerator when written over `2^level`; `level` must be at least the
    /// canonical level.
    pub fn numerator_at(&self, level: u32) -> Result<u64> {
        if level < self.level || level > MAX_LEVEL {
            return Err(Error::Precondition(format!("{self} cannot be written at level {level}")));
        }
        Ok(self.k << (level - self.level))
    }

    /// Bits `b_1..b_level` of the expansion, zero-padded past the canonical
    /// level. The value one has no bits of its own and is rejected.
    pub fn bits(&self, level: u32) -> Result<Vec<bool>> {
        if self.is_one() {
            return Err(Error::Precondition("1 has no terminating fractional expansion".into()));
        }
        let k = self.numerator_at(level)?;
        Ok((1..=level).map(|i| (k >> (level - i)) & 1 == 1).collect())
    }

    pub fn to_f64(&self) -> f64 {
        self.k as f64 / (self.level as f64).exp2()
    }

    pub fn to_rational(&self) -> Rational {
        Rational::new(self.k, 1u64 << self.level)
    }

    /// Recovers a dyadic from an exact rational, if its denominator is a
    /// power of two.
    pub fn from_rational(r: &Rational) -> Option<Self> {
        let den = *r.denom();
        if !den.is_power_of_two() {
            return None;
        }
        Self::new(*r.numer(), den.trailing_zeros()).ok()
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        let level = self.level.max(other.level);
        let sum = self.numerator_at(level)? + other.numerator_at(level)?;
        Self::new(sum, level).map_err(|_| Error::OutOfUnitInterval(format!("{self} + {other}")))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        let level = self.level.max(other.level);
        let a = self.numerator_at(level)?;
        let b = other.numerator_at(level)?;
        let diff = a.checked_sub(b).ok_or_else(|| Error::OutOfUnitInterval(format!("{self} - {other}")))?;
        Self::new(diff, level)
    }

    /// `1 - self`.
    pub fn complement(&self) -> Self {
        Self::ONE.checked_sub(self).expect("dyadics lie in [0, 1]")
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let level = self.level.max(other.level);
        let a = (self.k as u128) << (level - self.level);
        let b = (other.k as u128) << (level - other.level);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.k, self.level) {
            (0, _) => write!(f, "0"),
            (1, 0) => write!(f, "1"),
            (k, level) => write!(f, "{k}/{}", 1u64 << level),
        }
    }
}

impl From<Dyadic> for Rational {
    fn from(d: Dyadic) -> Self {
        d.to_rational()
    }
}

/// Checks `0 <= r <= 1`.
pub fn check_unit(r: &Rational) -> Result<()> {
    if r.numer() > r.denom() {
        return Err(Error::OutOfUnitInterval(r.to_string()));
    }
    Ok(())
}

pub(crate) fn add_rational(a: &Rational, b: &Rational) -> Result<Rational> {
    a.checked_add(b).ok_or_else(|| Error::Overflow(format!("{a} + {b}")))
}

pub(crate) fn sub_rational(a: &Rational, b: &Rational) -> Result<Rational> {
    if a < b {
        return Err(Error::OutOfUnitInterval(format!("{a} - {b}")));
    }
    a.checked_sub(b).ok_or_else(|| Error::Overflow(format!("{a} - {b}")))
}

/// `min(s, 1 - s)`: the largest feasible bet, and the bold action.
pub fn max_bet(s: &Rational) -> Rational {
    let rest = Rational::one() - s;
    if *s < rest {
        *s
    } else {
        rest
    }
}

/// Feasible action set `0 < a <= min(s, 1 - s)`.
pub fn is_feasible(s: &Rational, a: &Rational) -> bool {
    !a.is_zero() && *s > Rational::zero() && *s < Rational::one() && *a <= max_bet(s)
}
