//! Eventually periodic binary expansions.

use std::collections::HashMap;
use std::fmt;

use num_traits::CheckedAdd;

use crate::dyadic::{Dyadic, Rational, MAX_LEVEL};
use crate::error::{Error, Result};

/// Binary expansion `0.prefix (period)*` of a state in `[0, 1]`.
///
/// Expansions ending in repeating 1s are rewritten to their terminating form,
/// so `0.0111...` is stored as `0.1`. The point `1` itself (`0.111...`) is
/// represented by [`BitExpansion::one`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitExpansion {
    prefix: Vec<bool>,
    period: Vec<bool>,
    one: bool,
    truncated: bool,
}

impl BitExpansion {
    pub fn new(prefix: Vec<bool>, period: Vec<bool>) -> Self {
        let mut exp = Self { prefix, period, one: false, truncated: false };
        exp.normalize();
        exp
    }

    /// Terminating expansion.
    pub fn terminating(bits: Vec<bool>) -> Self {
        Self::new(bits, Vec::new())
    }

    pub fn one() -> Self {
        Self { prefix: Vec::new(), period: Vec::new(), one: true, truncated: false }
    }

    pub fn from_dyadic(d: &Dyadic) -> Self {
        if d.is_one() {
            return Self::one();
        }
        Self::terminating(d.bits(d.level()).expect("canonical level"))
    }

    /// Parses `0101` or `01(10)` (parenthesised repeating block).
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidRational(text.to_string());
        let bits = |s: &str| -> Result<Vec<bool>> {
            s.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(bad()),
                })
                .collect()
        };
        let t = text.trim();
        let t = t.strip_prefix("0.").unwrap_or(t);
        match t.split_once('(') {
            Some((prefix, rest)) => {
                let period = rest.strip_suffix(')').ok_or_else(bad)?;
                if period.is_empty() {
                    return Err(bad());
                }
                Ok(Self::new(bits(prefix)?, bits(period)?))
            }
            None => Ok(Self::terminating(bits(t)?)),
        }
    }

    pub fn prefix(&self) -> &[bool] {
        &self.prefix
    }

    pub fn period(&self) -> &[bool] {
        &self.period
    }

    pub fn is_one(&self) -> bool {
        self.one
    }

    pub fn is_terminating(&self) -> bool {
        self.period.is_empty()
    }

    /// True when the expansion was cut off before its period was found; the
    /// prefix is then only the leading bits of the true expansion.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    /// Terminating, untruncated expansions are dyadic.
    pub fn to_dyadic(&self) -> Option<Dyadic> {
        if self.one {
            return Some(Dyadic::ONE);
        }
        if !self.period.is_empty() || self.truncated || self.prefix.len() > MAX_LEVEL as usize {
            return None;
        }
        let k = self.prefix.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        Dyadic::new(k, self.prefix.len() as u32).ok()
    }

    /// Exact value for expansions short enough to fit `u64` arithmetic.
    pub fn to_rational(&self) -> Option<Rational> {
        if self.one {
            return Some(Rational::from_integer(1));
        }
        if self.truncated {
            return None;
        }
        let m = self.prefix.len() as u32;
        let k = self.period.len() as u32;
        if m + k > 62 {
            return None;
        }
        let head = self.prefix.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        let head = Rational::new(head, 1u64 << m);
        if k == 0 {
            return Some(head);
        }
        let block = self.period.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        let tail = Rational::new(block, ((1u64 << k) - 1) << m);
        head.checked_add(&tail)
    }

    fn normalize(&mut self) {
        if self.period.iter().all(|&b| !b) {
            self.period.clear();
        } else if self.period.iter().all(|&b| b) {
            // 0.x...x0111... == 0.x...x1
            self.period.clear();
            match self.prefix.iter().rposition(|&b| !b) {
                Some(i) => {
                    self.prefix.truncate(i + 1);
                    self.prefix[i] = true;
                }
                None => {
                    self.prefix.clear();
                    self.one = true;
                    return;
                }
            }
        } else {
            self.reduce_period();
        }
        if self.period.is_empty() {
            while self.prefix.last() == Some(&false) {
                self.prefix.pop();
            }
        }
    }

    fn reduce_period(&mut self) {
        // Shortest repeating block.
        let n = self.period.len();
        if let Some(len) = (1..n)
            .filter(|d| n.is_multiple_of(*d))
            .find(|&d| self.period.iter().enumerate().all(|(i, &b)| b == self.period[i % d]))
        {
            self.period.truncate(len);
        }
        // Roll the period left into the prefix while the prefix ends with the
        // period's last bit.
        while let (Some(&last), Some(&tail)) = (self.prefix.last(), self.period.last()) {
            if last != tail {
                break;
            }
            self.prefix.pop();
            self.period.rotate_right(1);
        }
    }
}

impl fmt::Display for BitExpansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.one {
            return write!(f, "1");
        }
        write!(f, "0.")?;
        for &b in &self.prefix {
            write!(f, "{}", b as u8)?;
        }
        if !self.period.is_empty() {
            write!(f, "(")?;
            for &b in &self.period {
                write!(f, "{}", b as u8)?;
            }
            write!(f, ")")?;
        }
        if self.truncated {
            write!(f, "...")?;
        }
        Ok(())
    }
}

/// Binary expansion of `num/den` by long division.
///
/// The period is found by remembering remainders. If `depth` bits are produced
/// before a remainder repeats, the leading `depth` bits are returned and the
/// result is flagged truncated.
pub fn expand_binary(num: u64, den: u64, depth: usize) -> Result<BitExpansion> {
    if den == 0 || num > den {
        return Err(Error::OutOfUnitInterval(format!("{num}/{den}")));
    }
    if depth == 0 {
        return Err(Error::Precondition("expansion depth must be positive".into()));
    }
    if num == den {
        return Ok(BitExpansion::one());
    }
    let den = den as u128;
    let mut rem = num as u128;
    let mut bits = Vec::new();
    let mut seen: HashMap<u128, usize> = HashMap::new();
    while rem != 0 {
        if let Some(&start) = seen.get(&rem) {
            let period = bits.split_off(start);
            return Ok(BitExpansion::new(bits, period));
        }
        if bits.len() == depth {
            return Ok(BitExpansion { prefix: bits, period: Vec::new(), one: false, truncated: true });
        }
        seen.insert(rem, bits.len());
        rem <<= 1;
        if rem >= den {
            bits.push(true);
            rem -= den;
        } else {
            bits.push(false);
        }
    }
    Ok(BitExpansion::terminating(bits))
}

/// Expansion of an exact rational state.
pub fn expand_rational(x: &Rational, depth: usize) -> Result<BitExpansion> {
    expand_binary(*x.numer(), *x.denom(), depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn spec_examples() {
        let half = expand_binary(1, 2, 64).unwrap();
        assert_eq!(half.prefix(), bits("1").as_slice());
        assert!(half.is_terminating());

        let two_thirds = expand_binary(2, 3, 64).unwrap();
        assert!(two_thirds.prefix().is_empty());
        assert_eq!(two_thirds.period(), bits("10").as_slice());

        let zero = expand_binary(0, 1, 64).unwrap();
        assert!(zero.prefix().is_empty() && zero.is_terminating());
    }

    #[test]
    fn rejects_bad_fractions() {
        assert!(expand_binary(3, 2, 8).is_err());
        assert!(expand_binary(1, 0, 8).is_err());
    }

    #[test]
    fn trailing_ones_normalize() {
        let e = BitExpansion::new(bits("01"), bits("1"));
        assert_eq!(e, BitExpansion::terminating(bits("1")));
        let e = BitExpansion::new(bits("0"), bits("11"));
        assert_eq!(e, BitExpansion::terminating(bits("1")));
        assert!(BitExpansion::new(vec![], bits("1")).is_one());
        assert!(BitExpansion::new(bits("11"), bits("1")).is_one());
    }

    #[test]
    fn period_is_minimal() {
        let e = BitExpansion::new(bits("1"), bits("0101"));
        assert!(e.prefix().is_empty());
        assert_eq!(e.period(), bits("10").as_slice());
    }

    #[test]
    fn truncation_is_flagged() {
        // 1/1023 has period 10
        let e = expand_binary(1, 1023, 5).unwrap();
        assert!(e.is_truncated());
        assert_eq!(e.prefix().len(), 5);
        let e = expand_binary(1, 1023, 64).unwrap();
        assert!(!e.is_truncated());
        assert_eq!(e.period().len(), 10);
    }

    #[test]
    fn parse_round_trip() {
        let e = BitExpansion::parse("0.01(10)").unwrap();
        assert_eq!(e.to_rational().unwrap(), Rational::new(5, 12));
        assert_eq!(e.to_string(), "0.01(10)");
        let e = BitExpansion::parse("0.01(01)").unwrap();
        assert_eq!(e.to_rational().unwrap(), Rational::new(1, 3));
        assert_eq!(e.to_string(), "0.(01)");
        assert!(BitExpansion::parse("0.1(").is_err());
        assert!(BitExpansion::parse("012").is_err());
    }

    proptest! {
        #[test]
        fn expansion_recovers_the_rational(den in 1u64..5000, num_frac in 0.0f64..=1.0) {
            let num = (num_frac * den as f64).floor() as u64;
            let r = Rational::new(num, den);
            let e = expand_rational(&r, 1 << 14).unwrap();
            prop_assert!(!e.is_truncated());
            if let Some(back) = e.to_rational() {
                prop_assert_eq!(back, r);
            }
            prop_assert_eq!(e.is_terminating(), r.denom().is_power_of_two());
        }
    }
}
