//! Problem parameters and the scalar types the evaluators run over.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A number type the series evaluators can run over.
///
/// Implemented for `f64` (fast path) and [`BigRational`] (exact path). When
/// `p` and `gamma` are rationals every lattice value of the value function is
/// rational, so the exact path reproduces identities with `==`.
pub trait Scalar: Clone + Num + PartialOrd + fmt::Debug {
    fn from_rational(r: &BigRational) -> Self;
}

impl Scalar for f64 {
    fn from_rational(r: &BigRational) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for BigRational {
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
}

/// Probability of losing a bet `p` and discount factor `gamma`.
///
/// Both are stored as exact rationals; `Params::new(0.6, 0.9)` stores `3/5`
/// and `9/10` (the shortest decimal that round-trips the float), not the
/// binary approximation of the float.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Params {
    p: BigRational,
    gamma: BigRational,
}

impl Params {
    pub fn new(p: f64, gamma: f64) -> Result<Self> {
        if !p.is_finite() || !gamma.is_finite() {
            return Err(Error::InvalidParams(format!("p={p}, gamma={gamma} must be finite")));
        }
        Self::from_rationals(decimal_of_f64(p)?, decimal_of_f64(gamma)?)
    }

    pub fn from_rationals(p: BigRational, gamma: BigRational) -> Result<Self> {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        if p < half || p >= BigRational::one() {
            return Err(Error::InvalidParams(format!("p = {p} must satisfy 0.5 <= p < 1")));
        }
        if gamma < BigRational::zero() || gamma > BigRational::one() {
            return Err(Error::InvalidParams(format!("gamma = {gamma} must satisfy 0 <= gamma <= 1")));
        }
        Ok(Self { p, gamma })
    }

    /// Parses both parameters from `num/den` or decimal strings.
    pub fn parse(p: &str, gamma: &str) -> Result<Self> {
        Self::from_rationals(parse_rational(p)?, parse_rational(gamma)?)
    }

    /// Probability of losing a bet.
    pub fn p(&self) -> &BigRational {
        &self.p
    }

    pub fn gamma(&self) -> &BigRational {
        &self.gamma
    }

    pub fn p_f64(&self) -> f64 {
        f64::from_rational(&self.p)
    }

    pub fn gamma_f64(&self) -> f64 {
        f64::from_rational(&self.gamma)
    }

    pub fn is_undiscounted(&self) -> bool {
        self.gamma.is_one()
    }

    pub(crate) fn lose<T: Scalar>(&self) -> T {
        T::from_rational(&self.p)
    }

    pub(crate) fn win<T: Scalar>(&self) -> T {
        T::from_rational(&(BigRational::one() - &self.p))
    }

    pub(crate) fn discount<T: Scalar>(&self) -> T {
        T::from_rational(&self.gamma)
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p={}, gamma={}", self.p, self.gamma)
    }
}

/// Parses `num/den`, an integer, or a plain decimal (`0.625`) into an exact
/// rational. Decimals are read as `digits / 10^scale`; no float is involved.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let bad = || Error::InvalidRational(text.to_string());
    let t = text.trim();
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = t.split_once('/') {
        let num = BigInt::from_str_radix(num.trim(), 10).map_err(|_| bad())?;
        let den = BigInt::from_str_radix(den.trim(), 10).map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(num, den));
    }
    let (negative, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num = BigInt::from_str_radix(&digits, 10).map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10), frac_part.len());
    let value = BigRational::new(num, den);
    Ok(if negative { -value } else { value })
}

fn decimal_of_f64(x: f64) -> Result<BigRational> {
    // `{}` prints the shortest decimal that round-trips, never exponent form.
    parse_rational(&format!("{x}"))
}
