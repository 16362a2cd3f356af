//! Increments of `v` across neighbouring lattice points, and the jumps of `v`
//! at dyadic points when `gamma < 1`.

use num_rational::BigRational;
use num_traits::One;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::params::{Params, Scalar};
use crate::value::{series_value, value_dyadic_in, Series};

/// Increments around a lattice point `s` at level `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffReport<T = f64> {
    pub site: Dyadic,
    pub level: u32,
    /// `v(s + 2^-(l+1)) - v(s)`; absent at `s = 1`.
    pub forward: Option<T>,
    /// `v(s) - v(s - 2^-(l+1))`.
    pub backward: T,
    /// Closed-form lower bound on `backward`, attained iff `gamma = 1`.
    pub bound: T,
}

impl<T: Scalar> DiffReport<T> {
    pub fn holds(&self) -> bool {
        self.backward >= self.bound
    }
}

fn checked_site(s: &Dyadic, level: u32) -> Result<()> {
    if level < s.level() {
        return Err(Error::Precondition(format!("{s} is not on the level-{level} lattice")));
    }
    if level >= crate::dyadic::MAX_LEVEL {
        return Err(Error::Precondition(format!("level {level} leaves no room for a half step")));
    }
    Ok(())
}

pub(crate) fn forward_diff_in<T: Scalar>(s: &Dyadic, level: u32, params: &Params) -> Result<T> {
    checked_site(s, level)?;
    if s.is_one() {
        return Err(Error::Precondition("no forward increment at s = 1".into()));
    }
    let mut series = Series::<T>::new(params);
    series.extend(&s.bits(level)?);
    // Appending the bit 1 at position l+1 adds exactly (1-p) * weight * gamma.
    let gamma: T = params.discount();
    Ok(params.win::<T>() * gamma * series.weight)
}

/// `v(s + 2^-(l+1)) - v(s) = (1-p) gamma^(l+1) prod_{j<=l} ((1-p) + (2p-1) b_j)`
/// for `s` on the level-`l` lattice (including 0).
pub fn forward_diff(s: &Dyadic, level: u32, params: &Params) -> Result<f64> {
    forward_diff_in(s, level, params)
}

pub fn forward_diff_exact(s: &Dyadic, level: u32, params: &Params) -> Result<BigRational> {
    forward_diff_in(s, level, params)
}

pub(crate) fn backward_diff_in<T: Scalar>(s: &Dyadic, level: u32, params: &Params) -> Result<DiffReport<T>> {
    checked_site(s, level)?;
    if s.is_zero() {
        return Err(Error::Precondition("no backward increment at s = 0".into()));
    }
    let step = Dyadic::unit(level + 1)?;
    let below = s.checked_sub(&step)?;
    let backward = value_dyadic_in::<T>(s, params) - value_dyadic_in::<T>(&below, params);
    let lose: T = params.lose();
    let gamma: T = params.discount();
    let gamma_l1 = pow(&gamma, level + 1);

    let bound = if s.is_one() {
        pow(&lose, level + 1) * gamma_l1
    } else {
        // Last 1-bit of s sits at position k = canonical level.
        let k = s.level();
        let prefix = factor_product::<T>(&s.bits(k)?[..(k - 1) as usize], params);
        pow(&lose, level - k + 1) * params.win::<T>() * gamma_l1 * prefix
    };
    let forward = if s.is_one() { None } else { Some(forward_diff_in(s, level, params)?) };
    Ok(DiffReport { site: *s, level, forward, backward, bound })
}

/// Backward increment at `s` on the level-`l` lattice with its lower bound
/// `p^(l-k+1) (1-p) gamma^(l+1) prod_{j<k} ((1-p) + (2p-1) b_j)` (or
/// `(p gamma)^(l+1)` at `s = 1`), where `k` is the position of the last 1-bit.
pub fn backward_diff(s: &Dyadic, level: u32, params: &Params) -> Result<DiffReport> {
    backward_diff_in(s, level, params)
}

pub fn backward_diff_exact(s: &Dyadic, level: u32, params: &Params) -> Result<DiffReport<BigRational>> {
    backward_diff_in(s, level, params)
}

/// `prod_j ((1-p) + (2p-1) b_j)`: `p` per 1-bit, `1-p` per 0-bit.
pub(crate) fn factor_product<T: Scalar>(bits: &[bool], params: &Params) -> T {
    let lose: T = params.lose();
    let win: T = params.win();
    bits.iter().fold(T::one(), |acc, &b| acc * if b { lose.clone() } else { win.clone() })
}

fn pow<T: Scalar>(x: &T, n: u32) -> T {
    (0..n).fold(T::one(), |acc, _| acc * x.clone())
}

/// Left limit of `v` at `s` and the jump `v(s) - v(s-)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jump<T = f64> {
    pub left_limit: T,
    pub jump: T,
}

pub(crate) fn left_limit_and_jump_in<T: Scalar>(s: &Dyadic, params: &Params) -> Result<Jump<T>> {
    if s.is_zero() {
        return Err(Error::Precondition("s = 0 has no left neighbourhood".into()));
    }
    // s = 0.b_1..b_{k-1} 1 is approached from below by 0.b_1..b_{k-1} 0 111...
    let prefix = if s.is_one() {
        Vec::new()
    } else {
        let mut bits = s.bits(s.level())?;
        *bits.last_mut().expect("interior dyadic has bits") = false;
        bits
    };
    let left_limit: T = series_value(&prefix, &[true], params);
    let value: T = value_dyadic_in(s, params);
    Ok(Jump { jump: value - left_limit.clone(), left_limit })
}

/// Left limit from the non-terminating expansion, summed in closed form.
///
/// At an interior dyadic with last 1-bit at position `k` the jump is
/// `gamma^k prod_{j<k} ((1-p) + (2p-1) b_j) (1-p)(1-gamma)/(1-gamma p)`; at
/// `s = 1` it is `(1-gamma)/(1-gamma p)`. Both vanish iff `gamma = 1`.
pub fn left_limit_and_jump(s: &Dyadic, params: &Params) -> Result<Jump> {
    left_limit_and_jump_in(s, params)
}

pub fn left_limit_and_jump_exact(s: &Dyadic, params: &Params) -> Result<Jump<BigRational>> {
    left_limit_and_jump_in(s, params)
}

/// Closed form of the jump at an interior dyadic or at 1.
pub fn jump_closed_form(s: &Dyadic, params: &Params) -> Result<BigRational> {
    if s.is_zero() {
        return Err(Error::Precondition("s = 0 has no left neighbourhood".into()));
    }
    let one = BigRational::one();
    let gamma = params.gamma().clone();
    let p = params.p().clone();
    let tail = (&one - &gamma) / (&one - &gamma * &p);
    if s.is_one() {
        return Ok(tail);
    }
    let k = s.level();
    let prefix = factor_product::<BigRational>(&s.bits(k)?[..(k - 1) as usize], params);
    Ok(pow(&gamma, k) * prefix * (one - p) * tail)
}
