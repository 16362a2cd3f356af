//! The optimal value function `v(s)` of the continuous Gambler's problem.
//!
//! For `s = 0.b_1 b_2 ...` in binary,
//!
//! ```text
//! v(s) = sum_i (1-p) gamma^i b_i prod_{j<i} ((1-p) + (2p-1) b_j),   v(1) = 1.
//! ```
//!
//! Each 1-bit adds `(1-p)` times the running weight; every bit multiplies the
//! weight by `gamma` and by `p` (bit 1) or `1-p` (bit 0). After the first `l`
//! bits the weight is the self-similarity scale of the dyadic interval those
//! bits select.

use num_rational::BigRational;

use crate::dyadic::{self, Dyadic, Rational};
use crate::error::{Error, Result};
use crate::expansion::{expand_rational, BitExpansion};
use crate::params::{Params, Scalar};

/// Period search depth for exact rational states.
pub const RATIONAL_DEPTH: usize = 1 << 16;

/// Cap on the truncation depth chosen from a tolerance.
pub const MAX_TRUNCATION_DEPTH: usize = 4096;

/// Largest lattice tabulated in memory.
pub const MAX_LATTICE_LEVEL: u32 = 28;

/// Running partial sum of the series.
#[derive(Debug, Clone)]
pub(crate) struct Series<T> {
    pub value: T,
    pub weight: T,
    win: T,
    lose: T,
    gamma: T,
}

impl<T: Scalar> Series<T> {
    pub fn new(params: &Params) -> Self {
        Self { value: T::zero(), weight: T::one(), win: params.win(), lose: params.lose(), gamma: params.discount() }
    }

    pub fn push(&mut self, bit: bool) {
        self.weight = self.weight.clone() * self.gamma.clone();
        if bit {
            self.value = self.value.clone() + self.win.clone() * self.weight.clone();
            self.weight = self.weight.clone() * self.lose.clone();
        } else {
            self.weight = self.weight.clone() * self.win.clone();
        }
    }

    pub fn extend(&mut self, bits: &[bool]) {
        for &b in bits {
            self.push(b);
        }
    }
}

/// Sums the series over `prefix` followed by `period` repeated forever.
///
/// The repeating part is a geometric series in the period's weight, summed in
/// closed form. No normalisation is applied, so a period of all 1s evaluates
/// the non-terminating representation (the left limit at a dyadic point).
pub(crate) fn series_value<T: Scalar>(prefix: &[bool], period: &[bool], params: &Params) -> T {
    let mut head = Series::<T>::new(params);
    head.extend(prefix);
    if period.is_empty() {
        return head.value;
    }
    let mut block = Series::<T>::new(params);
    block.extend(period);
    let ratio = T::one() - block.weight;
    head.value + head.weight * block.value / ratio
}

/// Upper bound on the series tail after `depth` bits:
/// `(1-p) gamma^(depth+1) p^depth / (1 - gamma p)`.
pub fn tail_bound(depth: usize, params: &Params) -> f64 {
    let p = params.p_f64();
    let g = params.gamma_f64();
    let depth = depth.min(i32::MAX as usize) as i32;
    (1.0 - p) * g.powi(depth + 1) * p.powi(depth) / (1.0 - g * p)
}

/// Smallest depth whose tail bound is at most `tol`, capped at
/// [`MAX_TRUNCATION_DEPTH`].
pub fn truncation_depth(tol: f64, params: &Params) -> Result<usize> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidTolerance(tol));
    }
    let p = params.p_f64();
    let g = params.gamma_f64();
    let lead = (1.0 - p) * g;
    if lead == 0.0 {
        return Ok(0);
    }
    let ratio = (tol * (1.0 - g * p) / lead).ln() / (g * p).ln();
    let mut depth =
        if ratio.is_finite() && ratio > 0.0 { (ratio.ceil() as usize).min(MAX_TRUNCATION_DEPTH) } else { 0 };
    // The closed form bounds (gamma p)^L; step past rounding at the boundary.
    while depth < MAX_TRUNCATION_DEPTH && tail_bound(depth, params) > tol {
        depth += 1;
    }
    Ok(depth)
}

pub(crate) fn value_dyadic_in<T: Scalar>(d: &Dyadic, params: &Params) -> T {
    if d.is_one() {
        return T::one();
    }
    let bits = d.bits(d.level()).expect("canonical level");
    series_value(&bits, &[], params)
}

/// `v(d)` on a dyadic point, by the finite sum over its bits.
pub fn value_dyadic(d: &Dyadic, params: &Params) -> f64 {
    value_dyadic_in(d, params)
}

/// Exact `v(d)` in rational arithmetic.
pub fn value_dyadic_exact(d: &Dyadic, params: &Params) -> BigRational {
    value_dyadic_in(d, params)
}

fn value_expansion_in<T: Scalar>(bits: &BitExpansion, params: &Params, tol: f64) -> Result<T> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidTolerance(tol));
    }
    if bits.is_one() {
        return Ok(T::one());
    }
    if bits.is_truncated() {
        let available = bits.prefix().len();
        if tail_bound(available, params) > tol {
            return Err(Error::InsufficientDepth { available, needed: truncation_depth(tol, params)? });
        }
    }
    Ok(series_value(bits.prefix(), bits.period(), params))
}

/// `v(s)` for an expansion. Terminating and periodic expansions are summed in
/// closed form; a truncated expansion is accepted only if its tail bound is
/// within `tol`.
pub fn value_expansion(bits: &BitExpansion, params: &Params, tol: f64) -> Result<f64> {
    value_expansion_in(bits, params, tol)
}

/// Exact `v(s)` for a terminating or periodic expansion.
pub fn value_expansion_exact(bits: &BitExpansion, params: &Params) -> Result<BigRational> {
    if bits.is_truncated() {
        return Err(Error::InsufficientDepth { available: bits.prefix().len(), needed: usize::MAX });
    }
    value_expansion_in(bits, params, 1.0)
}

/// `v(x)` for an exact rational state. Non-dyadic states are periodic in
/// binary and evaluated by the geometric closed form.
pub fn value_rational(x: &Rational, params: &Params) -> Result<f64> {
    dyadic::check_unit(x)?;
    let bits = expand_rational(x, RATIONAL_DEPTH)?;
    value_expansion(&bits, params, 1e-15)
}

pub fn value_rational_exact(x: &Rational, params: &Params) -> Result<BigRational> {
    dyadic::check_unit(x)?;
    value_expansion_exact(&expand_rational(x, RATIONAL_DEPTH)?, params)
}

/// `v(x)` at a machine real, truncating its (finite) binary expansion at the
/// depth that guarantees `tol`.
pub fn value_real(x: f64, params: &Params, tol: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfUnitInterval(x.to_string()));
    }
    let depth = truncation_depth(tol, params)?;
    if x == 1.0 {
        return Ok(1.0);
    }
    let mut series = Series::<f64>::new(params);
    let mut frac = x;
    for _ in 0..depth {
        // Doubling a float in [0, 1) and removing the integer part is exact.
        frac *= 2.0;
        let bit = frac >= 1.0;
        if bit {
            frac -= 1.0;
        }
        series.push(bit);
        if frac == 0.0 {
            break;
        }
    }
    Ok(series.value)
}

/// Self-similarity scale of the dyadic interval `[sbar, sbar + 2^-level]`:
/// `gamma^level prod_{j<=level} ((1-p) + (2p-1) b_j)`.
pub fn scale(sbar: &Dyadic, level: u32, params: &Params) -> Result<f64> {
    scale_in(sbar, level, params)
}

pub(crate) fn scale_in<T: Scalar>(sbar: &Dyadic, level: u32, params: &Params) -> Result<T> {
    let bits = sbar.bits(level)?;
    let mut series = Series::<T>::new(params);
    series.extend(&bits);
    Ok(series.weight)
}

/// `v(s)` for `s = sbar + 2^-level * t` through the self-similar form
/// `v(sbar) + scale(sbar, level) * v(t)`.
///
/// `t = 1` is the right end of the interval approached from inside, i.e. the
/// scale itself, and agrees with `v(sbar + 2^-level)` only when `gamma = 1`.
pub fn self_similar_eval(sbar: &Dyadic, level: u32, tail: &BitExpansion, params: &Params, tol: f64) -> Result<f64> {
    if sbar.is_one() {
        return Err(Error::Precondition("the interval must start below 1".into()));
    }
    let c = scale(sbar, level, params)?;
    Ok(value_dyadic(sbar, params) + c * value_expansion(tail, params, tol)?)
}

fn q_value_in<T: Scalar>(s: &Rational, a: &Rational, params: &Params) -> Result<T> {
    if !dyadic::is_feasible(s, a) {
        return Err(Error::InfeasibleAction { state: s.to_string(), action: a.to_string() });
    }
    let down = dyadic::sub_rational(s, a)?;
    let up = dyadic::add_rational(s, a)?;
    let eval = |x: &Rational| -> Result<T> {
        dyadic::check_unit(x)?;
        let bits = expand_rational(x, RATIONAL_DEPTH)?;
        value_expansion_in(&bits, params, 1e-15)
    };
    let gamma: T = params.discount();
    Ok(params.lose::<T>() * gamma.clone() * eval(&down)? + params.win::<T>() * gamma * eval(&up)?)
}

/// One-step backup `p gamma v(s-a) + (1-p) gamma v(s+a)` for a feasible
/// action `0 < a <= min(s, 1-s)`.
pub fn q_value(s: &Rational, a: &Rational, params: &Params) -> Result<f64> {
    q_value_in(s, a, params)
}

pub fn q_value_exact(s: &Rational, a: &Rational, params: &Params) -> Result<BigRational> {
    q_value_in(s, a, params)
}

/// [`q_value`] on dyadic arguments.
pub fn q_value_dyadic(s: &Dyadic, a: &Dyadic, params: &Params) -> Result<f64> {
    q_value(&s.to_rational(), &a.to_rational(), params)
}

fn fill_lattice<T: Scalar>(out: &mut [T], base: T, scale: T, series: &Series<T>) {
    if out.len() == 1 {
        out[0] = base;
        return;
    }
    let (left, right) = out.split_at_mut(out.len() / 2);
    let step = scale.clone() * series.gamma.clone();
    let mid = base.clone() + step.clone() * series.win.clone();
    fill_lattice(left, base, step.clone() * series.win.clone(), series);
    fill_lattice(right, mid, step * series.lose.clone(), series);
}

pub(crate) fn lattice_in<T: Scalar>(level: u32, params: &Params) -> Result<Vec<T>> {
    if level > MAX_LATTICE_LEVEL {
        return Err(Error::Precondition(format!("lattice level {level} exceeds {MAX_LATTICE_LEVEL}")));
    }
    let n = 1usize << level;
    let mut out = vec![T::zero(); n];
    fill_lattice(&mut out, T::zero(), T::one(), &Series::new(params));
    out.push(T::one());
    Ok(out)
}

/// `v(k / 2^level)` for `k = 0..=2^level`, built top-down by self-similarity
/// in `O(2^level)`.
pub fn lattice_values(level: u32, params: &Params) -> Result<Vec<f64>> {
    lattice_in(level, params)
}

pub fn lattice_values_exact(level: u32, params: &Params) -> Result<Vec<BigRational>> {
    lattice_in(level, params)
}

/// Mean of `v` over `[0, 1]`, `(1-p) gamma / (2 - gamma)`.
///
/// Bits of a uniform state are independent fair coins, and each factor
/// `(1-p) + (2p-1) b` has mean `1/2`, so the series has mean
/// `(1-p) sum_i (gamma/2)^i`.
pub fn mean_value(params: &Params) -> f64 {
    mean_value_in(params)
}

pub fn mean_value_exact(params: &Params) -> BigRational {
    mean_value_in(params)
}

pub(crate) fn mean_value_in<T: Scalar>(params: &Params) -> T {
    let two = T::one() + T::one();
    let gamma: T = params.discount();
    params.win::<T>() * gamma.clone() / (two - gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, g: f64) -> Params {
        Params::new(p, g).unwrap()
    }

    fn d(k: u64, level: u32) -> Dyadic {
        Dyadic::new(k, level).unwrap()
    }

    fn exact(x: &str) -> BigRational {
        crate::params::parse_rational(x).unwrap()
    }

    /// Independent oracle: direct series over the first `depth` bits of k/den.
    fn series_oracle(num: u64, den: u64, p: f64, g: f64, depth: usize) -> f64 {
        let mut total = 0.0;
        let mut weight = 1.0;
        let mut rem = num;
        for _ in 0..depth {
            rem *= 2;
            let bit = rem >= den;
            if bit {
                rem -= den;
            }
            weight *= g;
            if bit {
                total += (1.0 - p) * weight;
                weight *= p;
            } else {
                weight *= 1.0 - p;
            }
        }
        total
    }

    #[test]
    fn dyadic_examples() {
        let pm = params(0.6, 1.0);
        assert_eq!(value_dyadic_exact(&Dyadic::HALF, &pm), exact("0.4"));
        assert_eq!(value_dyadic_exact(&d(1, 2), &pm), exact("0.16"));
        assert_eq!(value_dyadic_exact(&d(3, 2), &pm), exact("0.64"));
        assert_eq!(value_dyadic_exact(&d(3, 3), &pm), exact("0.256"));
        assert_eq!(value_dyadic_exact(&Dyadic::HALF, &params(0.6, 0.9)), exact("0.36"));
        assert_eq!(value_dyadic(&Dyadic::ZERO, &pm), 0.0);
        assert_eq!(value_dyadic(&Dyadic::ONE, &params(0.6, 0.5)), 1.0);
    }

    #[test]
    fn expansion_examples() {
        let pm = params(0.6, 1.0);
        let two_thirds = expand_rational(&Rational::new(2, 3), 64).unwrap();
        let closed = value_expansion(&two_thirds, &pm, 1e-12).unwrap();
        let oracle = series_oracle(2, 3, 0.6, 1.0, 64);
        assert!((closed - oracle).abs() < 1e-14);
        assert!((closed - 0.4 / 0.76).abs() < 1e-15);
        assert_eq!(value_expansion_exact(&two_thirds, &pm).unwrap(), exact("10/19"));

        let zero = BitExpansion::terminating(vec![]);
        assert_eq!(value_expansion(&zero, &pm, 1e-12).unwrap(), 0.0);
        let five_eighths = BitExpansion::parse("101").unwrap();
        assert_eq!(value_expansion_exact(&five_eighths, &pm).unwrap(), exact("0.496"));
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let pm = params(0.6, 1.0);
        let e = BitExpansion::parse("1").unwrap();
        assert!(matches!(value_expansion(&e, &pm, 0.0), Err(Error::InvalidTolerance(_))));
        assert!(value_expansion(&e, &pm, -1.0).is_err());
        assert!(truncation_depth(f64::NAN, &pm).is_err());
    }

    #[test]
    fn truncated_expansions_need_depth() {
        let pm = params(0.6, 1.0);
        let short = crate::expansion::expand_binary(1, 1023, 5).unwrap();
        assert!(matches!(value_expansion(&short, &pm, 1e-12), Err(Error::InsufficientDepth { available: 5, .. })));
        assert!(value_expansion(&short, &pm, 0.5).is_ok());
    }

    #[test]
    fn truncation_depth_meets_tolerance() {
        for (p, g) in [(0.6, 1.0), (0.9, 0.9), (0.55, 0.5), (0.75, 1.0)] {
            let pm = params(p, g);
            for tol in [1e-3, 1e-8, 1e-12] {
                let depth = truncation_depth(tol, &pm).unwrap();
                assert!(tail_bound(depth, &pm) <= tol);
                assert!(depth == 0 || tail_bound(depth - 1, &pm) > tol);
            }
        }
        assert_eq!(truncation_depth(1e-9, &params(0.6, 0.0)).unwrap(), 0);
    }

    #[test]
    fn q_value_examples() {
        let pm = params(0.6, 1.0);
        let q = |s: (u64, u64), a: (u64, u64)| {
            q_value_exact(&Rational::new(s.0, s.1), &Rational::new(a.0, a.1), &pm).unwrap()
        };
        assert_eq!(q((1, 2), (1, 2)), exact("0.4"));
        assert_eq!(q((1, 2), (1, 4)), exact("0.352"));
        assert_eq!(q((3, 4), (1, 4)), exact("0.64"));
        let err = q_value(&Rational::new(3, 4), &Rational::new(1, 2), &pm);
        assert!(matches!(err, Err(Error::InfeasibleAction { .. })));
        assert!(q_value(&Rational::new(1, 2), &Rational::from_integer(0), &pm).is_err());
    }

    #[test]
    fn self_similar_examples() {
        let pm = params(0.6, 1.0);
        let half = BitExpansion::parse("1").unwrap();
        let quarter = BitExpansion::parse("01").unwrap();
        let v = self_similar_eval(&Dyadic::HALF, 1, &half, &pm, 1e-12).unwrap();
        assert!((v - 0.64).abs() < 1e-15);
        let v = self_similar_eval(&Dyadic::HALF, 1, &quarter, &pm, 1e-12).unwrap();
        assert!((v - 0.496).abs() < 1e-15);
        let third = expand_rational(&Rational::new(1, 3), 64).unwrap();
        let v = self_similar_eval(&Dyadic::ZERO, 0, &third, &pm, 1e-12).unwrap();
        assert_eq!(v, value_expansion(&third, &pm, 1e-12).unwrap());
    }

    #[test]
    fn value_real_matches_dyadic() {
        let pm = params(0.7, 0.95);
        for k in 0..=64u64 {
            let x = d(k, 6);
            let v = value_real(x.to_f64(), &pm, 1e-13).unwrap();
            assert!((v - value_dyadic(&x, &pm)).abs() < 1e-13);
        }
        assert!(value_real(1.5, &pm, 1e-9).is_err());
    }

    #[test]
    fn lattice_matches_direct_sums() {
        let pm = params(0.75, 0.9);
        let table = lattice_values(10, &pm).unwrap();
        for (k, &v) in table.iter().enumerate() {
            let direct = value_dyadic(&d(k as u64, 10), &pm);
            assert!((v - direct).abs() < 1e-15, "k={k}");
        }
        let exact_table = lattice_values_exact(6, &pm).unwrap();
        for (k, v) in exact_table.iter().enumerate() {
            assert_eq!(v, &value_dyadic_exact(&d(k as u64, 6), &pm));
        }
    }

    #[test]
    fn mean_value_at_gamma_one_is_v_half() {
        let pm = params(0.6, 1.0);
        assert_eq!(mean_value_exact(&pm), value_dyadic_exact(&Dyadic::HALF, &pm));
        assert_eq!(mean_value_exact(&params(0.6, 0.9)), exact("0.36") / exact("1.1"));
    }
}
