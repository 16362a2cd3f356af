//! Integral, one-sided derivatives, arc length and the minimiser of
//! `v(s) - s`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::dyadic::{self, Dyadic, Rational};
use crate::error::{Error, Result};
use crate::params::{Params, Scalar};
use crate::value::{
    lattice_values, lattice_values_exact, mean_value_in, scale_in, value_dyadic_in, value_rational_exact,
};

fn integral_in<T: Scalar>(lo: &Dyadic, hi: &Dyadic, params: &Params) -> Result<T> {
    if lo >= hi {
        return Err(Error::Precondition(format!("integral needs lo < hi, got [{lo}, {hi}]")));
    }
    let level = lo.level().max(hi.level());
    let mut a = lo.numerator_at(level)?;
    let b = hi.numerator_at(level)?;
    let mean: T = mean_value_in(params);
    let mut total = T::zero();
    while a < b {
        // Largest aligned block starting at a that fits below b.
        let mut size = if a == 0 { 1u64 << level } else { 1u64 << a.trailing_zeros() };
        while a + size > b {
            size >>= 1;
        }
        let block_level = level - size.trailing_zeros();
        let start = Dyadic::new(a, level)?;
        let width = T::from_rational(&BigRational::new(BigInt::from(1), BigInt::from(1u64) << block_level));
        let base: T = value_dyadic_in(&start, params);
        let c: T = scale_in(&start, block_level, params)?;
        total = total + width * (base + c * mean.clone());
        a += size;
    }
    Ok(total)
}

/// `int_lo^hi v(s) ds` for dyadic endpoints.
///
/// The interval is split into maximal aligned dyadic blocks. On a block
/// `[sbar, sbar + 2^-l]`, `v = v(sbar) + c v(t)` with `c` the block scale, so
/// its integral is `2^-l (v(sbar) + c * mean(v))`.
pub fn integral(lo: &Dyadic, hi: &Dyadic, params: &Params) -> Result<f64> {
    integral_in(lo, hi, params)
}

pub fn integral_exact(lo: &Dyadic, hi: &Dyadic, params: &Params) -> Result<BigRational> {
    integral_in(lo, hi, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slope {
    Zero,
    Infinite,
}

/// One-sided derivative classes at a state, with finite-difference evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    pub state: Rational,
    /// `None` at `s = 0`, which has no left neighbourhood.
    pub left: Option<Slope>,
    /// `None` at `s = 1`.
    pub right: Option<Slope>,
    /// `(L, (v(s) - v(s - 2^-L)) * 2^L)` for each feasible `L`.
    pub left_witness: Vec<(u32, f64)>,
    /// `(L, (v(s + 2^-L) - v(s)) * 2^L)` for each feasible `L`.
    pub right_witness: Vec<(u32, f64)>,
}

/// Deepest finite-difference step usable with `u64` rational states.
pub const MAX_WITNESS_DEPTH: u32 = 62;

/// Classifies the one-sided derivatives of `v` at `s`.
///
/// The right derivative is zero everywhere on `[0, 1)`. The left derivative
/// is infinite at dyadic rationals (and at 1) and zero elsewhere. The
/// witnesses are difference quotients computed in exact arithmetic, so deep
/// steps do not suffer cancellation.
pub fn derivative_class(s: &Rational, params: &Params, depth: u32) -> Result<DerivativeReport> {
    dyadic::check_unit(s)?;
    if depth > MAX_WITNESS_DEPTH {
        return Err(Error::Precondition(format!("witness depth {depth} exceeds {MAX_WITNESS_DEPTH}")));
    }
    let zero = Rational::zero();
    let one = Rational::from_integer(1);
    let is_dyadic = s.denom().is_power_of_two();
    let left = if *s == zero {
        None
    } else if is_dyadic {
        Some(Slope::Infinite)
    } else {
        Some(Slope::Zero)
    };
    let right = if *s == one { None } else { Some(Slope::Zero) };

    let here = value_rational_exact(s, params)?;
    let mut left_witness = Vec::new();
    let mut right_witness = Vec::new();
    for l in 1..=depth {
        let h = Rational::new(1, 1u64 << l);
        let scale = BigRational::from_integer(BigInt::from(1u64) << l);
        if left.is_some() && h <= *s {
            let below = dyadic::sub_rational(s, &h)?;
            let diff = (&here - value_rational_exact(&below, params)?) * &scale;
            left_witness.push((l, diff.to_f64().unwrap_or(f64::INFINITY)));
        }
        if right.is_some() && dyadic::add_rational(s, &h).map(|x| x <= one).unwrap_or(false) {
            let above = dyadic::add_rational(s, &h)?;
            let diff = (value_rational_exact(&above, params)? - &here) * &scale;
            right_witness.push((l, diff.to_f64().unwrap_or(f64::INFINITY)));
        }
    }
    Ok(DerivativeReport { state: *s, left, right, left_witness, right_witness })
}

/// Polygonal lengths of the graph of `v` through the level-`l` lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcLength {
    pub euclidean: f64,
    pub manhattan: f64,
}

pub fn arc_length(level: u32, params: &Params) -> Result<ArcLength> {
    if level == 0 {
        return Err(Error::Precondition("arc length needs level >= 1".into()));
    }
    let values = lattice_values(level, params)?;
    let ds = (-(level as f64)).exp2();
    let mut euclidean = 0.0;
    let mut manhattan = 0.0;
    for w in values.windows(2) {
        let dv = w[1] - w[0];
        euclidean += ds.hypot(dv);
        manhattan += ds + dv.abs();
    }
    Ok(ArcLength { euclidean, manhattan })
}

/// Manhattan length `sum (ds + |dv|)` in exact arithmetic.
pub fn manhattan_length_exact(level: u32, params: &Params) -> Result<BigRational> {
    let values = lattice_values_exact(level, params)?;
    let rise = values.windows(2).fold(BigRational::zero(), |acc, w| acc + (&w[1] - &w[0]).abs());
    Ok(rise + BigRational::from_integer(1.into()))
}

/// Lattice minimiser of `v(s) - s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapMin {
    pub argmin: Dyadic,
    pub gap: f64,
}

/// Minimises `v(s) - s` over the interior lattice points at `level`; ties go
/// to the smallest `s`.
pub fn gap_argmin(level: u32, params: &Params) -> Result<GapMin> {
    if level < 2 {
        return Err(Error::Precondition("gap_argmin needs level >= 2".into()));
    }
    let values = lattice_values(level, params)?;
    let n = 1u64 << level;
    let mut best = (1u64, f64::INFINITY);
    for k in 1..n {
        let gap = values[k as usize] - k as f64 / n as f64;
        if gap < best.1 {
            best = (k, gap);
        }
    }
    Ok(GapMin { argmin: Dyadic::new(best.0, level)?, gap: best.1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::parse_rational;
    use crate::value::value_rational;

    fn params(p: f64, g: f64) -> Params {
        Params::new(p, g).unwrap()
    }

    fn d(k: u64, level: u32) -> Dyadic {
        Dyadic::new(k, level).unwrap()
    }

    /// Left Riemann sum over the level-`depth` lattice, with its error bound
    /// (total rise times the mesh).
    fn riemann(lo: &Dyadic, hi: &Dyadic, pm: &Params, depth: u32) -> (f64, f64) {
        let a = lo.numerator_at(depth).unwrap() as usize;
        let b = hi.numerator_at(depth).unwrap() as usize;
        let table = lattice_values(depth, pm).unwrap();
        let h = (-(depth as f64)).exp2();
        let left: f64 = table[a..b].iter().sum::<f64>() * h;
        (left, (table[b] - table[a]).abs() * h + 1e-12)
    }

    #[test]
    fn integral_examples() {
        let pm = params(0.6, 1.0);
        assert_eq!(integral_exact(&Dyadic::ZERO, &Dyadic::ONE, &pm).unwrap(), parse_rational("0.4").unwrap());
        assert_eq!(integral_exact(&Dyadic::ZERO, &Dyadic::HALF, &pm).unwrap(), parse_rational("0.08").unwrap());
        let (oracle, err) = riemann(&Dyadic::ZERO, &Dyadic::HALF, &pm, 20);
        assert!((oracle - 0.08).abs() <= err);
    }

    #[test]
    fn integral_below_unit_discount_matches_riemann_sums() {
        for (p, g) in [(0.6, 0.9), (0.75, 0.5), (0.55, 0.99)] {
            let pm = params(p, g);
            for (lo, hi) in [(Dyadic::ZERO, Dyadic::ONE), (d(3, 4), d(13, 5)), (d(1, 8), Dyadic::HALF)] {
                let exact = integral(&lo, &hi, &pm).unwrap();
                let (oracle, err) = riemann(&lo, &hi, &pm, 20);
                assert!((exact - oracle).abs() <= err, "p={p} g={g} [{lo},{hi}]: {exact} vs {oracle}");
            }
        }
        // The mean over [0, 1] is (1-p) gamma / (2 - gamma), not (1-p) gamma.
        let v = integral(&Dyadic::ZERO, &Dyadic::ONE, &params(0.6, 0.9)).unwrap();
        assert!((v - 0.36 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn integral_rejects_empty_intervals() {
        let pm = params(0.6, 1.0);
        assert!(integral(&Dyadic::HALF, &Dyadic::HALF, &pm).is_err());
        assert!(integral(&Dyadic::ONE, &Dyadic::HALF, &pm).is_err());
    }

    #[test]
    fn derivative_at_half() {
        let pm = params(0.6, 1.0);
        let r = derivative_class(&Rational::new(1, 2), &pm, 30).unwrap();
        assert_eq!(r.left, Some(Slope::Infinite));
        assert_eq!(r.right, Some(Slope::Zero));
        for &(l, ratio) in &r.left_witness {
            let predicted = (l as f64).exp2() * 0.6f64.powi(l as i32 - 1) * 0.4;
            assert!((ratio / predicted - 1.0).abs() < 1e-12, "L={l}");
        }
        for pair in r.left_witness.windows(2).skip(1) {
            assert!(pair[1].1 > pair[0].1);
        }
        for pair in r.right_witness.windows(2) {
            assert!(pair[1].1 < pair[0].1);
        }
    }

    #[test]
    fn derivative_off_the_lattice() {
        let pm = params(0.6, 1.0);
        let r = derivative_class(&Rational::new(2, 3), &pm, 40).unwrap();
        assert_eq!(r.left, Some(Slope::Zero));
        assert_eq!(r.right, Some(Slope::Zero));
        // Every two levels the quotients shrink by about 4p(1-p) = 0.96.
        for w in [&r.left_witness, &r.right_witness] {
            for pair in w.windows(3).skip(4) {
                let ratio = pair[2].1 / pair[0].1;
                assert!(ratio < 1.0 && (ratio - 0.96).abs() < 0.01, "{ratio}");
            }
        }

        let at_zero = derivative_class(&Rational::zero(), &pm, 5).unwrap();
        assert!(at_zero.left.is_none() && at_zero.left_witness.is_empty());
        let at_one = derivative_class(&Rational::from_integer(1), &pm, 5).unwrap();
        assert_eq!(at_one.left, Some(Slope::Infinite));
        assert!(at_one.right.is_none());
        assert!(derivative_class(&Rational::new(3, 2), &pm, 5).is_err());
    }

    #[test]
    fn arc_length_examples() {
        let a = arc_length(1, &params(0.6, 1.0)).unwrap();
        assert!((a.manhattan - 2.0).abs() < 1e-15);
        let expected = (0.25f64 + 0.16).sqrt() + (0.25f64 + 0.36).sqrt();
        assert!((a.euclidean - expected).abs() < 1e-15);
        let line = arc_length(1, &params(0.5, 1.0)).unwrap();
        assert!((line.euclidean - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(manhattan_length_exact(10, &params(0.6, 1.0)).unwrap(), BigRational::from_integer(2.into()));
    }

    #[test]
    fn gap_argmin_examples() {
        let g = gap_argmin(2, &params(0.6, 1.0)).unwrap();
        assert_eq!(g.argmin, d(3, 2));
        assert!((g.gap + 0.11).abs() < 1e-15);
        let flat = gap_argmin(10, &params(0.5, 1.0)).unwrap();
        assert_eq!(flat.argmin, d(1, 10));
        assert_eq!(flat.gap, 0.0);
        assert!(gap_argmin(1, &params(0.6, 1.0)).is_err());
    }

    #[test]
    fn gap_minimum_sits_right_of_two_thirds() {
        // Independent oracle (binary digits summed in floats, level 20):
        // min v(s) - s = -0.1403732 at 699735/2^20, v(2/3) - 2/3 = -0.1403509.
        let pm = params(0.6, 1.0);
        let g = gap_argmin(20, &pm).unwrap();
        assert_eq!(g.argmin, d(699_735, 20));
        assert!((g.gap + 0.140_373_178).abs() < 1e-8);
        let at_two_thirds = value_rational(&Rational::new(2, 3), &pm).unwrap() - 2.0 / 3.0;
        assert!((at_two_thirds + 0.140_350_877).abs() < 1e-8);
        assert!(g.gap < at_two_thirds - 2e-5);
    }
}
