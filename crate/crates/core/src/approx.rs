//! How well simpler functions can approximate `v` in L1.
//!
//! A function constant on each of `N` equal bins does best with the value of
//! `v` at each bin's midpoint, the median of a monotone function. Because `v`
//! on a bin is an affine copy of itself, the optimal error is a finite sum of
//! exact integrals. A Lipschitz function cannot follow the jump at `1/2`
//! that `v` has when `gamma < 1`.

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::facts::integral_exact;
use crate::params::Params;
use crate::value::{lattice_values, value_dyadic, MAX_LATTICE_LEVEL};

/// One bin of a piecewise-constant fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinError {
    pub bin: usize,
    /// Optimal constant, `v` at the bin midpoint.
    pub median_value: f64,
    /// `min_y int_bin |v - y|`.
    pub bin_error: f64,
    /// The same quantity from the closed form
    /// `dS/2 ((1 - (1-p)g)(v(mid) - v(lo)) + (1-p)g (v(hi) - v(mid)))`,
    /// which takes the mean of `v` to be `(1-p)g`; exact only when `g = 1`.
    pub proof_form: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxReport {
    pub bins: usize,
    /// Optimal total error, from exact integrals.
    pub exact_error: f64,
    /// Sum of [`BinError::proof_form`].
    pub proof_form_error: f64,
    /// `(1/N) (2-g)(1-p)g / (1-pg)`, the leading term of the published
    /// lower bound. Reported, not asserted: at `g = 1` it exceeds the
    /// optimal error.
    pub paper_leading_bound: f64,
    /// Trapezoid estimate from a fine lattice, when requested.
    pub brute_error: Option<f64>,
    /// Bound on `|brute_error - exact_error|`.
    pub brute_tolerance: Option<f64>,
    pub per_bin: Vec<BinError>,
}

fn bin_level(bins: usize) -> Result<u32> {
    if bins < 4 || !bins.is_power_of_two() {
        return Err(Error::Precondition(format!("bin count {bins} must be a power of 2, at least 4")));
    }
    let level = bins.trailing_zeros();
    if level + 1 > crate::dyadic::MAX_LEVEL {
        return Err(Error::Precondition(format!("bin count {bins} is too large")));
    }
    Ok(level)
}

/// Optimal L1 error of a function constant on each of the `bins` intervals
/// `(k/N, (k+1)/N)`.
pub fn pc_error_exact(bins: usize, params: &Params) -> Result<ApproxReport> {
    let level = bin_level(bins)?;
    let win_g = (1.0 - params.p_f64()) * params.gamma_f64();
    let half = 1.0 / (2.0 * bins as f64);
    let per_bin = (0..bins)
        .into_par_iter()
        .map(|k| {
            let lo = Dyadic::new(k as u64, level)?;
            let mid = Dyadic::new(2 * k as u64 + 1, level + 1)?;
            let hi = Dyadic::new(k as u64 + 1, level)?;
            let exact: BigRational = integral_exact(&mid, &hi, params)? - integral_exact(&lo, &mid, params)?;
            let (v_lo, v_mid, v_hi) =
                (value_dyadic(&lo, params), value_dyadic(&mid, params), value_dyadic(&hi, params));
            Ok(BinError {
                bin: k,
                median_value: v_mid,
                bin_error: exact.to_f64().expect("finite"),
                proof_form: half * ((1.0 - win_g) * (v_mid - v_lo) + win_g * (v_hi - v_mid)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let p = params.p_f64();
    let g = params.gamma_f64();
    Ok(ApproxReport {
        bins,
        exact_error: per_bin.iter().map(|b| b.bin_error).sum(),
        proof_form_error: per_bin.iter().map(|b| b.proof_form).sum(),
        paper_leading_bound: (2.0 - g) * (1.0 - p) * g / (1.0 - p * g) / bins as f64,
        brute_error: None,
        brute_tolerance: None,
        per_bin,
    })
}

/// Exact optimal error as a rational.
pub fn pc_error_rational(bins: usize, params: &Params) -> Result<BigRational> {
    let level = bin_level(bins)?;
    (0..bins).try_fold(BigRational::zero(), |acc, k| {
        let lo = Dyadic::new(k as u64, level)?;
        let mid = Dyadic::new(2 * k as u64 + 1, level + 1)?;
        let hi = Dyadic::new(k as u64 + 1, level)?;
        Ok(acc + integral_exact(&mid, &hi, params)? - integral_exact(&lo, &mid, params)?)
    })
}

/// `E gamma^l / N` for `N = 2^l`, with `E = int_0^1 |v - v(1/2)|
/// = ((1-p) g + (2p-1) g m) / 2` and `m` the mean of `v`.
///
/// Each bin holds a copy of `v` scaled by its self-similarity factor, and the
/// factors of one level sum to `gamma^l`. The optimal error therefore falls
/// like `1/N` only when `gamma = 1` and faster otherwise.
pub fn pc_error_closed_form(bins: usize, params: &Params) -> Result<BigRational> {
    let level = bin_level(bins)?;
    let one = BigRational::one();
    let two = &one + &one;
    let (p, g) = (params.p(), params.gamma());
    let mean = crate::value::mean_value_exact(params);
    let e = ((&one - p) * g + (&two * p - &one) * g * mean) / &two;
    let scale = (0..level).fold(one, |acc, _| acc * g);
    Ok(e * scale / BigRational::from_integer(bins.into()))
}

/// Trapezoid integral of `|v - v(mid_k)|` over the level-`depth` lattice.
///
/// Each lattice cell lies on one side of its bin midpoint, where the
/// integrand is monotone, so the result is within `2^-depth / 2` of the
/// optimal error.
pub fn pc_error_brute(bins: usize, params: &Params, depth: u32) -> Result<f64> {
    let level = bin_level(bins)?;
    if depth < 2 * level + 8 {
        return Err(Error::Precondition(format!("depth {depth} is below 2 log2(N) + 8 = {}", 2 * level + 8)));
    }
    if depth > MAX_LATTICE_LEVEL {
        return Err(Error::Precondition(format!("depth {depth} exceeds {MAX_LATTICE_LEVEL}")));
    }
    let v = lattice_values(depth, params)?;
    let cells = 1usize << (depth - level);
    let h = 1.0 / (1u64 << depth) as f64;
    let per_bin: Vec<f64> = (0..bins)
        .into_par_iter()
        .map(|k| {
            let start = k * cells;
            let median = v[start + cells / 2];
            (start..start + cells).map(|i| 0.5 * h * ((v[i] - median).abs() + (v[i + 1] - median).abs())).sum::<f64>()
        })
        .collect();
    Ok(per_bin.iter().sum())
}

impl ApproxReport {
    /// Adds the brute-force estimate at `depth`.
    pub fn with_brute(mut self, params: &Params, depth: u32) -> Result<Self> {
        self.brute_error = Some(pc_error_brute(self.bins, params, depth)?);
        self.brute_tolerance = Some(0.5 / (1u64 << depth) as f64);
        Ok(self)
    }
}

/// Best Lipschitz fit to the unit step of height `h` at `1/2`: zero, then a
/// ramp of slope `L` centred on `(1/2, h/2)`, then `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampedRamp {
    pub h: f64,
    pub lipschitz: f64,
}

impl ClampedRamp {
    pub fn eval(&self, s: f64) -> f64 {
        if self.h == 0.0 {
            return 0.0;
        }
        (self.h / 2.0 + self.lipschitz * (s - 0.5)).clamp(0.0, self.h)
    }

    /// `int_0^1 |xi - ramp|` with `xi` the step function; equals `h^2 / (4L)`.
    pub fn step_error(&self) -> f64 {
        if self.h == 0.0 {
            0.0
        } else {
            self.h * self.h / (4.0 * self.lipschitz)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzBound {
    /// The jump of `v` at `1/2`, `(1-p) g (1-g) / (1-pg)`.
    pub h: f64,
    pub h_exact: BigRational,
    /// `h^2 / (4L)`.
    pub bound: f64,
    pub ramp: ClampedRamp,
}

/// `(1-p) g (1-g) / (1-pg)`.
pub fn jump_at_half(params: &Params) -> BigRational {
    let one = BigRational::one();
    let (p, g) = (params.p(), params.gamma());
    (&one - p) * g * (&one - g) / (&one - p * g)
}

/// Lower bound on the L1 error of any `L`-Lipschitz approximation of `v`.
pub fn lipschitz_bound(lipschitz: f64, params: &Params) -> Result<LipschitzBound> {
    let h_exact = jump_at_half(params);
    let h = h_exact.to_f64().expect("finite");
    if !lipschitz.is_finite() || lipschitz < h || lipschitz <= 0.0 {
        return Err(Error::Precondition(format!(
            "Lipschitz constant {lipschitz} must be positive and at least the jump {h}"
        )));
    }
    let ramp = ClampedRamp { h, lipschitz };
    Ok(LipschitzBound { h, h_exact, bound: ramp.step_error(), ramp })
}
