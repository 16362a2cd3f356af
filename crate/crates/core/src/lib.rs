//! The Gambler's problem: a gambler with capital `s` in `[0, 1]` stakes
//! `a <= min(s, 1-s)`, loses it with probability `p >= 1/2`, and is paid 1 on
//! reaching 1. This crate evaluates the optimal value function exactly,
//! solves the discrete game, simulates it, and measures how badly smooth or
//! piecewise-constant functions can approximate it.
//!
//! ```
//! use gambler_core::{value_dyadic, Dyadic, Params};
//!
//! let params = Params::new(0.6, 1.0)?;
//! let quarter = Dyadic::new(1, 2)?;
//! assert!((value_dyadic(&quarter, &params) - 0.16).abs() < 1e-15);
//! # Ok::<(), gambler_core::Error>(())
//! ```

pub mod approx;
pub mod bellman;
pub mod discrete;
pub mod dyadic;
pub mod error;
pub mod expansion;
pub mod facts;
pub mod increments;
pub mod params;
pub mod simulate;
pub mod value;
pub mod verify;

pub use bellman::{
    alt_optimal_action, bellman_residual, iterate_bellman, optimal_action, CandidateFn, GridFn, ResidualReport,
};
pub use dyadic::{Dyadic, Rational};
pub use error::{Error, Result};
pub use expansion::{expand_binary, expand_rational, BitExpansion};
pub use facts::{arc_length, derivative_class, gap_argmin, integral, integral_exact, Slope};
pub use increments::{backward_diff, forward_diff, left_limit_and_jump, DiffReport, Jump};
pub use params::{parse_rational, Params};
pub use value::{
    q_value, self_similar_eval, value_dyadic, value_dyadic_exact, value_expansion, value_rational, value_rational_exact,
};
