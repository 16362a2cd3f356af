//! Optimal actions, and grid verification of candidate solutions of the
//! Bellman equation
//!
//! ```text
//! f(s) = max_{0 < a <= min(s, 1-s)} p gamma f(s-a) + (1-p) gamma f(s+a),   f(0) = 0, f(1) = 1.
//! ```
//!
//! States are taken from the level-`l` lattice and actions from the finer
//! level-`L` lattice. With `L = l` the smallest state `2^-l` can only bet
//! everything, so constant candidates need `L > l` to have an action that
//! keeps both outcomes interior.

use rayon::prelude::*;

use crate::dyadic::{Dyadic, Rational};
use crate::error::{Error, Result};
use crate::params::Params;
use crate::value::{lattice_values, value_rational, MAX_LATTICE_LEVEL};

/// Residual at or below which a candidate counts as a grid solution.
pub const SOLUTION_TOLERANCE: f64 = 1e-9;

/// Relative slack for treating two backups as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// The bold action `min(s, 1-s)`, optimal for every discount factor.
pub fn optimal_action(s: &Rational) -> Result<Rational> {
    if *s <= Rational::from_integer(0) || *s >= Rational::from_integer(1) {
        return Err(Error::Precondition(format!("state {s} is not interior")));
    }
    Ok(crate::dyadic::max_bet(s))
}

/// The cautious action `2^-l` for `s` with exactly `l` bits, optimal when
/// `gamma = 1`: each round either clears the last 1-bit or carries it, so the
/// game ends within `l` rounds.
pub fn alt_optimal_action(s: &Dyadic, params: &Params) -> Result<Dyadic> {
    if !params.is_undiscounted() {
        return Err(Error::Precondition("the cautious policy is optimal only at gamma = 1".into()));
    }
    if !s.is_interior() {
        return Err(Error::Precondition(format!("state {s} is not interior")));
    }
    Dyadic::unit(s.level())
}

/// A candidate solution, fixed to `f(0) = 0` and `f(1) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CandidateFn {
    /// The optimal value function `v`.
    ExactV,
    /// `f(s) = C` on `(0, 1)`.
    Constant(f64),
    /// `f(s) = slope * s + intercept` on `(0, 1)`.
    Linear { slope: f64, intercept: f64 },
}

impl CandidateFn {
    /// Whether the family is a known solution under `params`: `v` always;
    /// constants `C >= 1` when `gamma = 1`; lines with `slope + intercept >= 1`
    /// when additionally `p = 1/2`.
    pub fn is_claimed_solution(&self, params: &Params) -> bool {
        let fair = params.p_f64() == 0.5;
        match *self {
            CandidateFn::ExactV => true,
            CandidateFn::Constant(c) => params.is_undiscounted() && c >= 1.0,
            CandidateFn::Linear { slope, intercept } => params.is_undiscounted() && fair && slope + intercept >= 1.0,
        }
    }

    /// Values at `k / 2^level` for `k = 0..=2^level`.
    pub fn tabulate(&self, level: u32, params: &Params) -> Result<GridFn> {
        let values = match *self {
            CandidateFn::ExactV => lattice_values(level, params)?,
            CandidateFn::Constant(c) => interior_table(level, |_| c)?,
            CandidateFn::Linear { slope, intercept } => interior_table(level, |s| slope * s + intercept)?,
        };
        Ok(GridFn { level, values })
    }
}

fn interior_table(level: u32, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    if level > MAX_LATTICE_LEVEL {
        return Err(Error::Precondition(format!("lattice level {level} exceeds {MAX_LATTICE_LEVEL}")));
    }
    let n = 1usize << level;
    let mut values: Vec<f64> = (0..=n).map(|k| f(k as f64 / n as f64)).collect();
    values[0] = 0.0;
    values[n] = 1.0;
    Ok(values)
}

/// A function tabulated on `k / 2^level`, `k = 0..=2^level`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    pub level: u32,
    pub values: Vec<f64>,
}

impl GridFn {
    /// `f(0) = 0`, `f(1) = 1`, and `fill` at every interior point.
    pub fn constant_interior(level: u32, fill: f64) -> Result<Self> {
        Ok(Self { level, values: interior_table(level, |_| fill)? })
    }

    pub fn at(&self, s: &Dyadic) -> Result<f64> {
        Ok(self.values[s.numerator_at(self.level)? as usize])
    }

    /// Sup-norm distance over the level-`level` points (both tables must
    /// contain that lattice).
    pub fn sup_distance(&self, other: &GridFn, level: u32) -> Result<f64> {
        if level > self.level || level > other.level {
            return Err(Error::Precondition("comparison lattice is finer than a table".into()));
        }
        let n = 1usize << level;
        let step_a = 1usize << (self.level - level);
        let step_b = 1usize << (other.level - level);
        Ok((0..=n).map(|k| (self.values[k * step_a] - other.values[k * step_b]).abs()).fold(0.0, f64::max))
    }
}

/// Best backup at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateResidual {
    pub state: Dyadic,
    pub value: f64,
    pub backup: f64,
    /// Largest action attaining the backup.
    pub action: Dyadic,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub argmax_state: Dyadic,
    pub per_state: Vec<StateResidual>,
}

impl ResidualReport {
    pub fn is_solution(&self) -> bool {
        self.max_residual <= SOLUTION_TOLERANCE
    }
}

fn check_levels(state_level: u32, action_level: u32) -> Result<()> {
    if state_level == 0 {
        return Err(Error::Precondition("state level must be at least 1".into()));
    }
    if action_level < state_level {
        return Err(Error::Precondition(format!(
            "action level {action_level} is coarser than state level {state_level}"
        )));
    }
    Ok(())
}

/// Backup `max_a p gamma f(s-a) + (1-p) gamma f(s+a)` at lattice index `i` of
/// `table`, over actions `j / 2^table.level`. Ties go to the larger action.
fn best_backup(table: &[f64], i: usize, lose: f64, win: f64) -> (f64, usize) {
    let n = table.len() - 1;
    let top = i.min(n - i);
    let mut best = (f64::NEG_INFINITY, 0);
    for j in 1..=top {
        let q = lose * table[i - j] + win * table[i + j];
        if q >= best.0 - TIE_TOLERANCE * best.0.abs().max(1.0) {
            best = (best.0.max(q), j);
        }
    }
    best
}

/// Bellman residual of `f` at every state of the level-`state_level`
/// lattice, maximising over actions on the level-`action_level` lattice.
pub fn bellman_residual(
    f: &CandidateFn,
    state_level: u32,
    action_level: u32,
    params: &Params,
) -> Result<ResidualReport> {
    check_levels(state_level, action_level)?;
    let table = f.tabulate(action_level, params)?;
    residual_of_table(&table, state_level, params)
}

/// [`bellman_residual`] for an already tabulated function; its level is the
/// action level.
pub fn residual_of_table(table: &GridFn, state_level: u32, params: &Params) -> Result<ResidualReport> {
    check_levels(state_level, table.level)?;
    let gamma = params.gamma_f64();
    let lose = params.p_f64() * gamma;
    let win = (1.0 - params.p_f64()) * gamma;
    let stride = 1usize << (table.level - state_level);
    let n = 1usize << state_level;
    let per_state: Vec<StateResidual> = (1..n)
        .into_par_iter()
        .map(|k| {
            let i = k * stride;
            let (backup, j) = best_backup(&table.values, i, lose, win);
            let value = table.values[i];
            StateResidual {
                state: Dyadic::new(k as u64, state_level).expect("on lattice"),
                value,
                backup,
                action: Dyadic::new(j as u64, table.level).expect("on lattice"),
                residual: (value - backup).abs(),
            }
        })
        .collect();
    let worst = per_state
        .iter()
        .fold(None::<&StateResidual>, |acc, r| match acc {
            Some(a) if a.residual >= r.residual => Some(a),
            _ => Some(r),
        })
        .expect("at least one interior state");
    Ok(ResidualReport { max_residual: worst.residual, argmax_state: worst.state, per_state })
}

/// All actions on the level-`action_level` lattice whose backup of `f` at `s`
/// is within [`TIE_TOLERANCE`] of the best.
pub fn maximizing_actions(f: &CandidateFn, s: &Dyadic, action_level: u32, params: &Params) -> Result<Vec<Dyadic>> {
    if !s.is_interior() || s.level() > action_level {
        return Err(Error::Precondition(format!("{s} is not an interior level-{action_level} state")));
    }
    let table = f.tabulate(action_level, params)?;
    let gamma = params.gamma_f64();
    let lose = params.p_f64() * gamma;
    let win = (1.0 - params.p_f64()) * gamma;
    let i = s.numerator_at(action_level)? as usize;
    let (best, _) = best_backup(&table.values, i, lose, win);
    let n = table.values.len() - 1;
    (1..=i.min(n - i))
        .filter(|&j| {
            let q = lose * table.values[i - j] + win * table.values[i + j];
            q >= best - TIE_TOLERANCE * best.abs().max(1.0)
        })
        .map(|j| Dyadic::new(j as u64, action_level))
        .collect()
}

/// Grid maximiser of `q(s, a)` for an arbitrary rational state, over actions
/// `j / 2^action_level`. Ties go to the larger action.
pub fn grid_maximizer(s: &Rational, action_level: u32, params: &Params) -> Result<(Rational, f64)> {
    if action_level > 40 {
        return Err(Error::Precondition("action level above 40 is impractical here".into()));
    }
    let top = crate::dyadic::max_bet(s);
    let unit = Rational::new(1, 1u64 << action_level);
    let mut best: Option<(Rational, f64)> = None;
    let mut a = unit;
    while a <= top {
        let q = crate::value::q_value(s, &a, params)?;
        match best {
            Some((_, b)) if q < b - TIE_TOLERANCE * b.abs().max(1.0) => {}
            _ => best = Some((a, q.max(best.map_or(q, |b| b.1)))),
        }
        a += unit;
    }
    best.ok_or_else(|| Error::Precondition(format!("no lattice action fits state {s}")))
}

/// Result of repeatedly applying the grid Bellman operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterated {
    pub table: GridFn,
    /// Sup-norm change of each step.
    pub deltas: Vec<f64>,
}

/// Applies the grid Bellman operator `steps` times.
///
/// `f0` is tabulated on the action lattice. Each step replaces the values at
/// states of the level-`state_level` lattice by their best backup (Jacobi
/// sweep); points of the action lattice that are not states keep their `f0`
/// values. With `state_level == f0.level` every interior point is updated
/// and the operator is that of the discrete MDP with `2^level` units.
pub fn iterate_bellman(f0: &GridFn, state_level: u32, params: &Params, steps: usize) -> Result<Iterated> {
    check_levels(state_level, f0.level)?;
    if steps == 0 {
        return Err(Error::Precondition("steps must be at least 1".into()));
    }
    let gamma = params.gamma_f64();
    let lose = params.p_f64() * gamma;
    let win = (1.0 - params.p_f64()) * gamma;
    let stride = 1usize << (f0.level - state_level);
    let n = 1usize << state_level;
    let mut current = f0.values.clone();
    let mut deltas = Vec::with_capacity(steps);
    for _ in 0..steps {
        let updates: Vec<(usize, f64)> =
            (1..n).into_par_iter().map(|k| (k * stride, best_backup(&current, k * stride, lose, win).0)).collect();
        let mut delta = 0.0f64;
        for (i, v) in updates {
            delta = delta.max((current[i] - v).abs());
            current[i] = v;
        }
        deltas.push(delta);
    }
    Ok(Iterated { table: GridFn { level: f0.level, values: current }, deltas })
}

/// `v` on a rational state, re-exported for callers checking optimality of
/// [`optimal_action`].
pub fn value_at(s: &Rational, params: &Params) -> Result<f64> {
    value_rational(s, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{q_value_exact, value_dyadic_exact};

    fn params(p: f64, g: f64) -> Params {
        Params::new(p, g).unwrap()
    }

    fn d(k: u64, level: u32) -> Dyadic {
        Dyadic::new(k, level).unwrap()
    }

    #[test]
    fn bold_action_examples() {
        assert_eq!(optimal_action(&Rational::new(1, 4)).unwrap(), Rational::new(1, 4));
        assert_eq!(optimal_action(&Rational::new(3, 4)).unwrap(), Rational::new(1, 4));
        assert_eq!(optimal_action(&Rational::new(1, 2)).unwrap(), Rational::new(1, 2));
        assert!(optimal_action(&Rational::from_integer(1)).is_err());
        assert!(optimal_action(&Rational::from_integer(0)).is_err());
    }

    #[test]
    fn bold_action_attains_v_for_any_discount() {
        for g in [1.0, 0.9, 0.5, 0.0] {
            let pm = params(0.7, g);
            for s in [Rational::new(3, 8), Rational::new(2, 3), Rational::new(5, 7)] {
                let a = optimal_action(&s).unwrap();
                let q = q_value_exact(&s, &a, &pm).unwrap();
                assert_eq!(q, crate::value::value_rational_exact(&s, &pm).unwrap());
            }
        }
    }

    #[test]
    fn cautious_action_examples() {
        let pm = params(0.6, 1.0);
        let s = d(15, 5);
        let a = alt_optimal_action(&s, &pm).unwrap();
        assert_eq!(a, d(1, 5));
        assert_eq!(q_value_exact(&s.to_rational(), &a.to_rational(), &pm).unwrap(), value_dyadic_exact(&s, &pm));
        assert_eq!(alt_optimal_action(&Dyadic::HALF, &pm).unwrap(), Dyadic::HALF);

        let pm7 = params(0.7, 1.0);
        let s = d(3, 3);
        let a = alt_optimal_action(&s, &pm7).unwrap();
        assert_eq!(a, d(1, 3));
        assert_eq!(q_value_exact(&s.to_rational(), &a.to_rational(), &pm7).unwrap(), value_dyadic_exact(&s, &pm7));
        assert!(alt_optimal_action(&s, &params(0.7, 0.9)).is_err());
    }

    #[test]
    fn residual_examples() {
        let r = bellman_residual(&CandidateFn::ExactV, 10, 10, &params(0.6, 1.0)).unwrap();
        assert!(r.max_residual <= 1e-12);
        let c = CandidateFn::Constant(1.5);
        let r = bellman_residual(&c, 8, 9, &params(0.6, 1.0)).unwrap();
        assert!(r.max_residual <= 1e-12);
        let r = bellman_residual(&c, 8, 9, &params(0.6, 0.9)).unwrap();
        for s in &r.per_state {
            assert!((s.residual - 0.15).abs() < 1e-12, "{:?}", s);
        }
        let line = CandidateFn::Linear { slope: 0.5, intercept: 0.5 };
        let r = bellman_residual(&line, 8, 9, &params(0.5, 1.0)).unwrap();
        assert!(r.max_residual <= 1e-12);
    }

    #[test]
    fn constants_fail_on_matching_lattices() {
        let r = bellman_residual(&CandidateFn::Constant(1.5), 6, 6, &params(0.6, 1.0)).unwrap();
        assert!(!r.is_solution());
        assert_eq!(r.argmax_state, d(1, 6));
    }

    #[test]
    fn rejects_coarse_action_lattices() {
        assert!(bellman_residual(&CandidateFn::ExactV, 5, 4, &params(0.6, 1.0)).is_err());
        assert!(bellman_residual(&CandidateFn::ExactV, 0, 4, &params(0.6, 1.0)).is_err());
    }

    #[test]
    fn claimed_solutions() {
        let undiscounted = params(0.6, 1.0);
        assert!(CandidateFn::Constant(1.0).is_claimed_solution(&undiscounted));
        assert!(!CandidateFn::Constant(0.9).is_claimed_solution(&undiscounted));
        assert!(!CandidateFn::Constant(2.0).is_claimed_solution(&params(0.6, 0.9)));
        let line = CandidateFn::Linear { slope: 2.0, intercept: 0.0 };
        assert!(line.is_claimed_solution(&params(0.5, 1.0)));
        assert!(!line.is_claimed_solution(&undiscounted));
    }

    #[test]
    fn iteration_from_zero_reaches_v() {
        let pm = params(0.6, 1.0);
        let f0 = GridFn::constant_interior(9, 0.0).unwrap();
        let out = iterate_bellman(&f0, 8, &pm, 500).unwrap();
        let exact = CandidateFn::ExactV.tabulate(8, &pm).unwrap();
        assert!(out.table.sup_distance(&exact, 8).unwrap() < 1e-6);
    }

    #[test]
    fn constant_two_is_a_fixed_point_without_discount() {
        let f0 = GridFn::constant_interior(9, 2.0).unwrap();
        let out = iterate_bellman(&f0, 8, &params(0.6, 1.0), 1).unwrap();
        assert_eq!(out.table, f0);
        assert_eq!(out.deltas, vec![0.0]);
    }

    #[test]
    fn discounted_iteration_forgets_its_start() {
        let pm = params(0.6, 0.9);
        let exact = CandidateFn::ExactV.tabulate(8, &pm).unwrap();
        let f0 = GridFn::constant_interior(8, 2.0).unwrap();
        let out = iterate_bellman(&f0, 8, &pm, 400).unwrap();
        assert!(out.table.sup_distance(&exact, 8).unwrap() < 1e-8);
    }

    #[test]
    fn grid_maximizers_stay_below_v_off_the_lattice() {
        // Only the bold action attains v at a non-dyadic state. Grid actions
        // stay strictly below. Above 1/2 with gamma < 1 the gap does not
        // close, since v jumps at 1 and q(s, .) drops just before the bold
        // action.
        for g in [1.0, 0.9] {
            let pm = params(0.6, g);
            for s in [Rational::new(1, 3), Rational::new(5, 7)] {
                let v = value_at(&s, &pm).unwrap();
                let bold = q_value_exact(&s, &optimal_action(&s).unwrap(), &pm).unwrap();
                assert_eq!(bold, crate::value::value_rational_exact(&s, &pm).unwrap());
                let mut last = f64::NEG_INFINITY;
                for l in [6, 10, 14] {
                    let (_, q) = grid_maximizer(&s, l, &pm).unwrap();
                    assert!(q < v && q >= last, "s={s} L={l}");
                    last = q;
                }
                if g == 1.0 || s < Rational::new(1, 2) {
                    assert!(v - last < 1e-4);
                } else {
                    assert!(v - last > 1e-3);
                }
            }
        }
    }
}
