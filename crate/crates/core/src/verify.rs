//! Self-checks of the library against the structural properties of `v`,
//! the Bellman solutions, the discrete game, the simulator and the
//! approximation bounds. Each check reports a verdict and a short detail.
//!
//! The quick suite runs in seconds; `deep` widens lattices and sample sizes.

use std::fmt;

use num_traits::ToPrimitive;

use num_rational::BigRational;

use crate::approx::{jump_at_half, lipschitz_bound, pc_error_brute, pc_error_exact, pc_error_rational};
use crate::bellman::{
    bellman_residual, grid_maximizer, iterate_bellman, maximizing_actions, optimal_action, residual_of_table,
    CandidateFn, GridFn,
};
use crate::discrete::{exact_table, sup_distance, value_iteration, DiscreteSpec, Init};
use crate::dyadic::{Dyadic, Rational};
use crate::error::Result;
use crate::expansion::{expand_rational, BitExpansion};
use crate::facts::integral_exact;
use crate::increments::{backward_diff_exact, forward_diff_exact, left_limit_and_jump_exact};
use crate::params::Params;
use crate::simulate::{mc_value, Policy};
use crate::value::{
    lattice_values, lattice_values_exact, q_value_exact, self_similar_eval, tail_bound, value_dyadic,
    value_dyadic_exact, value_expansion, value_rational, value_rational_exact,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
    }
}

fn pm(p: f64, g: f64) -> Params {
    Params::new(p, g).expect("valid literal parameters")
}

const PS: [f64; 4] = [0.55, 0.6, 0.75, 0.9];

/// Runs every check.
pub fn run_suite(deep: bool) -> Vec<Check> {
    vec![
        check("monotone on the lattice", monotone(if deep { 20 } else { 14 })),
        check("bellman on the lattice", bellman_on_lattice(if deep { 12 } else { 9 })),
        check("finer actions never help", finer_actions(if deep { 10 } else { 7 })),
        check("self-similarity", self_similarity()),
        check("claim-1 increments", claim_one(if deep { 10 } else { 7 })),
        check("continuity off the lattice", continuity()),
        check("truncation tail bound", tail()),
        check("integral additivity", additivity()),
        check("argmax on the state lattice", argmax_membership(if deep { 8 } else { 6 })),
        check("bold action unique off the lattice", bold_unique()),
        check("unique fixed point when discounted", uniqueness()),
        check("constant solutions dichotomy", constants()),
        check("value iteration matches v(n/N)", discrete_grid(if deep { 64 } else { 24 })),
        check("z monotone without discount", discrete_monotone()),
        check("figure points exact", figure_points()),
        check("seeded determinism", determinism()),
        check("bold and alt agree", bold_vs_alt(if deep { 1_000_000 } else { 100_000 })),
        check("bold attains v when discounted", bold_discounted(if deep { 1_000_000 } else { 100_000 })),
        check("piecewise-constant oracle", pc_oracle(deep)),
        check("piecewise-constant scaling", pc_rate()),
        check("jump equals Lipschitz h", jump_consistency()),
        check("clamped ramp is optimal", ramp()),
    ]
}

fn monotone(level: u32) -> Result<(bool, String)> {
    let mut worst = f64::INFINITY;
    for p in [0.6, 0.9] {
        for g in [1.0, 0.9] {
            let v = lattice_values(level, &pm(p, g))?;
            worst = worst.min(v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min));
        }
    }
    Ok((worst > 0.0, format!("level {level}, smallest step {worst:.3e}")))
}

fn bellman_on_lattice(level: u32) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for p in [0.6, 0.9] {
        for g in [1.0, 0.9, 0.5] {
            worst = worst.max(bellman_residual(&CandidateFn::ExactV, level, level, &pm(p, g))?.max_residual);
        }
    }
    Ok((worst <= 1e-12, format!("level {level}, max residual {worst:.3e}")))
}

fn finer_actions(level: u32) -> Result<(bool, String)> {
    let mut worst = f64::NEG_INFINITY;
    for g in [1.0, 0.9] {
        let params = pm(0.6, g);
        let coarse = residual_of_table(&CandidateFn::ExactV.tabulate(level, &params)?, level, &params)?;
        let fine = residual_of_table(&CandidateFn::ExactV.tabulate(level + 1, &params)?, level, &params)?;
        for (c, f) in coarse.per_state.iter().zip(&fine.per_state) {
            worst = worst.max(f.backup - c.backup);
        }
    }
    Ok((worst <= 1e-12, format!("level {level}, largest gain {worst:.3e}")))
}

fn self_similarity() -> Result<(bool, String)> {
    let params = pm(0.6, 0.9);
    let mut worst = 0.0f64;
    for k in 0..64u64 {
        let sbar = Dyadic::new(k, 6)?;
        for j in 0..64u64 {
            let tail = Dyadic::new(j, 6)?;
            let s = Rational::new(k * 64 + j, 4096);
            let direct = value_rational(&s, &params)?;
            let via = self_similar_eval(&sbar, 6, &BitExpansion::from_dyadic(&tail), &params, 1e-15)?;
            worst = worst.max((direct - via).abs());
        }
    }
    Ok((worst <= 1e-12, format!("sbar, t on the level-6 lattice, t < 1, max gap {worst:.3e}")))
}

fn claim_one(level: u32) -> Result<(bool, String)> {
    let mut ok = true;
    let mut count = 0;
    for g in [1.0, 0.9] {
        let params = pm(0.6, g);
        let table = lattice_values_exact(level + 1, &params)?;
        let n = 1u64 << level;
        for k in 0..=n {
            let s = Dyadic::new(k, level)?;
            let i = 2 * k as usize;
            if k < n {
                ok &= forward_diff_exact(&s, level, &params)? == &table[i + 1] - &table[i];
            }
            if k > 0 {
                let r = backward_diff_exact(&s, level, &params)?;
                ok &= r.backward == &table[i] - &table[i - 1];
                ok &= if g == 1.0 { r.backward == r.bound } else { r.backward > r.bound };
            }
            count += 1;
        }
    }
    Ok((ok, format!("{count} lattice points at level {level}, exact")))
}

fn continuity() -> Result<(bool, String)> {
    let mut ok = true;
    let mut tightest = 0.0f64;
    for (p, g) in [(0.6, 1.0), (0.6, 0.9), (0.9, 1.0)] {
        let params = pm(p, g);
        for s in [Rational::new(1, 3), Rational::new(2, 3), Rational::new(5, 7), Rational::new(11, 13)] {
            let v = value_rational(&s, &params)?;
            for l in 4..=30u32 {
                let bound = 2.0 * (1.0 - p) * g.powi(l as i32) * p.powi(l as i32 - 1);
                let scaled = s * Rational::from_integer(1u64 << l);
                let nearest = (scaled + Rational::new(1, 2)).floor().to_integer();
                let gap = (v - value_dyadic(&Dyadic::new(nearest, l)?, &params)).abs();
                ok &= gap <= bound * (1.0 + 1e-9);
                tightest = tightest.max(gap / bound);
            }
        }
    }
    Ok((ok, format!("largest gap / bound {tightest:.3}")))
}

fn tail() -> Result<(bool, String)> {
    let mut ok = true;
    for (p, g) in [(0.6, 1.0), (0.75, 0.9)] {
        let params = pm(p, g);
        for s in [Rational::new(1, 3), Rational::new(7, 9), Rational::new(3, 11)] {
            let e = expand_rational(&s, 1 << 12)?;
            for l in [4usize, 8, 16] {
                let bits = unrolled(&e, 2 * l);
                let short = value_expansion(&BitExpansion::terminating(bits[..l].to_vec()), &params, 1.0)?;
                let long = value_expansion(&BitExpansion::terminating(bits), &params, 1.0)?;
                ok &= (long - short).abs() <= tail_bound(l, &params) * (1.0 + 1e-9);
            }
        }
    }
    Ok((ok, "depth-L truncation within the geometric tail of depth 2L".into()))
}

fn unrolled(e: &BitExpansion, len: usize) -> Vec<bool> {
    let mut bits = e.prefix().to_vec();
    while bits.len() < len && !e.period().is_empty() {
        bits.extend_from_slice(e.period());
    }
    bits.resize(len, false);
    bits
}

fn additivity() -> Result<(bool, String)> {
    let mut ok = true;
    for g in [1.0, 0.9] {
        let params = pm(0.6, g);
        let whole = integral_exact(&Dyadic::ZERO, &Dyadic::ONE, &params)?;
        for k in 1..256u64 {
            let m = Dyadic::new(k, 8)?;
            ok &= integral_exact(&Dyadic::ZERO, &m, &params)? + integral_exact(&m, &Dyadic::ONE, &params)? == whole;
        }
    }
    Ok((ok, "split at every point of G_8, exact".into()))
}

fn argmax_membership(level: u32) -> Result<(bool, String)> {
    let mut ok = true;
    for g in [1.0, 0.9] {
        let params = pm(0.6, g);
        for k in 1..(1u64 << level) {
            let s = Dyadic::new(k, level)?;
            for a in maximizing_actions(&CandidateFn::ExactV, &s, level + 2, &params)? {
                ok &= a.level() <= level;
            }
        }
    }
    Ok((ok, format!("states of G_{level}, actions on G_{}", level + 2)))
}

fn bold_unique() -> Result<(bool, String)> {
    let mut ok = true;
    for g in [1.0, 0.9] {
        let params = pm(0.6, g);
        for s in [Rational::new(1, 3), Rational::new(2, 3), Rational::new(2, 5), Rational::new(5, 7)] {
            let exact = value_rational_exact(&s, &params)?;
            ok &= q_value_exact(&s, &optimal_action(&s)?, &params)? == exact;
            let v = exact.to_f64().unwrap_or(f64::NAN);
            for level in [8, 12] {
                ok &= grid_maximizer(&s, level, &params)?.1 < v;
            }
        }
    }
    Ok((ok, "q(s, min(s, 1-s)) = v(s) exactly, every grid action below".into()))
}

fn uniqueness() -> Result<(bool, String)> {
    let params = pm(0.6, 0.9);
    let runs = [0.0, 0.5, 2.0]
        .iter()
        .map(|&c| Ok(iterate_bellman(&GridFn::constant_interior(7, c)?, 7, &params, 300)?.table))
        .collect::<Result<Vec<_>>>()?;
    let spread = runs[1..].iter().map(|t| t.sup_distance(&runs[0], 7)).collect::<Result<Vec<_>>>()?;
    let worst = spread.iter().copied().fold(0.0, f64::max);
    Ok((worst <= 1e-8, format!("starts 0, 0.5, 2 end {worst:.3e} apart")))
}

fn constants() -> Result<(bool, String)> {
    let params = pm(0.6, 1.0);
    let mut ok = true;
    for c in [1.0, 1.5, 3.0] {
        ok &= bellman_residual(&CandidateFn::Constant(c), 6, 7, &params)?.max_residual <= 1e-12;
    }
    for c in [0.5, 0.9] {
        let r = bellman_residual(&CandidateFn::Constant(c), 6, 7, &params)?;
        let edge = r.per_state.last().expect("interior states");
        ok &= (edge.residual - 0.4 * (1.0 - c)).abs() <= 1e-12;
    }
    Ok((ok, "C >= 1 solves, C < 1 fails next to s = 1".into()))
}

fn discrete_grid(max_n: usize) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for n in 2..=max_n {
        for p in PS {
            for g in [1.0, 0.9, 0.5] {
                let spec = DiscreteSpec::new(n, pm(p, g))?;
                let vi = value_iteration(&spec, &Init::Fill(0.0), 1e-13, 100_000)?;
                worst = worst.max(sup_distance(&vi.values, &exact_table(&spec)?.values));
            }
        }
    }
    Ok((worst <= 1e-8, format!("N <= {max_n}, worst gap {worst:.3e}")))
}

fn discrete_monotone() -> Result<(bool, String)> {
    let mut ok = true;
    for p in PS {
        let z = exact_table(&DiscreteSpec::new(100, pm(p, 1.0))?)?.values;
        ok &= z.windows(2).all(|w| w[1] >= w[0]);
    }
    Ok((ok, "N = 100".into()))
}

fn figure_points() -> Result<(bool, String)> {
    let mut ok = true;
    for p in [0.6, 0.9] {
        let params = pm(p, 1.0);
        for (n, k, l) in [(50u64, 1u64, 1u32), (25, 1, 2), (75, 3, 2)] {
            ok &= value_rational_exact(&Rational::new(n, 100), &params)?
                == value_dyadic_exact(&Dyadic::new(k, l)?, &params);
        }
    }
    Ok((ok, "z(50), z(25), z(75) at N = 100".into()))
}

fn determinism() -> Result<(bool, String)> {
    let params = pm(0.6, 0.9);
    let s0 = Rational::new(2, 3);
    let a = mc_value(&s0, &Policy::Bold, &params, 150_000, 42, 64)?;
    let b = mc_value(&s0, &Policy::Bold, &params, 150_000, 42, 64)?;
    Ok((a == b, format!("mean {:.6}", a.mean)))
}

fn bold_vs_alt(episodes: u64) -> Result<(bool, String)> {
    let params = pm(0.6, 1.0);
    let s0 = Rational::new(11, 16);
    let bold = mc_value(&s0, &Policy::Bold, &params, episodes, 1, 64)?;
    let alt = mc_value(&s0, &Policy::Alt, &params, episodes, 2, 10_000)?;
    let joint = (bold.stderr.powi(2) + alt.stderr.powi(2)).sqrt();
    let gap = (bold.mean - alt.mean).abs();
    Ok((gap <= 3.0 * joint, format!("gap {gap:.2e}, 3 sigma {:.2e}", 3.0 * joint)))
}

fn bold_discounted(episodes: u64) -> Result<(bool, String)> {
    let params = pm(0.6, 0.9);
    let mut ok = true;
    let mut worst = 0.0f64;
    for (k, l) in [(1, 1), (3, 2), (5, 3), (11, 4)] {
        let d = Dyadic::new(k, l)?;
        let est = mc_value(&d.to_rational(), &Policy::Bold, &params, episodes, k, 64)?;
        let z = (est.mean - value_dyadic(&d, &params)).abs() / est.stderr;
        ok &= z <= 3.0 && est.truncation_count == 0;
        worst = worst.max(z);
    }
    Ok((ok, format!("largest deviation {worst:.2} sigma")))
}

fn pc_oracle(deep: bool) -> Result<(bool, String)> {
    let bins: &[usize] = if deep { &[4, 8, 16, 32] } else { &[4, 8] };
    let mut worst = 0.0f64;
    for &n in bins {
        for p in [0.55, 0.6, 0.9] {
            for g in [1.0, 0.9] {
                let params = pm(p, g);
                let depth = 2 * n.trailing_zeros() + 8;
                let exact = pc_error_exact(n, &params)?.exact_error;
                worst = worst.max((exact - pc_error_brute(n, &params, depth)?).abs());
            }
        }
    }
    Ok((worst <= 1e-4, format!("largest gap {worst:.3e}")))
}

fn pc_rate() -> Result<(bool, String)> {
    let mut ok = true;
    for g in [1.0, 0.9, 0.5] {
        let params = pm(0.6, g);
        let half_gamma = params.gamma() / BigRational::from_integer(2.into());
        let errors = (2..=8).map(|m| pc_error_rational(1 << m, &params)).collect::<Result<Vec<_>>>()?;
        ok &= errors.windows(2).all(|w| &w[1] / &w[0] == half_gamma);
    }
    Ok((ok, "error(2N) / error(N) = gamma / 2 exactly, N = 4..256".into()))
}

fn jump_consistency() -> Result<(bool, String)> {
    let mut ok = true;
    for (p, g) in [(0.6, 0.9), (0.9, 0.5), (0.75, 1.0)] {
        let params = pm(p, g);
        ok &= jump_at_half(&params) == left_limit_and_jump_exact(&Dyadic::HALF, &params)?.jump;
    }
    Ok((ok, "exact".into()))
}

fn ramp() -> Result<(bool, String)> {
    let bound = lipschitz_bound(1.0, &pm(0.6, 0.9))?;
    let n = 1 << 16;
    let h = bound.h;
    let l1 = |f: &dyn Fn(f64) -> f64| {
        (0..n).map(|i| (i as f64 + 0.5) / n as f64).map(|s| ((if s < 0.5 { 0.0 } else { h }) - f(s)).abs()).sum::<f64>()
            / n as f64
    };
    let best = l1(&|s| bound.ramp.eval(s));
    let ok = (best - bound.bound).abs() <= 1e-9 && l1(&|s| bound.ramp.eval(s - 0.01)) > best;
    Ok((ok, format!("ramp error {best:.6e}, bound {:.6e}", bound.bound)))
}

#[cfg(test)]
mod tests {
    #[test]
    fn quick_suite_passes() {
        for c in super::run_suite(false) {
            assert!(c.passed, "{c}");
        }
    }
}
