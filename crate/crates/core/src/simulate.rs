//! Monte-Carlo play of the continuous game.
//!
//! States are exact rationals: under the bold policy the capital follows the
//! binary shift `s -> 2s` or `s -> 2s - 1` and its denominator never changes.
//! A win at step `T` pays `gamma^T`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dyadic::{self, Dyadic, Rational};
use crate::error::{Error, Result};
use crate::params::Params;

/// Generator used for every simulation.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), seed_from_u64, one stream per batch";

/// Episodes per independently seeded batch.
pub const BATCH_SIZE: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    ReachedOne,
    ReachedZero,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub steps: u32,
    /// `gamma^steps` on reaching 1, otherwise 0.
    pub discounted_return: f64,
}

/// Bets on the level-`level` lattice, indexed by numerator.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPolicy {
    level: u32,
    actions: Vec<u64>,
}

impl GridPolicy {
    /// `actions[k]` is the bet, in units of `2^-level`, at state `k / 2^level`.
    /// Entries at 0 and 1 are ignored.
    pub fn new(level: u32, actions: Vec<u64>) -> Result<Self> {
        if level == 0 || level > 30 {
            return Err(Error::InvalidPolicy(format!("policy level {level} must be in 1..=30")));
        }
        let n = 1u64 << level;
        if actions.len() as u64 != n + 1 {
            return Err(Error::InvalidPolicy(format!("expected {} actions, got {}", n + 1, actions.len())));
        }
        for k in 1..n {
            let a = actions[k as usize];
            if a == 0 || a > k.min(n - k) {
                return Err(Error::InvalidPolicy(format!("bet {a}/2^{level} is infeasible at {k}/2^{level}")));
            }
        }
        Ok(Self { level, actions })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    fn action(&self, s: &Rational) -> Result<Rational> {
        let d = Dyadic::from_rational(s)
            .filter(|d| d.level() <= self.level)
            .ok_or_else(|| Error::InvalidPolicy(format!("state {s} is off the level-{} lattice", self.level)))?;
        let k = d.numerator_at(self.level)?;
        Ok(Rational::new(self.actions[k as usize], 1u64 << self.level))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// `min(s, 1-s)`.
    Bold,
    /// `2^-l` at a state with exactly `l` bits; dyadic states only.
    Alt,
    Grid(GridPolicy),
}

impl Policy {
    fn action(&self, s: &Rational) -> Result<Rational> {
        match self {
            Policy::Bold => Ok(dyadic::max_bet(s)),
            Policy::Alt => {
                let d = Dyadic::from_rational(s)
                    .ok_or_else(|| Error::InvalidPolicy(format!("the alt policy needs a dyadic state, got {s}")))?;
                Ok(Dyadic::unit(d.level())?.to_rational())
            }
            Policy::Grid(g) => g.action(s),
        }
    }

    fn check_start(&self, s0: &Rational) -> Result<()> {
        match self {
            Policy::Bold => Ok(()),
            _ => self.action(s0).map(|_| ()),
        }
    }
}

fn check_start(s0: &Rational, cutoff: u32) -> Result<()> {
    dyadic::check_unit(s0)?;
    if *s0 == Rational::from_integer(0) || *s0 == Rational::from_integer(1) {
        return Err(Error::Precondition(format!("start {s0} is not interior")));
    }
    if cutoff == 0 {
        return Err(Error::Precondition("cutoff depth must be at least 1".into()));
    }
    Ok(())
}

/// Plays one episode from `s0`, stopping at 0, at 1, or after `cutoff` steps.
pub fn run_episode<R: Rng + ?Sized>(
    s0: &Rational,
    policy: &Policy,
    params: &Params,
    cutoff: u32,
    rng: &mut R,
) -> Result<EpisodeResult> {
    check_start(s0, cutoff)?;
    play(s0, policy, params.p_f64(), params.gamma_f64(), cutoff, rng)
}

fn play<R: Rng + ?Sized>(
    s0: &Rational,
    policy: &Policy,
    p: f64,
    gamma: f64,
    cutoff: u32,
    rng: &mut R,
) -> Result<EpisodeResult> {
    let zero = Rational::from_integer(0);
    let one = Rational::from_integer(1);
    let mut s = *s0;
    let mut discount = 1.0;
    for step in 1..=cutoff {
        let a = policy.action(&s)?;
        s = if rng.random_bool(p) { dyadic::sub_rational(&s, &a)? } else { dyadic::add_rational(&s, &a)? };
        discount *= gamma;
        if s == one {
            return Ok(EpisodeResult { outcome: Outcome::ReachedOne, steps: step, discounted_return: discount });
        }
        if s == zero {
            return Ok(EpisodeResult { outcome: Outcome::ReachedZero, steps: step, discounted_return: 0.0 });
        }
    }
    Ok(EpisodeResult { outcome: Outcome::Truncated, steps: cutoff, discounted_return: 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(episodes)`.
    pub stderr: f64,
    pub episodes: u64,
    pub truncation_count: u64,
    /// Largest possible contribution of truncated episodes under the bold
    /// policy, `(gamma p)^cutoff`.
    pub bias_bound: f64,
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    truncated: u64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64 / n as f64),
            truncated: self.truncated + other.truncated,
        }
    }
}

/// Mean discounted return over `episodes` episodes from `s0`.
///
/// Episodes run in batches of [`BATCH_SIZE`], batch `i` on stream `i` of a
/// generator seeded with `seed`, so the estimate does not depend on the
/// number of threads.
pub fn mc_value(
    s0: &Rational,
    policy: &Policy,
    params: &Params,
    episodes: u64,
    seed: u64,
    cutoff: u32,
) -> Result<McEstimate> {
    check_start(s0, cutoff)?;
    policy.check_start(s0)?;
    if episodes == 0 {
        return Err(Error::Precondition("at least one episode is required".into()));
    }
    let p = params.p_f64();
    let gamma = params.gamma_f64();
    let batches = episodes.div_ceil(BATCH_SIZE);
    let parts = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let size = BATCH_SIZE.min(episodes - b * BATCH_SIZE);
            let mut m = Moments::default();
            for _ in 0..size {
                let r = play(s0, policy, p, gamma, cutoff, &mut rng)?;
                m.truncated += (r.outcome == Outcome::Truncated) as u64;
                m.push(r.discounted_return);
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = pairwise(&parts);
    let variance = if total.n > 1 { total.m2 / (total.n - 1) as f64 } else { 0.0 };
    Ok(McEstimate {
        mean: total.mean,
        stderr: (variance / total.n as f64).sqrt(),
        episodes: total.n,
        truncation_count: total.truncated,
        bias_bound: (gamma * p).powi(cutoff as i32),
    })
}

fn pairwise(parts: &[Moments]) -> Moments {
    match parts.len() {
        0 => Moments::default(),
        1 => parts[0],
        n => pairwise(&parts[..n / 2]).merge(pairwise(&parts[n / 2..])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, g: f64) -> Params {
        Params::new(p, g).unwrap()
    }

    #[test]
    fn half_is_one_coin_flip() {
        let pm = params(0.6, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let r = run_episode(&Rational::new(1, 2), &Policy::Bold, &pm, 10, &mut rng).unwrap();
            assert_eq!(r.steps, 1);
            assert_ne!(r.outcome, Outcome::Truncated);
        }
    }

    #[test]
    fn dyadic_starts_end_within_their_level() {
        let pm = params(0.6, 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s0 = Rational::new(11, 32);
        for policy in [Policy::Bold, Policy::Alt] {
            for _ in 0..500 {
                let r = run_episode(&s0, &policy, &pm, 64, &mut rng).unwrap();
                assert_ne!(r.outcome, Outcome::Truncated);
                if policy == Policy::Bold {
                    assert!(r.steps <= 5);
                }
                if r.outcome == Outcome::ReachedOne {
                    assert_eq!(r.discounted_return, 0.9f64.powi(r.steps as i32));
                }
            }
        }
    }

    #[test]
    fn bold_follows_the_binary_shift() {
        struct Script(Vec<bool>);
        impl rand::RngCore for Script {
            fn next_u32(&mut self) -> u32 {
                self.next_u64() as u32
            }
            fn next_u64(&mut self) -> u64 {
                // random_bool(p) is true for small draws
                if self.0.remove(0) {
                    0
                } else {
                    u64::MAX
                }
            }
            fn fill_bytes(&mut self, dst: &mut [u8]) {
                rand::rand_core::impls::fill_bytes_via_next(self, dst)
            }
        }
        // 2/3 -> lose -> 1/3 -> win -> 2/3 -> win -> 1
        let mut rng = Script(vec![true, false, false]);
        let r = run_episode(&Rational::new(2, 3), &Policy::Bold, &params(0.6, 0.5), 10, &mut rng).unwrap();
        assert_eq!(r.outcome, Outcome::ReachedOne);
        assert_eq!(r.steps, 3);
        assert_eq!(r.discounted_return, 0.125);
    }

    #[test]
    fn truncation_is_rare_and_counted() {
        let pm = params(0.6, 1.0);
        let est = mc_value(&Rational::new(2, 3), &Policy::Bold, &pm, 100_000, 5, 5).unwrap();
        // survival after 5 steps alternates p and 1-p factors: p^3 (1-p)^2
        let expected = 0.6f64.powi(3) * 0.4f64.powi(2);
        let rate = est.truncation_count as f64 / est.episodes as f64;
        assert!((rate - expected).abs() < 0.01, "{rate}");
        let deep = mc_value(&Rational::new(2, 3), &Policy::Bold, &pm, 10_000, 5, 60).unwrap();
        assert_eq!(deep.truncation_count, 0);
        assert!((deep.bias_bound / 0.6f64.powi(60) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn estimates_are_seeded() {
        let pm = params(0.6, 0.9);
        let s0 = Rational::new(3, 4);
        let a = mc_value(&s0, &Policy::Bold, &pm, 200_000, 9, 64).unwrap();
        let b = mc_value(&s0, &Policy::Bold, &pm, 200_000, 9, 64).unwrap();
        assert_eq!(a, b);
        let c = mc_value(&s0, &Policy::Bold, &pm, 200_000, 10, 64).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn estimate_matches_v() {
        let pm = params(0.6, 1.0);
        let est = mc_value(&Rational::new(3, 4), &Policy::Bold, &pm, 200_000, 1, 64).unwrap();
        assert!((est.mean - 0.64).abs() < 3.0 * est.stderr);
    }

    #[test]
    fn grid_policies_are_validated() {
        assert!(GridPolicy::new(2, vec![0, 1, 2, 1, 0]).is_ok());
        assert!(GridPolicy::new(2, vec![0, 2, 2, 1, 0]).is_err());
        assert!(GridPolicy::new(2, vec![0, 1, 2, 1]).is_err());
        let g = Policy::Grid(GridPolicy::new(2, vec![0, 1, 1, 1, 0]).unwrap());
        let pm = params(0.6, 1.0);
        assert!(mc_value(&Rational::new(1, 3), &g, &pm, 10, 1, 8).is_err());
        assert!(mc_value(&Rational::new(1, 3), &Policy::Alt, &pm, 10, 1, 8).is_err());
        // Betting 1/4 everywhere: x2 = 0.6 x1 + 0.4 x3, x1 = 0.4 x2, x3 = 0.6 x2 + 0.4.
        let est = mc_value(&Rational::new(1, 2), &g, &pm, 100_000, 1, 10_000).unwrap();
        assert!((est.mean - 0.16 / 0.52).abs() < 3.0 * est.stderr);
    }

    #[test]
    fn rejects_bad_starts() {
        let pm = params(0.6, 1.0);
        assert!(mc_value(&Rational::from_integer(1), &Policy::Bold, &pm, 10, 1, 8).is_err());
        assert!(mc_value(&Rational::new(1, 2), &Policy::Bold, &pm, 0, 1, 8).is_err());
        assert!(mc_value(&Rational::new(1, 2), &Policy::Bold, &pm, 10, 1, 0).is_err());
    }
}
