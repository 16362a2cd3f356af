//! The discrete game on capital `0..=N`: bet `a` in `1..=min(n, N-n)`, lose
//! it with probability `p`, receive 1 on reaching `N`. Its optimal values are
//! `z(n) = v(n/N)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dyadic::Rational;
use crate::error::{Error, Result};
use crate::params::Params;
use crate::value::value_rational;

/// Relative slack for treating two action values as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSpec {
    n: usize,
    params: Params,
}

impl DiscreteSpec {
    pub fn new(n: usize, params: Params) -> Result<Self> {
        if n < 2 {
            return Err(Error::Precondition(format!("target capital {n} must be at least 2")));
        }
        if n > u32::MAX as usize {
            return Err(Error::Precondition(format!("target capital {n} is too large")));
        }
        Ok(Self { n, params })
    }

    pub fn target(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Largest legal bet at capital `n`.
    pub fn max_bet(&self, n: usize) -> usize {
        n.min(self.n - n)
    }

    fn weights(&self) -> (f64, f64) {
        let gamma = self.params.gamma_f64();
        (self.params.p_f64() * gamma, (1.0 - self.params.p_f64()) * gamma)
    }

    fn backup(&self, z: &[f64], n: usize, a: usize) -> f64 {
        let (lose, win) = self.weights();
        lose * z[n - a] + win * z[n + a]
    }
}

/// Values `z(0..=N)` with the work that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub final_delta: f64,
}

/// `z(n) = v(n/N)`, each value from the exact periodic expansion of `n/N`.
pub fn exact_table(spec: &DiscreteSpec) -> Result<ValueTable> {
    let big_n = spec.n as u64;
    let values =
        (0..=big_n).map(|n| value_rational(&Rational::new(n, big_n), &spec.params)).collect::<Result<Vec<_>>>()?;
    Ok(ValueTable { values, iterations: 0, final_delta: 0.0 })
}

/// Starting point for [`value_iteration`].
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// The same value at every interior state.
    Fill(f64),
    /// A full table; its boundary entries are overwritten with 0 and 1.
    Table(Vec<f64>),
}

/// Synchronous value iteration, stopping once the sup-norm change of a sweep
/// drops below `tol`.
pub fn value_iteration(spec: &DiscreteSpec, init: &Init, tol: f64, max_iter: usize) -> Result<ValueTable> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidTolerance(tol));
    }
    let big_n = spec.n;
    let mut z = match init {
        Init::Fill(c) => vec![*c; big_n + 1],
        Init::Table(t) if t.len() == big_n + 1 => t.clone(),
        Init::Table(t) => {
            return Err(Error::Precondition(format!("initial table has {} entries, expected {}", t.len(), big_n + 1)))
        }
    };
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::Precondition("initial values must be finite".into()));
    }
    z[0] = 0.0;
    z[big_n] = 1.0;
    let mut next = z.clone();
    let mut delta = f64::INFINITY;
    for iteration in 1..=max_iter {
        delta = 0.0;
        for n in 1..big_n {
            let best = (1..=spec.max_bet(n)).map(|a| spec.backup(&z, n, a)).fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - z[n]).abs());
            next[n] = best;
        }
        std::mem::swap(&mut z, &mut next);
        if delta < tol {
            return Ok(ValueTable { values: z, iterations: iteration, final_delta: delta });
        }
    }
    Err(Error::NotConverged { iterations: max_iter, delta })
}

fn check_table(table: &ValueTable, spec: &DiscreteSpec) -> Result<()> {
    if table.values.len() != spec.n + 1 {
        return Err(Error::Precondition(format!("table has {} entries, expected {}", table.values.len(), spec.n + 1)));
    }
    Ok(())
}

/// Every bet at `n` whose backup of `table` is within [`TIE_TOLERANCE`] of
/// the best, in increasing order.
pub fn maximizing_actions(table: &ValueTable, spec: &DiscreteSpec, n: usize) -> Result<Vec<usize>> {
    check_table(table, spec)?;
    if n == 0 || n >= spec.n {
        return Err(Error::Precondition(format!("state {n} is terminal")));
    }
    let q: Vec<f64> = (1..=spec.max_bet(n)).map(|a| spec.backup(&table.values, n, a)).collect();
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = TIE_TOLERANCE * best.abs().max(1.0);
    Ok((1..=spec.max_bet(n)).filter(|&a| q[a - 1] >= best - slack).collect())
}

/// Greedy bet at each capital, ties to the largest bet; entries for the
/// terminal states 0 and N are 0.
pub fn greedy_policy(table: &ValueTable, spec: &DiscreteSpec) -> Result<Vec<usize>> {
    check_table(table, spec)?;
    let mut policy = vec![0; spec.n + 1];
    for (n, slot) in policy.iter_mut().enumerate().take(spec.n).skip(1) {
        *slot = *maximizing_actions(table, spec, n)?.last().expect("every interior state has a bet");
    }
    Ok(policy)
}

/// Step size or exploration rate as a function of a counter `t`.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// `initial / (1 + t / tau)`.
    Harmonic { initial: f64, tau: f64 },
    /// `values[t]`, holding the last entry once `t` runs past the end.
    Steps(Vec<f64>),
}

impl Schedule {
    /// `1 / (1 + t)`: with `t` the visit count this averages every sample
    /// seen so far.
    pub const SAMPLE_AVERAGE: Schedule = Schedule::Harmonic { initial: 1.0, tau: 1.0 };

    /// `0.5 / (1 + t / 10^4)`.
    pub const SLOW: Schedule = Schedule::Harmonic { initial: 0.5, tau: 1e4 };

    pub fn at(&self, t: u64) -> f64 {
        match self {
            Schedule::Harmonic { initial, tau } => initial / (1.0 + t as f64 / tau),
            Schedule::Steps(values) => values[(t as usize).min(values.len() - 1)],
        }
    }

    fn validate(&self, name: &str, max: f64) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x <= max;
        let valid = match self {
            Schedule::Harmonic { initial, tau } => ok(*initial) && *tau > 0.0 && tau.is_finite(),
            Schedule::Steps(values) => {
                !values.is_empty() && values.iter().all(|&x| ok(x)) && values.windows(2).all(|w| w[1] <= w[0])
            }
        };
        if valid {
            Ok(())
        } else {
            Err(Error::InvalidSchedule(format!(
                "{name} schedule {self:?} must be non-empty, in (0, {max}] and non-increasing"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearningConfig {
    pub episodes: u64,
    /// Indexed by the visit count of the updated state-action pair.
    pub alpha: Schedule,
    /// Indexed by the episode number.
    pub epsilon: Schedule,
    pub seed: u64,
    /// Episodes still running after this many steps are cut off.
    pub max_steps: u64,
}

impl QLearningConfig {
    /// Step sizes [`Schedule::SAMPLE_AVERAGE`], exploration [`Schedule::SLOW`].
    pub fn new(episodes: u64, seed: u64) -> Self {
        Self { episodes, alpha: Schedule::SAMPLE_AVERAGE, epsilon: Schedule::SLOW, seed, max_steps: 100_000 }
    }
}

/// Action values `q(n, a)` for `1 <= n < N`, `1 <= a <= min(n, N-n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    target: usize,
    q: Vec<Vec<f64>>,
    visits: Vec<Vec<u64>>,
}

impl QTable {
    fn zeros(target: usize) -> Self {
        let widths = (0..=target).map(|n| n.min(target - n));
        Self { target, q: widths.clone().map(|w| vec![0.0; w]).collect(), visits: widths.map(|w| vec![0; w]).collect() }
    }

    pub fn target(&self) -> usize {
        self.target
    }

    /// `q(n, a)`.
    pub fn get(&self, n: usize, a: usize) -> Option<f64> {
        self.q.get(n)?.get(a.checked_sub(1)?).copied()
    }

    pub fn visits(&self, n: usize, a: usize) -> Option<u64> {
        self.visits.get(n)?.get(a.checked_sub(1)?).copied()
    }

    /// Row of action values at `n`, indexed by `a - 1`.
    pub fn row(&self, n: usize) -> &[f64] {
        &self.q[n]
    }

    /// `max_a q(n, a)`, with 0 and 1 at the terminal states.
    pub fn state_value(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else if n >= self.target {
            1.0
        } else {
            self.q[n].iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
    }

    /// `max_a q(n, a)` for `n = 0..=N`.
    pub fn greedy_values(&self) -> Vec<f64> {
        (0..=self.target).map(|n| self.state_value(n)).collect()
    }

    /// Largest greedy bet at each interior state; 0 at the terminals.
    pub fn greedy_actions(&self) -> Vec<usize> {
        (0..=self.target)
            .map(|n| {
                if n == 0 || n == self.target {
                    return 0;
                }
                let best = self.state_value(n);
                self.q[n].iter().rposition(|&x| x == best).map_or(0, |i| i + 1)
            })
            .collect()
    }

    fn greedy(&self, n: usize) -> usize {
        let row = &self.q[n];
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter().rposition(|&x| x == best).expect("non-empty row") + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearningRun {
    pub table: QTable,
    /// Discounted return of each episode.
    pub returns: Vec<f64>,
    /// Episodes cut off at `max_steps`.
    pub truncated: u64,
}

/// Tabular Q-learning with exploring starts (uniform over interior states)
/// and epsilon-greedy behaviour, driven by a ChaCha8 stream from `seed`.
pub fn q_learning(spec: &DiscreteSpec, config: &QLearningConfig) -> Result<QLearningRun> {
    if config.episodes == 0 {
        return Err(Error::Precondition("at least one episode is required".into()));
    }
    if config.max_steps == 0 {
        return Err(Error::Precondition("max_steps must be at least 1".into()));
    }
    config.alpha.validate("alpha", 1.0)?;
    config.epsilon.validate("epsilon", 1.0)?;

    let big_n = spec.n;
    let p = spec.params.p_f64();
    let gamma = spec.params.gamma_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut table = QTable::zeros(big_n);
    let mut returns = Vec::with_capacity(config.episodes as usize);
    let mut truncated = 0;

    for episode in 0..config.episodes {
        let epsilon = config.epsilon.at(episode);
        let mut n = rng.random_range(1..big_n);
        let mut discount = 1.0;
        let mut episode_return = 0.0;
        let mut steps = 0;
        loop {
            if steps == config.max_steps {
                truncated += 1;
                break;
            }
            steps += 1;
            let top = spec.max_bet(n);
            let a = if rng.random_bool(epsilon) { rng.random_range(1..=top) } else { table.greedy(n) };
            let next = if rng.random_bool(p) { n - a } else { n + a };
            let target = gamma * table.state_value(next);
            let count = &mut table.visits[n][a - 1];
            let alpha = config.alpha.at(*count);
            *count += 1;
            let q = &mut table.q[n][a - 1];
            *q += alpha * (target - *q);
            discount *= gamma;
            if next == big_n {
                episode_return = discount;
                break;
            }
            if next == 0 {
                break;
            }
            n = next;
        }
        returns.push(episode_return);
    }
    Ok(QLearningRun { table, returns, truncated })
}

/// `max_n |a[n] - b[n]|`.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
