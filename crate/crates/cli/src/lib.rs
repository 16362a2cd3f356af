//! The `gambler` command line: value tables, discrete solvers, Monte Carlo,
//! approximation bounds and the invariant suite, as CSV or JSON lines.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::ToPrimitive;

use gambler_core::approx::{lipschitz_bound, pc_error_exact};
use gambler_core::discrete::{exact_table, q_learning, value_iteration, DiscreteSpec, Init, QLearningConfig};
use gambler_core::increments::backward_diff;
use gambler_core::simulate::{mc_value, Policy, RNG_ALGORITHM};
use gambler_core::value::{lattice_values, value_expansion_exact, RATIONAL_DEPTH};
use gambler_core::verify::run_suite;
use gambler_core::{expand_rational, parse_rational, value_expansion, value_rational, Dyadic, Params, Rational};

mod output;

use output::{int, num, text};
pub use output::{Format, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gambler", version, about = "Exact values, solvers and checks for the Gambler's problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format; `verify` prints PASS/FAIL lines unless one is given.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ParamArgs {
    /// Probability of losing a bet, `num/den` or decimal, in [0.5, 1).
    #[arg(long)]
    p: String,

    /// Discount factor, `num/den` or decimal, in [0, 1].
    #[arg(long)]
    gamma: String,
}

impl ParamArgs {
    fn parse(&self) -> Result<Params, String> {
        Params::parse(&self.p, &self.gamma).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Exact,
    Vi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyName {
    Bold,
    Alt,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// v(s) at a rational state.
    Eval {
        #[arg(long)]
        s: String,
        #[command(flatten)]
        params: ParamArgs,
        /// Accepted truncation error when the binary period of `s` is too long.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Add the exact rational value as a column `v_exact`.
        #[arg(long)]
        exact: bool,
    },
    /// v over the level-L lattice, 0 and 1 included.
    Table {
        #[arg(long)]
        level: u32,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// The discrete game with N units: exact values against value iteration.
    Solve {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value_t = Method::Vi)]
        method: Method,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Starting value at every interior state.
        #[arg(long, default_value_t = 0.0)]
        init: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
    },
    /// Tabular Q-learning on the discrete game.
    Qlearn {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        episodes: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        max_steps: u64,
        /// Also write the per-episode discounted returns here as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Monte Carlo estimate of a policy's value.
    Simulate {
        #[arg(long)]
        s0: String,
        #[arg(long, value_enum)]
        policy: PolicyName,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        episodes: u64,
        #[arg(long)]
        seed: u64,
        /// Episodes are cut off after this many bets.
        #[arg(long, default_value_t = 10_000)]
        cutoff: u32,
    },
    /// Approximation error lower bounds.
    Approx {
        #[command(subcommand)]
        kind: ApproxCommand,
    },
    /// Runs the invariant suite; exits 2 if any check fails.
    Verify {
        /// Larger grids and deeper lattices.
        #[arg(long)]
        deep: bool,
    },
    /// Increments of v around a dyadic lattice point.
    Diff {
        #[arg(long)]
        s: String,
        #[arg(long)]
        level: u32,
        #[command(flatten)]
        params: ParamArgs,
    },
}

#[derive(Debug, Subcommand)]
enum ApproxCommand {
    /// Optimal piecewise-constant fit on N equal bins.
    Pc {
        #[arg(long)]
        bins: usize,
        #[command(flatten)]
        params: ParamArgs,
        /// Lattice level of a trapezoid cross-check.
        #[arg(long)]
        depth: Option<u32>,
        /// One row per bin instead of the summary.
        #[arg(long)]
        per_bin: bool,
    },
    /// Error bound for Lipschitz approximations.
    Lip {
        #[arg(long)]
        lipschitz: f64,
        #[command(flatten)]
        params: ParamArgs,
    },
}

enum Report {
    Table(Table),
    /// PASS/FAIL lines by default, the table under an explicit `--format`.
    Checks {
        lines: Vec<String>,
        table: Table,
    },
}

struct Outcome {
    report: Report,
    code: i32,
}

impl From<Table> for Outcome {
    fn from(table: Table) -> Self {
        Outcome { report: Report::Table(table), code: EXIT_OK }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code. Usage and validation errors go to `stderr` with code 1.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    let outcome = match dispatch(&cli.command) {
        Ok(outcome) => outcome,
        Err(message) => {
            let _ = writeln!(stderr, "error: {message}");
            return EXIT_USAGE;
        }
    };
    let written = match &cli.output {
        Some(path) => File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            emit(&outcome.report, cli.format, &mut w)?;
            w.flush()
        }),
        None => emit(&outcome.report, cli.format, stdout),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write output: {e}");
        return EXIT_USAGE;
    }
    outcome.code
}

fn emit(report: &Report, format: Option<Format>, out: &mut dyn Write) -> io::Result<()> {
    match (report, format) {
        (Report::Checks { lines, .. }, None) => lines.iter().try_for_each(|l| writeln!(out, "{l}")),
        (Report::Checks { table, .. }, Some(f)) => table.write(f, out),
        (Report::Table(t), f) => t.write(f.unwrap_or(Format::Csv), out),
    }
}

fn dispatch(command: &Command) -> Result<Outcome, String> {
    match command {
        Command::Eval { s, params, tol, exact } => eval(s, &params.parse()?, *tol, *exact).map(Into::into),
        Command::Table { level, params } => table(*level, &params.parse()?).map(Into::into),
        Command::Solve { n, params, method, tol, init, max_iter } => {
            solve(*n, params.parse()?, *method, *tol, *init, *max_iter).map(Into::into)
        }
        Command::Qlearn { n, params, episodes, seed, max_steps, trace } => {
            qlearn(*n, params.parse()?, *episodes, *seed, *max_steps, trace.as_ref()).map(Into::into)
        }
        Command::Simulate { s0, policy, params, episodes, seed, cutoff } => {
            simulate(s0, *policy, &params.parse()?, *episodes, *seed, *cutoff).map(Into::into)
        }
        Command::Approx { kind: ApproxCommand::Pc { bins, params, depth, per_bin } } => {
            approx_pc(*bins, &params.parse()?, *depth, *per_bin).map(Into::into)
        }
        Command::Approx { kind: ApproxCommand::Lip { lipschitz, params } } => {
            approx_lip(*lipschitz, &params.parse()?).map(Into::into)
        }
        Command::Verify { deep } => Ok(verify(*deep)),
        Command::Diff { s, level, params } => diff(s, *level, &params.parse()?).map(Into::into),
    }
}

fn err(e: impl ToString) -> String {
    e.to_string()
}

/// An exact state in `[0, 1]` with 64-bit numerator and denominator.
fn parse_state(s: &str) -> Result<Rational, String> {
    let r: BigRational = parse_rational(s).map_err(err)?;
    let (Some(num), Some(den)) = (r.numer().to_u64(), r.denom().to_u64()) else {
        return Err(format!("state `{s}` must be a non-negative rational with 64-bit numerator and denominator"));
    };
    let state = Rational::new(num, den);
    if state > Rational::from_integer(1) {
        return Err(format!("state `{s}` lies outside [0, 1]"));
    }
    Ok(state)
}

fn eval(s: &str, params: &Params, tol: f64, exact: bool) -> Result<Table, String> {
    let state = parse_state(s)?;
    let bits = expand_rational(&state, RATIONAL_DEPTH).map_err(err)?;
    let v = value_expansion(&bits, params, tol).map_err(err)?;
    if !exact {
        let mut t = Table::new(&["s", "v"]);
        t.push(vec![text(state), num(v)]);
        return Ok(t);
    }
    let v_exact = value_expansion_exact(&bits, params).map_err(err)?;
    let mut t = Table::new(&["s", "v", "v_exact"]);
    t.push(vec![text(state), num(v), text(v_exact)]);
    Ok(t)
}

fn table(level: u32, params: &Params) -> Result<Table, String> {
    let values = lattice_values(level, params).map_err(err)?;
    let mut t = Table::new(&["s", "v"]);
    for (k, v) in values.into_iter().enumerate() {
        let s = Dyadic::new(k as u64, level).map_err(err)?;
        t.push(vec![num(s.to_f64()), num(v)]);
    }
    Ok(t)
}

fn solve(n: usize, params: Params, method: Method, tol: f64, init: f64, max_iter: usize) -> Result<Table, String> {
    let spec = DiscreteSpec::new(n, params).map_err(err)?;
    let exact = exact_table(&spec).map_err(err)?;
    let vi = match method {
        Method::Exact => None,
        Method::Vi => Some(value_iteration(&spec, &Init::Fill(init), tol, max_iter).map_err(err)?),
    };
    let mut t = Table::new(&["n", "z_exact", "z_vi", "abs_err"]);
    for (i, &z) in exact.values.iter().enumerate() {
        let (z_vi, abs_err) = match &vi {
            Some(table) => (num(table.values[i]), num((table.values[i] - z).abs())),
            None => (num(f64::NAN), num(f64::NAN)),
        };
        t.push(vec![int(i as u64), num(z), z_vi, abs_err]);
    }
    Ok(t)
}

fn qlearn(
    n: usize,
    params: Params,
    episodes: u64,
    seed: u64,
    max_steps: u64,
    trace: Option<&PathBuf>,
) -> Result<Table, String> {
    let spec = DiscreteSpec::new(n, params).map_err(err)?;
    let exact = exact_table(&spec).map_err(err)?;
    let config = QLearningConfig { max_steps, ..QLearningConfig::new(episodes, seed) };
    let run = q_learning(&spec, &config).map_err(err)?;
    if let Some(path) = trace {
        let mut returns = Table::new(&["episode", "return"]);
        for (i, r) in run.returns.iter().enumerate() {
            returns.push(vec![int(i as u64), num(*r)]);
        }
        File::create(path)
            .map(BufWriter::new)
            .and_then(|mut w| {
                returns.write(Format::Csv, &mut w)?;
                w.flush()
            })
            .map_err(|e| format!("cannot write trace {}: {e}", path.display()))?;
    }
    let greedy = run.table.greedy_values();
    let mut t = Table::new(&["n", "z_exact", "q_greedy", "abs_err"]);
    for (i, (&z, &q)) in exact.values.iter().zip(&greedy).enumerate() {
        t.push(vec![int(i as u64), num(z), num(q), num((q - z).abs())]);
    }
    Ok(t)
}

fn simulate(
    s0: &str,
    policy: PolicyName,
    params: &Params,
    episodes: u64,
    seed: u64,
    cutoff: u32,
) -> Result<Table, String> {
    let start = parse_state(s0)?;
    let (name, policy) = match policy {
        PolicyName::Bold => ("bold", Policy::Bold),
        PolicyName::Alt => ("alt", Policy::Alt),
    };
    let est = mc_value(&start, &policy, params, episodes, seed, cutoff).map_err(err)?;
    let exact = value_rational(&start, params).map_err(err)?;
    let mut t = Table::new(&[
        "s0",
        "policy",
        "p",
        "gamma",
        "episodes",
        "seed",
        "cutoff",
        "mean",
        "stderr",
        "truncations",
        "bias_bound",
        "v_exact",
        "rng",
    ]);
    t.push(vec![
        text(start),
        text(name),
        text(params.p()),
        text(params.gamma()),
        int(est.episodes),
        int(seed),
        int(cutoff),
        num(est.mean),
        num(est.stderr),
        int(est.truncation_count),
        num(est.bias_bound),
        num(exact),
        text(RNG_ALGORITHM),
    ]);
    Ok(t)
}

fn approx_pc(bins: usize, params: &Params, depth: Option<u32>, per_bin: bool) -> Result<Table, String> {
    let mut report = pc_error_exact(bins, params).map_err(err)?;
    if let Some(depth) = depth {
        report = report.with_brute(params, depth).map_err(err)?;
    }
    if per_bin {
        let mut t = Table::new(&["bin", "median_value", "bin_error", "proof_form"]);
        for b in &report.per_bin {
            t.push(vec![int(b.bin as u64), num(b.median_value), num(b.bin_error), num(b.proof_form)]);
        }
        return Ok(t);
    }
    let mut t = Table::new(&[
        "bins",
        "exact_error",
        "proof_form_error",
        "paper_leading_bound",
        "brute_error",
        "brute_tolerance",
    ]);
    let optional = |x: Option<f64>| x.map_or(serde_json::Value::Null, num);
    t.push(vec![
        int(report.bins as u64),
        num(report.exact_error),
        num(report.proof_form_error),
        num(report.paper_leading_bound),
        optional(report.brute_error),
        optional(report.brute_tolerance),
    ]);
    Ok(t)
}

fn approx_lip(lipschitz: f64, params: &Params) -> Result<Table, String> {
    let b = lipschitz_bound(lipschitz, params).map_err(err)?;
    let mut t = Table::new(&["lipschitz", "h", "h_exact", "bound"]);
    t.push(vec![num(lipschitz), num(b.h), text(&b.h_exact), num(b.bound)]);
    Ok(t)
}

fn verify(deep: bool) -> Outcome {
    let checks = run_suite(deep);
    let code = if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_VERIFY_FAILED };
    let mut table = Table::new(&["check", "passed", "detail"]);
    for c in &checks {
        table.push(vec![text(c.name), serde_json::Value::Bool(c.passed), text(&c.detail)]);
    }
    let lines = checks.iter().map(ToString::to_string).collect();
    Outcome { report: Report::Checks { lines, table }, code }
}

fn diff(s: &str, level: u32, params: &Params) -> Result<Table, String> {
    let state = parse_state(s)?;
    let site = Dyadic::from_rational(&state).ok_or_else(|| format!("state `{s}` is not a dyadic rational"))?;
    let r = backward_diff(&site, level, params).map_err(err)?;
    let mut t = Table::new(&["s", "level", "forward", "backward", "bound", "holds"]);
    t.push(vec![
        text(r.site),
        int(r.level),
        r.forward.map_or(serde_json::Value::Null, num),
        num(r.backward),
        num(r.bound),
        serde_json::Value::Bool(r.holds()),
    ]);
    Ok(t)
}
