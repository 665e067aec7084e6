//! `batchq`: optimal service policies for a two-queue batch-service system.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use batchq::cyclic::{self, CyclicPolicy, KStarResult};
use batchq::mdp::{self, SolverConfig};
use batchq::report::{self, Table1Options};
use batchq::schedule::{self, Schedule};
use batchq::sim::{self, CostMode, SimConfig, SimPolicy};
use batchq::{Execution, ModelParams};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::output::{emit, Format};

#[derive(Parser, Debug)]
#[command(name = "batchq", version, about = "Cyclic and MDP service policies for two batch-served Poisson queues")]
struct Cli {
    /// Worker threads for data-parallel loops (0 = all cores).
    #[arg(long, global = true, env = "BATCHQ_THREADS")]
    threads: Option<usize>,

    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal number of Q2 services per cycle and its thresholds.
    OptimalK(OptimalKArgs),
    /// Total discounted cost C(k) of one cyclic policy.
    Cost(CostArgs),
    /// MDP optimum at the big-M initial state.
    Opt(OptArgs),
    /// Reproduce the published table (closed forms plus MDP optimum).
    Table1(Table1Args),
    /// Write the data behind the k* and C(k) figures as CSV.
    Figure1(Figure1Args),
    /// Exhaustively search short cycles for the cheapest one.
    Enumerate(EnumerateArgs),
    /// Monte Carlo estimate of a policy's discounted cost.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct FormatArgs {
    /// Emit a single JSON object.
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    /// Emit a CSV header and rows.
    #[arg(long)]
    csv: bool,
}

impl FormatArgs {
    fn format(&self) -> Format {
        if self.json {
            Format::Json
        } else if self.csv {
            Format::Csv
        } else {
            Format::Text
        }
    }
}

#[derive(Args, Debug)]
struct ParamArgs {
    #[arg(long, value_parser = parse_gamma)]
    gamma: f64,
    #[arg(long = "l1", value_parser = parse_rate)]
    lambda1: f64,
    #[arg(long = "l2", value_parser = parse_rate)]
    lambda2: f64,
}

impl ParamArgs {
    fn params(&self) -> batchq::Result<ModelParams> {
        ModelParams::new(self.lambda1, self.lambda2, self.gamma)
    }
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Truncation bound of the value grid (default depends on gamma and rates).
    #[arg(long)]
    xmax: Option<usize>,
    /// Target accuracy of the value function.
    #[arg(long, value_parser = parse_positive)]
    epsilon: Option<f64>,
    /// Directory for solved value tables.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self, params: &ModelParams, exec: Execution) -> SolverConfig {
        let mut cfg = SolverConfig::for_params(params).with_execution(exec);
        if let Some(x) = self.xmax {
            cfg.xmax = x;
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        cfg
    }
}

#[derive(Args, Debug)]
struct OptimalKArgs {
    #[arg(long, value_parser = parse_gamma)]
    gamma: f64,
    /// Rate ratio lambda2 / lambda1 (>= 1).
    #[arg(long, value_parser = parse_ratio)]
    r: f64,
    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Args, Debug)]
struct CostArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Q2 services per cycle; defaults to k*.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    k: Option<u32>,
    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Args, Debug)]
struct OptArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Args, Debug)]
struct Table1Args {
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Args, Debug)]
struct Figure1Args {
    /// Output directory; receives figure1a.csv and figure1b.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(2..=20))]
    max_len: u32,
    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Expected,
    Sampled,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// `cyclic:<k>`, `cyclic:auto` (uses k*) or `mdp`.
    #[arg(long, value_parser = parse_policy)]
    policy: PolicySpec,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 100_000)]
    episodes: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Expected)]
    mode: ModeArg,
    /// Periods per episode (default: discounted tail below 0.1% of the cost scale).
    #[arg(long)]
    horizon: Option<u64>,
    /// Q1 backlog of the big-M initial state for cyclic runs (default 10 * lambda2).
    #[arg(long)]
    big_m: Option<u64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
enum PolicySpec {
    Cyclic(u32),
    CyclicAuto,
    Mdp,
}

fn parse_policy(s: &str) -> Result<PolicySpec, String> {
    match s {
        "mdp" => Ok(PolicySpec::Mdp),
        "cyclic:auto" => Ok(PolicySpec::CyclicAuto),
        _ => {
            let k = s
                .strip_prefix("cyclic:")
                .and_then(|k| k.parse::<u32>().ok())
                .filter(|&k| k >= 1)
                .ok_or_else(|| format!("expected cyclic:<k>=1..>, cyclic:auto or mdp, got {s:?}"))?;
            Ok(PolicySpec::Cyclic(k))
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|e| e.to_string())
}

fn parse_gamma(s: &str) -> Result<f64, String> {
    let g = parse_f64(s)?;
    if g > 0.0 && g < 1.0 {
        Ok(g)
    } else {
        Err(format!("discount factor must lie in (0, 1), got {g}"))
    }
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("arrival rate must be positive, got {v}"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    parse_rate(s).map_err(|_| format!("must be positive, got {s}"))
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    let r = parse_f64(s)?;
    if r >= 1.0 && r.is_finite() {
        Ok(r)
    } else {
        Err(format!("rate ratio must be >= 1, got {r}"))
    }
}

const EXIT_FAILURE: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = batchq::par::configure_threads(n) {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match run(cli.command, exec) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

type CmdResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn run(command: Command, exec: Execution) -> CmdResult {
    match command {
        Command::OptimalK(a) => cmd_optimal_k(a),
        Command::Cost(a) => cmd_cost(a),
        Command::Opt(a) => cmd_opt(a, exec),
        Command::Table1(a) => cmd_table1(a, exec),
        Command::Figure1(a) => cmd_figure1(a),
        Command::Enumerate(a) => cmd_enumerate(a, exec),
        Command::Simulate(a) => cmd_simulate(a, exec),
    }
}

#[derive(Serialize, Deserialize)]
struct OptimalKReport {
    gamma: f64,
    r: f64,
    #[serde(flatten)]
    result: KStarResult,
    asymptote_gamma_to_one: f64,
}

fn cmd_optimal_k(a: OptimalKArgs) -> CmdResult {
    let result = cyclic::optimal_k_for(a.gamma, a.r);
    let rep = OptimalKReport {
        gamma: a.gamma,
        r: a.r,
        result,
        asymptote_gamma_to_one: (2.0 * a.r).sqrt() - 1.0,
    };
    emit(a.format.format(), &rep, &[rep_row(&rep)], || {
        let mut s = format!(
            "k* = {}  (gamma = {}, r = {})\nthresholds: g(k*-1) = {:.6} < r <= g(k*) = {:.6}",
            result.k_star, a.gamma, a.r, result.threshold_low, result.threshold_high
        );
        if result.tie {
            s.push_str("\ntie: k* and k*+1 have equal cost; the shorter cycle is reported");
        }
        s
    })?;
    Ok(ExitCode::SUCCESS)
}

fn rep_row(rep: &OptimalKReport) -> Vec<(&'static str, String)> {
    vec![
        ("gamma", rep.gamma.to_string()),
        ("r", rep.r.to_string()),
        ("k_star", rep.result.k_star.to_string()),
        ("threshold_low", rep.result.threshold_low.to_string()),
        ("threshold_high", rep.result.threshold_high.to_string()),
        ("tie", rep.result.tie.to_string()),
    ]
}

#[derive(Serialize, Deserialize)]
struct CostReport {
    params: ModelParams,
    k: u32,
    k_star: u32,
    cycle_cost: f64,
    total_cost: f64,
}

fn cmd_cost(a: CostArgs) -> CmdResult {
    let params = a.params.params()?;
    let k_star = cyclic::optimal_k(&params).k_star;
    let k = a.k.unwrap_or(k_star);
    let rep = CostReport {
        params,
        k,
        k_star,
        cycle_cost: cyclic::cycle_cost(&params, k)?,
        total_cost: cyclic::total_cost(&params, k)?,
    };
    let row = vec![
        ("k", k.to_string()),
        ("k_star", k_star.to_string()),
        ("cycle_cost", rep.cycle_cost.to_string()),
        ("total_cost", rep.total_cost.to_string()),
    ];
    emit(a.format.format(), &rep, &[row], || {
        format!(
            "C({k}) = {}  (cycle cost {}, k* = {k_star})",
            report::fmt2(rep.total_cost),
            report::fmt2(rep.cycle_cost)
        )
    })?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize, Deserialize)]
struct OptReport {
    params: ModelParams,
    opt: f64,
    xmax: usize,
    epsilon: f64,
    iterations: usize,
    sup_delta: f64,
    cache_hit: bool,
    initial_state_rounded: bool,
}

fn cmd_opt(a: OptArgs, exec: Execution) -> CmdResult {
    let params = a.params.params()?;
    let cfg = a.solver.config(&params, exec);
    let (table, cache_hit) = mdp::load_or_solve(&params, &cfg, a.solver.cache_dir.as_deref())?;
    let rep = OptReport {
        params,
        opt: table.opt_cost()?,
        xmax: cfg.xmax,
        epsilon: cfg.epsilon,
        iterations: table.iterations(),
        sup_delta: table.sup_delta(),
        cache_hit,
        initial_state_rounded: mdp::big_m_is_rounded(&params),
    };
    if rep.initial_state_rounded {
        eprintln!("note: lambda2 is not an integer; the initial Q2 backlog is rounded");
    }
    let row = vec![
        ("opt", rep.opt.to_string()),
        ("xmax", rep.xmax.to_string()),
        ("epsilon", rep.epsilon.to_string()),
        ("iterations", rep.iterations.to_string()),
    ];
    emit(a.format.format(), &rep, &[row], || {
        format!(
            "OPT = {}  (xmax = {}, epsilon = {}, {} sweeps)",
            report::fmt2(rep.opt),
            rep.xmax,
            rep.epsilon,
            rep.iterations
        )
    })?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_table1(a: Table1Args, exec: Execution) -> CmdResult {
    let opts = Table1Options {
        xmax: a.solver.xmax,
        epsilon: a.solver.epsilon,
        cache_dir: a.solver.cache_dir.clone(),
        execution: exec,
        command: std::env::args().collect::<Vec<_>>().join(" "),
    };
    let rep = report::table1(&opts)?;
    let opt_cell = |v: Option<f64>| v.map(report::fmt2).unwrap_or_else(|| "-".into());
    let pct_cell = |v: Option<f64>| v.map(|g| format!("{}%", report::fmt2(g))).unwrap_or_else(|| "-".into());
    let rows: Vec<Vec<(&str, String)>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                ("gamma", r.gamma.to_string()),
                ("r", r.r.to_string()),
                ("k_star", r.k_star.to_string()),
                ("C(1)", report::fmt2(r.c1)),
                ("C(r)", report::fmt2(r.cr)),
                ("C(k*)", report::fmt2(r.ck_star)),
                ("OPT", opt_cell(r.opt)),
                ("Gap(1)", pct_cell(r.gap1)),
                ("Gap(r)", pct_cell(r.gapr)),
                ("Gap(k*)", pct_cell(r.gapk)),
            ]
        })
        .collect();
    emit(a.format.format(), &rep, &rows, || output::text_table(&rows))?;
    if rep.complete {
        Ok(ExitCode::SUCCESS)
    } else {
        for rec in rep.provenance.solver.iter().filter(|r| r.error.is_some()) {
            eprintln!(
                "error: gamma = {}, r = {}: {}",
                rec.gamma,
                rec.r,
                rec.error.as_deref().unwrap_or_default()
            );
        }
        Ok(ExitCode::from(EXIT_FAILURE))
    }
}

fn cmd_figure1(a: Figure1Args) -> CmdResult {
    std::fs::create_dir_all(&a.out)?;
    let path_a = a.out.join("figure1a.csv");
    let mut w = csv::Writer::from_path(&path_a)?;
    w.write_record(["gamma", "r", "k_star"])?;
    for p in report::figure1a() {
        w.write_record([p.gamma.to_string(), p.r.to_string(), p.k_star.to_string()])?;
    }
    w.flush()?;

    let path_b = a.out.join("figure1b.csv");
    let mut w = csv::Writer::from_path(&path_b)?;
    w.write_record(["k", "cost"])?;
    for p in report::figure1b()? {
        w.write_record([p.k.to_string(), report::fmt2(p.cost)])?;
    }
    w.flush()?;
    println!("wrote {} and {}", path_a.display(), path_b.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize, Deserialize)]
struct EnumerateReport {
    params: ModelParams,
    max_len: u32,
    best: Schedule,
    cost: f64,
    k_star: u32,
    matches_cyclic_k_star: bool,
    classes: usize,
}

fn cmd_enumerate(a: EnumerateArgs, exec: Execution) -> CmdResult {
    let params = a.params.params()?;
    if a.max_len > 16 {
        eprintln!("warning: max_len {} enumerates about 2^{} schedules", a.max_len, a.max_len);
    }
    let best = schedule::enumerate_best_cycle_with(&params, a.max_len as usize, exec)?;
    let k_star = cyclic::optimal_k(&params).k_star;
    let target = Schedule::cyclic(k_star)?;
    let rep = EnumerateReport {
        params,
        max_len: a.max_len,
        matches_cyclic_k_star: best.schedule.is_rotation_of(&target),
        best: best.schedule,
        cost: best.cost,
        k_star,
        classes: best.classes,
    };
    let row = vec![
        ("best", rep.best.to_string()),
        ("cost", rep.cost.to_string()),
        ("k_star", k_star.to_string()),
        ("match", rep.matches_cyclic_k_star.to_string()),
    ];
    emit(a.format.format(), &rep, &[row], || {
        format!(
            "best cycle: {}\ncost: {}\nmatch [Q1, Q2 x {}]: {}",
            rep.best,
            report::fmt2(rep.cost),
            k_star,
            rep.matches_cyclic_k_star
        )
    })?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize, Deserialize)]
struct SimulateReport {
    params: ModelParams,
    policy: String,
    initial_state: batchq::QueueState,
    horizon: u64,
    mode: CostMode,
    #[serde(flatten)]
    estimate: batchq::SimEstimate,
}

fn cmd_simulate(a: SimulateArgs, exec: Execution) -> CmdResult {
    let params = a.params.params()?;
    let mut cfg = SimConfig::new(&params, a.episodes, a.seed).with_execution(exec);
    if a.episodes == 0 {
        return Err("--episodes must be at least 1".into());
    }
    if let Some(h) = a.horizon {
        cfg.horizon = h;
    }
    cfg.cost_mode = match a.mode {
        ModeArg::Expected => CostMode::ExpectedArrivalWait,
        ModeArg::Sampled => CostMode::SampledArrivalWait,
    };

    let (estimate, label, init) = match a.policy {
        PolicySpec::Mdp => {
            let scfg = a.solver.config(&params, exec);
            let (table, _) = mdp::load_or_solve(&params, &scfg, a.solver.cache_dir.as_deref())?;
            let map = mdp::extract_policy(&table)?;
            let init = mdp::big_m_state(&params, table.xmax());
            let est = sim::simulate(&params, &SimPolicy::Table(&map), init, &cfg)?;
            (est, "mdp".to_string(), init)
        }
        spec => {
            let k = match spec {
                PolicySpec::Cyclic(k) => k,
                _ => cyclic::optimal_k(&params).k_star,
            };
            let m = a.big_m.unwrap_or((10.0 * params.lambda2()).ceil() as u64);
            let init = batchq::QueueState::new(m, params.lambda2().round() as u64);
            let pol = SimPolicy::Cyclic(CyclicPolicy::new(k)?);
            (sim::simulate(&params, &pol, init, &cfg)?, format!("cyclic:{k}"), init)
        }
    };
    if estimate.clamp_warnings > 0 {
        eprintln!("warning: policy queried off its grid {} times", estimate.clamp_warnings);
    }
    let rep = SimulateReport {
        params,
        policy: label,
        initial_state: init,
        horizon: cfg.horizon,
        mode: cfg.cost_mode,
        estimate,
    };
    let row = vec![
        ("policy", rep.policy.clone()),
        ("mean", estimate.mean.to_string()),
        ("stderr", estimate.stderr.to_string()),
        ("episodes", estimate.episodes.to_string()),
        ("seed", estimate.seed.to_string()),
    ];
    emit(a.format.format(), &rep, &[row], || {
        format!(
            "{}: mean = {:.4} +/- {:.4} (stderr)\nepisodes = {}, seed = {}, horizon = {}",
            rep.policy, estimate.mean, estimate.stderr, estimate.episodes, estimate.seed, cfg.horizon
        )
    })?;
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_specs() {
        assert_eq!(parse_policy("mdp"), Ok(PolicySpec::Mdp));
        assert_eq!(parse_policy("cyclic:auto"), Ok(PolicySpec::CyclicAuto));
        assert_eq!(parse_policy("cyclic:4"), Ok(PolicySpec::Cyclic(4)));
        assert!(parse_policy("cyclic:0").is_err());
        assert!(parse_policy("cyclic:").is_err());
        assert!(parse_policy("greedy").is_err());
    }

    #[test]
    fn argument_ranges() {
        assert!(parse_gamma("1").is_err());
        assert!(parse_gamma("0.5").is_ok());
        assert!(parse_ratio("0.9").is_err());
        assert!(parse_rate("0").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
