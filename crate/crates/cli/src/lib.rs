//! Command-line driver: instance generation, solving with audits, verification,
//! benchmarks and the exhaustive oracle.

pub mod bench;
pub mod config;
pub mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use kmed::adaptive::{default_eta, run_log_adaptive};
use kmed::greedy::run_greedy;
use kmed::merge::{run_pseudo_approx, MergeConfig};
use kmed::metric::{generate_random_instance, generate_stable_instance, MetricInstance, ParamSet};
use kmed::num::{fmt_q, parse_q, Q};
use kmed::oracle::{brute_force_kmedian, brute_force_ufl, OracleCaps, OracleError};
use kmed::stable::{run_main, run_stable, MainConfig, StableConfig, StableError};

pub use config::{Algorithm, RunConfig};
pub use report::{AlgorithmOutput, RunReport, Status, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;
pub const EXIT_AUDIT: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Usage(String),
    Io(String),
    /// An exhaustive search was refused by its cap.
    Cap(String),
    /// The algorithm itself failed.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Cap(_) => EXIT_PARTIAL,
            CliError::Io(_) | CliError::Run(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) => write!(f, "usage error: {s}"),
            CliError::Io(s) => write!(f, "i/o error: {s}"),
            CliError::Cap(s) => write!(f, "cap exceeded: {s}"),
            CliError::Run(s) => write!(f, "run failed: {s}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Parser, Debug)]
#[command(name = "kmed", version, about = "Exact-rational k-median and facility location solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a generated instance as JSON.
    Gen(GenArgs),
    /// Run one algorithm and emit an audited report.
    Solve(SolveArgs),
    /// Replay the audits of a saved report.
    Verify(VerifyArgs),
    /// Sweep a corpus against a list of algorithms.
    Bench(bench::BenchArgs),
    /// Exhaustive optimum for k-median (`--k`) or facility location (`--f`).
    Oracle(OracleArgs),
}

#[derive(Subcommand, Debug, Clone)]
pub enum GenKind {
    /// Shortest-path closure of a random integer table.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 50)]
        range: u32,
    },
    /// Well-separated groups with a planted optimum.
    Stable {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 4)]
        cluster_size: usize,
        #[arg(long, default_value_t = 20)]
        separation: u32,
    },
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    #[command(subcommand)]
    pub kind: GenKind,
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long = "alg", value_enum)]
    pub algorithm: Algorithm,
    #[arg(long)]
    pub k: Option<usize>,
    /// Facility opening cost, `p/q`.
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long = "eps", default_value = "1/8")]
    pub epsilon: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON object of search caps.
    #[arg(long)]
    pub caps: Option<PathBuf>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Single cap override, `name=value`; repeatable.
    #[arg(long = "cap", value_parser = config::parse_cap_flag)]
    pub cap: Vec<(String, String)>,
    /// Evaluate candidates on all cores; the result is unchanged.
    #[arg(long)]
    pub parallel: bool,
    /// Include wall time in the report.
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Text for stdout (or the `--out` file) and the exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub output: String,
}

pub fn parse_rational(flag: &str, s: &str) -> Result<Q, CliError> {
    parse_q(s).map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}

pub fn load_instance(path: &Path) -> Result<MetricInstance, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    MetricInstance::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub(crate) fn emit(out: &Option<PathBuf>, text: String, code: i32) -> Result<Outcome, CliError> {
    match out {
        Some(p) => {
            std::fs::write(p, &text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            Ok(Outcome { code, output: String::new() })
        }
        None => Ok(Outcome { code, output: text }),
    }
}

fn to_json<T: serde::Serialize>(x: &T) -> String {
    let mut s = serde_json::to_string_pretty(x).expect("reports serialize");
    s.push('\n');
    s
}

pub fn cmd_gen(args: &GenArgs) -> Result<Outcome, CliError> {
    let inst = match &args.kind {
        GenKind::Random { n, m, range } => {
            if *n == 0 || *m == 0 || *range == 0 {
                return Err(CliError::Usage("n, m and range must be positive".into()));
            }
            generate_random_instance(args.seed, *n, *m, *range)
        }
        GenKind::Stable { k, cluster_size, separation } => {
            if *k == 0 || *cluster_size == 0 {
                return Err(CliError::Usage("k and cluster-size must be positive".into()));
            }
            let si = generate_stable_instance(args.seed, *k, *cluster_size, *separation)
                .map_err(|e| CliError::Cap(e.to_string()))?;
            let mut inst = si.instance;
            let planted: Vec<String> = si.planted.iter().map(|p| p.to_string()).collect();
            inst.labels.insert("planted".into(), planted.join(","));
            inst.labels.insert("opt".into(), fmt_q(&si.opt));
            inst
        }
    };
    let mut text = inst.to_json();
    text.push('\n');
    emit(&args.out, text, EXIT_OK)
}

fn stable_error(e: StableError) -> CliError {
    match e {
        StableError::BadK { .. } | StableError::Guess(_) | StableError::Sizes { .. } => CliError::Usage(e.to_string()),
        StableError::BallCap { .. } | StableError::R0Cap { .. } => CliError::Cap(e.to_string()),
        _ => CliError::Run(e.to_string()),
    }
}

/// Runs the configured algorithm.
pub fn execute(inst: &MetricInstance, config: &RunConfig) -> Result<AlgorithmOutput, CliError> {
    config.validate()?;
    let n = inst.n();
    let eps = &config.epsilon;
    let k = config.k.unwrap_or(0);
    if config.algorithm.needs_k() && k > inst.m() {
        return Err(CliError::Usage(format!("k = {k} exceeds the {} facilities", inst.m())));
    }
    let stable = StableConfig { caps: config.caps.clone(), parallel: config.parallel, oracle: None };
    Ok(match config.algorithm {
        Algorithm::Greedy => {
            let f = config.f.clone().unwrap_or_default();
            AlgorithmOutput::Greedy(run_greedy(inst, &f).map_err(|e| CliError::Run(e.to_string()))?)
        }
        Algorithm::LogAdaptive => {
            let f = config.f.clone().unwrap_or_default();
            let p = ParamSet::new(f, eps.clone(), default_eta(n), n).map_err(|e| CliError::Usage(e.to_string()))?;
            let out = run_log_adaptive(inst, &p).map_err(|e| CliError::Run(e.to_string()))?;
            AlgorithmOutput::LogAdaptive { trace: out.trace, alpha_star: out.alpha_star }
        }
        Algorithm::Merge => {
            let out = run_pseudo_approx(inst, k, eps, &MergeConfig::default()).map_err(|e| match e {
                kmed::merge::MergeError::Adaptive(a) => CliError::Usage(a.to_string()),
                other => CliError::Run(other.to_string()),
            })?;
            AlgorithmOutput::Merge(out)
        }
        Algorithm::Stable => {
            AlgorithmOutput::Stable(run_stable(inst, k, eps, config.seed, &stable).map_err(stable_error)?)
        }
        Algorithm::Main => {
            let cfg = MainConfig { stable, merge: MergeConfig::default() };
            AlgorithmOutput::Main(run_main(inst, k, eps, config.seed, &cfg).map_err(stable_error)?)
        }
    })
}

/// Runs and audits; the report's exit code is 4 on a failed audit, else 3 if partial.
pub fn solve(inst: &MetricInstance, config: &RunConfig) -> Result<(RunReport, i32), CliError> {
    let start = Instant::now();
    let output = execute(inst, config)?;
    let elapsed = start.elapsed();
    let cost = report::output_cost(inst, &output).map_err(|e| CliError::Run(e.to_string()))?;
    let open_set = output.open_set();
    let mut rep = RunReport {
        config: config.clone(),
        instance: report::InstanceSummary { n: inst.n(), m: inst.m(), labels: inst.labels.clone() },
        centers: open_set.iter().map(|h| h.base()).collect(),
        open_set,
        cost,
        certificate: report::certificate(config, &output),
        audits: Vec::new(),
        partial: output.partial(),
        truncated: output.truncated(),
        timing_ms: config.timing.then_some(elapsed.as_millis() as u64),
        guess_log: report::guess_log(&output),
        output,
    };
    rep.audits = report::audit_report(inst, &rep, &OracleCaps::default());
    let code = exit_code(&rep.audits, rep.partial);
    Ok((rep, code))
}

pub fn exit_code(audits: &[Verdict], partial: bool) -> i32 {
    if !report::all_pass(audits) {
        EXIT_AUDIT
    } else if partial {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

pub fn run_config(args: &SolveArgs, env: &BTreeMap<String, String>) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::new(args.algorithm, parse_rational("eps", &args.epsilon)?);
    config.k = args.k;
    config.f = args.f.as_deref().map(|s| parse_rational("f", s)).transpose()?;
    config.seed = args.seed;
    let mut flags = args.cap.clone();
    if let Some(r) = args.restarts {
        flags.push(("restarts".into(), r.to_string()));
    }
    config.caps = config::load_caps(env, args.caps.as_deref(), &flags)?;
    config.parallel = args.parallel;
    config.timing = args.timing;
    config.validate()?;
    Ok(config)
}

pub fn cmd_solve(args: &SolveArgs, env: &BTreeMap<String, String>) -> Result<Outcome, CliError> {
    let config = run_config(args, env)?;
    let inst = load_instance(&args.instance)?;
    let (rep, code) = solve(&inst, &config)?;
    emit(&args.out, to_json(&rep), code)
}

#[derive(serde::Serialize)]
struct VerifyOutput {
    passed: bool,
    verdicts: Vec<Verdict>,
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Outcome, CliError> {
    let inst = load_instance(&args.instance)?;
    let text =
        std::fs::read_to_string(&args.report).map_err(|e| CliError::Io(format!("{}: {e}", args.report.display())))?;
    let rep: RunReport =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", args.report.display())))?;
    let verdicts = report::audit_report(&inst, &rep, &OracleCaps::default());
    let passed = report::all_pass(&verdicts);
    let code = if passed { EXIT_OK } else { EXIT_AUDIT };
    emit(&args.out, to_json(&VerifyOutput { passed, verdicts }), code)
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<Outcome, CliError> {
    let inst = load_instance(&args.instance)?;
    let caps = OracleCaps::default();
    let res = match (args.k, &args.f) {
        (Some(k), None) => brute_force_kmedian(&inst, k, &caps),
        (None, Some(f)) => brute_force_ufl(&inst, &parse_rational("f", f)?, &caps),
        _ => return Err(CliError::Usage("give exactly one of --k and --f".into())),
    };
    let res = res.map_err(|e| match e {
        OracleError::CapExceeded { .. } => CliError::Cap(e.to_string()),
        OracleError::BadK { .. } => CliError::Usage(e.to_string()),
        other => CliError::Run(other.to_string()),
    })?;
    emit(&args.out, to_json(&res), EXIT_OK)
}

/// Caps environment taken from the process.
pub fn process_env() -> BTreeMap<String, String> {
    std::env::vars().filter(|(k, _)| k.starts_with(config::ENV_PREFIX)).collect()
}

pub fn run(cli: &Cli, env: &BTreeMap<String, String>) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a, env),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => bench::cmd_bench(a),
        Command::Oracle(a) => cmd_oracle(a),
    }
}
