//! Corpus × algorithm sweep.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use kmed::metric::{generate_random_instance, MetricInstance};
use kmed::num::{fmt_q, q, Q};
use kmed::oracle::{brute_force_kmedian, brute_force_ufl, OracleCaps};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Algorithm, RunConfig};
use crate::{load_instance, parse_rational, report, solve, CliError, Outcome, EXIT_AUDIT, EXIT_OK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    /// Directory of instance files; every `*.json` is read, in name order.
    #[arg(long, conflicts_with = "generate")]
    pub corpus: Option<PathBuf>,
    /// Generate this many random instances instead of reading a corpus.
    #[arg(long)]
    pub generate: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "alg", value_enum, value_delimiter = ',', required = true)]
    pub algorithms: Vec<Algorithm>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long = "eps", default_value = "1/8")]
    pub epsilon: String,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Row {
    pub instance: String,
    pub algorithm: String,
    /// `k=…` or `f=…`.
    pub parameter: String,
    pub cost: Option<String>,
    /// `opt_k` for the k-median algorithms; `opt_UFL(f) − f·|S|` for facility location.
    pub opt: Option<String>,
    pub ratio: Option<String>,
    pub centers: Option<usize>,
    pub free: Option<usize>,
    pub phases: Option<u32>,
    pub audits_pass: Option<bool>,
    pub partial: Option<bool>,
    pub wall_ms: u64,
    pub error: Option<String>,
}

/// Generated corpus: `n ∈ 4..=8`, `m ∈ 4..=8`, coordinates up to 30.
pub fn generated_corpus(count: usize, seed: u64) -> Vec<(String, MetricInstance)> {
    (0..count as u64)
        .map(|t| {
            let s = seed.wrapping_add(t);
            let n = 4 + (s % 5) as usize;
            let m = 4 + ((s / 5) % 5) as usize;
            (format!("random-{s}"), generate_random_instance(s, n, m, 30))
        })
        .collect()
}

fn read_corpus(dir: &PathBuf) -> Result<Vec<(String, MetricInstance)>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            load_instance(p).map(|i| (name, i))
        })
        .collect()
}

fn row(name: &str, inst: &MetricInstance, config: &RunConfig) -> Row {
    let parameter = match (&config.k, &config.f) {
        (Some(k), _) if config.algorithm.needs_k() => format!("k={k}"),
        (_, Some(f)) => format!("f={}", fmt_q(f)),
        _ => String::new(),
    };
    let mut r = Row {
        instance: name.to_string(),
        algorithm: config.algorithm.name().to_string(),
        parameter,
        cost: None,
        opt: None,
        ratio: None,
        centers: None,
        free: None,
        phases: None,
        audits_pass: None,
        partial: None,
        wall_ms: 0,
        error: None,
    };
    let start = Instant::now();
    let result = solve(inst, config);
    r.wall_ms = start.elapsed().as_millis() as u64;
    let (rep, _) = match result {
        Ok(x) => x,
        Err(e) => {
            r.error = Some(e.to_string());
            return r;
        }
    };
    let caps = OracleCaps::default();
    let opt: Option<Q> = if config.algorithm.needs_k() {
        brute_force_kmedian(inst, config.k.unwrap_or(0), &caps).ok().map(|o| o.value)
    } else {
        let f = config.f.clone().unwrap_or_default();
        brute_force_ufl(inst, &f, &caps).ok().map(|o| o.value - f * q(rep.open_set.len() as i64))
    };
    r.ratio = opt.as_ref().map(|o| {
        if *o == Q::default() {
            if rep.cost == Q::default() {
                "1".into()
            } else {
                "inf".into()
            }
        } else {
            fmt_q(&(&rep.cost / o))
        }
    });
    r.opt = opt.as_ref().map(fmt_q);
    r.cost = Some(fmt_q(&rep.cost));
    r.centers = Some(rep.open_set.iter().filter(|h| !h.is_free()).count());
    r.free = Some(rep.certificate.free_facilities);
    r.phases = rep.certificate.phases;
    r.audits_pass = Some(report::all_pass(&rep.audits));
    r.partial = Some(rep.partial);
    r
}

/// One row per (instance, algorithm), ordered by instance then by the given algorithm order.
pub fn bench_rows(corpus: &[(String, MetricInstance)], configs: &[RunConfig]) -> Vec<Row> {
    let jobs: Vec<(usize, usize)> = (0..corpus.len()).flat_map(|i| (0..configs.len()).map(move |a| (i, a))).collect();
    jobs.par_iter().map(|&(i, a)| row(&corpus[i].0, &corpus[i].1, &configs[a])).collect()
}

pub fn render(rows: &[Row], format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(rows).expect("rows serialize");
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            if rows.is_empty() {
                w.write_record([
                    "instance",
                    "algorithm",
                    "parameter",
                    "cost",
                    "opt",
                    "ratio",
                    "centers",
                    "free",
                    "phases",
                    "audits_pass",
                    "partial",
                    "wall_ms",
                    "error",
                ])
                .map_err(|e| CliError::Io(e.to_string()))?;
            }
            for r in rows {
                w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Outcome, CliError> {
    let eps = parse_rational("eps", &args.epsilon)?;
    let f = args.f.as_deref().map(|s| parse_rational("f", s)).transpose()?;
    let configs: Vec<RunConfig> = args
        .algorithms
        .iter()
        .map(|&alg| {
            let mut c = RunConfig::new(alg, eps.clone());
            c.k = args.k;
            c.f = f.clone();
            c.seed = args.seed;
            c.caps.restarts = args.restarts.or(c.caps.restarts);
            c.validate().map(|_| c)
        })
        .collect::<Result<_, _>>()?;
    let corpus = match (&args.corpus, args.generate) {
        (Some(dir), _) => read_corpus(dir)?,
        (None, Some(count)) => generated_corpus(count, args.seed),
        (None, None) => return Err(CliError::Usage("give --corpus or --generate".into())),
    };
    let rows = bench_rows(&corpus, &configs);
    let failed = rows.iter().any(|r| r.audits_pass == Some(false));
    let text = render(&rows, args.format)?;
    crate::emit(&args.out, text, if failed { EXIT_AUDIT } else { EXIT_OK })
}
