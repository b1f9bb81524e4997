//! Run reports and the audits replayed on them.

use std::collections::BTreeMap;

use kmed::adaptive::{audit_trace, phase_bound, ExecutionTrace};
use kmed::greedy::{audit_no_overbid, GreedyOutcome};
use kmed::merge::PseudoSolution;
use kmed::metric::{FacilityRef, MetricInstance};
use kmed::num::{fmt_q, q, Q};
use kmed::oracle::{cost, cost_regular, verify_lmp_certificate, OracleCaps, OracleError};
use kmed::stable::{GuessRecord, MainSolution, StableSolution};
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The check needs an exhaustive oracle beyond its caps.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub status: Status,
    pub detail: String,
}

impl Verdict {
    fn new(check: &str, ok: bool, detail: impl Into<String>) -> Self {
        Verdict { check: check.into(), status: if ok { Status::Pass } else { Status::Fail }, detail: detail.into() }
    }

    fn skipped(check: &str, why: impl Into<String>) -> Self {
        Verdict { check: check.into(), status: Status::Skipped, detail: why.into() }
    }
}

pub fn all_pass(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.status != Status::Fail)
}

/// Raw algorithm output, kept so that `verify` can replay every audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmOutput {
    Greedy(GreedyOutcome),
    LogAdaptive {
        trace: ExecutionTrace,
        #[serde(with = "kmed::num::serde_q_vec")]
        alpha_star: Vec<Q>,
    },
    Merge(PseudoSolution),
    Stable(StableSolution),
    Main(MainSolution),
}

impl AlgorithmOutput {
    /// Open set; for the k-median algorithms every entry is regular.
    pub fn open_set(&self) -> Vec<FacilityRef> {
        let regular = |v: &[usize]| v.iter().map(|&i| FacilityRef::Regular(i)).collect();
        match self {
            AlgorithmOutput::Greedy(g) => regular(&g.s_star),
            AlgorithmOutput::LogAdaptive { trace, .. } => trace.open_set(),
            AlgorithmOutput::Merge(p) => p.open_set.clone(),
            AlgorithmOutput::Stable(s) => regular(&s.centers),
            AlgorithmOutput::Main(s) => regular(&s.centers),
        }
    }

    pub fn partial(&self) -> bool {
        match self {
            AlgorithmOutput::Stable(s) => s.partial,
            AlgorithmOutput::Main(s) => s.partial,
            _ => false,
        }
    }

    pub fn truncated(&self) -> Vec<String> {
        let mut out: Vec<String> = match self {
            AlgorithmOutput::Stable(s) => s.truncated.clone(),
            AlgorithmOutput::Main(s) => s.stable_runs.iter().flat_map(|(_, r)| r.truncated.clone()).collect(),
            _ => Vec::new(),
        };
        out.sort();
        out.dedup();
        out
    }

    pub fn phases(&self) -> Option<u32> {
        match self {
            AlgorithmOutput::LogAdaptive { trace, .. } => Some(trace.num_phases),
            AlgorithmOutput::Merge(p) => Some(p.trace.num_phases),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    /// `Σ_j α_j` of the dual certificate, when the algorithm produces one.
    pub sum_alpha: Option<String>,
    /// `f·|S|` for the facility location runs.
    pub opening_cost: Option<String>,
    pub phases: Option<u32>,
    pub free_facilities: usize,
    pub max_free_per_phase: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuessLogEntry {
    /// Number of centers the stable search ran with.
    pub k: usize,
    pub evaluated: u64,
    /// `None` when the local search solution was never beaten.
    pub winner: Option<GuessRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub n: usize,
    pub m: usize,
    pub labels: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub instance: InstanceSummary,
    /// Regular facility ids; free copies appear under their base facility.
    pub centers: Vec<usize>,
    pub open_set: Vec<FacilityRef>,
    /// Connection cost of `open_set`, `"p/q"`.
    #[serde(with = "kmed::num::serde_q")]
    pub cost: Q,
    pub certificate: Certificate,
    pub audits: Vec<Verdict>,
    pub partial: bool,
    pub truncated: Vec<String>,
    /// Milliseconds; only present when asked for, since it breaks byte equality.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing_ms: Option<u64>,
    pub guess_log: Vec<GuessLogEntry>,
    pub output: AlgorithmOutput,
}

/// Connection cost of the output's open set.
pub fn output_cost(inst: &MetricInstance, out: &AlgorithmOutput) -> Result<Q, OracleError> {
    match out {
        AlgorithmOutput::LogAdaptive { trace, .. } => cost(inst, &trace.open_set(), &trace.params),
        AlgorithmOutput::Merge(p) => cost(inst, &p.open_set, &p.trace.params),
        other => {
            let s: Vec<usize> = other.open_set().iter().map(|h| h.base()).collect();
            if s.is_empty() {
                return Err(OracleError::EmptySet);
            }
            Ok(cost_regular(inst, &s))
        }
    }
}

pub fn certificate(config: &RunConfig, out: &AlgorithmOutput) -> Certificate {
    let open = out.open_set();
    let sum = |a: &[Q]| Some(fmt_q(&a.iter().sum::<Q>()));
    let (sum_alpha, max_free) = match out {
        AlgorithmOutput::Greedy(g) => (sum(&g.alpha_star), None),
        AlgorithmOutput::LogAdaptive { trace, alpha_star } => (sum(alpha_star), Some(trace.max_free_per_phase())),
        AlgorithmOutput::Merge(p) => (sum(&p.certificate), Some(p.trace.max_free_per_phase())),
        _ => (None, None),
    };
    Certificate {
        sum_alpha,
        opening_cost: config.f.as_ref().map(|f| fmt_q(&(f * q(open.len() as i64)))),
        phases: out.phases(),
        free_facilities: open.iter().filter(|h| h.is_free()).count(),
        max_free_per_phase: max_free,
    }
}

pub fn guess_log(out: &AlgorithmOutput) -> Vec<GuessLogEntry> {
    let entry = |k: usize, s: &StableSolution| GuessLogEntry { k, evaluated: s.evaluated, winner: s.winner.clone() };
    match out {
        AlgorithmOutput::Stable(s) => vec![entry(s.centers.len(), s)],
        AlgorithmOutput::Main(m) => m.stable_runs.iter().map(|(k, s)| entry(*k, s)).collect(),
        _ => Vec::new(),
    }
}

fn lmp_verdicts(
    inst: &MetricInstance,
    f: &Q,
    s: &[usize],
    alpha: &[Q],
    factor: &Q,
    exact_identity: bool,
    caps: &OracleCaps,
) -> Vec<Verdict> {
    if alpha.len() != inst.n() {
        return vec![Verdict::new(
            "certificate_shape",
            false,
            format!("{} dual values for {} clients", alpha.len(), inst.n()),
        )];
    }
    let mut v = Vec::new();
    match verify_lmp_certificate(inst, f, s, alpha, factor, caps) {
        Ok(rep) => {
            v.push(Verdict::new(
                "dual_feasibility",
                rep.dual_feasible(),
                if rep.dual_feasible() {
                    String::new()
                } else {
                    format!("overpaid facilities {:?}", rep.dual_violations)
                },
            ));
            if exact_identity {
                v.push(Verdict::new("payment_identity", rep.payment_identity, ""));
            } else {
                v.push(Verdict::new("payment_lower_bound", rep.payment_lower_bound, ""));
            }
            v.push(Verdict::new(
                "cost_bound",
                rep.cost_bound,
                format!("factor {}, UFL optimum {}", fmt_q(factor), fmt_q(&rep.ufl_value)),
            ));
        }
        Err(OracleError::CapExceeded { count, cap }) => {
            v.push(Verdict::skipped("cost_bound", format!("{count} open sets exceed the cap {cap}")));
            v.extend(dual_only(inst, f, s, alpha, factor, exact_identity));
        }
        Err(e) => v.push(Verdict::new("certificate", false, e.to_string())),
    }
    v
}

/// Dual feasibility and payment checks without the UFL oracle.
fn dual_only(inst: &MetricInstance, f: &Q, s: &[usize], alpha: &[Q], factor: &Q, exact_identity: bool) -> Vec<Verdict> {
    let two = q(2);
    let over: Vec<usize> = (0..inst.m())
        .filter(|&i| {
            let pay: Q = (0..inst.n()).map(|j| kmed::num::pos(&alpha[j] - &two * inst.cf(j, i))).sum();
            pay > f * &two
        })
        .collect();
    let c = cost_regular(inst, s);
    let sum: Q = alpha.iter().sum();
    let opening = f * &two * q(s.len() as i64);
    let mut v = vec![Verdict::new(
        "dual_feasibility",
        over.is_empty(),
        if over.is_empty() { String::new() } else { format!("overpaid facilities {over:?}") },
    )];
    if exact_identity {
        v.push(Verdict::new("payment_identity", sum == c + opening, ""));
    } else {
        v.push(Verdict::new("payment_lower_bound", sum >= &two / factor * c + opening, ""));
    }
    v
}

fn cardinality(centers: &[usize], k: usize, m: usize) -> Verdict {
    let mut sorted = centers.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let ok = centers.len() == k && sorted.len() == k && centers.iter().all(|&c| c < m);
    Verdict::new("cardinality", ok, format!("{} centers, k = {k}", centers.len()))
}

/// Every audit that applies to `out`, recomputed from the instance alone.
pub fn audit(inst: &MetricInstance, config: &RunConfig, out: &AlgorithmOutput, caps: &OracleCaps) -> Vec<Verdict> {
    let mut v = Vec::new();
    let f = config.f.clone().unwrap_or_default();
    match (config.algorithm, out) {
        (Algorithm::Greedy, AlgorithmOutput::Greedy(g)) => {
            let rep = audit_no_overbid(&g.events, inst, &f);
            v.push(Verdict::new(
                "no_overbid",
                rep.passed(),
                if rep.passed() { String::new() } else { format!("{:?}", rep.violations) },
            ));
            v.extend(lmp_verdicts(inst, &f, &g.s_star, &g.alpha_star, &q(2), true, caps));
        }
        (Algorithm::LogAdaptive, AlgorithmOutput::LogAdaptive { trace, alpha_star }) => {
            let rep = audit_trace(inst, &trace.params, trace, &Q::default());
            v.push(Verdict::new(
                "trace_audit",
                rep.passed(),
                if rep.passed() { String::new() } else { format!("{:?}", rep.violations) },
            ));
            let bound = phase_bound(&inst.max_cf(), &config.epsilon);
            v.push(Verdict::new(
                "phase_bound",
                trace.num_phases <= bound,
                format!("{} phases, bound {bound}", trace.num_phases),
            ));
            let s: Vec<usize> = trace.open_set().iter().map(|h| h.base()).collect();
            let factor = q(2) / (q(1) - trace.params.delta());
            v.extend(lmp_verdicts(inst, &f, &s, alpha_star, &factor, false, caps));
        }
        (Algorithm::Merge, AlgorithmOutput::Merge(p)) => {
            let rep = audit_trace(inst, &p.trace.params, &p.trace, p.trace.params.eta());
            v.push(Verdict::new(
                "trace_audit",
                rep.passed(),
                if rep.passed() { String::new() } else { format!("{:?}", rep.violations) },
            ));
            let k = config.k.unwrap_or(0);
            let regular: Vec<usize> = p.open_set.iter().filter(|h| !h.is_free()).map(|h| h.base()).collect();
            v.push(cardinality(&regular, k, inst.m()));
            let most = p.trace.max_free_per_phase();
            v.push(Verdict::new("free_per_phase", most <= 3, format!("at most {most} free per phase")));
        }
        (Algorithm::Stable, AlgorithmOutput::Stable(s)) => {
            v.push(cardinality(&s.centers, config.k.unwrap_or(0), inst.m()))
        }
        (Algorithm::Main, AlgorithmOutput::Main(s)) => v.push(cardinality(&s.centers, config.k.unwrap_or(0), inst.m())),
        (alg, _) => v.push(Verdict::new("output_kind", false, format!("output does not belong to {}", alg.name()))),
    }
    v
}

/// Audits plus the consistency of the report's own summary fields.
pub fn audit_report(inst: &MetricInstance, report: &RunReport, caps: &OracleCaps) -> Vec<Verdict> {
    let mut v = Vec::new();
    let shape = report.instance.n == inst.n() && report.instance.m == inst.m();
    v.push(Verdict::new(
        "instance_shape",
        shape,
        format!("report {}x{}, instance {}x{}", report.instance.n, report.instance.m, inst.n(), inst.m()),
    ));
    if !shape {
        return v;
    }
    match output_cost(inst, &report.output) {
        Ok(c) => v.push(Verdict::new(
            "cost_recomputed",
            c == report.cost,
            format!("reported {}, recomputed {}", fmt_q(&report.cost), fmt_q(&c)),
        )),
        Err(e) => v.push(Verdict::new("cost_recomputed", false, e.to_string())),
    }
    let open = report.output.open_set();
    let centers: Vec<usize> = open.iter().map(|h| h.base()).collect();
    v.push(Verdict::new("solution_matches_output", open == report.open_set && centers == report.centers, ""));
    v.extend(audit(inst, &report.config, &report.output, caps));
    v
}
