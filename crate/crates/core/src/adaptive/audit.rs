//! Replays a trace and checks every invariant the cost analysis relies on.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::openable::{check_bids, is_openable};
use super::run::{advance, next_event_phase, phase_budget};
use super::{Ctx, DualState, ExecutionTrace, Openability};
use crate::metric::{FacilityRef, MetricInstance, ParamSet};
use crate::num::{fmt_q, pos, q, Ext, Q};
use crate::oracle::{brute_force_ufl, OracleCaps};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "check")]
pub enum AuditViolation {
    Malformed {
        reason: String,
    },
    /// (a) a regular opening that is not η-openable against its recorded superset
    NotOpenable {
        phase: u32,
        position: usize,
        facility: FacilityRef,
        reason: String,
    },
    /// (b)
    Overbid {
        phase: u32,
        facility: usize,
    },
    /// (c)
    NotMaximal {
        phase: u32,
        facility: usize,
    },
    /// (d)
    TooManyFree {
        phase: u32,
        count: usize,
    },
    /// (e)
    CostBound {
        cost: String,
        bound: String,
    },
    PaymentInduction {
        phase: u32,
    },
    DualInfeasible {
        facility: usize,
    },
    PhaseCount {
        recorded: u32,
        replayed: u32,
    },
    NotASolution {
        active: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub violations: Vec<AuditViolation>,
    pub checkpoints: usize,
    pub num_phases: u32,
    /// Openings whose recorded bids were missing or invalid and had to be recomputed.
    pub recomputed_bids: usize,
    pub cost_bound_checked: bool,
    #[serde(with = "crate::num::serde_q_vec")]
    pub alpha_star: Vec<Q>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn malformed(reason: String) -> Self {
        AuditReport {
            violations: vec![AuditViolation::Malformed { reason }],
            checkpoints: 0,
            num_phases: 0,
            recomputed_bids: 0,
            cost_bound_checked: false,
            alpha_star: Vec::new(),
        }
    }
}

fn structure(inst: &MetricInstance, params: &ParamSet, trace: &ExecutionTrace) -> Result<(), String> {
    params.check(inst.n()).map_err(|e| e.to_string())?;
    let mut last = 0;
    let mut seen = BTreeSet::new();
    for seq in &trace.phases {
        if seq.phase <= last {
            return Err(format!("phase {} out of order", seq.phase));
        }
        last = seq.phase;
        if seq.phase > trace.num_phases {
            return Err(format!("phase {} beyond L = {}", seq.phase, trace.num_phases));
        }
        for o in &seq.openings {
            let refs = std::iter::once(&o.facility).chain(&o.superset);
            for h in refs {
                if h.base() >= inst.m() {
                    return Err(format!("unknown facility {}", h.base()));
                }
                if let FacilityRef::Free { copy, .. } = h {
                    params.offset(*copy).map_err(|e| e.to_string())?;
                }
            }
            if !seen.insert(o.facility) {
                return Err(format!("{:?} opened twice", o.facility));
            }
        }
    }
    Ok(())
}

struct Walker<'c, 'a> {
    ctx: &'c Ctx<'a>,
    eta: Q,
    report: AuditReport,
}

impl Walker<'_, '_> {
    /// (b) and the payment induction at the current state.
    fn checkpoint(&mut self, st: &DualState) {
        self.report.checkpoints += 1;
        let ctx = self.ctx;
        let fhat = ctx.params.fhat();
        for i in 0..ctx.inst.m() {
            let mut bid = Q::zero();
            for j in 0..st.active.len() {
                let d = ctx.inst.cf(j, i);
                if st.active[j] {
                    bid += pos(&st.alpha[j] - d);
                } else if let Ext::Fin(kd) = st.kept_dist(ctx, j) {
                    bid += pos(kd - d);
                }
            }
            if bid > *fhat {
                self.report.violations.push(AuditViolation::Overbid { phase: st.phase, facility: i });
            }
        }
        let mut lhs = Q::zero();
        let mut kept = Q::zero();
        for j in st.inactive_clients() {
            lhs += &st.alpha[j];
            if let Ext::Fin(kd) = st.kept_dist(ctx, j) {
                kept += kd;
            }
        }
        let regs = q(st.regular_count() as i64);
        if lhs < kept + regs * ctx.pay_target(&self.eta) {
            self.report.violations.push(AuditViolation::PaymentInduction { phase: st.phase });
        }
    }

    /// (c): nothing 0-openable may remain once a phase's stage 1 is over.
    fn maximality(&mut self, st: &DualState) {
        let zero = Q::zero();
        for i in 0..self.ctx.inst.m() {
            if !st.regular_open[i] && is_openable(self.ctx, st, FacilityRef::Regular(i), &zero).is_feasible() {
                self.report.violations.push(AuditViolation::NotMaximal { phase: st.phase, facility: i });
            }
        }
    }
}

/// Replays `trace` under `params`; every violated check is listed in the report.
pub fn audit_trace(inst: &MetricInstance, params: &ParamSet, trace: &ExecutionTrace, eta: &Q) -> AuditReport {
    if let Err(reason) = structure(inst, params, trace) {
        return AuditReport::malformed(reason);
    }
    let ctx = Ctx::new(inst, params);
    let mut w = Walker {
        ctx: &ctx,
        eta: eta.clone(),
        report: AuditReport {
            violations: Vec::new(),
            checkpoints: 0,
            num_phases: 0,
            recomputed_bids: 0,
            cost_bound_checked: false,
            alpha_star: Vec::new(),
        },
    };
    let mut st = DualState::start(&ctx);
    w.checkpoint(&st);
    let phases = &trace.phases;
    let budget = phase_budget(&ctx);
    let mut idx = 0;
    let replayed = loop {
        let p = st.phase;
        if p > budget {
            w.report.violations.push(AuditViolation::Malformed {
                reason: format!("replay still has active clients after {budget} phases"),
            });
            break p;
        }
        if let Some(seq) = phases.get(idx).filter(|s| s.phase == p) {
            idx += 1;
            let free = seq.free_count();
            if free > 3 {
                w.report.violations.push(AuditViolation::TooManyFree { phase: p, count: free });
            }
            for (position, o) in seq.openings.iter().enumerate() {
                let h = o.facility;
                if h.is_free() {
                    st.open_facility(&ctx, h, None);
                    w.checkpoint(&st);
                    continue;
                }
                let sup: BTreeSet<_> = o.superset.iter().copied().collect();
                let bad = |reason: String, w: &mut Walker| {
                    w.report.violations.push(AuditViolation::NotOpenable { phase: p, position, facility: h, reason })
                };
                if st.open.iter().any(|x| !sup.contains(x)) || sup.contains(&h) {
                    bad("recorded superset does not contain the open prefix".into(), &mut w);
                }
                let view = if o.superset.len() == st.open.len() && sup.len() == st.open.len() {
                    st.clone()
                } else {
                    DualState::at(&ctx, p, &o.superset)
                };
                let recorded = o.tau.as_ref().filter(|tau| check_bids(&ctx, &view, h, tau, eta).is_ok()).cloned();
                let tau = match recorded {
                    Some(tau) => Some(tau),
                    None => {
                        w.report.recomputed_bids += 1;
                        match is_openable(&ctx, &view, h, eta) {
                            Openability::Feasible(tau) => Some(tau),
                            Openability::NotOpenable => {
                                bad("no valid bids exist".into(), &mut w);
                                None
                            }
                        }
                    }
                };
                st.open_facility(&ctx, h, tau.as_ref());
                w.checkpoint(&st);
            }
        }
        w.maximality(&st);
        let Some(event) = next_event_phase(&ctx, &st) else {
            break p;
        };
        let target = phases.get(idx).map_or(event, |s| s.phase.min(event));
        if target > p + 1 {
            if let Some(l) = advance(&ctx, &mut st, target - 1) {
                w.checkpoint(&st);
                break l;
            }
            w.checkpoint(&st);
        }
        if let Some(l) = advance(&ctx, &mut st, target) {
            w.checkpoint(&st);
            break l;
        }
        w.checkpoint(&st);
    };
    if idx < phases.len() {
        w.report.violations.push(AuditViolation::Malformed {
            reason: format!("openings recorded after the run ended at phase {replayed}"),
        });
    }
    if replayed != trace.num_phases {
        w.report.violations.push(AuditViolation::PhaseCount { recorded: trace.num_phases, replayed });
    }
    let active = st.active_clients().len();
    if active > 0 {
        w.report.violations.push(AuditViolation::NotASolution { active });
    }
    let fhat = params.fhat();
    for i in 0..inst.m() {
        let s: Q = (0..inst.n()).map(|j| pos(&st.alpha[j] - q(2) * inst.cf(j, i))).sum();
        if s > *fhat {
            w.report.violations.push(AuditViolation::DualInfeasible { facility: i });
        }
    }
    let caps = OracleCaps::default();
    if active == 0 && !st.open.is_empty() && inst.m() as u32 <= caps.ufl_log2 {
        if let Ok(ufl) = brute_force_ufl(inst, params.f(), &caps) {
            w.report.cost_bound_checked = true;
            let cost: Q = st.dist_s.iter().filter_map(|d| d.finite()).sum();
            let regs = q(st.regular_count() as i64);
            let n_eta = q(inst.n() as i64) * eta;
            let bound = q(2) / &ctx.keep * (ufl.value - (params.f() - n_eta) * regs);
            if cost > bound || bound.is_negative() {
                w.report.violations.push(AuditViolation::CostBound { cost: fmt_q(&cost), bound: fmt_q(&bound) });
            }
        }
    }
    w.report.num_phases = replayed;
    w.report.alpha_star = st.alpha;
    w.report
}
