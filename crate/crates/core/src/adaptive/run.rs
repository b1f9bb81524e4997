//! The phase loop, with phases in which nothing can happen skipped exactly.

use num_traits::{Signed, Zero};

use super::openable::is_openable;
use super::{AdaptiveError, Ctx, DualState, ExecutionTrace, Openability, Opening, PhaseSequence};
use crate::greedy::{first_reach, Reach};
use crate::metric::{FacilityRef, MetricInstance, ParamSet};
use crate::num::{ceil_log, q, Ext, Q};

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveOutcome {
    pub trace: ExecutionTrace,
    pub s_star: Vec<FacilityRef>,
    pub alpha_star: Vec<Q>,
}

/// First phase after the current one at which a client could deactivate or a facility
/// could become payable; `None` once no client is active.
pub fn next_event_phase(ctx: &Ctx, st: &DualState) -> Option<u32> {
    if !st.any_active() {
        return None;
    }
    let from = st.phase + 1;
    let active = st.active_clients();
    let mut target: Option<Q> = None;
    let lower = |t: Q, target: &mut Option<Q>| {
        if target.as_ref().is_none_or(|x| t < *x) {
            *target = Some(t);
        }
    };
    for &j in &active {
        if let Ext::Fin(kd) = st.kept_dist(ctx, j) {
            lower(kd, &mut target);
        }
    }
    let fhat = ctx.params.fhat();
    let inactive = st.inactive_clients();
    for i in 0..ctx.inst.m() {
        if st.regular_open[i] {
            continue;
        }
        let mut base = Q::zero();
        for &j in &inactive {
            if let Ext::Fin(ds) = &st.dist_s[j] {
                let g = ds - ctx.inst.cf(j, i);
                if g.is_positive() {
                    base += g;
                }
            }
        }
        base *= &ctx.keep;
        let mut breaks: Vec<Q> = active.iter().map(|&j| &ctx.keep * ctx.inst.cf(j, i)).collect();
        match first_reach(&base, fhat, &mut breaks) {
            Reach::Always => return Some(from),
            Reach::At(x) => lower(x / &ctx.boost, &mut target),
            Reach::Never => {}
        }
    }
    Some(match target {
        Some(t) => ctx.clock.first_phase_at_least(&t, from),
        None => from,
    })
}

/// Phase at whose start the last active client would deactivate with no further openings.
fn emptying_phase(ctx: &Ctx, st: &DualState) -> Option<u32> {
    let mut last = st.phase;
    for j in st.active_clients() {
        match st.kept_dist(ctx, j) {
            Ext::Fin(kd) => last = last.max(ctx.clock.first_phase_at_least(&kd, st.phase + 1)),
            Ext::Inf => return None,
        }
    }
    Some(last)
}

/// Moves to `target`; returns the number of executed phases if the run ends first.
pub(super) fn advance(ctx: &Ctx, st: &mut DualState, target: u32) -> Option<u32> {
    if !st.any_active() {
        return Some(st.phase);
    }
    if let Some(e) = emptying_phase(ctx, st) {
        if e <= target {
            st.move_to_phase(ctx, e);
            return Some(e - 1);
        }
    }
    st.move_to_phase(ctx, target);
    None
}

/// Stage 1 at the current phase: opens the lowest-index openable facility until none is left.
pub(super) fn stage_one(ctx: &Ctx, st: &mut DualState, seq: &mut Vec<Opening>, eta: &Q) {
    'scan: loop {
        for i in 0..ctx.inst.m() {
            if st.regular_open[i] {
                continue;
            }
            let h = FacilityRef::Regular(i);
            if let Openability::Feasible(tau) = is_openable(ctx, st, h, eta) {
                let superset = st.open.clone();
                st.open_facility(ctx, h, Some(&tau));
                seq.push(Opening { facility: h, tau: Some(tau), superset });
                continue 'scan;
            }
        }
        return;
    }
}

/// Generous bound on the number of phases; exceeding it means a broken invariant.
pub(super) fn phase_budget(ctx: &Ctx) -> u32 {
    let n = q(ctx.inst.n().max(1) as i64);
    let scale = (ctx.inst.max_cf() + ctx.params.fhat() + q(1)) * n * q(6);
    ceil_log(&ctx.clock.ratio().clone(), &scale) as u32 + 16
}

/// Runs stages from the current phase (whose sequence so far is `current`) to the end.
fn finish_run(
    ctx: &Ctx,
    st: &mut DualState,
    phases: &mut Vec<PhaseSequence>,
    mut current: Vec<Opening>,
) -> Result<u32, AdaptiveError> {
    let budget = phase_budget(ctx);
    let zero = Q::zero();
    loop {
        stage_one(ctx, st, &mut current, &zero);
        if !current.is_empty() {
            phases.push(PhaseSequence { phase: st.phase, openings: std::mem::take(&mut current) });
        }
        let Some(next) = next_event_phase(ctx, st) else {
            return Ok(st.phase);
        };
        if let Some(l) = advance(ctx, st, next) {
            return Ok(l);
        }
        if st.phase > budget {
            return Err(AdaptiveError::PhaseBudget(budget));
        }
    }
}

fn outcome(params: &ParamSet, st: DualState, phases: Vec<PhaseSequence>, num_phases: u32) -> AdaptiveOutcome {
    AdaptiveOutcome {
        trace: ExecutionTrace { phases, num_phases, params: params.clone() },
        s_star: st.open,
        alpha_star: st.alpha,
    }
}

pub fn run_log_adaptive(inst: &MetricInstance, params: &ParamSet) -> Result<AdaptiveOutcome, AdaptiveError> {
    params.check(inst.n())?;
    let ctx = Ctx::new(inst, params);
    let mut st = DualState::start(&ctx);
    let mut phases = Vec::new();
    let l = finish_run(&ctx, &mut st, &mut phases, Vec::new())?;
    Ok(outcome(params, st, phases, l))
}

fn check_refs(ctx: &Ctx, st: &DualState, o: &Opening) -> Result<(), AdaptiveError> {
    let h = o.facility;
    if h.base() >= ctx.inst.m() {
        return Err(AdaptiveError::Malformed(format!("unknown facility {}", h.base())));
    }
    if let FacilityRef::Free { copy, .. } = h {
        ctx.params.offset(copy)?;
    }
    if st.is_open(&h) {
        return Err(AdaptiveError::Malformed(format!("{h:?} opened twice")));
    }
    Ok(())
}

/// Replays `prefix` (recorded sequences, all at phases ≤ `through`), then finishes phase
/// `through` with stage 1 and continues the algorithm to the end under `params`.
pub fn complete_solution(
    inst: &MetricInstance,
    params: &ParamSet,
    prefix: &[PhaseSequence],
    through: u32,
) -> Result<ExecutionTrace, AdaptiveError> {
    Ok(complete_with_state(inst, params, prefix, through)?.trace)
}

pub(crate) fn complete_with_state(
    inst: &MetricInstance,
    params: &ParamSet,
    prefix: &[PhaseSequence],
    through: u32,
) -> Result<AdaptiveOutcome, AdaptiveError> {
    params.check(inst.n())?;
    if through == 0 {
        return Err(AdaptiveError::Malformed("phases are numbered from 1".into()));
    }
    let ctx = Ctx::new(inst, params);
    let mut st = DualState::start(&ctx);
    let mut phases: Vec<PhaseSequence> = Vec::new();
    let mut last = 0u32;
    for seq in prefix {
        if seq.phase <= last || seq.phase > through {
            return Err(AdaptiveError::Malformed(format!(
                "prefix phase {} out of order or beyond {through}",
                seq.phase
            )));
        }
        last = seq.phase;
        if seq.phase == through {
            break;
        }
        if seq.openings.is_empty() {
            continue;
        }
        if let Some(l) = advance(&ctx, &mut st, seq.phase) {
            return Err(AdaptiveError::Malformed(format!(
                "prefix opens facilities in phase {} after the run ended at {l}",
                seq.phase
            )));
        }
        for o in &seq.openings {
            check_refs(&ctx, &st, o)?;
            st.open_facility(&ctx, o.facility, o.tau.as_ref());
        }
        phases.push(seq.clone());
    }
    if let Some(l) = advance(&ctx, &mut st, through) {
        if prefix.iter().any(|s| s.phase == through && !s.openings.is_empty()) {
            return Err(AdaptiveError::Malformed(format!(
                "prefix opens facilities in phase {through} after the run ended at {l}"
            )));
        }
        return Ok(outcome(params, st, phases, l));
    }
    let mut current = Vec::new();
    if let Some(seq) = prefix.iter().find(|s| s.phase == through) {
        for o in &seq.openings {
            check_refs(&ctx, &st, o)?;
            st.open_facility(&ctx, o.facility, o.tau.as_ref());
            current.push(o.clone());
        }
    }
    let l = finish_run(&ctx, &mut st, &mut phases, current)?;
    Ok(outcome(params, st, phases, l))
}

/// Extends `partial` (openings of phase `phase`, after replaying `prefix`) to a maximal sequence.
pub fn complete_sequence(
    inst: &MetricInstance,
    params: &ParamSet,
    prefix: &[PhaseSequence],
    phase: u32,
    partial: &[Opening],
) -> Result<PhaseSequence, AdaptiveError> {
    params.check(inst.n())?;
    let ctx = Ctx::new(inst, params);
    let mut st = DualState::start(&ctx);
    for seq in prefix.iter().filter(|s| s.phase < phase) {
        st.move_to_phase(&ctx, seq.phase);
        for o in &seq.openings {
            check_refs(&ctx, &st, o)?;
            st.open_facility(&ctx, o.facility, o.tau.as_ref());
        }
    }
    st.move_to_phase(&ctx, phase);
    let mut openings = Vec::new();
    for o in partial {
        check_refs(&ctx, &st, o)?;
        st.open_facility(&ctx, o.facility, o.tau.as_ref());
        openings.push(o.clone());
    }
    stage_one(&ctx, &mut st, &mut openings, &Q::zero());
    Ok(PhaseSequence { phase, openings })
}
