//! Walks between two solutions whose regular-facility counts straddle `k` until one
//! of them opens exactly `k` regular facilities (plus a few free copies).

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::adaptive::{
    audit_trace, check_bids, complete_solution, default_eta, is_openable, run_log_adaptive, AdaptiveError, AuditReport,
    Ctx, DualState, ExecutionTrace, Openability, Opening, PhaseSequence,
};
use crate::metric::{FacilityRef, MetricInstance, ParamSet};
use crate::num::{fmt_q, q, Q};
use crate::oracle::cost;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MergeError {
    #[error(transparent)]
    Adaptive(#[from] AdaptiveError),
    #[error("k = {k} is not in 1..={m}")]
    BadK { k: usize, m: usize },
    #[error("internal invariant broken: {0}")]
    Internal(String),
    #[error("phase budget {0} exhausted")]
    PhaseBudget(u32),
}

/// A complete trace and its number of regular facilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub trace: ExecutionTrace,
    pub regular: usize,
}

impl Solution {
    fn new(trace: ExecutionTrace) -> Self {
        let regular = trace.regular_count();
        Solution { trace, regular }
    }

    pub fn params(&self) -> &ParamSet {
        &self.trace.params
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffParam {
    FacilityCost,
    FreeOffset(u32),
}

/// Two solutions sandwiching `k`, identical before `phase`, with parameters differing
/// in one place by at most η.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionPair {
    pub left: Solution,
    pub right: Solution,
    pub phase: u32,
    pub diff: DiffParam,
}

/// `H_p` before and after the update that flipped the count across `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct HandOff {
    pub phase: u32,
    pub params: ParamSet,
    pub prefix: Vec<PhaseSequence>,
    pub before: Vec<Opening>,
    pub before_count: usize,
    pub after: Vec<Opening>,
    pub after_count: usize,
    /// Regular facility of `before` missing from `after`.
    pub dropped: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    ExactK(Solution),
    /// The cheapest run already opens fewer than `k`.
    Few(Solution),
    Pair(SolutionPair),
}

#[derive(Clone, Debug, PartialEq)]
pub enum EqualizeOutcome {
    ExactK(Solution),
    Advance(SolutionPair),
    SamePhase(SolutionPair),
}

#[derive(Clone, Debug, PartialEq)]
pub enum GrowOutcome {
    ExactK(Solution),
    Advance(SolutionPair),
    HandOff(HandOff),
}

#[derive(Clone, Debug, PartialEq)]
pub enum RemoveOutcome {
    ExactK(Solution),
    Advance(SolutionPair),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub phase: u32,
    pub step: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoSolution {
    pub open_set: Vec<FacilityRef>,
    pub k_regular: usize,
    pub free_count: usize,
    /// Regular facilities added on top of the trace when even the cheapest run opened fewer than `k`.
    pub padded: Vec<usize>,
    #[serde(with = "crate::num::serde_q")]
    pub cost: Q,
    #[serde(with = "crate::num::serde_q_vec")]
    pub certificate: Vec<Q>,
    pub trace: ExecutionTrace,
    pub audit: AuditReport,
    pub log: Vec<MergeEvent>,
}

fn sandwich(a: usize, b: usize, k: usize) -> bool {
    (a < k && k < b) || (b < k && k < a)
}

fn facilities(seq: &[Opening]) -> Vec<FacilityRef> {
    seq.iter().map(|o| o.facility).collect()
}

fn common_len(a: &[Opening], b: &[Opening]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x.facility == y.facility).count()
}

/// Keeps only the offsets of free copies that the trace actually opens.
fn prune_offsets(trace: &mut ExecutionTrace) {
    let used: Vec<u32> = trace
        .open_set()
        .iter()
        .filter_map(|h| match h {
            FacilityRef::Free { copy, .. } => Some(*copy),
            FacilityRef::Regular(_) => None,
        })
        .collect();
    let stale: Vec<u32> = trace.params.offsets().keys().copied().filter(|c| !used.contains(c)).collect();
    for c in stale {
        trace.params.remove_offset(c);
    }
}

#[derive(Clone, Debug)]
pub struct MergeConfig {
    pub eta: Option<Q>,
    /// Audit both solutions of every intermediate pair.
    pub audit_steps: bool,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig { eta: None, audit_steps: true }
    }
}

/// State of one walk: instance, target `k`, η, the `10M` sentinel and the event log.
pub struct MergeWalk<'a> {
    pub inst: &'a MetricInstance,
    pub k: usize,
    pub epsilon: Q,
    pub eta: Q,
    pub sentinel: Q,
    pub audit_steps: bool,
    pub log: Vec<MergeEvent>,
    next_copy: u32,
}

impl<'a> MergeWalk<'a> {
    pub fn new(inst: &'a MetricInstance, k: usize, epsilon: Q, config: &MergeConfig) -> Result<Self, MergeError> {
        if k == 0 || k > inst.m() {
            return Err(MergeError::BadK { k, m: inst.m() });
        }
        let eta = config.eta.clone().unwrap_or_else(|| default_eta(inst.n()));
        ParamSet::new(Q::zero(), epsilon.clone(), eta.clone(), inst.n()).map_err(AdaptiveError::from)?;
        Ok(MergeWalk {
            inst,
            k,
            epsilon,
            eta,
            sentinel: q(10) * inst.max_pairwise().max(Q::one()),
            audit_steps: config.audit_steps,
            log: Vec::new(),
            next_copy: 0,
        })
    }

    fn note(&mut self, phase: u32, step: &str, detail: String) {
        self.log.push(MergeEvent { phase, step: step.into(), detail });
    }

    fn params(&self, f: Q) -> ParamSet {
        ParamSet::new(f, self.epsilon.clone(), self.eta.clone(), self.inst.n()).expect("validated in new")
    }

    fn fresh_copy(&mut self) -> u32 {
        let c = self.next_copy;
        self.next_copy += 1;
        c
    }

    fn complete(
        &self,
        params: &ParamSet,
        prefix: &[PhaseSequence],
        hp: &[Opening],
        phase: u32,
    ) -> Result<Solution, MergeError> {
        let mut all = prefix.to_vec();
        if !hp.is_empty() {
            all.push(PhaseSequence { phase, openings: hp.to_vec() });
        }
        let mut trace = complete_solution(self.inst, params, &all, phase)?;
        prune_offsets(&mut trace);
        Ok(Solution::new(trace))
    }

    fn run_f(&self, f: &Q) -> Result<Solution, MergeError> {
        let out = run_log_adaptive(self.inst, &self.params(f.clone()))?;
        Ok(Solution::new(out.trace))
    }

    /// Binary search on `f ∈ [1/n², 4nM]`.
    pub fn initialize_sandwich(&mut self) -> Result<Init, MergeError> {
        let n = q(self.inst.n().max(1) as i64);
        let mut lo = Q::one() / (&n * &n);
        let mut hi = q(4) * &n * self.inst.max_pairwise().max(Q::one());
        let low = self.run_f(&lo)?;
        if low.regular == self.k {
            return Ok(Init::ExactK(low));
        }
        if low.regular < self.k {
            self.note(0, "init", format!("f = {} opens {} < k", fmt_q(&lo), low.regular));
            return Ok(Init::Few(low));
        }
        let high = self.run_f(&hi)?;
        if high.regular == self.k {
            return Ok(Init::ExactK(high));
        }
        if high.regular > self.k {
            return Err(MergeError::Internal(format!(
                "f = {} still opens {} > k facilities",
                fmt_q(&hi),
                high.regular
            )));
        }
        let (mut many, mut few) = (low, high);
        let mut iterations = 0u32;
        while &hi - &lo > self.eta {
            iterations += 1;
            let mid = (&lo + &hi) / q(2);
            let s = self.run_f(&mid)?;
            if s.regular == self.k {
                self.note(0, "init", format!("exact at f = {} after {iterations} steps", fmt_q(&mid)));
                return Ok(Init::ExactK(s));
            }
            if s.regular > self.k {
                lo = mid;
                many = s;
            } else {
                hi = mid;
                few = s;
            }
        }
        self.note(0, "init", format!("f in [{}, {}] after {iterations} steps", fmt_q(&lo), fmt_q(&hi)));
        // the larger f goes left
        self.pair(few, many, 1, DiffParam::FacilityCost)
    }

    /// Builds a pair, jumping to the first phase where the two sequences differ.
    fn pair(&mut self, left: Solution, right: Solution, phase: u32, diff: DiffParam) -> Result<Init, MergeError> {
        let p = self.check_pair(&left, &right, phase, diff)?;
        Ok(Init::Pair(SolutionPair { left, right, phase: p, diff }))
    }

    /// Verifies the pair promises and returns the first phase `≥ phase` where the
    /// sequences differ.
    fn check_pair(&self, left: &Solution, right: &Solution, phase: u32, diff: DiffParam) -> Result<u32, MergeError> {
        if !sandwich(left.regular, right.regular, self.k) {
            return Err(MergeError::Internal(format!(
                "pair at phase {phase} does not sandwich k: {} vs {}",
                left.regular, right.regular
            )));
        }
        let (a, b) = (left.params(), right.params());
        let ok = match diff {
            DiffParam::FacilityCost => {
                a.offsets() == b.offsets() && (a.f() - b.f()) <= self.eta && (b.f() - a.f()) <= self.eta
            }
            DiffParam::FreeOffset(c) => {
                let (ua, ub) = (a.offsets().get(&c), b.offsets().get(&c));
                a.f() == b.f()
                    && match (ua, ub) {
                        (Some(x), Some(y)) => x - y <= self.eta && y - x <= self.eta,
                        _ => false,
                    }
                    && a.offsets().iter().filter(|(k, _)| **k != c).eq(b.offsets().iter().filter(|(k, _)| **k != c))
            }
        };
        if !ok {
            return Err(MergeError::Internal(format!("parameters differ beyond {diff:?} at phase {phase}")));
        }
        for p in 1..phase {
            if facilities(left.trace.sequence(p)) != facilities(right.trace.sequence(p)) {
                return Err(MergeError::Internal(format!("sequences differ at phase {p} < {phase}")));
            }
        }
        for (sol, name) in [(left, "left"), (right, "right")] {
            if sol.trace.phases.iter().any(|s| s.phase >= phase && s.openings.iter().any(|o| o.facility.is_free())) {
                return Err(MergeError::Internal(format!("{name} has a free facility at or after phase {phase}")));
            }
        }
        if self.audit_steps {
            for (sol, name) in [(left, "left"), (right, "right")] {
                let rep = audit_trace(self.inst, sol.params(), &sol.trace, &self.eta);
                if !rep.passed() {
                    return Err(MergeError::Internal(format!(
                        "{name} solution fails its audit at phase {phase}: {:?}",
                        rep.violations
                    )));
                }
            }
        }
        let last = left.trace.num_phases.max(right.trace.num_phases);
        let mut p = phase;
        while p <= last && facilities(left.trace.sequence(p)) == facilities(right.trace.sequence(p)) {
            p += 1;
        }
        if p > last {
            return Err(MergeError::Internal("sandwiching solutions have identical sequences".into()));
        }
        Ok(p)
    }

    fn advance(
        &mut self,
        left: Solution,
        right: Solution,
        phase: u32,
        diff: DiffParam,
    ) -> Result<SolutionPair, MergeError> {
        match self.pair(left, right, phase, diff)? {
            Init::Pair(p) => Ok(p),
            _ => unreachable!("pair always returns a pair"),
        }
    }

    /// Re-solves bids of phase-`p` openings that are no longer valid under the new parameters.
    fn refresh_bids(
        &self,
        params: &ParamSet,
        prefix: &[PhaseSequence],
        seq: &[Opening],
        p: u32,
    ) -> Result<Vec<Opening>, MergeError> {
        let ctx = Ctx::new(self.inst, params);
        let mut out = Vec::with_capacity(seq.len());
        for o in seq {
            let mut o = o.clone();
            if !o.facility.is_free() {
                let view = DualState::at(&ctx, p, &o.superset);
                let valid = o.tau.as_ref().is_some_and(|t| check_bids(&ctx, &view, o.facility, t, &self.eta).is_ok());
                if !valid {
                    match is_openable(&ctx, &view, o.facility, &self.eta) {
                        Openability::Feasible(t) => o.tau = Some(t),
                        Openability::NotOpenable => {
                            return Err(MergeError::Internal(format!(
                                "{:?} is not η-openable after the parameter change at phase {p}",
                                o.facility
                            )))
                        }
                    }
                }
            }
            out.push(o);
        }
        let _ = prefix;
        Ok(out)
    }

    /// Recompletes the right solution under the left parameters.
    pub fn equalize_parameters(&mut self, pair: SolutionPair) -> Result<EqualizeOutcome, MergeError> {
        let SolutionPair { left, right, phase: p, diff } = pair;
        // left must carry the larger f, or the smaller offset
        let (left, right) = match diff {
            DiffParam::FacilityCost if left.params().f() < right.params().f() => (right, left),
            DiffParam::FreeOffset(c) if left.params().offsets()[&c] > right.params().offsets()[&c] => (right, left),
            _ => (left, right),
        };
        let params = left.params().clone();
        let prefix = right.trace.prefix_before(p);
        let hp = self.refresh_bids(&params, &prefix, right.trace.sequence(p), p)?;
        let h2 = self.complete(&params, &prefix, &hp, p)?;
        if h2.regular == self.k {
            self.note(p, "equalize", "exact k".into());
            return Ok(EqualizeOutcome::ExactK(h2));
        }
        if facilities(h2.trace.sequence(p)) != facilities(&hp) {
            return Err(MergeError::Internal(format!("recompletion extended sequence {p}")));
        }
        if sandwich(h2.regular, right.regular, self.k) {
            self.note(p, "equalize", "advance".into());
            return Ok(EqualizeOutcome::Advance(self.advance(h2, right, p + 1, diff)?));
        }
        self.note(p, "equalize", "same parameters".into());
        if !sandwich(left.regular, h2.regular, self.k) {
            return Err(MergeError::Internal("recompleted solution sandwiches with neither side".into()));
        }
        Ok(EqualizeOutcome::SamePhase(SolutionPair { left, right: h2, phase: p, diff }))
    }

    /// Binary search on the offset of free copy `copy`, the last entry of `seq`.
    fn search_offset(
        &mut self,
        params: &ParamSet,
        prefix: &[PhaseSequence],
        seq: &[Opening],
        p: u32,
        copy: u32,
    ) -> Result<RemoveOutcome, MergeError> {
        let at = |walk: &Self, u: &Q| -> Result<Solution, MergeError> {
            let mut ps = params.clone();
            ps.set_offset(copy, u.clone());
            walk.complete(&ps, prefix, seq, p)
        };
        let mut lo = Q::zero();
        let s_lo = at(self, &lo)?;
        if s_lo.regular == self.k {
            return Ok(RemoveOutcome::ExactK(s_lo));
        }
        let mut hi = self.sentinel.clone();
        let mut s_hi = at(self, &hi)?;
        let mut widen = 0;
        while s_hi.regular != self.k && !sandwich(s_lo.regular, s_hi.regular, self.k) {
            widen += 1;
            if widen > 8 {
                return Err(MergeError::Internal(format!(
                    "offsets 0 and {} of copy {copy} do not sandwich k ({} vs {})",
                    fmt_q(&hi),
                    s_lo.regular,
                    s_hi.regular
                )));
            }
            hi *= q(2);
            s_hi = at(self, &hi)?;
        }
        if s_hi.regular == self.k {
            return Ok(RemoveOutcome::ExactK(s_hi));
        }
        let mut s_lo = s_lo;
        let mut iterations = 0;
        while &hi - &lo > self.eta {
            iterations += 1;
            let mid = (&lo + &hi) / q(2);
            let s = at(self, &mid)?;
            if s.regular == self.k {
                self.note(p, "offset", format!("copy {copy}: exact at u = {}", fmt_q(&mid)));
                return Ok(RemoveOutcome::ExactK(s));
            }
            if sandwich(s.regular, s_hi.regular, self.k) {
                lo = mid;
                s_lo = s;
            } else {
                hi = mid;
                s_hi = s;
            }
        }
        self.note(p, "offset", format!("copy {copy}: u in [{}, {}] after {iterations} steps", fmt_q(&lo), fmt_q(&hi)));
        Ok(RemoveOutcome::Advance(self.advance(s_lo, s_hi, p + 1, DiffParam::FreeOffset(copy))?))
    }

    /// Moves `H'_p` toward having `H_p` as a prefix, one update at a time.
    pub fn grow_common_prefix(&mut self, pair: SolutionPair) -> Result<GrowOutcome, MergeError> {
        let p = pair.phase;
        let mut params = pair.left.params().clone();
        if params != *pair.right.params() {
            return Err(MergeError::Internal("grow step needs equal parameters".into()));
        }
        let prefix = pair.left.trace.prefix_before(p);
        let target = pair.left.trace.sequence(p).to_vec();
        let mut cur = pair.right.trace.sequence(p).to_vec();
        let mut cur_count = pair.right.regular;
        let k = self.k;
        loop {
            let qlen = common_len(&target, &cur);
            if qlen == target.len() {
                break;
            }
            let base = target[qlen].facility.base();
            let copy = self.fresh_copy();
            let free = FacilityRef::Free { copy, base };
            params.set_offset(copy, Q::zero());
            let mut inserted = cur.clone();
            inserted.push(Opening { facility: free, tau: None, superset: Vec::new() });
            let sol = self.complete(&params, &prefix, &inserted, p)?;
            if sol.regular == k {
                return Ok(GrowOutcome::ExactK(sol));
            }
            if facilities(sol.trace.sequence(p)) != facilities(&inserted) {
                return Err(MergeError::Internal(format!("inserting a free copy broke maximality at phase {p}")));
            }
            if sandwich(cur_count, sol.regular, k) {
                self.note(p, "grow", format!("insert of copy {copy} flips the count"));
                return Ok(match self.search_offset(&params, &prefix, &inserted, p, copy)? {
                    RemoveOutcome::ExactK(s) => GrowOutcome::ExactK(s),
                    RemoveOutcome::Advance(pair) => GrowOutcome::Advance(pair),
                });
            }
            cur = inserted;
            cur_count = sol.regular;
            let doomed: Vec<FacilityRef> = cur[qlen..].iter().map(|o| o.facility).take_while(|h| *h != free).collect();
            for h in doomed {
                let reduced: Vec<Opening> = cur.iter().filter(|o| o.facility != h).cloned().collect();
                let sol = self.complete(&params, &prefix, &reduced, p)?;
                let after = sol.trace.sequence(p).to_vec();
                if sol.regular == k {
                    return Ok(GrowOutcome::ExactK(sol));
                }
                if sandwich(cur_count, sol.regular, k) {
                    self.note(p, "grow", format!("deleting {h:?} flips the count"));
                    return Ok(GrowOutcome::HandOff(HandOff {
                        phase: p,
                        params,
                        prefix,
                        before: cur,
                        before_count: cur_count,
                        after,
                        after_count: sol.regular,
                        dropped: Some(h.base()),
                    }));
                }
                cur = after;
                cur_count = sol.regular;
            }
            // the free copy becomes its regular original
            let regular = FacilityRef::Regular(base);
            cur = cur
                .into_iter()
                .map(|o| {
                    if o.facility == free {
                        target[qlen].clone()
                    } else {
                        let mut o = o;
                        for h in o.superset.iter_mut() {
                            if *h == free {
                                *h = regular;
                            }
                        }
                        o
                    }
                })
                .collect();
            params.remove_offset(copy);
            let sol = self.complete(&params, &prefix, &cur, p)?;
            if sol.regular == k {
                return Ok(GrowOutcome::ExactK(sol));
            }
            if sol.regular != cur_count + 1 || facilities(sol.trace.sequence(p)) != facilities(&cur) {
                return Err(MergeError::Internal(format!(
                    "replacing copy {copy} by facility {base} changed the completion"
                )));
            }
            cur_count = sol.regular;
        }
        self.note(p, "grow", "H_p is a prefix of H'_p".into());
        Ok(GrowOutcome::HandOff(HandOff {
            phase: p,
            params,
            prefix,
            before: target,
            before_count: pair.left.regular,
            after: cur,
            after_count: cur_count,
            dropped: None,
        }))
    }

    /// Walks from `H^after_p` back to `H^before_p` and binary-searches the flipping step.
    pub fn remove_extra_facilities(&mut self, hand: HandOff) -> Result<RemoveOutcome, MergeError> {
        let HandOff { phase: p, mut params, prefix, before, before_count, after, after_count, dropped } = hand;
        let k = self.k;
        if !sandwich(before_count, after_count, k) {
            return Err(MergeError::Internal(format!(
                "hand-off at phase {p} does not sandwich k ({before_count} vs {after_count})"
            )));
        }
        let in_before = facilities(&before);
        let suffix: Vec<FacilityRef> = after.iter().map(|o| o.facility).filter(|h| !in_before.contains(h)).collect();
        let tail_start = after.len() - suffix.len();
        if facilities(&after[tail_start..]) != suffix {
            return Err(MergeError::Internal("extra facilities do not form a suffix".into()));
        }
        let mut seqs: Vec<Vec<Opening>> = Vec::with_capacity(suffix.len() + 1);
        let mut star_copy = None;
        let mut h0 = after.clone();
        if let Some(i) = dropped {
            let copy = self.fresh_copy();
            params.set_offset(copy, Q::zero());
            h0.push(Opening { facility: FacilityRef::Free { copy, base: i }, tau: None, superset: Vec::new() });
            star_copy = Some(copy);
        }
        seqs.push(h0);
        for h in &suffix {
            let prev = seqs.last().expect("nonempty");
            seqs.push(prev.iter().filter(|o| o.facility != *h).cloned().collect());
        }
        let mut counts = Vec::with_capacity(seqs.len());
        for s in &seqs {
            let sol = self.complete(&params, &prefix, s, p)?;
            if sol.regular == k {
                self.note(p, "remove", "exact k".into());
                return Ok(RemoveOutcome::ExactK(sol));
            }
            counts.push(sol.regular);
        }
        if let Some(copy) = star_copy {
            if sandwich(after_count, counts[0], k) {
                self.note(p, "remove", format!("copy {copy} of the dropped facility flips the count"));
                return self.search_offset(&params, &prefix, &seqs[0], p, copy);
            }
        }
        for r in 0..suffix.len() {
            if sandwich(counts[r], counts[r + 1], k) {
                let copy = self.fresh_copy();
                params.set_offset(copy, Q::zero());
                let mut x = seqs[r + 1].clone();
                x.push(Opening {
                    facility: FacilityRef::Free { copy, base: suffix[r].base() },
                    tau: None,
                    superset: Vec::new(),
                });
                self.note(p, "remove", format!("dropping {:?} flips the count", suffix[r]));
                return self.search_offset(&params, &prefix, &x, p, copy);
            }
        }
        Err(MergeError::Internal(format!(
            "no consecutive removal sandwiches k at phase {p}: after {after_count}, chain {counts:?}, before {before_count}"
        )))
    }

    fn finish(&mut self, sol: Solution, padded: Vec<usize>) -> Result<PseudoSolution, MergeError> {
        let params = sol.params().clone();
        let audit = audit_trace(self.inst, &params, &sol.trace, &self.eta);
        let mut open_set = sol.trace.open_set();
        open_set.extend(padded.iter().map(|&i| FacilityRef::Regular(i)));
        let c = cost(self.inst, &open_set, &params).map_err(|e| MergeError::Internal(e.to_string()))?;
        let k_regular = open_set.iter().filter(|h| !h.is_free()).count();
        let free_count = open_set.len() - k_regular;
        Ok(PseudoSolution {
            open_set,
            k_regular,
            free_count,
            padded,
            cost: c,
            certificate: audit.alpha_star.clone(),
            trace: sol.trace,
            audit,
            log: std::mem::take(&mut self.log),
        })
    }

    pub fn run(&mut self) -> Result<PseudoSolution, MergeError> {
        let mut pair = match self.initialize_sandwich()? {
            Init::ExactK(s) => return self.finish(s, Vec::new()),
            Init::Few(s) => {
                let open = s.trace.open_set();
                let pad: Vec<usize> = (0..self.inst.m())
                    .filter(|i| !open.contains(&FacilityRef::Regular(*i)))
                    .take(self.k - s.regular)
                    .collect();
                return self.finish(s, pad);
            }
            Init::Pair(p) => p,
        };
        let budget = pair.left.trace.num_phases.max(pair.right.trace.num_phases) + 2;
        loop {
            if pair.phase > budget {
                return Err(MergeError::PhaseBudget(budget));
            }
            let same = match self.equalize_parameters(pair)? {
                EqualizeOutcome::ExactK(s) => return self.finish(s, Vec::new()),
                EqualizeOutcome::Advance(next) => {
                    pair = next;
                    continue;
                }
                EqualizeOutcome::SamePhase(same) => same,
            };
            let hand = match self.grow_common_prefix(same)? {
                GrowOutcome::ExactK(s) => return self.finish(s, Vec::new()),
                GrowOutcome::Advance(next) => {
                    pair = next;
                    continue;
                }
                GrowOutcome::HandOff(h) => h,
            };
            match self.remove_extra_facilities(hand)? {
                RemoveOutcome::ExactK(s) => return self.finish(s, Vec::new()),
                RemoveOutcome::Advance(next) => pair = next,
            }
        }
    }
}

/// Pseudo-solution with exactly `k` regular facilities and a few free copies.
pub fn run_pseudo_approx(
    inst: &MetricInstance,
    k: usize,
    epsilon: &Q,
    config: &MergeConfig,
) -> Result<PseudoSolution, MergeError> {
    MergeWalk::new(inst, k, epsilon.clone(), config)?.run()
}
