//! The classic greedy primal-dual LMP algorithm, event by event in exact arithmetic.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::metric::MetricInstance;
use crate::num::{pos, q, Ext, Q};

/// Outcome of `min x : base + Σ_k [x − b_k]⁺ ≥ target`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reach {
    Always,
    At(Q),
    Never,
}

/// Solves the piecewise-linear threshold exactly; `breaks` is sorted in place.
pub fn first_reach(base: &Q, target: &Q, breaks: &mut [Q]) -> Reach {
    if base >= target {
        return Reach::Always;
    }
    breaks.sort();
    let mut prefix = Q::zero();
    for t in 0..breaks.len() {
        prefix += &breaks[t];
        let slope = q(t as i64 + 1);
        let x = (target - base + &prefix) / slope;
        if t + 1 == breaks.len() || x <= breaks[t + 1] {
            return Reach::At(x);
        }
    }
    Reach::Never
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EventKind {
    Open {
        facility: usize,
    },
    /// `by` is the facility whose opening connected the client, if any.
    Connect {
        client: usize,
        by: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyEvent {
    #[serde(with = "crate::num::serde_q")]
    pub theta: Q,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyOutcome {
    pub s_star: Vec<usize>,
    #[serde(with = "crate::num::serde_q_vec")]
    pub alpha_star: Vec<Q>,
    pub events: Vec<GreedyEvent>,
}

#[derive(Clone, Debug)]
pub struct GreedyState {
    pub theta: Q,
    pub alpha: Vec<Q>,
    pub open: Vec<usize>,
    pub active: Vec<bool>,
    pub dist_s: Vec<Ext>,
}

impl GreedyState {
    pub fn start(inst: &MetricInstance) -> Self {
        GreedyState {
            theta: Q::zero(),
            alpha: vec![Q::zero(); inst.n()],
            open: Vec::new(),
            active: vec![true; inst.n()],
            dist_s: vec![Ext::Inf; inst.n()],
        }
    }

    pub fn any_active(&self) -> bool {
        self.active.iter().any(|&a| a)
    }

    fn is_open(&self, i: usize) -> bool {
        self.open.contains(&i)
    }

    /// `Σ_{j∈I} [d(j,S) − d(j,i)]⁺`.
    fn inactive_credit(&self, inst: &MetricInstance, i: usize) -> Q {
        (0..inst.n())
            .filter(|&j| !self.active[j])
            .map(|j| match &self.dist_s[j] {
                Ext::Fin(dj) => pos(dj - inst.cf(j, i)),
                Ext::Inf => Q::zero(),
            })
            .sum()
    }

    /// Total bid on `i`: `Σ_{j∈A}[α_j − d(i,j)]⁺ + Σ_{j∈I}[d(j,S) − d(j,i)]⁺`.
    pub fn bids(&self, inst: &MetricInstance, i: usize) -> Q {
        let act: Q = (0..inst.n()).filter(|&j| self.active[j]).map(|j| pos(&self.alpha[j] - inst.cf(j, i))).sum();
        act + self.inactive_credit(inst, i)
    }

    fn open_facility(&mut self, inst: &MetricInstance, i: usize) -> Vec<usize> {
        self.open.push(i);
        for j in 0..inst.n() {
            let d = Ext::Fin(inst.cf(j, i).clone());
            if d < self.dist_s[j] {
                self.dist_s[j] = d;
            }
        }
        let connected: Vec<usize> =
            (0..inst.n()).filter(|&j| self.active[j] && self.alpha[j] >= *inst.cf(j, i)).collect();
        for &j in &connected {
            self.active[j] = false;
        }
        connected
    }

    fn advance(&mut self, theta: &Q) {
        for j in 0..self.alpha.len() {
            if self.active[j] {
                self.alpha[j] = theta.clone();
            }
        }
        self.theta = theta.clone();
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NextEvent {
    Open(usize),
    Reach(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GreedyError {
    #[error("no event reachable with active clients remaining")]
    Stuck,
    #[error("instance has no facilities")]
    NoFacilities,
    #[error("negative facility cost")]
    NegativeCost,
}

/// Earliest `θ' ≥ θ` at which a facility becomes paid for or an active client reaches
/// the open set; facilities win ties, then lower index.
pub fn next_event(state: &GreedyState, inst: &MetricInstance, fhat: &Q) -> Result<(Q, NextEvent), GreedyError> {
    let mut best: Option<(Q, NextEvent)> = None;
    let active: Vec<usize> = (0..inst.n()).filter(|&j| state.active[j]).collect();
    if active.is_empty() {
        return Err(GreedyError::Stuck);
    }
    for i in 0..inst.m() {
        if state.is_open(i) {
            continue;
        }
        let base = state.inactive_credit(inst, i);
        let mut breaks: Vec<Q> = active.iter().map(|&j| inst.cf(j, i).clone()).collect();
        let t = match first_reach(&base, fhat, &mut breaks) {
            Reach::Always => state.theta.clone(),
            Reach::At(x) => x.max(state.theta.clone()),
            Reach::Never => continue,
        };
        if best.as_ref().is_none_or(|(b, _)| t < *b) {
            best = Some((t, NextEvent::Open(i)));
        }
    }
    for &j in &active {
        if let Ext::Fin(d) = &state.dist_s[j] {
            let t = d.clone().max(state.theta.clone());
            if best.as_ref().is_none_or(|(b, _)| t < *b) {
                best = Some((t, NextEvent::Reach(j)));
            }
        }
    }
    best.ok_or(GreedyError::Stuck)
}

pub fn run_greedy(inst: &MetricInstance, f: &Q) -> Result<GreedyOutcome, GreedyError> {
    if inst.m() == 0 {
        return Err(GreedyError::NoFacilities);
    }
    if f.is_negative() {
        return Err(GreedyError::NegativeCost);
    }
    let fhat = f * q(2);
    let mut st = GreedyState::start(inst);
    let mut events = Vec::new();
    while st.any_active() {
        let (theta, ev) = next_event(&st, inst, &fhat)?;
        st.advance(&theta);
        match ev {
            NextEvent::Open(i) => {
                events.push(GreedyEvent { theta: theta.clone(), kind: EventKind::Open { facility: i } });
                for j in st.open_facility(inst, i) {
                    events.push(GreedyEvent {
                        theta: theta.clone(),
                        kind: EventKind::Connect { client: j, by: Some(i) },
                    });
                }
            }
            NextEvent::Reach(j) => {
                st.active[j] = false;
                events.push(GreedyEvent { theta, kind: EventKind::Connect { client: j, by: None } });
            }
        }
    }
    Ok(GreedyOutcome { s_star: st.open, alpha_star: st.alpha, events })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverbidViolation {
    Overbid {
        #[serde(with = "crate::num::serde_q")]
        theta: Q,
        facility: usize,
    },
    BeyondOpenSet {
        #[serde(with = "crate::num::serde_q")]
        theta: Q,
        client: usize,
    },
    Malformed {
        event: usize,
        reason: String,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverbidReport {
    pub checkpoints: usize,
    pub violations: Vec<OverbidViolation>,
}

impl OverbidReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Replays the event log and checks the no-overbidding invariant at every point that
/// is not inside an opening (the opening event plus the connections it causes).
pub fn audit_no_overbid(events: &[GreedyEvent], inst: &MetricInstance, f: &Q) -> OverbidReport {
    let fhat = f * q(2);
    let mut st = GreedyState::start(inst);
    let mut rep = OverbidReport::default();
    let check = |st: &GreedyState, rep: &mut OverbidReport| {
        rep.checkpoints += 1;
        for i in 0..inst.m() {
            if st.bids(inst, i) > fhat {
                rep.violations.push(OverbidViolation::Overbid { theta: st.theta.clone(), facility: i });
            }
        }
        for j in 0..inst.n() {
            if st.active[j] && st.dist_s[j].lt_q(&st.alpha[j]) {
                rep.violations.push(OverbidViolation::BeyondOpenSet { theta: st.theta.clone(), client: j });
            }
        }
    };
    check(&st, &mut rep);
    for (e, ev) in events.iter().enumerate() {
        let caused = matches!(ev.kind, EventKind::Connect { by: Some(_), .. });
        if ev.theta < st.theta || (caused && ev.theta != st.theta) {
            rep.violations.push(OverbidViolation::Malformed { event: e, reason: "event time out of order".into() });
            return rep;
        }
        if !caused {
            // state just before the event fires, with every active α raised to its time
            st.advance(&ev.theta);
            check(&st, &mut rep);
        }
        match ev.kind {
            EventKind::Open { facility } => {
                if facility >= inst.m() || st.is_open(facility) {
                    rep.violations
                        .push(OverbidViolation::Malformed { event: e, reason: format!("bad opening of {facility}") });
                    return rep;
                }
                st.open.push(facility);
                for j in 0..inst.n() {
                    let d = Ext::Fin(inst.cf(j, facility).clone());
                    if d < st.dist_s[j] {
                        st.dist_s[j] = d;
                    }
                }
            }
            EventKind::Connect { client, .. } => {
                if client >= inst.n() || !st.active[client] {
                    rep.violations
                        .push(OverbidViolation::Malformed { event: e, reason: format!("bad connection of {client}") });
                    return rep;
                }
                st.active[client] = false;
            }
        }
    }
    check(&st, &mut rep);
    rep
}

/// `α*` implied by an event log (the time each client connected).
pub fn alpha_from_events(events: &[GreedyEvent], n: usize) -> Vec<Option<Q>> {
    let mut alpha = vec![None; n];
    for ev in events {
        if let EventKind::Connect { client, .. } = ev.kind {
            if client < n {
                alpha[client] = Some(ev.theta.clone());
            }
        }
    }
    alpha
}
