//! Phase-based primal-dual algorithm with openability tests, partial-solution
//! completion and a replay auditor.
//!
//! A state is determined by the phase `p` (time `θ = (1+ε²)^{p-1}`) and the open set
//! `S`: client `j` is active iff `θ < (1−δ)·d(j,S)`. Bids only influence the final
//! dual values, never which clients are active.

mod audit;
mod openable;
mod run;

pub use audit::{audit_trace, AuditReport, AuditViolation};
pub use openable::{check_bids, is_openable, payment_possible, Affine, Openability};
pub use run::{complete_sequence, complete_solution, next_event_phase, run_log_adaptive, AdaptiveOutcome};

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::metric::{FacilityRef, MetricError, MetricInstance, ParamSet};
use crate::num::{ceil_log, q, to_f64, Ext, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdaptiveError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("malformed trace: {0}")]
    Malformed(String),
    #[error("openability LP failed: {0}")]
    Lp(String),
    #[error("phase budget {0} exhausted with active clients left")]
    PhaseBudget(u32),
}

/// `θ_p = r^{p-1}` with `r = 1 + ε²`, kept in lowest terms without gcd work.
#[derive(Clone, Debug)]
pub struct PhaseClock {
    ratio: Q,
}

impl PhaseClock {
    pub fn new(epsilon: &Q) -> Self {
        PhaseClock { ratio: Q::one() + epsilon * epsilon }
    }

    pub fn ratio(&self) -> &Q {
        &self.ratio
    }

    pub fn theta(&self, phase: u32) -> Q {
        assert!(phase >= 1, "phases are numbered from 1");
        crate::num::pow_q(&self.ratio, u64::from(phase - 1))
    }

    /// Smallest phase `p ≥ from` with `θ_p ≥ target`.
    pub fn first_phase_at_least(&self, target: &Q, from: u32) -> u32 {
        let e = ceil_log(&self.ratio, target);
        let p = u32::try_from(e + 1).unwrap_or(u32::MAX);
        p.max(from)
    }

    pub fn approx_ln_ratio(&self) -> f64 {
        to_f64(&self.ratio).ln()
    }
}

/// Times `θ_1 = 1, θ_2, …` strictly below `6·m_max`.
pub fn phase_schedule(m_max: &Q, epsilon: &Q) -> Vec<Q> {
    let clock = PhaseClock::new(epsilon);
    let limit = q(6) * m_max;
    let mut out = Vec::new();
    let mut t = Q::one();
    while t < limit {
        out.push(t.clone());
        t = &t * clock.ratio();
    }
    if out.is_empty() {
        out.push(Q::one());
    }
    out
}

/// `⌈log_{1+ε²}(6M)⌉ + 1`.
pub fn phase_bound(m_max: &Q, epsilon: &Q) -> u32 {
    let clock = PhaseClock::new(epsilon);
    (ceil_log(clock.ratio(), &(q(6) * m_max)) + 1) as u32
}

/// `η = 2^{-min(64, max(24, n))}`.
pub fn default_eta(n: usize) -> Q {
    let e = n.clamp(24, 64);
    Q::new(BigInt::one(), BigInt::one() << e)
}

/// Everything derived once from an instance and a parameter set.
#[derive(Clone, Debug)]
pub struct Ctx<'a> {
    pub inst: &'a MetricInstance,
    pub params: &'a ParamSet,
    pub clock: PhaseClock,
    /// `1 − δ`
    pub keep: Q,
    /// `1 + ε²`
    pub boost: Q,
}

impl<'a> Ctx<'a> {
    pub fn new(inst: &'a MetricInstance, params: &'a ParamSet) -> Self {
        let eps = params.epsilon();
        Ctx { inst, params, clock: PhaseClock::new(eps), keep: Q::one() - params.delta(), boost: Q::one() + eps * eps }
    }

    pub fn dist(&self, j: usize, h: &FacilityRef) -> Q {
        self.params.client_dist(self.inst, j, h)
    }

    /// `f̂ − n·η`
    pub fn pay_target(&self, eta: &Q) -> Q {
        self.params.fhat() - q(self.inst.n() as i64) * eta
    }
}

/// `(α, S, A, θ)` plus the phase index and cached `d(j,S)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub phase: u32,
    pub theta: Q,
    pub open: Vec<FacilityRef>,
    pub regular_open: Vec<bool>,
    pub dist_s: Vec<Ext>,
    pub active: Vec<bool>,
    pub alpha: Vec<Q>,
}

impl DualState {
    pub fn start(ctx: &Ctx) -> Self {
        let n = ctx.inst.n();
        DualState {
            phase: 1,
            theta: Q::one(),
            open: Vec::new(),
            regular_open: vec![false; ctx.inst.m()],
            dist_s: vec![Ext::Inf; n],
            active: vec![true; n],
            alpha: vec![Q::one(); n],
        }
    }

    /// The state at `phase` with open set `open`, α unknown for inactive clients
    /// (set to `(1−δ)d(j,S)`); used to evaluate openability against a superset.
    pub fn at(ctx: &Ctx, phase: u32, open: &[FacilityRef]) -> Self {
        let mut st = DualState::start(ctx);
        st.phase = phase;
        st.theta = ctx.clock.theta(phase);
        for h in open {
            st.add_to_open_set(ctx, *h);
        }
        st.refresh_active(ctx);
        st
    }

    pub fn active_clients(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&j| self.active[j]).collect()
    }

    pub fn inactive_clients(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&j| !self.active[j]).collect()
    }

    pub fn any_active(&self) -> bool {
        self.active.iter().any(|&a| a)
    }

    pub fn regular_count(&self) -> usize {
        self.open.iter().filter(|h| !h.is_free()).count()
    }

    pub fn is_open(&self, h: &FacilityRef) -> bool {
        match h {
            FacilityRef::Regular(i) => self.regular_open[*i],
            free => self.open.contains(free),
        }
    }

    /// `(1−δ)·d(j,S)`.
    pub fn kept_dist(&self, ctx: &Ctx, j: usize) -> Ext {
        self.dist_s[j].scale(&ctx.keep)
    }

    fn add_to_open_set(&mut self, ctx: &Ctx, h: FacilityRef) {
        self.open.push(h);
        if let FacilityRef::Regular(i) = h {
            self.regular_open[i] = true;
        }
        for j in 0..self.dist_s.len() {
            let d = Ext::Fin(ctx.dist(j, &h));
            if d < self.dist_s[j] {
                self.dist_s[j] = d;
            }
        }
    }

    /// Deactivates clients with `θ ≥ (1−δ)d(j,S)`; returns them.
    fn refresh_active(&mut self, ctx: &Ctx) -> Vec<usize> {
        let mut gone = Vec::new();
        for j in 0..self.active.len() {
            if self.active[j] && !self.kept_dist(ctx, j).gt_q(&self.theta) {
                self.active[j] = false;
                gone.push(j);
            }
        }
        gone
    }

    /// Opens `h` at the current time. Clients listed in `tau` take their bid as α;
    /// every other client that leaves the active set freezes at θ.
    pub fn open_facility(&mut self, ctx: &Ctx, h: FacilityRef, tau: Option<&BTreeMap<usize, Q>>) {
        if let Some(tau) = tau {
            for (&j, t) in tau {
                if j < self.active.len() && self.active[j] {
                    self.alpha[j] = t.clone();
                }
            }
        }
        self.add_to_open_set(ctx, h);
        self.refresh_active(ctx);
        for j in 0..self.active.len() {
            if self.active[j] {
                self.alpha[j] = self.theta.clone();
            }
        }
    }

    /// Jumps to a later phase; clients crossing `(1−δ)d(j,S)` on the way freeze there.
    pub fn move_to_phase(&mut self, ctx: &Ctx, phase: u32) {
        assert!(phase >= self.phase, "phases only move forward");
        if phase == self.phase {
            return;
        }
        self.phase = phase;
        self.theta = ctx.clock.theta(phase);
        for j in 0..self.active.len() {
            if !self.active[j] {
                continue;
            }
            match self.kept_dist(ctx, j) {
                Ext::Fin(kd) if kd <= self.theta => {
                    self.active[j] = false;
                    self.alpha[j] = kd;
                }
                _ => self.alpha[j] = self.theta.clone(),
            }
        }
    }
}

/// One facility appended to a phase sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Opening {
    pub facility: FacilityRef,
    /// Bids of the clients active w.r.t. `superset`; absent for free facilities.
    #[serde(with = "crate::num::serde_q_opt_map", default)]
    pub tau: Option<BTreeMap<usize, Q>>,
    /// Open set the opening was validated against (a superset of its prefix).
    pub superset: Vec<FacilityRef>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSequence {
    pub phase: u32,
    pub openings: Vec<Opening>,
}

impl PhaseSequence {
    pub fn facilities(&self) -> Vec<FacilityRef> {
        self.openings.iter().map(|o| o.facility).collect()
    }

    pub fn free_count(&self) -> usize {
        self.openings.iter().filter(|o| o.facility.is_free()).count()
    }
}

/// Sparse list of non-empty phase sequences plus the number of executed phases `L`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub phases: Vec<PhaseSequence>,
    pub num_phases: u32,
    pub params: ParamSet,
}

impl ExecutionTrace {
    pub fn open_set(&self) -> Vec<FacilityRef> {
        self.phases.iter().flat_map(|p| p.openings.iter().map(|o| o.facility)).collect()
    }

    pub fn regular_count(&self) -> usize {
        self.open_set().iter().filter(|h| !h.is_free()).count()
    }

    pub fn free_count(&self) -> usize {
        self.open_set().iter().filter(|h| h.is_free()).count()
    }

    pub fn max_free_per_phase(&self) -> usize {
        self.phases.iter().map(|p| p.free_count()).max().unwrap_or(0)
    }

    /// Openings of `phase`, empty if the phase opened nothing.
    pub fn sequence(&self, phase: u32) -> &[Opening] {
        self.phases.iter().find(|p| p.phase == phase).map_or(&[], |p| p.openings.as_slice())
    }

    /// Phase sequences strictly before `phase`.
    pub fn prefix_before(&self, phase: u32) -> Vec<PhaseSequence> {
        self.phases.iter().filter(|p| p.phase < phase).cloned().collect()
    }
}
