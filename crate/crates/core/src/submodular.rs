//! Reassignment objective over ball-constrained centers: closed costs, the set function
//! `g` and its complement `f(X) = g(∅) − g(X)`, greedy maximization under a partition
//! matroid, and extraction of the final `k` centers.
//!
//! Centers and clients are point ids of a [`ScaledMetric`]; all values are scaled integers.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::scaled::ScaledMetric;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubmodularError {
    #[error("need {need} clusters to close but only {have} are concentrated candidates")]
    Infeasible { need: usize, have: usize },
    #[error("no dummy centers, but clients or closed clusters must be served by them")]
    Unbounded,
    #[error("client {0} has no assigned center and is not marked removed")]
    Unassigned(usize),
    #[error("{stage}: expected {expect} centers, found {found}")]
    Cardinality { stage: &'static str, expect: usize, found: usize },
    #[error("{0} is not a member of the working solution")]
    NotWorking(usize),
    #[error("selected set is not independent")]
    Dependent,
}

/// One element of the ground set: a real facility (point id) inside ball `part`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Element {
    pub part: usize,
    pub point: usize,
}

/// Rank one per part.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionMatroid {
    ground: Vec<Element>,
    parts: usize,
}

impl PartitionMatroid {
    /// Ground set sorted by `(part, point)`, duplicates removed.
    pub fn new(parts: usize, mut ground: Vec<Element>) -> Self {
        ground.sort_unstable();
        ground.dedup();
        assert!(ground.iter().all(|e| e.part < parts), "element outside the parts");
        PartitionMatroid { ground, parts }
    }

    pub fn ground(&self) -> &[Element] {
        &self.ground
    }

    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn part(&self, b: usize) -> impl Iterator<Item = &Element> {
        self.ground.iter().filter(move |e| e.part == b)
    }

    /// At most one element per part.
    pub fn is_independent(&self, set: &[Element]) -> bool {
        let mut seen = BTreeSet::new();
        set.iter().all(|e| self.ground.contains(e) && seen.insert(e.part))
    }
}

/// A candidate cluster for closing: its center, members and core.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub center: usize,
    pub members: Vec<usize>,
    pub core: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SubmodularContext {
    metric: Arc<ScaledMetric>,
    lambda: Vec<usize>,
    /// `Some(c)` is the fixed assignment of a client; `None` marks a client of a removed cluster.
    assign: Vec<Option<usize>>,
    clusters: Vec<Cluster>,
    close: usize,
    base: Vec<i128>,
    core_base: Vec<i128>,
    lambda_core: Vec<Option<i128>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GValue {
    pub value: i128,
    /// Centers of the clusters closed at the minimum, ascending.
    pub closed: Vec<usize>,
}

fn min_dist(metric: &ScaledMetric, p: usize, a: &[usize], b: &[usize]) -> Option<i128> {
    a.iter().chain(b).map(|&c| metric.d(p, c)).min()
}

impl SubmodularContext {
    pub fn new(
        metric: Arc<ScaledMetric>,
        lambda: Vec<usize>,
        assign: Vec<Option<usize>>,
        clusters: Vec<Cluster>,
        close: usize,
    ) -> Result<Self, SubmodularError> {
        if clusters.len() < close {
            return Err(SubmodularError::Infeasible { need: close, have: clusters.len() });
        }
        if lambda.is_empty() && (close > 0 || assign.iter().any(|a| a.is_none())) {
            return Err(SubmodularError::Unbounded);
        }
        let base = assign
            .iter()
            .enumerate()
            .map(|(p, a)| {
                let own: Vec<usize> = a.iter().copied().collect();
                min_dist(&metric, p, &own, &lambda).ok_or(SubmodularError::Unassigned(p))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let core_base = clusters
            .iter()
            .map(|cl| {
                cl.core.iter().map(|&p| min_dist(&metric, p, &[cl.center], &lambda).expect("center present")).sum()
            })
            .collect();
        let lambda_core = clusters
            .iter()
            .map(|cl| lambda.iter().map(|&d| cl.core.iter().map(|&p| metric.d(p, d)).sum::<i128>()).min())
            .collect();
        Ok(SubmodularContext { metric, lambda, assign, clusters, close, base, core_base, lambda_core })
    }

    pub fn metric(&self) -> &ScaledMetric {
        &self.metric
    }

    pub fn lambda(&self) -> &[usize] {
        &self.lambda
    }

    pub fn assign(&self) -> &[Option<usize>] {
        &self.assign
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// Number of clusters that must be closed.
    pub fn close_count(&self) -> usize {
        self.close
    }

    /// Some core point is strictly closer to `x` than to its own center.
    pub fn is_hit(&self, idx: usize, x: &[usize]) -> bool {
        let cl = &self.clusters[idx];
        cl.core.iter().any(|&p| {
            let own = self.metric.d(p, cl.center);
            x.iter().any(|&c| self.metric.d(p, c) < own)
        })
    }

    /// Cost of serving cluster `idx` once its center is closed, straight from the definition.
    pub fn closedcost(&self, idx: usize, x: &[usize]) -> i128 {
        let cl = &self.clusters[idx];
        let m = &*self.metric;
        let open = |p: usize| min_dist(m, p, x, &self.lambda).map_or(m.d(p, cl.center), |v| v.min(m.d(p, cl.center)));
        if self.is_hit(idx, x) {
            return cl.members.iter().map(|&p| open(p)).sum();
        }
        let core: BTreeSet<usize> = cl.core.iter().copied().collect();
        let moved = x
            .iter()
            .chain(&self.lambda)
            .map(|&c2| cl.core.iter().map(|&p| m.d(p, c2)).sum::<i128>())
            .min()
            .expect("context has dummies or x is nonempty");
        moved + cl.members.iter().filter(|p| !core.contains(p)).map(|&p| open(p)).sum::<i128>()
    }

    /// `closedcost − Σ_{members} d(p, c ∪ X ∪ Λ)`; zero when hit.
    pub fn cost_inc(&self, idx: usize, x: &[usize]) -> i128 {
        if self.is_hit(idx, x) {
            return 0;
        }
        let cl = &self.clusters[idx];
        let via_x = x.iter().map(|&c2| cl.core.iter().map(|&p| self.metric.d(p, c2)).sum::<i128>()).min();
        let best = match (via_x, self.lambda_core[idx]) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => unreachable!("context construction rules this out"),
        };
        best - self.core_base[idx]
    }

    /// Minimum over closing sets of the required size: the cheapest cost increases win,
    /// ties by center id.
    pub fn eval_g(&self, x: &[usize]) -> GValue {
        let assigned: i128 =
            self.base.iter().enumerate().map(|(p, &b)| x.iter().map(|&c| self.metric.d(p, c)).fold(b, i128::min)).sum();
        let mut incs: Vec<(i128, usize)> = if self.close == 0 {
            Vec::new()
        } else {
            (0..self.clusters.len()).map(|i| (self.cost_inc(i, x), self.clusters[i].center)).collect()
        };
        incs.sort_unstable();
        incs.truncate(self.close);
        let mut closed: Vec<usize> = incs.iter().map(|&(_, c)| c).collect();
        closed.sort_unstable();
        GValue { value: assigned + incs.iter().map(|&(v, _)| v).sum::<i128>(), closed }
    }

    pub fn eval_f(&self, x: &[usize]) -> i128 {
        self.eval_g(&[]).value - self.eval_g(x).value
    }
}

/// Repeatedly adds the feasible element of largest marginal gain, ties by `(part, point)`;
/// stops when nothing feasible gains. Returns the chosen elements sorted.
pub fn maximize_f(ctx: &SubmodularContext, matroid: &PartitionMatroid) -> Vec<Element> {
    let mut chosen: Vec<Element> = Vec::new();
    let mut points: Vec<usize> = Vec::new();
    let mut current = ctx.eval_g(&[]).value;
    loop {
        let mut best: Option<(i128, Element, i128)> = None;
        for e in matroid.ground() {
            if chosen.iter().any(|c| c.part == e.part) {
                continue;
            }
            points.push(e.point);
            let g = ctx.eval_g(&points).value;
            points.pop();
            let gain = current - g;
            if best.as_ref().is_none_or(|(bg, _, _)| gain > *bg) {
                best = Some((gain, *e, g));
            }
        }
        match best {
            Some((gain, e, g)) if gain > 0 => {
                chosen.push(e);
                points.push(e.point);
                current = g;
            }
            _ => break,
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Final centers as regular facility indices, sorted.
///
/// `working` is the real part of the solution after the removals guessed so far; the
/// removed clusters `removed` and `closed` leave it, and every ball contributes its chosen
/// element or, failing that, its lowest-index facility. Duplicates are made up for with
/// the lowest-index unused facilities.
pub fn extract_k_centers(
    metric: &ScaledMetric,
    matroid: &PartitionMatroid,
    x: &[Element],
    closed: &[usize],
    removed: &[usize],
    working: &[usize],
    k: usize,
) -> Result<Vec<usize>, SubmodularError> {
    if !matroid.is_independent(x) {
        return Err(SubmodularError::Dependent);
    }
    let work: BTreeSet<usize> = working.iter().copied().collect();
    if let Some(&c) = closed.iter().chain(removed).find(|c| !work.contains(c)) {
        return Err(SubmodularError::NotWorking(c));
    }
    let gone: BTreeSet<usize> = closed.iter().chain(removed).copied().collect();
    let kept: Vec<usize> = work.difference(&gone).copied().collect();
    let total = kept.len() + matroid.parts();
    if total != k || gone.len() != closed.len() + removed.len() {
        return Err(SubmodularError::Cardinality { stage: "removal guesses and balls", expect: k, found: total });
    }
    let mut out: BTreeSet<usize> = kept.into_iter().collect();
    for b in 0..matroid.parts() {
        let pick = x
            .iter()
            .find(|e| e.part == b)
            .or_else(|| matroid.part(b).min_by_key(|e| e.point))
            .ok_or(SubmodularError::Cardinality { stage: "ball replacement", expect: 1, found: 0 })?;
        out.insert(pick.point);
    }
    let n = metric.n();
    let mut ids: Vec<usize> = out.into_iter().map(|p| p - n).collect();
    let mut next = 0;
    while ids.len() < k && next < metric.m() {
        if !ids.contains(&next) {
            ids.push(next);
        }
        next += 1;
    }
    ids.sort_unstable();
    if ids.len() != k {
        return Err(SubmodularError::Cardinality { stage: "padding", expect: k, found: ids.len() });
    }
    Ok(ids)
}
