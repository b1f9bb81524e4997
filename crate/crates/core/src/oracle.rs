//! Brute-force optima and certificate checks; ground truth for the test suites.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::metric::{FacilityRef, MetricError, MetricInstance, ParamSet};
use crate::num::{pos, q, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("open set is empty")]
    EmptySet,
    #[error("enumeration of {count} candidate sets exceeds the cap {cap}")]
    CapExceeded { count: u128, cap: u128 },
    #[error("k = {k} is not in 1..={m}")]
    BadK { k: usize, m: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCaps {
    pub kmedian_subsets: u128,
    pub ufl_log2: u32,
}

impl Default for OracleCaps {
    fn default() -> Self {
        OracleCaps { kmedian_subsets: 200_000, ufl_log2: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    #[serde(with = "crate::num::serde_q")]
    pub value: Q,
    pub witness: Vec<usize>,
    pub enumerated: u64,
}

/// `Σ_j min_{h∈S} d(j,h)` under the extended metric.
pub fn cost(inst: &MetricInstance, s: &[FacilityRef], params: &ParamSet) -> Result<Q, OracleError> {
    if s.is_empty() {
        return Err(OracleError::EmptySet);
    }
    for h in s {
        if h.base() >= inst.m() {
            return Err(MetricError::UnknownFacility(h.base()).into());
        }
        if let FacilityRef::Free { copy, .. } = h {
            params.offset(*copy)?;
        }
    }
    Ok((0..inst.n()).map(|j| s.iter().map(|h| params.client_dist(inst, j, h)).min().expect("nonempty")).sum())
}

/// Cost of a set of regular facilities; panics when empty.
pub fn cost_regular(inst: &MetricInstance, s: &[usize]) -> Q {
    assert!(!s.is_empty(), "cost of an empty set");
    (0..inst.n()).map(|j| s.iter().map(|&i| inst.cf(j, i)).min().expect("nonempty").clone()).sum()
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc * (n - t) as u128 / (t + 1) as u128;
    }
    acc
}

/// Calls `visit` on every k-subset of `0..m` in lexicographic order.
pub fn for_each_subset(m: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let Some(t) = (0..k).rev().find(|&t| idx[t] < t + m - k) else {
            return;
        };
        idx[t] += 1;
        for s in t + 1..k {
            idx[s] = idx[s - 1] + 1;
        }
    }
}

pub fn brute_force_kmedian(inst: &MetricInstance, k: usize, caps: &OracleCaps) -> Result<OracleResult, OracleError> {
    let m = inst.m();
    if k == 0 || k > m {
        return Err(OracleError::BadK { k, m });
    }
    let count = binomial(m, k);
    if count > caps.kmedian_subsets {
        return Err(OracleError::CapExceeded { count, cap: caps.kmedian_subsets });
    }
    let mut best: Option<(Q, Vec<usize>)> = None;
    let mut enumerated = 0u64;
    for_each_subset(m, k, |s| {
        enumerated += 1;
        let c = cost_regular(inst, s);
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, s.to_vec()));
        }
    });
    let (value, witness) = best.expect("k ≤ m gives at least one subset");
    Ok(OracleResult { value, witness, enumerated })
}

/// `min_{S≠∅} Σ_j d(j,S) + f|S|`.
pub fn brute_force_ufl(inst: &MetricInstance, f: &Q, caps: &OracleCaps) -> Result<OracleResult, OracleError> {
    let m = inst.m();
    if m == 0 {
        return Err(OracleError::BadK { k: 1, m });
    }
    if m as u32 > caps.ufl_log2 {
        return Err(OracleError::CapExceeded { count: 1u128 << m.min(127), cap: 1u128 << caps.ufl_log2 });
    }
    let mut best: Option<(Q, Vec<usize>)> = None;
    let mut enumerated = 0u64;
    let mut s = Vec::with_capacity(m);
    for mask in 1u64..(1u64 << m) {
        s.clear();
        s.extend((0..m).filter(|i| mask >> i & 1 == 1));
        enumerated += 1;
        let c = cost_regular(inst, &s) + f * q(s.len() as i64);
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, s.clone()));
        }
    }
    let (value, witness) = best.expect("m ≥ 1");
    Ok(OracleResult { value, witness, enumerated })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmpReport {
    /// Facilities `i` with `Σ_j[α_j − 2d(i,j)]⁺ > 2f`.
    pub dual_violations: Vec<usize>,
    /// `Σα = Σ_j d(j,S) + 2f|S|` holds exactly.
    pub payment_identity: bool,
    /// `Σα ≥ (2/factor)·Σ_j d(j,S) + 2f|S|`, the inequality form used for scaled runs.
    pub payment_lower_bound: bool,
    /// `cost(S) ≤ factor·(opt_UFL(f) − f|S|)`.
    pub cost_bound: bool,
    #[serde(with = "crate::num::serde_q")]
    pub cost: Q,
    #[serde(with = "crate::num::serde_q")]
    pub ufl_value: Q,
}

impl LmpReport {
    pub fn dual_feasible(&self) -> bool {
        self.dual_violations.is_empty()
    }
}

pub fn verify_lmp_certificate(
    inst: &MetricInstance,
    f: &Q,
    s: &[usize],
    alpha: &[Q],
    factor: &Q,
    caps: &OracleCaps,
) -> Result<LmpReport, OracleError> {
    assert_eq!(alpha.len(), inst.n(), "alpha must cover every client");
    let two = q(2);
    let two_f = f * &two;
    let dual_violations = (0..inst.m())
        .filter(|&i| {
            let pay: Q = (0..inst.n()).map(|j| pos(&alpha[j] - &two * inst.cf(j, i))).sum();
            pay > two_f
        })
        .collect();
    let c = if s.is_empty() {
        return Err(OracleError::EmptySet);
    } else {
        cost_regular(inst, s)
    };
    let sum_alpha: Q = alpha.iter().sum();
    let fs = f * q(s.len() as i64);
    let opening = &two_f * q(s.len() as i64);
    let payment_identity = sum_alpha == &c + &opening;
    let payment_lower_bound = if factor.is_zero() { false } else { sum_alpha >= &two / factor * &c + &opening };
    let ufl = brute_force_ufl(inst, f, caps)?;
    let cost_bound = c <= factor * (&ufl.value - &fs);
    Ok(LmpReport { dual_violations, payment_identity, payment_lower_bound, cost_bound, cost: c, ufl_value: ufl.value })
}

/// Convenience for tests: `opt_k` for every `k` in `1..=m`.
pub fn opt_profile(inst: &MetricInstance, caps: &OracleCaps) -> Result<Vec<Q>, OracleError> {
    (1..=inst.m()).map(|k| brute_force_kmedian(inst, k, caps).map(|r| r.value)).collect()
}
