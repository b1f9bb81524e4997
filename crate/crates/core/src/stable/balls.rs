//! Ball guesses around sampled clients and the dummy centers standing in for them.

use num_traits::{One, Zero};

use super::grid::{exp_at_least, grid_exponents, pow_i};
use super::StableError;
use crate::metric::MetricInstance;
use crate::num::Q;
use crate::scaled::ScaledMetric;

/// A ball: leader client and radius.
pub type Ball = (usize, Q);

/// Every subset of the distinct leaders, each leader combined with every grid radius in
/// `[ε³·S_p, S_p/ε³]`. `leaders` pairs a client with its distance to the working solution.
/// Refuses when the family would exceed `cap`, reporting the exact count.
pub fn ball_guesses(leaders: &[(usize, Q)], epsilon: &Q, cap: u128) -> Result<Vec<Vec<Ball>>, StableError> {
    let mut ls: Vec<(usize, Q)> = leaders.to_vec();
    ls.sort_by_key(|a| a.0);
    ls.dedup_by(|a, b| a.0 == b.0);
    let ranges: Vec<Option<(i64, i64)>> = ls.iter().map(|(_, s)| grid_exponents(s, epsilon)).collect();
    let counts: Vec<u128> = ranges.iter().map(|r| r.map_or(0, |(lo, hi)| (hi - lo + 1) as u128)).collect();
    // Σ over subsets of Π counts = Π (1 + count)
    let total = counts.iter().try_fold(1u128, |acc, c| acc.checked_mul(1 + c)).unwrap_or(u128::MAX);
    if total > cap {
        return Err(StableError::BallCap { estimate: total, cap });
    }
    let base = Q::one() + epsilon * epsilon * epsilon;
    let radii: Vec<Vec<Q>> = ranges
        .iter()
        .map(|r| match r {
            None => Vec::new(),
            Some((lo, hi)) => {
                let mut v = pow_i(&base, *lo);
                let mut out = Vec::with_capacity((hi - lo + 1) as usize);
                for _ in *lo..=*hi {
                    out.push(v.clone());
                    v *= &base;
                }
                out
            }
        })
        .collect();
    let mut family: Vec<Vec<Ball>> = vec![Vec::new()];
    for (t, (leader, _)) in ls.iter().enumerate() {
        let mut grown = Vec::with_capacity(family.len() * (1 + radii[t].len()));
        for fam in &family {
            grown.push(fam.clone());
            for r in &radii[t] {
                let mut f = fam.clone();
                f.push((*leader, r.clone()));
                grown.push(f);
            }
        }
        family = grown;
    }
    Ok(family)
}

/// A distinct nonempty ball content around a leader, with the smallest radius producing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Content {
    /// Scaled distance from the leader to the farthest facility inside.
    pub radius: i128,
    /// Facility indices, ascending.
    pub facilities: Vec<usize>,
}

/// Contents reachable by some grid radius for `leader` (client point id), whose distance
/// to the working solution is `s_p` (scaled).
pub fn reachable_contents(metric: &ScaledMetric, leader: usize, s_p: i128, epsilon: &Q) -> Vec<Content> {
    if s_p == 0 {
        return Vec::new();
    }
    let s = metric.to_q(s_p);
    let e3 = epsilon * epsilon * epsilon;
    let base = Q::one() + &e3;
    let lo = &s * &e3;
    let hi = &s / &e3;
    let mut dists: Vec<i128> = (0..metric.m()).map(|i| metric.d(leader, metric.fac(i))).collect();
    dists.sort_unstable();
    dists.dedup();
    let mut out = Vec::new();
    for (t, &r) in dists.iter().enumerate() {
        let rq = metric.to_q(r);
        let from = if rq > lo { rq } else { lo.clone() };
        let g = pow_i(&base, exp_at_least(&base, &from));
        let below_next = dists.get(t + 1).is_none_or(|&nx| g < metric.to_q(nx));
        if g <= hi && below_next {
            let facilities = (0..metric.m()).filter(|&i| metric.d(leader, metric.fac(i)) <= r).collect();
            out.push(Content { radius: r, facilities });
        }
    }
    out
}

/// Extended instance with one dummy facility per ball, appended after the regular ones:
/// `d(δ, x) = ρ + d(ℓ, x)` for every point `x`, `ρ₁ + d(ℓ₁, ℓ₂) + ρ₂` between dummies.
/// Returns the instance and the dummies' facility indices.
pub fn make_dummy_centers(inst: &MetricInstance, balls: &[Ball]) -> Result<(MetricInstance, Vec<usize>), StableError> {
    let (n, m) = (inst.n(), inst.m());
    let old = inst.points();
    if let Some((l, _)) = balls.iter().find(|(l, _)| *l >= n) {
        return Err(StableError::Guess(format!("ball leader {l} is not a client")));
    }
    let t = balls.len();
    let mut table = inst.table();
    for (a, row) in table.iter_mut().enumerate() {
        row.extend(balls.iter().map(|(l, r)| r + inst.d(*l, a)));
    }
    for (a, (l, r)) in balls.iter().enumerate() {
        let mut row: Vec<Q> = (0..old).map(|x| r + inst.d(*l, x)).collect();
        row.extend(balls.iter().enumerate().map(
            |(b, (l2, r2))| {
                if a == b {
                    Q::zero()
                } else {
                    r + inst.d(*l, *l2) + r2
                }
            },
        ));
        table.push(row);
    }
    // dummies go after the regular facilities; clients and facilities keep their indices
    let ext = MetricInstance::new(n, m + t, table)?;
    Ok((ext, (m..m + t).collect()))
}
