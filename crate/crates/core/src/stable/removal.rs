//! Guessing which centers of the working solution to remove: costly ones by sampling,
//! cheap ones by the branching search, and expensive non-concentrated clusters by subsets.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::StableError;
use crate::num::Q;
use crate::oracle::for_each_subset;
use crate::scaled::ScaledMetric;

/// Guessed counts of cheap removals, other removals and added centers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sizes {
    pub u: usize,
    pub r: usize,
    pub x: usize,
}

impl Sizes {
    pub fn total(&self) -> usize {
        self.u + self.r + self.x
    }
}

/// Nearest center of `centers` for every client, ties to the lower point id.
pub fn nearest(metric: &ScaledMetric, centers: &[usize]) -> Vec<usize> {
    (0..metric.n())
        .map(|p| *centers.iter().min_by_key(|&&c| (metric.d(p, c), c)).expect("nonempty center set"))
        .collect()
}

/// Outer iterations, each building one removal set over `s0_bound + 1` inner iterations.
/// An inner iteration flips a fair coin and, on heads, removes a center of `working`
/// drawn by cluster cost in `working ∪ lambda` minus what was already removed. Returns
/// the distinct sets, each sorted, in order of first appearance.
pub fn exp_rem<R: Rng>(
    metric: &ScaledMetric,
    working: &[usize],
    lambda: &[usize],
    s0_bound: usize,
    outer: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for _ in 0..outer {
        let mut removed: BTreeSet<usize> = BTreeSet::new();
        for _ in 0..=s0_bound {
            if !rng.gen_bool(0.5) {
                continue;
            }
            let left: Vec<usize> = working.iter().copied().filter(|c| !removed.contains(c)).collect();
            if left.is_empty() {
                continue;
            }
            let all: Vec<usize> = left.iter().chain(lambda).copied().collect();
            let owner = nearest(metric, &all);
            let costs: Vec<i128> = left
                .iter()
                .map(|&c| (0..metric.n()).filter(|&p| owner[p] == c).map(|p| metric.d(p, c)).sum())
                .collect();
            let total: i128 = costs.iter().sum();
            if total == 0 {
                continue;
            }
            let mut r = rng.gen_range(0..total);
            for (t, &w) in costs.iter().enumerate() {
                if r < w {
                    removed.insert(left[t]);
                    break;
                }
                r -= w;
            }
        }
        let q: Vec<usize> = removed.into_iter().collect();
        if !out.contains(&q) {
            out.push(q);
        }
    }
    out
}

/// Default outer iteration count `(8/ε)^{s0+1}·ln n`, at most `cap`.
pub fn exp_rem_iterations(n: usize, epsilon: &Q, s0_bound: usize, cap: usize) -> usize {
    let e = crate::num::to_f64(epsilon);
    let theory = (8.0 / e).powi(s0_bound as i32 + 1) * (n.max(2) as f64).ln();
    if theory >= cap as f64 {
        cap
    } else {
        theory.ceil() as usize
    }
}

/// A cheap-removal guess: removed centers with the center each one's clients move to.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CheapEntry {
    /// `(removed center, its replacement)`, sorted by removed center; point ids.
    pub moves: Vec<(usize, usize)>,
}

impl CheapEntry {
    pub fn removed(&self) -> Vec<usize> {
        self.moves.iter().map(|m| m.0).collect()
    }

    pub fn target(&self, c: usize) -> Option<usize> {
        self.moves.iter().find(|m| m.0 == c).map(|m| m.1)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CheapOutput {
    pub entries: Vec<CheapEntry>,
    pub calls: u64,
    pub max_depth: usize,
    /// Stopped at the entry or call cap.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheapCaps {
    pub entries: usize,
    pub calls: u64,
}

struct Cheap<'a> {
    metric: &'a ScaledMetric,
    centers: &'a [usize],
    /// Clients of each center in `centers ∪ Λ`, indexed like `centers`.
    members: Vec<Vec<usize>>,
    sizes: Sizes,
    caps: CheapCaps,
    out: CheapOutput,
    seen: BTreeSet<CheapEntry>,
}

type Set = BTreeSet<usize>;

impl Cheap<'_> {
    fn emit(&mut self, moves: &[(usize, usize)]) {
        let mut moves = moves.to_vec();
        moves.sort_unstable();
        let e = CheapEntry { moves };
        if self.seen.insert(e.clone()) {
            if self.out.entries.len() >= self.caps.entries {
                self.out.truncated = true;
                return;
            }
            self.out.entries.push(e);
        }
    }

    /// Closest center to `c` among `pool`, ties to the lower id.
    fn closest(&self, c: usize, pool: impl Iterator<Item = usize>) -> Option<usize> {
        pool.min_by_key(|&x| (self.metric.d(c, x), x))
    }

    fn exhaustive(&mut self) {
        let cs = self.centers;
        let s = self.sizes;
        for_each_subset(cs.len(), s.u, |ui| {
            let ut: Vec<usize> = ui.iter().map(|&i| cs[i]).collect();
            let rest: Vec<usize> = cs.iter().copied().filter(|c| !ut.contains(c)).collect();
            for_each_subset(rest.len(), s.r, |ri| {
                let rt: Vec<usize> = ri.iter().map(|&i| rest[i]).collect();
                let moves: Option<Vec<(usize, usize)>> = ut
                    .iter()
                    .map(|&c| {
                        self.closest(c, cs.iter().copied().filter(|x| !ut.contains(x) && !rt.contains(x)))
                            .map(|nx| (c, nx))
                    })
                    .collect();
                if let Some(m) = moves {
                    self.emit(&m);
                }
            });
        });
    }

    fn rec(&mut self, u: &Set, r: &Set, x: &Set, nn: &Set, ut: &[(usize, usize)], depth: usize) {
        self.out.calls += 1;
        self.out.max_depth = self.out.max_depth.max(depth);
        if self.out.calls > self.caps.calls {
            self.out.truncated = true;
            return;
        }
        let s = self.sizes;
        if ut.len() == s.u {
            self.emit(ut);
            return;
        }
        let in_ut = |c: usize| ut.iter().any(|m| m.0 == c);
        let mut pick: Option<(i128, usize, usize)> = None;
        for (t, &c) in self.centers.iter().enumerate() {
            if r.contains(&c) || x.contains(&c) || nn.contains(&c) || in_ut(c) {
                continue;
            }
            let pool =
                self.centers.iter().copied().filter(|&y| y != c && !u.contains(&y) && !r.contains(&y) && !in_ut(y));
            let Some(nx) = self.closest(c, pool) else {
                continue;
            };
            let cost: i128 = self.members[t].iter().map(|&p| self.metric.d(p, nx)).sum();
            if pick.is_none_or(|b| (cost, c) < (b.0, b.1)) {
                pick = Some((cost, c, nx));
            }
        }
        // nothing left to choose on this branch
        let Some((_, c, nx)) = pick else {
            return;
        };
        let with = |set: &Set, e: usize| {
            let mut s2 = set.clone();
            s2.insert(e);
            s2
        };
        let mut moved = ut.to_vec();
        moved.push((c, nx));
        if !u.contains(&c) && x.len() < s.x {
            self.rec(u, r, &with(x, c), nn, ut, depth + 1);
        }
        if !u.contains(&c) && r.len() < s.r {
            self.rec(u, &with(r, c), x, nn, ut, depth + 1);
        }
        if u.len() + r.len() == s.u + s.r || nn.contains(&nx) {
            self.rec(u, r, x, &with(nn, nx), &moved, depth + 1);
        } else {
            if r.len() < s.r {
                self.rec(u, &with(r, nx), x, nn, ut, depth + 1);
            }
            if u.len() < s.u {
                self.rec(&with(u, nx), r, x, nn, ut, depth + 1);
            }
            self.rec(u, r, x, &with(nn, nx), &moved, depth + 1);
        }
    }
}

/// Cheap-removal guesses for the working centers `centers` (point ids, the solution
/// after removing the costly guess) with dummies `lambda`.
pub fn cheap_rem(
    metric: &ScaledMetric,
    centers: &[usize],
    lambda: &[usize],
    sizes: Sizes,
    caps: CheapCaps,
) -> Result<CheapOutput, StableError> {
    let l = sizes.total();
    if l > 2 * centers.len() {
        return Err(StableError::Sizes { sizes, centers: centers.len() });
    }
    let mut out = CheapOutput::default();
    if centers.is_empty() {
        if sizes.u == 0 {
            out.entries.push(CheapEntry { moves: Vec::new() });
        }
        return Ok(out);
    }
    let all: Vec<usize> = centers.iter().chain(lambda).copied().collect();
    let owner = nearest(metric, &all);
    let members = centers.iter().map(|&c| (0..metric.n()).filter(|&p| owner[p] == c).collect()).collect();
    let mut st = Cheap { metric, centers, members, sizes, caps, out, seen: BTreeSet::new() };
    st.out.calls = 1;
    if centers.len() <= 4 * l {
        st.exhaustive();
    } else {
        st.out.calls = 0;
        st.rec(&Set::new(), &Set::new(), &Set::new(), &Set::new(), &[], 0);
    }
    Ok(st.out)
}

/// Subsets of at most `max_size` of the clusters whose cost reaches `threshold`, smaller
/// subsets first. `clusters` pairs a center with its cluster cost.
pub fn guess_r0(
    clusters: &[(usize, Q)],
    threshold: &Q,
    max_size: usize,
    cap: usize,
) -> Result<Vec<Vec<usize>>, StableError> {
    let heavy: Vec<usize> = clusters.iter().filter(|(_, c)| c >= threshold).map(|(id, _)| *id).collect();
    if heavy.len() > cap {
        return Err(StableError::R0Cap { found: heavy.len(), cap });
    }
    let mut out = Vec::new();
    for size in 0..=max_size.min(heavy.len()) {
        for_each_subset(heavy.len(), size, |s| out.push(s.iter().map(|&i| heavy[i]).collect()));
    }
    Ok(out)
}
