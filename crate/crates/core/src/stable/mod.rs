//! k-median on stable instances: local search, D-sampling, ball guesses with dummy
//! centers, removal guesses, and the reassignment stage, repeated over restarts.

mod balls;
mod grid;
mod main;
mod removal;
mod search;

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use balls::{ball_guesses, make_dummy_centers, reachable_contents, Ball, Content};
pub use grid::{exp_at_least, exp_at_most, grid_exponents, pow_i};
pub use main::{run_main, MainConfig, MainSolution, MainSource};
pub use removal::{
    cheap_rem, exp_rem, exp_rem_iterations, guess_r0, nearest, CheapCaps, CheapEntry, CheapOutput, Sizes,
};
pub use search::{
    d_sample, d_sample_scaled, local_search, local_search_scaled, s_star, LocalSearchMode, LocalSearchOutcome,
};

use crate::merge::MergeError;
use crate::metric::{MetricError, MetricInstance};
use crate::num::Q;
use crate::scaled::{ScaleError, ScaledMetric};
use crate::submodular::{
    extract_k_centers, maximize_f, Cluster, Element, PartitionMatroid, SubmodularContext, SubmodularError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StableError {
    #[error("k = {k} is not in 1..={m}")]
    BadK { k: usize, m: usize },
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("sizes {sizes:?} exceed twice the {centers} available centers")]
    Sizes { sizes: Sizes, centers: usize },
    #[error("ball family has {estimate} members, cap is {cap}")]
    BallCap { estimate: u128, cap: u128 },
    #[error("{found} expensive clusters, cap is {cap}")]
    R0Cap { found: usize, cap: usize },
    #[error("bad injected guess: {0}")]
    Guess(String),
    #[error(transparent)]
    Submodular(#[from] SubmodularError),
    #[error(transparent)]
    Merge(#[from] MergeError),
}

/// Limits on every enumeration. Hitting one marks the result partial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StableCaps {
    /// Draws per restart; the theory count is far larger.
    pub sample_size: usize,
    /// Ball families per restart.
    pub ball_families: usize,
    /// Outer iterations of the costly-removal sampler.
    pub exp_outer: usize,
    /// Cheap-removal entries per call.
    pub cheap_entries: usize,
    /// Recursive calls per cheap-removal search.
    pub cheap_calls: u64,
    /// Expensive clusters eligible for the subset guess.
    pub r0_clusters: usize,
    /// Guess tuples evaluated per restart.
    pub candidates: usize,
    /// `None` means `⌈ln n⌉`, at least one.
    pub restarts: Option<usize>,
    pub local_search: LocalSearchMode,
}

impl Default for StableCaps {
    fn default() -> Self {
        StableCaps {
            sample_size: 4,
            ball_families: 400,
            exp_outer: 8,
            cheap_entries: 64,
            cheap_calls: 100_000,
            r0_clusters: 10,
            candidates: 2000,
            restarts: None,
            local_search: LocalSearchMode::Strict,
        }
    }
}

/// Guesses that replace the corresponding enumeration. Facility and client indices are
/// those of the input instance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleGuesses {
    pub local: Option<Vec<usize>>,
    pub sample: Option<Vec<usize>>,
    #[serde(with = "opt_balls")]
    pub balls: Option<Vec<Ball>>,
    pub removed: Option<Vec<usize>>,
    pub sizes: Option<Sizes>,
    /// `(cheap removal, replacement)` facility pairs.
    pub moves: Option<Vec<(usize, usize)>>,
    pub r0: Option<Vec<usize>>,
}

mod opt_balls {
    use super::Ball;
    use crate::num::{fmt_q, parse_q};
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<Ball>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|bs| bs.iter().map(|(l, r)| (*l, fmt_q(r))).collect::<Vec<_>>()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Ball>>, D::Error> {
        let raw: Option<Vec<(usize, String)>> = Option::deserialize(d)?;
        raw.map(|bs| bs.into_iter().map(|(l, r)| parse_q(&r).map(|q| (l, q)).map_err(D::Error::custom)).collect())
            .transpose()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StableConfig {
    pub caps: StableCaps,
    pub parallel: bool,
    pub oracle: Option<OracleGuesses>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallRecord {
    pub leader: usize,
    /// Distance from the leader to the farthest facility of the ball, `"p/q"`.
    pub radius: String,
    pub facilities: Vec<usize>,
}

/// The guesses that produced a candidate, in input indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuessRecord {
    pub restart: usize,
    pub sample: Vec<usize>,
    pub balls: Vec<BallRecord>,
    pub removed: Vec<usize>,
    pub sizes: Sizes,
    pub moves: Vec<(usize, usize)>,
    pub r0: Vec<usize>,
    pub closed: Vec<usize>,
    pub added: Vec<usize>,
    /// Reassignment objective at the chosen added centers, `"p/q"`.
    pub objective: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableSolution {
    pub centers: Vec<usize>,
    #[serde(with = "crate::num::serde_q")]
    pub cost: Q,
    pub local_search: Vec<usize>,
    #[serde(with = "crate::num::serde_q")]
    pub local_cost: Q,
    /// `None` when the local search solution itself won.
    pub winner: Option<GuessRecord>,
    pub evaluated: u64,
    pub partial: bool,
    /// Names of the caps that cut an enumeration short.
    pub truncated: Vec<String>,
}

/// One ball family with its extended metric.
struct Family {
    balls: Vec<(usize, Content)>,
    metric: Arc<ScaledMetric>,
    lambda: Vec<usize>,
    matroid: PartitionMatroid,
}

struct Plan {
    family: usize,
    removed: Vec<usize>,
    sizes: Sizes,
    entry: CheapEntry,
}

struct Found {
    cost: i128,
    centers: Vec<usize>,
    r0: Vec<usize>,
    closed: Vec<usize>,
    added: Vec<usize>,
    objective: i128,
}

struct Run<'a> {
    base: &'a ScaledMetric,
    k: usize,
    epsilon: &'a Q,
    caps: &'a StableCaps,
    oracle: Option<&'a OracleGuesses>,
    /// Working solution as point ids.
    s: Vec<usize>,
    s_cost: i128,
    contents: Vec<Option<Vec<Content>>>,
    truncated: BTreeSet<String>,
}

fn better(a: &(i128, Vec<usize>), b: &(i128, Vec<usize>)) -> bool {
    a < b
}

impl Run<'_> {
    fn cut(&mut self, what: &str) {
        self.truncated.insert(what.to_string());
    }

    fn contents_of(&mut self, leader: usize) -> &[Content] {
        if self.contents[leader].is_none() {
            let s_p = self.base.dist_to(leader, &self.s).expect("k ≥ 1");
            self.contents[leader] = Some(reachable_contents(self.base, leader, s_p, self.epsilon));
        }
        self.contents[leader].as_deref().expect("filled above")
    }

    fn family(&self, balls: Vec<(usize, Content)>) -> Family {
        let rho: Vec<(usize, i128)> = balls.iter().map(|(l, c)| (*l, c.radius)).collect();
        let (ext, lambda) = self.base.with_dummies(&rho);
        let ground = balls
            .iter()
            .enumerate()
            .flat_map(|(b, (_, c))| c.facilities.iter().map(move |&i| Element { part: b, point: self.base.fac(i) }))
            .collect();
        Family { matroid: PartitionMatroid::new(balls.len(), ground), balls, metric: Arc::new(ext), lambda }
    }

    /// Subsets of the distinct leaders, smaller first, each leader with every reachable content.
    fn families(&mut self, sample: &[usize]) -> Vec<Family> {
        if let Some(bs) = self.oracle.and_then(|o| o.balls.as_ref()) {
            let balls = bs
                .iter()
                .map(|(l, r)| {
                    let radius = self.base.from_q(r).expect("checked on entry");
                    let facilities =
                        (0..self.base.m()).filter(|&i| self.base.d(*l, self.base.fac(i)) <= radius).collect();
                    (*l, Content { radius, facilities })
                })
                .collect();
            return vec![self.family(balls)];
        }
        let mut leaders: Vec<usize> = sample.to_vec();
        leaders.sort_unstable();
        leaders.dedup();
        leaders.retain(|&l| !self.contents_of(l).is_empty());
        let cap = self.caps.ball_families;
        let mut out: Vec<Vec<(usize, Content)>> = Vec::new();
        'sizes: for q in 0..=leaders.len().min(self.k) {
            let mut subsets = Vec::new();
            crate::oracle::for_each_subset(leaders.len(), q, |s| subsets.push(s.to_vec()));
            for sub in subsets {
                let opts: Vec<Vec<Content>> = sub.iter().map(|&t| self.contents_of(leaders[t]).to_vec()).collect();
                let mut idx = vec![0usize; q];
                loop {
                    if out.len() >= cap {
                        self.cut("ball_families");
                        break 'sizes;
                    }
                    out.push(sub.iter().enumerate().map(|(j, &t)| (leaders[t], opts[j][idx[j]].clone())).collect());
                    // odometer over the contents
                    let mut done = true;
                    let mut j = q;
                    while j > 0 {
                        j -= 1;
                        idx[j] += 1;
                        if idx[j] < opts[j].len() {
                            done = false;
                            break;
                        }
                        idx[j] = 0;
                    }
                    if done {
                        break;
                    }
                }
            }
        }
        out.into_iter().map(|b| self.family(b)).collect()
    }

    fn plans(&mut self, families: &[Family], rng: &mut ChaCha8Rng) -> Result<Vec<Plan>, StableError> {
        let mut plans = Vec::new();
        let n = self.base.n();
        for (fi, fam) in families.iter().enumerate() {
            let nb = fam.balls.len();
            let removals = match self.oracle.and_then(|o| o.removed.as_ref()) {
                Some(q) => vec![q.iter().map(|&i| self.base.fac(i)).collect()],
                None => {
                    let outer = exp_rem_iterations(n, self.epsilon, nb, self.caps.exp_outer);
                    exp_rem(&fam.metric, &self.s, &fam.lambda, nb, outer, rng)
                }
            };
            for removed in removals {
                if removed.len() > nb {
                    continue;
                }
                let left: Vec<usize> = self.s.iter().copied().filter(|c| !removed.contains(c)).collect();
                let free = nb - removed.len();
                let sizes: Vec<Sizes> = match self.oracle.and_then(|o| o.sizes) {
                    Some(s) => vec![s],
                    None => (0..=free).flat_map(|u| (0..=u).map(move |x| Sizes { u, r: free - u, x })).collect(),
                };
                for sz in sizes {
                    if sz.u + sz.r != free {
                        return Err(StableError::Guess(format!("sizes {sz:?} do not add up to {free}")));
                    }
                    let entries = match self.oracle.and_then(|o| o.moves.as_ref()) {
                        Some(mv) => {
                            let mut moves: Vec<(usize, usize)> =
                                mv.iter().map(|&(a, b)| (self.base.fac(a), self.base.fac(b))).collect();
                            moves.sort_unstable();
                            vec![CheapEntry { moves }]
                        }
                        None => {
                            if sz.total() > 2 * left.len() {
                                continue;
                            }
                            let caps = CheapCaps { entries: self.caps.cheap_entries, calls: self.caps.cheap_calls };
                            let out = cheap_rem(&fam.metric, &left, &fam.lambda, sz, caps)?;
                            if out.truncated {
                                self.cut("cheap_rem");
                            }
                            out.entries
                        }
                    };
                    for entry in entries {
                        if plans.len() >= self.caps.candidates {
                            self.cut("candidates");
                            return Ok(plans);
                        }
                        plans.push(Plan { family: fi, removed: removed.clone(), sizes: sz, entry });
                    }
                }
            }
        }
        Ok(plans)
    }

    /// Best completion of one guess tuple over the expensive-cluster subsets.
    fn evaluate(&self, fam: &Family, plan: &Plan) -> Result<Option<Found>, StableError> {
        let m = &*fam.metric;
        let n = m.n();
        let left: Vec<usize> = self.s.iter().copied().filter(|c| !plan.removed.contains(c)).collect();
        let cheap = plan.entry.removed();
        if cheap.iter().any(|c| !left.contains(c))
            || plan.entry.moves.iter().any(|(_, t)| !left.contains(t) || cheap.contains(t))
        {
            return Ok(None);
        }
        let all: Vec<usize> = left.iter().chain(&fam.lambda).copied().collect();
        let owner = nearest(m, &all);
        let mu: Vec<usize> = owner.iter().map(|&c| plan.entry.target(c).unwrap_or(c)).collect();
        let working: Vec<usize> = left.iter().copied().filter(|c| !cheap.contains(c)).collect();
        let r = plan.sizes.r;
        let rm = r.max(1) as i128;
        let (en, ed) = (
            i128::try_from(self.epsilon.numer()).map_err(|_| ScaleError::Overflow)?,
            i128::try_from(self.epsilon.denom()).map_err(|_| ScaleError::Overflow)?,
        );
        struct View {
            center: usize,
            members: Vec<usize>,
            core: Vec<usize>,
            cost: i128,
            plain: bool,
        }
        let views: Vec<View> = working
            .iter()
            .map(|&c| {
                let members: Vec<usize> = (0..n).filter(|&p| mu[p] == c).collect();
                let plain = members.iter().all(|&p| owner[p] == c);
                let size = members.len() as i128;
                // core: d(p,c) ≤ ε·cost(S)/(|R|·|C_c|)
                let core =
                    members.iter().copied().filter(|&p| m.d(p, c) * rm * size * ed <= en * self.s_cost).collect();
                let cost = members.iter().map(|&p| m.d(p, c)).sum();
                View { center: c, members, core, cost, plain }
            })
            .collect();
        let r0_family = if r == 0 {
            vec![Vec::new()]
        } else if let Some(r0) = self.oracle.and_then(|o| o.r0.as_ref()) {
            vec![r0.iter().map(|&i| self.base.fac(i)).collect()]
        } else {
            // threshold ε²·(cost(S)/5)/|R| with cost(S)/5 standing in for the optimum
            let costs: Vec<(usize, Q)> = views.iter().filter(|v| v.plain).map(|v| (v.center, m.to_q(v.cost))).collect();
            let threshold = self.epsilon * self.epsilon * m.to_q(self.s_cost) / Q::from_integer((5 * r).into());
            guess_r0(&costs, &threshold, r, self.caps.r0_clusters)?
        };
        let mut best: Option<Found> = None;
        for r0 in r0_family {
            if r0.len() > r || r0.iter().any(|c| !working.contains(c)) {
                continue;
            }
            let assign: Vec<Option<usize>> = (0..n).map(|p| (!r0.contains(&mu[p])).then_some(mu[p])).collect();
            let clusters: Vec<Cluster> = views
                .iter()
                .filter(|v| v.plain && !r0.contains(&v.center))
                .filter(|v| (v.core.len() as i128) * ed >= (ed - en) * v.members.len() as i128)
                .map(|v| Cluster { center: v.center, members: v.members.clone(), core: v.core.clone() })
                .collect();
            let ctx =
                match SubmodularContext::new(fam.metric.clone(), fam.lambda.clone(), assign, clusters, r - r0.len()) {
                    Ok(c) => c,
                    Err(SubmodularError::Infeasible { .. } | SubmodularError::Unbounded) => continue,
                    Err(e) => return Err(e.into()),
                };
            let x = maximize_f(&ctx, &fam.matroid);
            let pts: Vec<usize> = x.iter().map(|e| e.point).collect();
            let g = ctx.eval_g(&pts);
            let centers = extract_k_centers(m, &fam.matroid, &x, &g.closed, &r0, &working, self.k)?;
            let cpts: Vec<usize> = centers.iter().map(|&i| self.base.fac(i)).collect();
            let cost = self.base.cost(&cpts).expect("k ≥ 1");
            let cand = Found { cost, centers, r0, closed: g.closed, added: pts, objective: g.value };
            if best.as_ref().is_none_or(|b| better(&(cand.cost, cand.centers.clone()), &(b.cost, b.centers.clone())))
            {
                best = Some(cand);
            }
        }
        Ok(best)
    }
}

fn check_oracle(base: &ScaledMetric, k: usize, o: &OracleGuesses) -> Result<(), StableError> {
    let (n, m) = (base.n(), base.m());
    let bad = |what: &str| Err(StableError::Guess(what.to_string()));
    if let Some(l) = &o.local {
        if l.len() != k || l.iter().any(|&i| i >= m) || l.iter().collect::<BTreeSet<_>>().len() != k {
            return bad("local solution must be k distinct facilities");
        }
    }
    if o.sample.iter().flatten().any(|&p| p >= n) {
        return bad("sample holds a non-client");
    }
    for (l, r) in o.balls.iter().flatten() {
        if *l >= n || base.from_q(r).is_none() {
            return bad("ball leader must be a client and its radius a multiple of the distance unit");
        }
    }
    let fac = |v: &Option<Vec<usize>>| v.iter().flatten().all(|&i| i < m);
    if !fac(&o.removed) || !fac(&o.r0) || o.moves.iter().flatten().any(|&(a, b)| a >= m || b >= m) {
        return bad("facility index out of range");
    }
    Ok(())
}

fn ids(base: &ScaledMetric, pts: &[usize]) -> Vec<usize> {
    pts.iter().map(|&p| p - base.n()).collect()
}

/// Runs the pipeline `restarts` times and returns the cheapest candidate with exactly
/// `k` centers. Candidates are compared by `(cost, sorted centers)`, then by order of
/// generation, so serial and parallel runs agree.
pub fn run_stable(
    inst: &MetricInstance,
    k: usize,
    epsilon: &Q,
    seed: u64,
    config: &StableConfig,
) -> Result<StableSolution, StableError> {
    let base = ScaledMetric::new(inst)?;
    if k == 0 || k > base.m() {
        return Err(StableError::BadK { k, m: base.m() });
    }
    let caps = &config.caps;
    let oracle = config.oracle.as_ref();
    if let Some(o) = oracle {
        check_oracle(&base, k, o)?;
    }
    let local: Vec<usize> = match oracle.and_then(|o| o.local.clone()) {
        Some(mut l) => {
            l.sort_unstable();
            l
        }
        None => local_search_scaled(&base, k, epsilon, caps.local_search)?.centers,
    };
    let s: Vec<usize> = local.iter().map(|&i| base.fac(i)).collect();
    let s_cost = base.cost(&s).expect("k ≥ 1");
    let mut run = Run {
        base: &base,
        k,
        epsilon,
        caps,
        oracle,
        s,
        s_cost,
        contents: vec![None; base.n()],
        truncated: BTreeSet::new(),
    };
    let restarts = caps.restarts.unwrap_or_else(|| (base.n().max(2) as f64).ln().ceil() as usize).max(1);
    let sample_size = (s_star(base.n(), epsilon).ceil() as usize).min(caps.sample_size);
    let mut best: (i128, Vec<usize>) = (s_cost, local.clone());
    let mut winner: Option<GuessRecord> = None;
    let mut evaluated = 0u64;
    for restart in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let sample = match oracle.and_then(|o| o.sample.clone()) {
            Some(w) => w,
            None => d_sample_scaled(&base, &run.s, sample_size, &mut rng),
        };
        let families = run.families(&sample);
        let plans = run.plans(&families, &mut rng)?;
        let eval = |sp: &Plan| run.evaluate(&families[sp.family], sp);
        let results: Vec<Result<Option<Found>, StableError>> =
            if config.parallel { plans.par_iter().map(eval).collect() } else { plans.iter().map(eval).collect() };
        for (sp, res) in plans.iter().zip(results) {
            evaluated += 1;
            let found = match res {
                Ok(Some(f)) => f,
                Ok(None) => continue,
                Err(StableError::R0Cap { .. }) => {
                    run.cut("r0_clusters");
                    continue;
                }
                Err(e) => return Err(e),
            };
            let key = (found.cost, found.centers.clone());
            if better(&key, &best) {
                let fam = &families[sp.family];
                winner = Some(GuessRecord {
                    restart,
                    sample: sample.clone(),
                    balls: fam
                        .balls
                        .iter()
                        .map(|(l, c)| BallRecord {
                            leader: *l,
                            radius: crate::num::fmt_q(&base.to_q(c.radius)),
                            facilities: c.facilities.clone(),
                        })
                        .collect(),
                    removed: ids(&base, &sp.removed),
                    sizes: sp.sizes,
                    moves: sp.entry.moves.iter().map(|&(a, b)| (a - base.n(), b - base.n())).collect(),
                    r0: ids(&base, &found.r0),
                    closed: ids(&base, &found.closed),
                    added: ids(&base, &found.added),
                    objective: crate::num::fmt_q(&base.to_q(found.objective)),
                });
                best = key;
            }
        }
    }
    let truncated: Vec<String> = run.truncated.into_iter().collect();
    Ok(StableSolution {
        cost: base.to_q(best.0),
        centers: best.1,
        local_cost: base.to_q(s_cost),
        local_search: local,
        winner,
        evaluated,
        partial: !truncated.is_empty(),
        truncated,
    })
}
