//! Instances, free facility copies, parameter sets, normalization and generators.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::num::{ceil_int, fmt_q, parse_q, pos, q, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("distance table is {rows}x{cols}, expected {expect}x{expect}")]
    Shape { rows: usize, cols: usize, expect: usize },
    #[error("negative distance at ({0}, {1})")]
    Negative(usize, usize),
    #[error("M guess is zero but the instance has a nonzero client-facility distance")]
    DegenerateGuess,
    #[error("free copy {0} has no offset in the parameter set")]
    MissingOffset(u32),
    #[error("facility {0} out of range")]
    UnknownFacility(usize),
    #[error("client {0} out of range")]
    UnknownClient(usize),
    #[error("bad parameter: {0}")]
    Param(String),
    #[error("bad instance file: {0}")]
    Format(String),
}

/// Clients are points `0..n`, facilities are points `n..n+m`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricInstance {
    n: usize,
    m: usize,
    dist: Vec<Q>,
    pub labels: BTreeMap<String, String>,
}

impl MetricInstance {
    pub fn new(n: usize, m: usize, table: Vec<Vec<Q>>) -> Result<Self, MetricError> {
        let size = n + m;
        if table.len() != size || table.iter().any(|r| r.len() != size) {
            return Err(MetricError::Shape {
                rows: table.len(),
                cols: table.first().map_or(0, |r| r.len()),
                expect: size,
            });
        }
        let mut dist = Vec::with_capacity(size * size);
        for (a, row) in table.into_iter().enumerate() {
            for (b, x) in row.into_iter().enumerate() {
                if x.is_negative() {
                    return Err(MetricError::Negative(a, b));
                }
                dist.push(x);
            }
        }
        Ok(MetricInstance { n, m, dist, labels: BTreeMap::new() })
    }

    fn from_flat(n: usize, m: usize, dist: Vec<Q>) -> Self {
        debug_assert_eq!(dist.len(), (n + m) * (n + m));
        MetricInstance { n, m, dist, labels: BTreeMap::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn points(&self) -> usize {
        self.n + self.m
    }

    /// Raw point-to-point distance.
    pub fn d(&self, a: usize, b: usize) -> &Q {
        &self.dist[a * (self.n + self.m) + b]
    }

    /// Client `j` to regular facility `i`.
    pub fn cf(&self, j: usize, i: usize) -> &Q {
        self.d(j, self.n + i)
    }

    pub fn ff(&self, i: usize, i2: usize) -> &Q {
        self.d(self.n + i, self.n + i2)
    }

    pub fn cc(&self, j: usize, j2: usize) -> &Q {
        self.d(j, j2)
    }

    pub fn table(&self) -> Vec<Vec<Q>> {
        let p = self.points();
        (0..p).map(|a| (0..p).map(|b| self.d(a, b).clone()).collect()).collect()
    }

    /// Largest client-facility distance.
    pub fn max_cf(&self) -> Q {
        let mut best = Q::zero();
        for j in 0..self.n {
            for i in 0..self.m {
                if *self.cf(j, i) > best {
                    best = self.cf(j, i).clone();
                }
            }
        }
        best
    }

    /// Largest distance between any two points.
    pub fn max_pairwise(&self) -> Q {
        self.dist.iter().max().cloned().unwrap_or_else(Q::zero)
    }

    pub fn distinct_cf(&self) -> Vec<Q> {
        let mut set = BTreeSet::new();
        for j in 0..self.n {
            for i in 0..self.m {
                set.insert(self.cf(j, i).clone());
            }
        }
        set.into_iter().collect()
    }

    pub fn nearest_facility_cost(&self) -> Q {
        (0..self.n).map(|j| (0..self.m).map(|i| self.cf(j, i)).min().cloned().unwrap_or_default()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceFile::from(self)).expect("instance serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, MetricError> {
        let file: InstanceFile = serde_json::from_str(s).map_err(|e| MetricError::Format(e.to_string()))?;
        file.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    m: usize,
    dist: Vec<Vec<String>>,
    #[serde(default)]
    labels: BTreeMap<String, String>,
}

impl From<&MetricInstance> for InstanceFile {
    fn from(inst: &MetricInstance) -> Self {
        InstanceFile {
            n: inst.n,
            m: inst.m,
            dist: inst.table().iter().map(|r| r.iter().map(fmt_q).collect()).collect(),
            labels: inst.labels.clone(),
        }
    }
}

impl TryFrom<InstanceFile> for MetricInstance {
    type Error = MetricError;

    fn try_from(f: InstanceFile) -> Result<Self, MetricError> {
        let table = f
            .dist
            .iter()
            .map(|r| {
                r.iter()
                    .map(|s| parse_q(s).map_err(|e| MetricError::Format(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut inst = MetricInstance::new(f.n, f.m, table)?;
        inst.labels = f.labels;
        Ok(inst)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MetricViolation {
    NonZeroDiagonal { point: usize },
    Asymmetric { a: usize, b: usize },
    Triangle { a: usize, b: usize, c: usize },
}

pub fn validate_metric(inst: &MetricInstance) -> Vec<MetricViolation> {
    validate_table(inst.points(), |a, b| inst.d(a, b).clone())
}

/// Exhaustive check over every ordered triple of an arbitrary table.
pub fn validate_table(size: usize, d: impl Fn(usize, usize) -> Q) -> Vec<MetricViolation> {
    let mut out = Vec::new();
    let t: Vec<Vec<Q>> = (0..size).map(|a| (0..size).map(|b| d(a, b)).collect()).collect();
    for a in 0..size {
        if !t[a][a].is_zero() {
            out.push(MetricViolation::NonZeroDiagonal { point: a });
        }
        for b in a + 1..size {
            if t[a][b] != t[b][a] {
                out.push(MetricViolation::Asymmetric { a, b });
            }
        }
    }
    for a in 0..size {
        for b in 0..size {
            for c in 0..size {
                if t[a][c] > &t[a][b] + &t[b][c] {
                    out.push(MetricViolation::Triangle { a, b, c });
                }
            }
        }
    }
    out
}

/// All-pairs shortest paths, in place on a flat `size × size` table.
pub fn shortest_path_closure(size: usize, dist: &mut [Q]) {
    for via in 0..size {
        for a in 0..size {
            let da = dist[a * size + via].clone();
            for b in 0..size {
                let cand = &da + &dist[via * size + b];
                if cand < dist[a * size + b] {
                    dist[a * size + b] = cand;
                }
            }
        }
    }
}

/// Rounds client-facility distances up to `⌈(d/M)(n/ε)⌉` (at least 1) and pins
/// everything else to the far value `⌈n³/ε⌉`, then restores the triangle inequality.
pub fn normalize_with_guess(inst: &MetricInstance, epsilon: &Q, mguess: &Q) -> Result<MetricInstance, MetricError> {
    if !epsilon.is_positive() {
        return Err(MetricError::Param("epsilon must be positive".into()));
    }
    let n = inst.n;
    let m = inst.m;
    let size = n + m;
    if mguess.is_zero() && inst.distinct_cf().iter().any(|x| !x.is_zero()) {
        return Err(MetricError::DegenerateGuess);
    }
    let nq = q(n as i64);
    let far = Q::from_integer(ceil_int(&(&nq * &nq * &nq / epsilon)));
    let scale = if mguess.is_zero() { Q::zero() } else { &nq / (mguess * epsilon) };
    let one = Q::one();
    let mut dist = vec![far.clone(); size * size];
    for a in 0..size {
        dist[a * size + a] = Q::zero();
    }
    for j in 0..n {
        for i in 0..m {
            let d = inst.cf(j, i);
            if d <= mguess {
                let v = Q::from_integer(ceil_int(&(d * &scale))).max(one.clone());
                let v = v.min(far.clone());
                dist[j * size + n + i] = v.clone();
                dist[(n + i) * size + j] = v;
            }
        }
    }
    shortest_path_closure(size, &mut dist);
    let mut out = MetricInstance::from_flat(n, m, dist);
    out.labels = inst.labels.clone();
    out.labels.insert("m_guess".into(), fmt_q(mguess));
    Ok(out)
}

/// One normalization per distinct client-facility distance. A zero guess is skipped
/// unless every client-facility distance is zero (it would be degenerate otherwise).
pub fn enumerate_normalizations(inst: &MetricInstance, epsilon: &Q) -> Vec<(Q, MetricInstance)> {
    let values = inst.distinct_cf();
    let all_zero = values.iter().all(|v| v.is_zero());
    values
        .into_iter()
        .filter(|v| all_zero || !v.is_zero())
        .filter_map(|v| normalize_with_guess(inst, epsilon, &v).ok().map(|x| (v, x)))
        .collect()
}

/// A regular facility, or a free copy of one placed at offset `u(copy)` from its base.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacilityRef {
    Regular(usize),
    Free { copy: u32, base: usize },
}

impl FacilityRef {
    pub fn base(&self) -> usize {
        match *self {
            FacilityRef::Regular(i) => i,
            FacilityRef::Free { base, .. } => base,
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, FacilityRef::Free { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Point {
    Client(usize),
    Facility(FacilityRef),
}

/// `(f, f̂ = 2f, u, ε, δ = 3ε, η)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSet {
    #[serde(with = "crate::num::serde_q")]
    f: Q,
    #[serde(with = "crate::num::serde_q")]
    fhat: Q,
    #[serde(with = "crate::num::serde_q_map")]
    u: BTreeMap<u32, Q>,
    #[serde(with = "crate::num::serde_q")]
    epsilon: Q,
    #[serde(with = "crate::num::serde_q")]
    delta: Q,
    #[serde(with = "crate::num::serde_q")]
    eta: Q,
}

impl ParamSet {
    pub fn new(f: Q, epsilon: Q, eta: Q, n: usize) -> Result<Self, MetricError> {
        if f.is_negative() {
            return Err(MetricError::Param("f must be non-negative".into()));
        }
        if !epsilon.is_positive() || epsilon >= Q::new(1.into(), 6.into()) {
            return Err(MetricError::Param("epsilon must lie in (0, 1/6)".into()));
        }
        if !eta.is_positive() || &eta * q(n as i64) >= Q::one() {
            return Err(MetricError::Param("eta must satisfy 0 < n*eta < 1".into()));
        }
        Ok(ParamSet { fhat: &f * q(2), f, u: BTreeMap::new(), delta: &epsilon * q(3), epsilon, eta })
    }

    pub fn f(&self) -> &Q {
        &self.f
    }
    pub fn fhat(&self) -> &Q {
        &self.fhat
    }
    pub fn epsilon(&self) -> &Q {
        &self.epsilon
    }
    pub fn delta(&self) -> &Q {
        &self.delta
    }
    pub fn eta(&self) -> &Q {
        &self.eta
    }
    pub fn offsets(&self) -> &BTreeMap<u32, Q> {
        &self.u
    }

    pub fn offset(&self, copy: u32) -> Result<&Q, MetricError> {
        self.u.get(&copy).ok_or(MetricError::MissingOffset(copy))
    }

    pub fn with_f(&self, f: Q) -> Self {
        let mut p = self.clone();
        p.fhat = &f * q(2);
        p.f = f;
        p
    }

    pub fn set_offset(&mut self, copy: u32, u: Q) {
        assert!(!u.is_negative(), "free offsets are non-negative");
        self.u.insert(copy, u);
    }

    pub fn remove_offset(&mut self, copy: u32) {
        self.u.remove(&copy);
    }

    /// Invariants that serde cannot enforce.
    pub fn check(&self, n: usize) -> Result<(), MetricError> {
        let fresh = ParamSet::new(self.f.clone(), self.epsilon.clone(), self.eta.clone(), n)?;
        if fresh.fhat != self.fhat || fresh.delta != self.delta {
            return Err(MetricError::Param("fhat or delta inconsistent".into()));
        }
        if self.u.values().any(|x| x.is_negative()) {
            return Err(MetricError::Param("negative free offset".into()));
        }
        Ok(())
    }

    /// `d(j, h)` for client `j`; panics on an unknown copy (callers validate first).
    pub fn client_dist(&self, inst: &MetricInstance, j: usize, h: &FacilityRef) -> Q {
        match *h {
            FacilityRef::Regular(i) => inst.cf(j, i).clone(),
            FacilityRef::Free { copy, base } => {
                self.u.get(&copy).expect("free copy offset registered") + inst.cf(j, base)
            }
        }
    }
}

pub fn extended_distance(inst: &MetricInstance, params: &ParamSet, a: Point, b: Point) -> Result<Q, MetricError> {
    let resolve = |p: Point| -> Result<(usize, Q), MetricError> {
        match p {
            Point::Client(j) if j < inst.n => Ok((j, Q::zero())),
            Point::Client(j) => Err(MetricError::UnknownClient(j)),
            Point::Facility(h) => {
                if h.base() >= inst.m {
                    return Err(MetricError::UnknownFacility(h.base()));
                }
                let off = match h {
                    FacilityRef::Regular(_) => Q::zero(),
                    FacilityRef::Free { copy, .. } => params.offset(copy)?.clone(),
                };
                Ok((inst.n + h.base(), off))
            }
        }
    };
    if a == b {
        return Ok(Q::zero());
    }
    let (pa, ua) = resolve(a)?;
    let (pb, ub) = resolve(b)?;
    Ok(ua + inst.d(pa, pb) + ub)
}

fn random_table(rng: &mut ChaCha8Rng, size: usize, range: u32) -> Vec<Q> {
    let hi = range.max(1) as i64;
    let mut dist = vec![Q::zero(); size * size];
    for a in 0..size {
        for b in a + 1..size {
            let v = q(rng.gen_range(1..=hi));
            dist[a * size + b] = v.clone();
            dist[b * size + a] = v;
        }
    }
    shortest_path_closure(size, &mut dist);
    dist
}

/// Shortest-path closure of a random symmetric integer table with entries in `[1, coord_range]`.
pub fn generate_random_instance(seed: u64, n: usize, m: usize, coord_range: u32) -> MetricInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = random_table(&mut rng, n + m, coord_range);
    let mut inst = MetricInstance::from_flat(n, m, dist);
    inst.labels.insert("generator".into(), "random".into());
    inst.labels.insert("seed".into(), seed.to_string());
    inst
}

#[derive(Clone, Debug)]
pub struct StableInstance {
    pub instance: MetricInstance,
    pub planted: Vec<usize>,
    pub opt: Q,
    /// `opt_{k-1}/opt_k - 1`; `None` when `k = 1`.
    pub beta: Option<Q>,
}

/// `k` well-separated groups. Each group has a hub facility at distance 1..=3 from its
/// clients and a decoy facility one unit behind the hub.
pub fn generate_stable_instance(
    seed: u64,
    k: usize,
    cluster_size: usize,
    separation: u32,
) -> Result<StableInstance, MetricError> {
    if k == 0 || cluster_size == 0 {
        return Err(MetricError::Param("k and cluster_size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = k * cluster_size;
    let m = 2 * k;
    let size = n + m;
    let mut slots: Vec<usize> = (0..m).collect();
    slots.shuffle(&mut rng);
    let hub = |g: usize| slots[g];
    let decoy = |g: usize| slots[k + g];
    let sep = q(separation.max(1) as i64);
    let mut big = sep.clone() * q(k as i64) + q(8 * size as i64);
    big += q(1);
    let mut dist = vec![big; size * size];
    for a in 0..size {
        dist[a * size + a] = Q::zero();
    }
    let mut set = |a: usize, b: usize, v: Q| {
        dist[a * size + b] = v.clone();
        dist[b * size + a] = v;
    };
    for g in 0..k {
        let h = n + hub(g);
        set(h, n + decoy(g), q(1));
        for c in 0..cluster_size {
            let j = g * cluster_size + c;
            set(j, h, q(rng.gen_range(1..=3)));
        }
        for g2 in g + 1..k {
            set(h, n + hub(g2), sep.clone());
        }
    }
    shortest_path_closure(size, &mut dist);
    let mut instance = MetricInstance::from_flat(n, m, dist);
    instance.labels.insert("generator".into(), "stable".into());
    instance.labels.insert("seed".into(), seed.to_string());
    instance.labels.insert("k".into(), k.to_string());
    let mut planted: Vec<usize> = (0..k).map(hub).collect();
    planted.sort_unstable();
    let caps = crate::oracle::OracleCaps::default();
    let best =
        crate::oracle::brute_force_kmedian(&instance, k, &caps).map_err(|e| MetricError::Param(e.to_string()))?;
    let planted_cost = crate::oracle::cost_regular(&instance, &planted);
    debug_assert_eq!(planted_cost, best.value);
    let beta = if k > 1 {
        let prev = crate::oracle::brute_force_kmedian(&instance, k - 1, &caps)
            .map_err(|e| MetricError::Param(e.to_string()))?;
        Some(prev.value / &planted_cost - Q::one())
    } else {
        None
    };
    if let Some(b) = &beta {
        instance.labels.insert("beta".into(), fmt_q(b));
    }
    Ok(StableInstance { instance, planted, opt: planted_cost, beta })
}

/// Smallest integer upper bound for `n³/ε`.
pub fn far_value(n: usize, epsilon: &Q) -> BigInt {
    let nq = q(n as i64);
    ceil_int(&(&nq * &nq * &nq / epsilon))
}

/// `[d(j,S) - d(j,i)]⁺` helper shared by the primal-dual modules.
pub fn slack(dj_s: &Q, dji: &Q) -> Q {
    pos(dj_s - dji)
}
