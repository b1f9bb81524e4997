//! Acceptance corpora and their checks. Each `criterion_*` panics on the first failed
//! check and otherwise returns a one-line summary. Shared by the core test binaries and
//! the workspace acceptance runner.
#![allow(dead_code)]

use std::sync::Arc;
use std::time::Instant;

use kmed::adaptive::{audit_trace, default_eta, run_log_adaptive};
use kmed::greedy::run_greedy;
use kmed::lp::{solve_feasibility, Feasibility, LinearSystem, Relation};
use kmed::merge::{run_pseudo_approx, MergeConfig, PseudoSolution};
use kmed::metric::{
    generate_random_instance, generate_stable_instance, normalize_with_guess, MetricInstance, ParamSet, StableInstance,
};
use kmed::num::{parse_q, pos, q, qf, to_f64, Q};
use kmed::oracle::{brute_force_kmedian, cost_regular, for_each_subset, OracleCaps};
use kmed::scaled::ScaledMetric;
use kmed::stable::{
    local_search, run_main, run_stable, LocalSearchMode, MainConfig, OracleGuesses, Sizes, StableConfig,
};
use kmed::submodular::{maximize_f, Cluster, Element, PartitionMatroid, SubmodularContext};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn secs(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

// ---------------------------------------------------------------- facility location

/// Exhaustive facility location optimum over nonempty subsets, by bitmask.
pub fn ufl_by_bitmask(inst: &MetricInstance, f: &Q) -> Q {
    let m = inst.m();
    (1u32..1 << m)
        .map(|mask| {
            let open: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
            connection(inst, &open) + f * q(open.len() as i64)
        })
        .min()
        .unwrap()
}

pub fn dist_to(inst: &MetricInstance, j: usize, s: &[usize]) -> Q {
    s.iter().map(|&i| inst.cf(j, i)).min().unwrap().clone()
}

pub fn connection(inst: &MetricInstance, s: &[usize]) -> Q {
    (0..inst.n()).map(|j| dist_to(inst, j, s)).sum()
}

/// Seeded random instances with `n, m ≤ 8`, normalized with the largest client-facility
/// distance as the guess, each with an opening cost in `[0, M/2]`.
pub fn ufl_corpus(seed: u64, count: usize, eps: &Q) -> Vec<(MetricInstance, Q)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=8);
            let m = rng.gen_range(1..=8);
            let raw = generate_random_instance(rng.gen(), n, m, 50);
            let inst = normalize_with_guess(&raw, eps, &raw.max_cf()).unwrap();
            let f = inst.max_cf() * qf(rng.gen_range(0..=32), 64);
            (inst, f)
        })
        .collect()
}

pub const UFL_SEED: u64 = 0x6772_6565;

/// Payment identity, dual feasibility of `α/2`, and the cost bound, all exact.
pub fn greedy_checks(inst: &MetricInstance, f: &Q) {
    let out = run_greedy(inst, f).unwrap();
    let s = &out.s_star;
    let alpha = &out.alpha_star;
    let two = q(2);
    let conn = connection(inst, s);
    let sum: Q = alpha.iter().sum();
    assert_eq!(sum, &conn + &two * f * q(s.len() as i64), "payment identity");
    for i in 0..inst.m() {
        let pay: Q = (0..inst.n()).map(|j| pos(&alpha[j] - &two * inst.cf(j, i))).sum();
        assert!(pay <= &two * f, "facility {i} overpaid");
    }
    let ufl = ufl_by_bitmask(inst, f);
    assert!(conn <= &two * (ufl - f * q(s.len() as i64)), "cost bound");
}

pub fn criterion_greedy() -> String {
    let start = Instant::now();
    let corpus = ufl_corpus(UFL_SEED, 200, &qf(1, 8));
    for (t, (inst, f)) in corpus.iter().enumerate() {
        let r = std::panic::catch_unwind(|| greedy_checks(inst, f));
        assert!(r.is_ok(), "instance {t} failed");
    }
    assert!(secs(start) < 60.0, "took {:.1} s", secs(start));
    format!("200 instances, identity/dual/cost exact, {:.1} s", secs(start))
}

/// Smallest `L` with `(1+ε²)^L ≥ 6M`, plus one.
pub fn phase_limit(m_max: &Q, eps: &Q) -> u32 {
    let r = q(1) + eps * eps;
    let target = q(6) * m_max;
    let mut pow = q(1);
    let mut l = 0;
    while pow < target {
        pow *= &r;
        l += 1;
    }
    l + 1
}

pub fn criterion_log_adaptive() -> String {
    let start = Instant::now();
    let mut total = 0;
    let mut max_phases = 0;
    for eps in [qf(1, 8), qf(1, 10)] {
        let factor = q(2) / (q(1) - q(3) * &eps);
        for (t, (inst, f)) in ufl_corpus(UFL_SEED, 200, &eps).into_iter().enumerate() {
            let n = inst.n();
            let p = ParamSet::new(f.clone(), eps.clone(), default_eta(n), n).unwrap();
            let out = run_log_adaptive(&inst, &p).unwrap();
            let rep = audit_trace(&inst, &p, &out.trace, &q(0));
            assert!(rep.passed(), "eps {eps}, instance {t}: {:?}", rep.violations);
            let s: Vec<usize> = out.s_star.iter().map(|h| h.base()).collect();
            assert!(out.s_star.iter().all(|h| !h.is_free()));
            let ufl = ufl_by_bitmask(&inst, &f);
            let c = connection(&inst, &s);
            assert!(c <= &factor * (ufl - &f * q(s.len() as i64)), "eps {eps}, instance {t}: cost bound");
            let limit = phase_limit(&inst.max_cf(), &eps);
            assert!(
                out.trace.num_phases <= limit,
                "eps {eps}, instance {t}: {} phases > {limit}",
                out.trace.num_phases
            );
            max_phases = max_phases.max(out.trace.num_phases);
            total += 1;
        }
    }
    assert!(secs(start) < 300.0, "took {:.1} s", secs(start));
    format!("{total} runs (eps 1/8 and 1/10), audits pass, max {max_phases} phases, {:.1} s", secs(start))
}

// ---------------------------------------------------------------- merge

pub fn merge_checks(inst: &MetricInstance, k: usize, eps: &Q, tag: &str) -> PseudoSolution {
    let out = run_pseudo_approx(inst, k, eps, &MergeConfig::default()).unwrap_or_else(|e| panic!("{tag}: {e}"));
    assert_eq!(out.k_regular, k, "{tag}");
    let regular = out.open_set.iter().filter(|h| !h.is_free()).count();
    assert_eq!(regular, k, "{tag}");
    assert!(out.audit.passed(), "{tag}: {:?}", out.audit.violations);
    for ph in &out.trace.phases {
        let free = ph.openings.iter().filter(|o| o.facility.is_free()).count();
        assert!(free <= 3, "{tag}: {free} free in phase {}", ph.phase);
    }
    let opt = brute_force_kmedian(inst, k, &OracleCaps::default()).unwrap().value;
    let factor = q(2) / (q(1) - q(3) * eps);
    let slack = default_eta(inst.n()) * q(inst.n() as i64) * q(k as i64);
    assert!(out.cost <= &factor * (opt + slack), "{tag}: cost bound");
    out
}

pub fn criterion_merge() -> String {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d65_7267);
    let eps = qf(1, 8);
    let mut free = 0;
    for case in 0..100 {
        let n = rng.gen_range(2..=8);
        let m = rng.gen_range(4..=8);
        let k = rng.gen_range(2..=4);
        let inst = generate_random_instance(rng.gen(), n, m, 50);
        free += merge_checks(&inst, k, &eps, &format!("case {case}")).free_count;
    }
    assert!(secs(start) < 600.0, "took {:.1} s", secs(start));
    format!("100 instances, exactly k regular, {free} free copies in total, {:.1} s", secs(start))
}

// ---------------------------------------------------------------- linear feasibility

pub fn random_system(rng: &mut ChaCha8Rng) -> LinearSystem {
    let nv = rng.gen_range(4..=6);
    let mut sys = LinearSystem::new();
    for v in 0..nv {
        let lo = rng.gen_range(-3..=1);
        let hi = lo + rng.gen_range(0..=4);
        sys.add_var(format!("x{v}"), q(lo), q(hi));
    }
    for _ in 0..rng.gen_range(1..=3) {
        let mut coeffs: Vec<(usize, Q)> = Vec::new();
        for v in 0..nv {
            if rng.gen_bool(0.7) {
                coeffs.push((v, qf(rng.gen_range(-3..=3), rng.gen_range(1..=2))));
            }
        }
        let rel = [Relation::Le, Relation::Ge, Relation::Eq][rng.gen_range(0..3)];
        sys.add_row(coeffs, rel, q(rng.gen_range(-6..=6)));
    }
    sys
}

/// Re-substitution written independently of the solver.
pub fn satisfies(sys: &LinearSystem, x: &[Q]) -> bool {
    x.len() == sys.variables.len()
        && sys.variables.iter().zip(x).all(|(v, xv)| v.lower <= *xv && *xv <= v.upper)
        && sys.rows.iter().all(|r| {
            let lhs: Q = r.coeffs.iter().map(|(v, c)| c * &x[*v]).sum();
            match r.relation {
                Relation::Le => lhs <= r.rhs,
                Relation::Ge => lhs >= r.rhs,
                Relation::Eq => lhs == r.rhs,
            }
        })
}

/// Gauss-Jordan on a square system; `None` when singular.
fn solve_square(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Option<Vec<Q>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| a[r][col] != Q::default())?;
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col && a[r][col] != Q::default() {
                let f = &a[r][col] / &a[col][col];
                for c in col..n {
                    let d = &f * &a[col][c];
                    a[r][c] -= d;
                }
                let d = &f * &b[col];
                b[r] -= d;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

/// Feasible iff some basic solution is: a nonempty bounded polyhedron has a vertex,
/// fixed by some tight rows plus bounds on the remaining variables.
pub fn vertex_oracle(sys: &LinearSystem) -> Option<Vec<Q>> {
    let nv = sys.variables.len();
    let nr = sys.rows.len();
    let dense: Vec<Vec<Q>> = sys
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![Q::default(); nv];
            for (i, c) in &r.coeffs {
                v[*i] += c;
            }
            v
        })
        .collect();
    for r in 0..=nr.min(nv) {
        for rows in subsets(nr, r) {
            for basic in subsets(nv, r) {
                let fixed: Vec<usize> = (0..nv).filter(|v| !basic.contains(v)).collect();
                for choice in 0u32..1 << fixed.len() {
                    let mut x = vec![Q::default(); nv];
                    for (t, &v) in fixed.iter().enumerate() {
                        let var = &sys.variables[v];
                        x[v] = if choice >> t & 1 == 1 { var.upper.clone() } else { var.lower.clone() };
                    }
                    let a: Vec<Vec<Q>> =
                        rows.iter().map(|&i| basic.iter().map(|&v| dense[i][v].clone()).collect()).collect();
                    let b: Vec<Q> = rows
                        .iter()
                        .map(|&i| {
                            let rest: Q = fixed.iter().map(|&v| &dense[i][v] * &x[v]).sum();
                            &sys.rows[i].rhs - rest
                        })
                        .collect();
                    let Some(xb) = solve_square(a, b) else { continue };
                    for (t, &v) in basic.iter().enumerate() {
                        x[v] = xb[t].clone();
                    }
                    if satisfies(sys, &x) {
                        return Some(x);
                    }
                }
            }
        }
    }
    None
}

/// Some point of the box on the half-step grid satisfies every row.
pub fn grid_hit(sys: &LinearSystem) -> bool {
    let axes: Vec<Vec<Q>> = sys
        .variables
        .iter()
        .map(|v| {
            let mut pts = Vec::new();
            let mut x = v.lower.clone();
            while x <= v.upper {
                pts.push(x.clone());
                x += qf(1, 2);
            }
            pts
        })
        .collect();
    let mut idx = vec![0usize; axes.len()];
    loop {
        let x: Vec<Q> = idx.iter().enumerate().map(|(d, &i)| axes[d][i].clone()).collect();
        if satisfies(sys, &x) {
            return true;
        }
        let mut d = 0;
        loop {
            if d == axes.len() {
                return false;
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

pub fn criterion_lp() -> String {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6c70);
    let (mut feasible, mut infeasible) = (0, 0);
    for case in 0..500 {
        let sys = random_system(&mut rng);
        let verdict = solve_feasibility(&sys).unwrap();
        let oracle = vertex_oracle(&sys);
        match &verdict {
            Feasibility::Feasible(x) => {
                assert!(satisfies(&sys, x), "case {case}: witness fails re-substitution");
                assert!(oracle.is_some(), "case {case}: no vertex but solver says feasible");
                feasible += 1;
            }
            Feasibility::Infeasible => {
                assert!(oracle.is_none(), "case {case}: vertex {oracle:?} found");
                assert!(!grid_hit(&sys), "case {case}: grid point found");
                infeasible += 1;
            }
        }
    }
    assert!(feasible > 50 && infeasible > 50, "{feasible} feasible, {infeasible} infeasible");
    assert!(secs(start) < 30.0, "took {:.1} s", secs(start));
    format!("500 systems ({feasible} feasible, {infeasible} infeasible) match, {:.1} s", secs(start))
}

// ---------------------------------------------------------------- submodular objective

pub struct SubmodularCase {
    pub ctx: SubmodularContext,
    pub matroid: PartitionMatroid,
}

/// Random context: up to 8 working centers with nearest-center clusters, a few removed
/// clients, random cores, and balls over the remaining facilities (ground ≤ 16).
pub fn submodular_context(seed: u64) -> SubmodularCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = rng.gen_range(2..=8);
    let spare = rng.gen_range(2..=6);
    let m = centers + spare;
    let n = rng.gen_range(centers..=14);
    let inst = generate_random_instance(seed ^ 0x5eed, n, m, 40);
    let base = ScaledMetric::new(&inst).unwrap();
    let parts = rng.gen_range(1..=6);
    let balls: Vec<(usize, i128)> = (0..parts).map(|_| (rng.gen_range(0..n), rng.gen_range(0..12))).collect();
    let (ext, lam) = base.with_dummies(&balls);
    let ext = Arc::new(ext);
    let work: Vec<usize> = (0..centers).map(|i| ext.fac(i)).collect();
    let assign: Vec<Option<usize>> =
        (0..n)
            .map(|p| {
                if rng.gen_bool(0.15) {
                    None
                } else {
                    work.iter().chain(&lam).copied().min_by_key(|&c| (ext.d(p, c), c))
                }
            })
            .collect();
    let clusters: Vec<Cluster> = work
        .iter()
        .map(|&c| {
            let members: Vec<usize> = (0..n).filter(|&p| assign[p] == Some(c)).collect();
            let core = members.iter().copied().filter(|_| rng.gen_bool(0.7)).collect();
            Cluster { center: c, members, core }
        })
        .collect();
    let close = rng.gen_range(0..=clusters.len());
    let ctx = SubmodularContext::new(ext.clone(), lam, assign, clusters, close).unwrap();
    let mut ground = Vec::new();
    for part in 0..parts {
        for i in centers..m {
            if ground.len() < 16 && (rng.gen_bool(0.5) || i == centers) {
                ground.push(Element { part, point: ext.fac(i) });
            }
        }
    }
    SubmodularCase { ctx, matroid: PartitionMatroid::new(parts, ground) }
}

pub fn near(ctx: &SubmodularContext, p: usize, a: &[usize]) -> Option<i128> {
    a.iter().chain(ctx.lambda()).map(|&c| ctx.metric().d(p, c)).min()
}

/// Cost of closing cluster `idx`, from the definition.
pub fn closed_by_definition(ctx: &SubmodularContext, idx: usize, x: &[usize]) -> i128 {
    let d = |p: usize, c: usize| ctx.metric().d(p, c);
    let cl = &ctx.clusters()[idx];
    let with_center = |p: usize| {
        let mut s = x.to_vec();
        s.push(cl.center);
        near(ctx, p, &s).unwrap()
    };
    let hit = cl.core.iter().any(|&p| x.iter().any(|&c| d(p, c) < d(p, cl.center)));
    if hit {
        return cl.members.iter().map(|&p| with_center(p)).sum();
    }
    let moved = x.iter().chain(ctx.lambda()).map(|&c| cl.core.iter().map(|&p| d(p, c)).sum::<i128>()).min().unwrap();
    moved + cl.members.iter().filter(|p| !cl.core.contains(p)).map(|&p| with_center(p)).sum::<i128>()
}

/// Minimum over every closing set of the required size.
pub fn g_exhaustive(ctx: &SubmodularContext, x: &[usize]) -> i128 {
    let cls = ctx.clusters();
    let mut best = i128::MAX;
    for_each_subset(cls.len(), ctx.close_count(), |chosen| {
        let mut total = 0;
        for (p, a) in ctx.assign().iter().enumerate() {
            if chosen.iter().any(|&i| cls[i].members.contains(&p)) {
                continue;
            }
            total += match a {
                Some(c) => {
                    let mut s = x.to_vec();
                    s.push(*c);
                    near(ctx, p, &s).unwrap()
                }
                None => near(ctx, p, x).unwrap(),
            };
        }
        total += chosen.iter().map(|&i| closed_by_definition(ctx, i, x)).sum::<i128>();
        best = best.min(total);
    });
    best
}

pub fn points(set: &[Element]) -> Vec<usize> {
    set.iter().map(|e| e.point).collect()
}

fn sample(ground: &[Element], rng: &mut ChaCha8Rng, p: f64) -> Vec<Element> {
    ground.iter().copied().filter(|_| rng.gen_bool(p)).collect()
}

/// Best value over all independent sets.
pub fn brute_max(ctx: &SubmodularContext, mat: &PartitionMatroid) -> i128 {
    fn go(ctx: &SubmodularContext, mat: &PartitionMatroid, part: usize, cur: &mut Vec<usize>) -> i128 {
        if part == mat.parts() {
            return ctx.eval_f(cur);
        }
        let mut best = go(ctx, mat, part + 1, cur);
        let els: Vec<usize> = mat.part(part).map(|e| e.point).collect();
        for e in els {
            cur.push(e);
            best = best.max(go(ctx, mat, part + 1, cur));
            cur.pop();
        }
        best
    }
    go(ctx, mat, 0, &mut Vec::new())
}

pub fn criterion_submodular() -> String {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    for seed in 0..100u64 {
        let SubmodularCase { ctx, matroid } = submodular_context(seed);
        assert!(ctx.clusters().len() <= 8);
        assert!(matroid.ground().len() <= 16 && matroid.parts() <= 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let ground = matroid.ground().to_vec();
        for _ in 0..20 {
            let x = points(&sample(&ground, &mut rng, 0.4));
            assert_eq!(ctx.eval_g(&x).value, g_exhaustive(&ctx, &x), "seed {seed} x {x:?}");
            for i in 0..ctx.clusters().len() {
                assert!(ctx.cost_inc(i, &x) >= 0);
                assert_eq!(closed_by_definition(&ctx, i, &x), ctx.closedcost(i, &x));
            }
        }
        let g0 = ctx.eval_g(&[]).value;
        let f = |s: &[usize]| g0 - ctx.eval_g(s).value;
        let mut triples = 0;
        while triples < 10_000 {
            let y = points(&sample(&ground, &mut rng, 0.5));
            let x: Vec<usize> = y.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            let rest: Vec<usize> = ground.iter().map(|e| e.point).filter(|c| !y.contains(c)).collect();
            if rest.is_empty() {
                continue;
            }
            let e = rest[rng.gen_range(0..rest.len())];
            let (fx, fy) = (f(&x), f(&y));
            let fxe = f(&[x.clone(), vec![e]].concat());
            let fye = f(&[y.clone(), vec![e]].concat());
            assert!(fx <= fy, "monotonicity, seed {seed}");
            assert!(fxe - fx >= fye - fy, "submodularity, seed {seed}");
            triples += 1;
        }
        let chosen = maximize_f(&ctx, &matroid);
        assert!(matroid.is_independent(&chosen));
        let got = ctx.eval_f(&points(&chosen));
        let best = brute_max(&ctx, &matroid);
        assert!(2 * got >= best, "seed {seed}: greedy {got}, best {best}");
        if best > 0 {
            worst = worst.min(got as f64 / best as f64);
        }
    }
    assert!(secs(start) < 300.0, "took {:.1} s", secs(start));
    format!("100 contexts, 10^4 triples each, worst greedy/optimum {worst:.3}, {:.1} s", secs(start))
}

// ---------------------------------------------------------------- stable pipeline

/// Planted instance with `k ∈ {2,3,4}` and at most 16 clients.
pub fn planted(seed: u64) -> (StableInstance, usize) {
    let k = 2 + (seed % 3) as usize;
    (generate_stable_instance(seed, k, 16 / k, 20).unwrap(), k)
}

/// The planted centers with the first one swapped for its nearest other facility.
pub fn spoiled_start(si: &StableInstance) -> Vec<usize> {
    let inst = &si.instance;
    let hub = si.planted[0];
    let other =
        (0..inst.m()).filter(|i| !si.planted.contains(i)).min_by_key(|&i| (inst.ff(hub, i).clone(), i)).unwrap();
    let mut s = si.planted.clone();
    s[0] = other;
    s
}

/// Correct guesses for a working solution `local` given the optimum: one ball per optimal
/// center missing from `local`, led by its closest client and reaching exactly that
/// center; the surplus centers of `local` are the costly removals; nothing else moves.
pub fn correct_guesses(inst: &MetricInstance, local: &[usize], opt: &[usize]) -> OracleGuesses {
    let missing: Vec<usize> = opt.iter().copied().filter(|o| !local.contains(o)).collect();
    let removed: Vec<usize> = local.iter().copied().filter(|c| !opt.contains(c)).collect();
    let owner = |p: usize| *opt.iter().min_by_key(|&&o| (inst.cf(p, o).clone(), o)).unwrap();
    let balls: Vec<(usize, Q)> = missing
        .iter()
        .map(|&o| {
            let leader = (0..inst.n()).filter(|&p| owner(p) == o).min_by_key(|&p| (inst.cf(p, o).clone(), p)).unwrap();
            (leader, inst.cf(leader, o).clone())
        })
        .collect();
    OracleGuesses {
        local: Some(local.to_vec()),
        sample: Some(balls.iter().map(|b| b.0).collect()),
        balls: Some(balls),
        removed: Some(removed),
        sizes: Some(Sizes { u: 0, r: 0, x: 0 }),
        moves: Some(Vec::new()),
        r0: Some(Vec::new()),
    }
}

pub fn ratio(a: &Q, b: &Q) -> f64 {
    to_f64(&(a / b))
}

pub fn criterion_stable() -> String {
    let eps = qf(1, 8);
    let start = Instant::now();
    let mut capped_ok = 0;
    let mut spoiled_ok = 0;
    let mut worst_injected: f64 = 0.0;
    for seed in 0..30u64 {
        let (si, k) = planted(seed);
        let inst = &si.instance;
        assert!(inst.n() <= 16 && k <= 4);
        let opt = brute_force_kmedian(inst, k, &OracleCaps::default()).unwrap().value;
        let (ls, _) = local_search(inst, k, &eps, LocalSearchMode::Strict).unwrap();
        for local in [ls.centers.clone(), spoiled_start(&si)] {
            let mut cfg = StableConfig::default();
            cfg.caps.restarts = Some(1);
            cfg.oracle = Some(correct_guesses(inst, &local, &si.planted));
            let sol = run_stable(inst, k, &eps, seed, &cfg).unwrap();
            assert_eq!(sol.centers.len(), k);
            assert_eq!(cost_regular(inst, &sol.centers), sol.cost);
            assert!(sol.cost <= qf(5, 2) * &opt, "seed {seed}: ratio {}", ratio(&sol.cost, &opt));
            worst_injected = worst_injected.max(ratio(&sol.cost, &opt));
            if let Some(w) = &sol.winner {
                // extraction loses at most (1+2ε)·g(X) + 15ε·opt
                let g = parse_q(&w.objective).unwrap();
                assert!(sol.cost <= (q(1) + q(2) * &eps) * g + q(15) * &eps * &opt, "seed {seed}: extraction bound");
            }
        }
        let mut cfg = StableConfig::default();
        cfg.caps.restarts = Some(20);
        let sol = run_stable(inst, k, &eps, seed, &cfg).unwrap();
        if sol.cost <= q(3) * &opt {
            capped_ok += 1;
        }
        cfg.oracle = Some(OracleGuesses { local: Some(spoiled_start(&si)), ..Default::default() });
        let sol = run_stable(inst, k, &eps, seed, &cfg).unwrap();
        if sol.cost <= q(3) * &opt {
            spoiled_ok += 1;
        }
    }
    assert!(capped_ok >= 27, "capped search within 3·opt on {capped_ok}/30");
    assert!(spoiled_ok >= 27, "capped search from a spoiled start within 3·opt on {spoiled_ok}/30");
    assert!(secs(start) < 900.0, "took {:.1} s", secs(start));
    format!(
        "30 planted: injected worst ratio {worst_injected:.3}; capped within 3·opt on {capped_ok}/30 ({spoiled_ok}/30 from a spoiled start), {:.1} s",
        secs(start)
    )
}

// ---------------------------------------------------------------- end to end

/// Twenty mixed instances: planted groups, plain random points, and random instances
/// whose pseudo-solution needs a surplus center, so the stable runs decide the answer.
pub fn main_corpus() -> Vec<(String, MetricInstance, usize)> {
    let mut out = Vec::new();
    for seed in 0..8u64 {
        let k = 2 + (seed % 3) as usize;
        let si = generate_stable_instance(seed, k, 12 / k, 20).unwrap();
        out.push((format!("planted-{seed}"), si.instance, k));
    }
    for seed in 0..9u64 {
        let n = 4 + (seed % 9) as usize;
        let m = 4 + ((seed / 3) % 5) as usize;
        let k = 2 + (seed % 3) as usize;
        out.push((format!("random-{seed}"), generate_random_instance(seed + 500, n, m, 30), k));
    }
    for (seed, n, m, k, range) in [(139u64, 8, 5, 3, 6), (143, 12, 6, 4, 6), (293, 9, 6, 4, 3)] {
        out.push((format!("tied-{seed}"), generate_random_instance(seed, n, m, range), k));
    }
    out
}

pub fn criterion_main() -> String {
    let eps = qf(1, 8);
    let start = Instant::now();
    let corpus = main_corpus();
    assert_eq!(corpus.len(), 20);
    let mut stable_path = 0;
    let mut worst: f64 = 0.0;
    for (name, inst, k) in &corpus {
        assert!(inst.n() <= 12);
        let sol = run_main(inst, *k, &eps, 1, &MainConfig::default()).unwrap();
        let opt = brute_force_kmedian(inst, *k, &OracleCaps::default()).unwrap().value;
        assert_eq!(sol.centers.len(), *k, "{name}");
        assert!(sol.centers.iter().all(|&c| c < inst.m()));
        assert_eq!(cost_regular(inst, &sol.centers), sol.cost);
        let r = ratio(&sol.cost, &opt);
        eprintln!("  {name}: k={k} ratio={r:.4} source={:?}", sol.source);
        assert!(sol.cost <= qf(5, 2) * &opt, "{name}: ratio {r}");
        worst = worst.max(r);
        if !sol.stable_runs.is_empty() {
            stable_path += 1;
        }
    }
    assert!(stable_path >= 3, "only {stable_path} instances reached the stable runs");
    assert!(secs(start) < 900.0, "took {:.1} s", secs(start));
    format!(
        "20 instances, exactly k centers, worst ratio {worst:.4}, {stable_path} via stable runs, {:.1} s",
        secs(start)
    )
}
