mod criteria;

use std::collections::BTreeSet;

use criteria::{criterion_stable, planted, spoiled_start};
use kmed::metric::{generate_random_instance, validate_metric, MetricInstance};
use kmed::num::{q, qf, to_f64, Q};
use kmed::oracle::cost_regular;
use kmed::scaled::ScaledMetric;
use kmed::stable::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn line(xs: &[i64], n: usize) -> MetricInstance {
    let t = xs.iter().map(|a| xs.iter().map(|b| q((a - b).abs())).collect()).collect();
    MetricInstance::new(n, xs.len() - n, t).unwrap()
}

#[test]
fn local_search_leaves_no_improving_swap() {
    let eps = qf(1, 8);
    for seed in 0..40u64 {
        let inst = generate_random_instance(seed, 9, 7, 40);
        let k = 1 + (seed % 4) as usize;
        for mode in [LocalSearchMode::Strict, LocalSearchMode::Threshold] {
            let (out, _) = local_search(&inst, k, &eps, mode).unwrap();
            let cur = cost_regular(&inst, &out.centers);
            let factor = match mode {
                LocalSearchMode::Strict => q(1),
                LocalSearchMode::Threshold => q(1) - &eps / q(5 * k as i64),
            };
            for t in 0..k {
                for i in (0..inst.m()).filter(|i| !out.centers.contains(i)) {
                    let mut s = out.centers.clone();
                    s[t] = i;
                    let c = cost_regular(&inst, &s);
                    match mode {
                        LocalSearchMode::Strict => assert!(c >= cur),
                        LocalSearchMode::Threshold => assert!(c > &factor * &cur),
                    }
                }
            }
        }
    }
}

#[test]
fn local_search_swap_count_is_bounded_by_the_cost_drop() {
    for seed in 0..20u64 {
        let inst = generate_random_instance(seed, 10, 8, 50);
        let (out, m) = local_search(&inst, 3, &qf(1, 8), LocalSearchMode::Strict).unwrap();
        let start = m.cost(&[m.fac(0), m.fac(1), m.fac(2)]).unwrap();
        // every accepted swap lowers an integral cost by at least one unit
        assert!(out.swaps as i128 <= start - out.cost);
    }
}

#[test]
fn local_search_finds_planted_optimum() {
    for seed in 0..12u64 {
        let (si, k) = planted(seed);
        let (out, m) = local_search(&si.instance, k, &qf(1, 8), LocalSearchMode::Strict).unwrap();
        assert_eq!(m.to_q(out.cost), si.opt);
        assert_eq!(out.centers, si.planted);
    }
}

#[test]
fn equidistant_clients_are_sampled_uniformly() {
    // five clients at distance 1 from the single facility, pairwise 2 apart
    let n = 5;
    let mut t = vec![vec![q(2); n + 1]; n + 1];
    for a in 0..=n {
        t[a][a] = q(0);
        if a < n {
            t[a][n] = q(1);
            t[n][a] = q(1);
        }
    }
    let inst = MetricInstance::new(n, 1, t).unwrap();
    let draws = d_sample(&inst, &[0], 10_000, 11).unwrap();
    let mut counts = [0f64; 5];
    for p in draws {
        counts[p] += 1.0;
    }
    let chi2: f64 = counts.iter().map(|c| (c - 2000.0).powi(2) / 2000.0).sum();
    // 0.999 quantile of chi-square with 4 degrees of freedom
    assert!(chi2 < 18.47, "chi2 {chi2}");
}

#[test]
fn zero_cost_clients_are_never_sampled() {
    let inst = line(&[0, 0, 3, 7, 0], 4);
    let draws = d_sample(&inst, &[0], 500, 2).unwrap();
    assert!(draws.iter().all(|&p| p >= 2));
    let all_zero = line(&[0, 0, 0], 2);
    assert!(d_sample(&all_zero, &[0], 10, 1).unwrap().is_empty());
}

#[test]
fn sample_size_formula_uses_natural_logs() {
    let e = qf(1, 2);
    let expect = 5.0 * 10f64.ln() * 32.0 * 20f64.ln();
    assert!((s_star(10, &e) - expect).abs() < 1e-9);
    assert_eq!(s_star(1, &e), 0.0);
}

#[test]
fn ball_family_for_one_unit_leader() {
    let fam = ball_guesses(&[(0, q(1))], &qf(1, 2), 1000).unwrap();
    // 35 powers of 9/8 lie in [1/8, 8], plus the empty subset
    assert_eq!(fam.len(), 36);
    for b in fam.iter().filter(|b| !b.is_empty()) {
        assert!(b[0].1 >= qf(1, 8) && b[0].1 <= q(8));
    }
    // per-leader count is log_{1+ε³}(1/ε⁶) up to a constant
    for (eps, s) in [(qf(1, 2), q(1)), (qf(1, 3), q(5)), (qf(1, 4), qf(2, 3))] {
        let (lo, hi) = grid_exponents(&s, &eps).unwrap();
        let e = to_f64(&eps);
        let alpha = (1.0 / e.powi(6)).ln() / (1.0 + e.powi(3)).ln();
        let count = (hi - lo + 1) as f64;
        assert!((count - alpha).abs() <= 2.0, "count {count} alpha {alpha}");
    }
}

#[test]
fn dummy_extension_is_a_metric() {
    for seed in 0..10u64 {
        let inst = generate_random_instance(seed, 5, 4, 12);
        let balls = vec![(seed as usize % 5, q(seed as i64 % 4)), (2, q(0)), (4, qf(3, 2))];
        let (ext, ids) = make_dummy_centers(&inst, &balls).unwrap();
        assert!(validate_metric(&ext).is_empty());
        for (t, (l, r)) in balls.iter().enumerate() {
            assert_eq!(ext.cf(*l, ids[t]), r);
        }
        // ρ = 0 puts the dummy on its leader
        let (l, _) = balls[1];
        for p in 0..5 {
            assert_eq!(ext.cf(p, ids[1]), inst.cc(l, p));
        }
    }
}

#[test]
fn costly_removal_sets_have_the_declared_shape() {
    // facility 0 serves clients at distance 0 only, so its cluster costs nothing
    let inst = line(&[0, 0, 10, 12, 0, 11, 40], 4);
    let m = ScaledMetric::new(&inst).unwrap();
    let s = vec![m.fac(0), m.fac(1)];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lam: Vec<usize> = vec![m.fac(2)];
    for qs in exp_rem(&m, &s, &lam, 0, 50, &mut rng) {
        assert!(qs.len() <= 1);
        assert!(!qs.contains(&m.fac(0)), "zero-cost cluster sampled");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for qs in exp_rem(&m, &s, &[], 3, 50, &mut rng) {
        assert!(qs.iter().all(|c| s.contains(c)));
        assert!(qs.len() <= 2);
    }
}

#[test]
fn cheap_search_respects_its_recursion_bounds() {
    for seed in 0..20u64 {
        let inst = generate_random_instance(seed, 14, 12, 60);
        let m = ScaledMetric::new(&inst).unwrap();
        let centers: Vec<usize> = (0..10).map(|i| m.fac(i)).collect();
        for sizes in [
            Sizes { u: 1, r: 0, x: 0 },
            Sizes { u: 1, r: 1, x: 0 },
            Sizes { u: 2, r: 0, x: 0 },
            Sizes { u: 1, r: 0, x: 1 },
        ] {
            let l = sizes.total() as u32;
            let out = cheap_rem(&m, &centers, &[], sizes, CheapCaps { entries: 10_000, calls: 1 << 20 }).unwrap();
            assert!(!out.truncated);
            assert!(out.max_depth <= 2 * l as usize);
            assert!(out.calls <= 4u64.pow(2 * l));
            assert!(!out.entries.is_empty());
            for e in &out.entries {
                assert_eq!(e.moves.len(), sizes.u);
                for (c, nx) in &e.moves {
                    assert!(centers.contains(c) && centers.contains(nx) && c != nx);
                    assert!(!e.removed().contains(nx));
                }
            }
        }
    }
}

#[test]
fn cheap_search_is_exhaustive_on_few_centers() {
    let inst = generate_random_instance(3, 8, 6, 30);
    let m = ScaledMetric::new(&inst).unwrap();
    let centers: Vec<usize> = (0..5).map(|i| m.fac(i)).collect();
    let out =
        cheap_rem(&m, &centers, &[], Sizes { u: 2, r: 0, x: 0 }, CheapCaps { entries: 1000, calls: 1000 }).unwrap();
    let sets: BTreeSet<Vec<usize>> = out.entries.iter().map(|e| e.removed()).collect();
    assert_eq!(sets.len(), 10);
}

proptest! {
    #[test]
    fn expensive_clusters_reach_the_threshold(costs in proptest::collection::vec(0i64..50, 0..8), th in 1i64..50) {
        let cl: Vec<(usize, Q)> = costs.iter().enumerate().map(|(i, &c)| (i, q(c))).collect();
        let heavy = cl.iter().filter(|(_, c)| *c >= q(th)).count();
        match guess_r0(&cl, &q(th), 8, 8) {
            Ok(family) => {
                prop_assert_eq!(family.len(), 1usize << heavy);
                for s in family {
                    prop_assert!(s.iter().all(|&i| cl[i].1 >= q(th)));
                }
            }
            Err(_) => prop_assert!(heavy > 8),
        }
    }

    #[test]
    fn every_candidate_has_k_centers(seed in 0u64..1000) {
        let inst = generate_random_instance(seed, 7, 6, 20);
        let k = 1 + (seed % 4) as usize;
        let mut cfg = StableConfig::default();
        cfg.caps.restarts = Some(1);
        cfg.caps.candidates = 200;
        let sol = run_stable(&inst, k, &qf(1, 8), seed, &cfg).unwrap();
        prop_assert_eq!(sol.centers.len(), k);
        prop_assert_eq!(cost_regular(&inst, &sol.centers), sol.cost.clone());
        prop_assert!(sol.cost <= sol.local_cost);
    }
}

#[test]
fn all_facilities_when_k_is_m() {
    let inst = generate_random_instance(8, 6, 4, 20);
    let sol = run_stable(&inst, 4, &qf(1, 8), 1, &StableConfig::default()).unwrap();
    assert_eq!(sol.centers, vec![0, 1, 2, 3]);
}

#[test]
fn same_seed_same_result_serial_or_parallel() {
    let (si, k) = planted(4);
    let mut cfg = StableConfig::default();
    cfg.caps.restarts = Some(3);
    cfg.oracle = Some(OracleGuesses { local: Some(spoiled_start(&si)), ..Default::default() });
    let a = run_stable(&si.instance, k, &qf(1, 8), 9, &cfg).unwrap();
    let b = run_stable(&si.instance, k, &qf(1, 8), 9, &cfg).unwrap();
    cfg.parallel = true;
    let c = run_stable(&si.instance, k, &qf(1, 8), 9, &cfg).unwrap();
    let js = |s: &StableSolution| serde_json::to_string(s).unwrap();
    assert_eq!(js(&a), js(&b));
    assert_eq!(js(&a), js(&c));
}

#[test]
fn planted_corpus() {
    criterion_stable();
}
