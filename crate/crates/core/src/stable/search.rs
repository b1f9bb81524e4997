//! Single-swap local search and D-sampling.

use num_bigint::BigInt;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::StableError;
use crate::metric::MetricInstance;
use crate::num::{to_f64, Q};
use crate::scaled::ScaledMetric;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalSearchMode {
    /// Any strict decrease; terminates because scaled costs are integers.
    #[default]
    Strict,
    /// Only swaps reaching `(1 − ε/(5k))·cost`.
    Threshold,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalSearchOutcome {
    /// Facility indices, sorted.
    pub centers: Vec<usize>,
    pub cost: i128,
    pub swaps: usize,
}

fn accepts(mode: LocalSearchMode, new: i128, cur: i128, k: usize, epsilon: &Q) -> bool {
    match mode {
        LocalSearchMode::Strict => new < cur,
        LocalSearchMode::Threshold => {
            let five_k = BigInt::from(5 * k as u64);
            let (num, den) = (epsilon.numer(), epsilon.denom());
            BigInt::from(new) * &five_k * den <= BigInt::from(cur) * (&five_k * den - num)
        }
    }
}

/// Cost of every single swap `(position in centers, facility)`, best first by
/// `(cost, position, facility)`.
fn best_swap(metric: &ScaledMetric, centers: &[usize]) -> Option<(i128, usize, usize)> {
    let n = metric.n();
    let pts: Vec<usize> = centers.iter().map(|&i| metric.fac(i)).collect();
    // nearest and second nearest center per client
    let near: Vec<(i128, usize, i128)> = (0..n)
        .map(|p| {
            let mut b = (i128::MAX, usize::MAX, i128::MAX);
            for (t, &c) in pts.iter().enumerate() {
                let d = metric.d(p, c);
                if d < b.0 {
                    b = (d, t, b.0);
                } else if d < b.2 {
                    b.2 = d;
                }
            }
            b
        })
        .collect();
    let mut best: Option<(i128, usize, usize)> = None;
    for out in 0..centers.len() {
        for i in 0..metric.m() {
            if centers.contains(&i) {
                continue;
            }
            let c = metric.fac(i);
            let cost: i128 = near
                .iter()
                .enumerate()
                .map(|(p, &(d1, t, d2))| {
                    let keep = if t == out { d2 } else { d1 };
                    keep.min(metric.d(p, c))
                })
                .sum();
            if best.is_none_or(|b| (cost, out, i) < b) {
                best = Some((cost, out, i));
            }
        }
    }
    best
}

/// Starts from the `k` lowest-index facilities and applies the best swap while it is accepted.
pub fn local_search_scaled(
    metric: &ScaledMetric,
    k: usize,
    epsilon: &Q,
    mode: LocalSearchMode,
) -> Result<LocalSearchOutcome, StableError> {
    if k == 0 || k > metric.m() {
        return Err(StableError::BadK { k, m: metric.m() });
    }
    let mut centers: Vec<usize> = (0..k).collect();
    let pts = |c: &[usize]| c.iter().map(|&i| metric.fac(i)).collect::<Vec<_>>();
    let mut cost = metric.cost(&pts(&centers)).expect("k ≥ 1");
    let mut swaps = 0;
    while let Some((new, out, i)) = best_swap(metric, &centers) {
        if !accepts(mode, new, cost, k, epsilon) {
            break;
        }
        centers[out] = i;
        cost = new;
        swaps += 1;
    }
    centers.sort_unstable();
    Ok(LocalSearchOutcome { centers, cost, swaps })
}

pub fn local_search(
    inst: &MetricInstance,
    k: usize,
    epsilon: &Q,
    mode: LocalSearchMode,
) -> Result<(LocalSearchOutcome, ScaledMetric), StableError> {
    let metric = ScaledMetric::new(inst)?;
    let out = local_search_scaled(&metric, k, epsilon, mode)?;
    Ok((out, metric))
}

/// Theory sample size `5·ln n/ε⁵ · ln(5/ε²)`, natural logs.
pub fn s_star(n: usize, epsilon: &Q) -> f64 {
    let e = to_f64(epsilon);
    5.0 * (n.max(1) as f64).ln() / e.powi(5) * (5.0 / (e * e)).ln()
}

/// `s` independent draws of clients with probability `d(p,S)/cost(S)`; empty when the
/// cost is zero. `centers` are point ids.
pub fn d_sample_scaled<R: Rng>(metric: &ScaledMetric, centers: &[usize], s: usize, rng: &mut R) -> Vec<usize> {
    let w: Vec<i128> = (0..metric.n()).map(|p| metric.dist_to(p, centers).unwrap_or(0)).collect();
    let total: i128 = w.iter().sum();
    if total == 0 {
        return Vec::new();
    }
    (0..s)
        .map(|_| {
            let mut r = rng.gen_range(0..total);
            w.iter()
                .position(|&x| {
                    if r < x {
                        true
                    } else {
                        r -= x;
                        false
                    }
                })
                .expect("draw below the total")
        })
        .collect()
}

/// Seeded wrapper over regular facility indices.
pub fn d_sample(inst: &MetricInstance, centers: &[usize], s: usize, seed: u64) -> Result<Vec<usize>, StableError> {
    use rand::SeedableRng;
    let metric = ScaledMetric::new(inst)?;
    let pts: Vec<usize> = centers.iter().map(|&i| metric.fac(i)).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Ok(d_sample_scaled(&metric, &pts, s, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::generate_random_instance;
    use crate::num::qf;
    use crate::oracle::cost_regular;

    #[test]
    fn all_facilities_when_k_is_m() {
        let inst = generate_random_instance(4, 6, 3, 20);
        let (out, _) = local_search(&inst, 3, &qf(1, 8), LocalSearchMode::Strict).unwrap();
        assert_eq!(out.centers, vec![0, 1, 2]);
        assert_eq!(out.swaps, 0);
    }

    #[test]
    fn threshold_mode_stops_no_later_than_strict() {
        for seed in 0..20 {
            let inst = generate_random_instance(seed, 8, 6, 30);
            let (a, m) = local_search(&inst, 2, &qf(1, 2), LocalSearchMode::Threshold).unwrap();
            let (b, _) = local_search(&inst, 2, &qf(1, 2), LocalSearchMode::Strict).unwrap();
            assert!(a.swaps <= b.swaps || a.cost >= b.cost);
            assert_eq!(m.to_q(a.cost), cost_regular(&inst, &a.centers));
        }
    }

    #[test]
    fn single_costly_client_is_always_drawn() {
        use crate::num::q;
        // clients at 0, 0, 5 and one facility at 0
        let xs = [0i64, 0, 5, 0];
        let t = xs.iter().map(|a| xs.iter().map(|b| q((a - b).abs())).collect()).collect();
        let inst = MetricInstance::new(3, 1, t).unwrap();
        assert_eq!(d_sample(&inst, &[0], 6, 3).unwrap(), vec![2; 6]);
    }
}
