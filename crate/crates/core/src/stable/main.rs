//! Combination driver: a pseudo-solution with a few surplus centers at a reduced `k`,
//! plus the stable pipeline at every count between the reduced and the target `k`.

use serde::{Deserialize, Serialize};

use super::{run_stable, StableConfig, StableError, StableSolution};
use crate::merge::{run_pseudo_approx, MergeConfig, PseudoSolution};
use crate::metric::MetricInstance;
use crate::num::Q;
use crate::oracle::cost_regular;

#[derive(Clone, Debug, Default)]
pub struct MainConfig {
    pub stable: StableConfig,
    pub merge: MergeConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MainSource {
    /// Base facilities of the pseudo-solution at `k_reduced`, padded.
    Pseudo {
        k_reduced: usize,
        surplus: usize,
    },
    Stable {
        k_run: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MainSolution {
    pub centers: Vec<usize>,
    #[serde(with = "crate::num::serde_q")]
    pub cost: Q,
    pub source: MainSource,
    /// Reduced target and the surplus its pseudo-solution used; `None` when no reduced
    /// target fits.
    pub k_reduced: Option<usize>,
    pub surplus: Option<usize>,
    #[serde(with = "crate::num::serde_q_opt")]
    pub pseudo_cost: Option<Q>,
    /// Why the pseudo path was abandoned, if it was.
    pub pseudo_error: Option<String>,
    pub stable_runs: Vec<(usize, StableSolution)>,
    pub partial: bool,
}

/// Pads `centers` with the lowest-index unused facilities up to `k`.
pub fn pad_centers(mut centers: Vec<usize>, k: usize, m: usize) -> Vec<usize> {
    centers.sort_unstable();
    centers.dedup();
    let mut i = 0;
    while centers.len() < k && i < m {
        if !centers.contains(&i) {
            centers.push(i);
        }
        i += 1;
    }
    centers.sort_unstable();
    centers
}

/// Largest reduced target whose pseudo-solution fits within `k` centers.
fn reduced_target(
    inst: &MetricInstance,
    k: usize,
    epsilon: &Q,
    config: &MergeConfig,
) -> Result<Option<(usize, PseudoSolution)>, StableError> {
    let mut kr = k;
    loop {
        let p = run_pseudo_approx(inst, kr, epsilon, config)?;
        let surplus = p.free_count;
        if kr + surplus <= k {
            return Ok(Some((kr, p)));
        }
        let next = (kr - 1).min(k.saturating_sub(surplus));
        if next < 1 {
            return Ok(None);
        }
        kr = next;
    }
}

pub fn run_main(
    inst: &MetricInstance,
    k: usize,
    epsilon: &Q,
    seed: u64,
    config: &MainConfig,
) -> Result<MainSolution, StableError> {
    let m = inst.m();
    if k == 0 || k > m {
        return Err(StableError::BadK { k, m });
    }
    let (reduced, pseudo_error) = match reduced_target(inst, k, epsilon, &config.merge) {
        Ok(r) => (r, None),
        Err(StableError::Merge(e)) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let mut best: Option<(Q, Vec<usize>, MainSource)> = None;
    let mut consider = |cost: Q, centers: Vec<usize>, source: MainSource| {
        let better = match &best {
            None => true,
            Some((c, s, _)) => (&cost, &centers) < (c, s),
        };
        if better {
            best = Some((cost, centers, source));
        }
    };
    let mut pseudo_cost = None;
    let (k_reduced, surplus, from) = match &reduced {
        Some((kr, p)) => {
            let bases: Vec<usize> = p.open_set.iter().map(|h| h.base()).collect();
            let centers = pad_centers(bases, k, m);
            let cost = cost_regular(inst, &centers);
            pseudo_cost = Some(p.cost.clone());
            consider(cost, centers, MainSource::Pseudo { k_reduced: *kr, surplus: p.free_count });
            (Some(*kr), Some(p.free_count), kr + 1)
        }
        None => (None, None, k),
    };
    let mut stable_runs = Vec::new();
    for kk in from..=k {
        let sol = run_stable(inst, kk, epsilon, seed, &config.stable)?;
        let centers = pad_centers(sol.centers.clone(), k, m);
        consider(cost_regular(inst, &centers), centers, MainSource::Stable { k_run: kk });
        stable_runs.push((kk, sol));
    }
    let (cost, centers, source) = best.expect("at least one candidate");
    let partial = stable_runs.iter().any(|(_, s)| s.partial);
    Ok(MainSolution { centers, cost, source, k_reduced, surplus, pseudo_cost, pseudo_error, stable_runs, partial })
}
