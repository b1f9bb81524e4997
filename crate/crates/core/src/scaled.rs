//! Distances multiplied by a common denominator so that the search stages of the
//! stable pipeline run on machine integers. Every value is exact.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};

use crate::metric::MetricInstance;
use crate::num::{gcd_lcm_denoms, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScaleError {
    #[error("scaled distances do not fit in 128-bit integers")]
    Overflow,
}

/// Clients are points `0..n`; every other point is a facility. Dummy centers are
/// appended after the regular facilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledMetric {
    n: usize,
    m: usize,
    size: usize,
    dist: Vec<i128>,
    scale: BigInt,
}

impl ScaledMetric {
    pub fn new(inst: &MetricInstance) -> Result<Self, ScaleError> {
        let size = inst.points();
        let table = inst.table();
        let scale = gcd_lcm_denoms(table.iter().flatten());
        // head room for sums of n distances and for dummy rows
        let limit = i128::MAX / (4 * (size as i128 + 1) * (size as i128 + 1));
        let mut dist = Vec::with_capacity(size * size);
        for row in &table {
            for x in row {
                let v =
                    (x.numer() * (&scale / x.denom())).to_i128().filter(|v| *v <= limit).ok_or(ScaleError::Overflow)?;
                dist.push(v);
            }
        }
        Ok(ScaledMetric { n: inst.n(), m: inst.m(), size, dist, scale })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Regular facilities only.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn points(&self) -> usize {
        self.size
    }

    pub fn scale(&self) -> &BigInt {
        &self.scale
    }

    pub fn d(&self, a: usize, b: usize) -> i128 {
        self.dist[a * self.size + b]
    }

    /// Point id of regular facility `i`.
    pub fn fac(&self, i: usize) -> usize {
        self.n + i
    }

    pub fn to_q(&self, v: i128) -> Q {
        Q::new(BigInt::from(v), self.scale.clone())
    }

    /// Exact scaled value of `x`, if its denominator divides the scale.
    pub fn from_q(&self, x: &Q) -> Option<i128> {
        let r = x * Q::from_integer(self.scale.clone());
        r.denom().is_one().then(|| r.numer().to_i128()).flatten()
    }

    /// `min_{c ∈ centers} d(p, c)`; `None` for an empty set.
    pub fn dist_to(&self, p: usize, centers: &[usize]) -> Option<i128> {
        centers.iter().map(|&c| self.d(p, c)).min()
    }

    pub fn cost(&self, centers: &[usize]) -> Option<i128> {
        (0..self.n).map(|p| self.dist_to(p, centers)).sum()
    }

    /// Appends one dummy center per `(leader client, radius)`: at distance `ρ` from its
    /// leader and `ρ + d(ℓ, x)` from every other point. Returns the new point ids.
    pub fn with_dummies(&self, balls: &[(usize, i128)]) -> (ScaledMetric, Vec<usize>) {
        let old = self.size;
        let size = old + balls.len();
        let mut dist = vec![0i128; size * size];
        for a in 0..old {
            dist[a * size..a * size + old].copy_from_slice(&self.dist[a * old..(a + 1) * old]);
        }
        for (t, &(l, rho)) in balls.iter().enumerate() {
            let a = old + t;
            for x in 0..old {
                let v = rho + self.d(l, x);
                dist[a * size + x] = v;
                dist[x * size + a] = v;
            }
            for (t2, &(l2, rho2)) in balls.iter().enumerate() {
                if t2 != t {
                    dist[a * size + old + t2] = rho + self.d(l, l2) + rho2;
                }
            }
        }
        let ids = (old..size).collect();
        (ScaledMetric { n: self.n, m: self.m, size, dist, scale: self.scale.clone() }, ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::generate_random_instance;
    use crate::num::{q, qf};

    #[test]
    fn scaling_round_trips() {
        let inst = MetricInstance::new(
            1,
            2,
            vec![vec![q(0), qf(1, 2), qf(2, 3)], vec![qf(1, 2), q(0), qf(1, 6)], vec![qf(2, 3), qf(1, 6), q(0)]],
        )
        .unwrap();
        let s = ScaledMetric::new(&inst).unwrap();
        assert_eq!(s.scale(), &BigInt::from(6));
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(&s.to_q(s.d(a, b)), inst.d(a, b));
            }
        }
        assert_eq!(s.from_q(&qf(1, 3)), Some(2));
        assert_eq!(s.from_q(&qf(1, 4)), None);
    }

    #[test]
    fn cost_matches_rational_cost() {
        let inst = generate_random_instance(5, 6, 4, 20);
        let s = ScaledMetric::new(&inst).unwrap();
        let set = [1usize, 3];
        let pts: Vec<usize> = set.iter().map(|&i| s.fac(i)).collect();
        assert_eq!(s.to_q(s.cost(&pts).unwrap()), crate::oracle::cost_regular(&inst, &set));
    }
}
