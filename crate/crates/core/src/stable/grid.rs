//! Radius grids `(1+ε³)^i` with exact integer exponents, negative ones included.

use num_traits::{One, Zero};

use crate::num::{ceil_log, pow_q, Q};

pub fn pow_i(base: &Q, e: i64) -> Q {
    if e >= 0 {
        pow_q(base, e as u64)
    } else {
        pow_q(base, e.unsigned_abs()).recip()
    }
}

/// Largest `e ≥ 0` with `base^e ≤ y`, for `y ≥ 1`.
fn floor_log(base: &Q, y: &Q) -> u64 {
    let c = ceil_log(base, y);
    if pow_q(base, c) == *y {
        c
    } else {
        c - 1
    }
}

/// Smallest integer `e` with `base^e ≥ x`, for `x > 0` and `base > 1`.
pub fn exp_at_least(base: &Q, x: &Q) -> i64 {
    debug_assert!(!x.is_zero());
    if *x > Q::one() {
        ceil_log(base, x) as i64
    } else {
        -(floor_log(base, &x.recip()) as i64)
    }
}

/// Largest integer `e` with `base^e ≤ y`, for `y > 0` and `base > 1`.
pub fn exp_at_most(base: &Q, y: &Q) -> i64 {
    debug_assert!(!y.is_zero());
    if *y >= Q::one() {
        floor_log(base, y) as i64
    } else {
        -(ceil_log(base, &y.recip()) as i64)
    }
}

/// Exponent range of the grid points in `[ε³·s, s/ε³]`; empty when `s = 0`.
pub fn grid_exponents(s: &Q, epsilon: &Q) -> Option<(i64, i64)> {
    if s.is_zero() {
        return None;
    }
    let e3 = epsilon * epsilon * epsilon;
    let base = Q::one() + &e3;
    let lo = exp_at_least(&base, &(s * &e3));
    let hi = exp_at_most(&base, &(s / &e3));
    (lo <= hi).then_some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{q, qf};

    #[test]
    fn exponents_bracket_exactly() {
        let base = qf(9, 8);
        for x in [qf(1, 8), qf(1, 3), q(1), qf(9, 8), q(8), qf(81, 64)] {
            let e = exp_at_least(&base, &x);
            assert!(pow_i(&base, e) >= x);
            assert!(pow_i(&base, e - 1) < x);
            let f = exp_at_most(&base, &x);
            assert!(pow_i(&base, f) <= x);
            assert!(pow_i(&base, f + 1) > x);
        }
    }

    #[test]
    fn half_epsilon_unit_cost_grid() {
        // powers of 9/8 inside [1/8, 8]
        let (lo, hi) = grid_exponents(&q(1), &qf(1, 2)).unwrap();
        assert_eq!((lo, hi), (-17, 17));
        let count = (-40..40)
            .filter(|&e| {
                let v = pow_i(&qf(9, 8), e);
                v >= qf(1, 8) && v <= q(8)
            })
            .count();
        assert_eq!(count as i64, hi - lo + 1);
    }
}
