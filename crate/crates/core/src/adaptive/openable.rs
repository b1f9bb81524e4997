//! Openability as an exact linear feasibility problem.
//!
//! Right-hand sides are affine in θ, so the simplex pivots on small rationals and only
//! sign decisions look at the (possibly enormous) value of θ.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{Signed, Zero};

use super::{Ctx, DualState};
use crate::lp::{solve_feasibility, Feasibility, LinearSystem, LpValue, Relation};
use crate::metric::FacilityRef;
use crate::num::{q, Ext, Q};

/// `c + t·θ` for one fixed θ.
#[derive(Clone, Debug)]
pub struct Affine {
    pub c: Q,
    pub t: Q,
    theta: Arc<Q>,
}

impl Affine {
    pub fn new(c: Q, t: Q, theta: &Arc<Q>) -> Self {
        Affine { c, t, theta: Arc::clone(theta) }
    }

    pub fn constant(c: Q, theta: &Arc<Q>) -> Self {
        Affine::new(c, Q::zero(), theta)
    }

    /// `θ − c`
    pub fn theta_minus(c: &Q, theta: &Arc<Q>) -> Self {
        Affine::new(-c, q(1), theta)
    }

    pub fn eval(&self) -> Q {
        if self.t.is_zero() {
            self.c.clone()
        } else {
            &self.c + &self.t * &*self.theta
        }
    }

    pub fn positive_part(&self) -> Self {
        if self.sign() == Ordering::Greater {
            self.clone()
        } else {
            self.zero_like()
        }
    }

    pub fn is_positive(&self) -> bool {
        self.sign() == Ordering::Greater
    }
}

impl LpValue for Affine {
    fn zero_like(&self) -> Self {
        Affine::constant(Q::zero(), &self.theta)
    }
    fn add(&self, other: &Self) -> Self {
        Affine::new(&self.c + &other.c, &self.t + &other.t, &self.theta)
    }
    fn sub(&self, other: &Self) -> Self {
        Affine::new(&self.c - &other.c, &self.t - &other.t, &self.theta)
    }
    fn scale(&self, c: &Q) -> Self {
        Affine::new(&self.c * c, &self.t * c, &self.theta)
    }
    fn sign(&self) -> Ordering {
        if self.t.is_zero() {
            return self.c.sign_ord();
        }
        // c + tθ = t(θ − root)
        let root = -(&self.c / &self.t);
        let ord = (*self.theta).cmp(&root);
        if self.t.is_positive() {
            ord
        } else {
            ord.reverse()
        }
    }
}

trait SignOrd {
    fn sign_ord(&self) -> Ordering;
}

impl SignOrd for Q {
    fn sign_ord(&self) -> Ordering {
        LpValue::sign(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Openability {
    /// Bids for every active client.
    Feasible(BTreeMap<usize, Q>),
    NotOpenable,
}

impl Openability {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Openability::Feasible(_))
    }
}

/// Per-facility view of a state: ball/far split of the active clients and bid caps.
struct View<'c, 'a> {
    ctx: &'c Ctx<'a>,
    st: &'c DualState,
    i: FacilityRef,
    theta: Arc<Q>,
    ball: Vec<usize>,
    far: Vec<usize>,
    inactive: Vec<usize>,
    /// Bid cap of each ball client, parallel to `ball`.
    cap: Vec<Affine>,
}

impl<'c, 'a> View<'c, 'a> {
    fn new(ctx: &'c Ctx<'a>, st: &'c DualState, i: FacilityRef) -> Self {
        let theta = Arc::new(st.theta.clone());
        let radius = ctx.params.epsilon() * &st.theta;
        let (mut ball, mut far) = (Vec::new(), Vec::new());
        for j in st.active_clients() {
            if ctx.dist(j, &i) <= radius {
                ball.push(j);
            } else {
                far.push(j);
            }
        }
        let boosted = &ctx.boost * &st.theta;
        let cap = ball
            .iter()
            .map(|&j| match st.kept_dist(ctx, j) {
                Ext::Fin(kd) if kd < boosted => Affine::constant(kd, &theta),
                _ => Affine::new(Q::zero(), ctx.boost.clone(), &theta),
            })
            .collect();
        View { ctx, st, i, theta, ball, far, inactive: st.inactive_clients(), cap }
    }

    fn aff(&self, c: Q) -> Affine {
        Affine::constant(c, &self.theta)
    }

    fn theta_minus(&self, c: &Q) -> Affine {
        Affine::theta_minus(c, &self.theta)
    }

    /// `(1−δ)·Σ_{j∈I}[d(j,S) − d(i,j)]⁺`
    fn inactive_credit(&self) -> Q {
        let mut acc = Q::zero();
        for &j in &self.inactive {
            if let Ext::Fin(ds) = &self.st.dist_s[j] {
                let gap = ds - self.ctx.dist(j, &self.i);
                if gap.is_positive() {
                    acc += gap;
                }
            }
        }
        acc * &self.ctx.keep
    }

    /// Payment with every ball bid at θ.
    fn base_payment(&self) -> Affine {
        let keep = &self.ctx.keep;
        let mut acc = self.aff(self.inactive_credit());
        for &j in &self.ball {
            acc = acc.add(&self.theta_minus(&(keep * self.ctx.dist(j, &self.i))));
        }
        for &j in &self.far {
            acc = acc.add(&self.theta_minus(&(keep * self.ctx.dist(j, &self.i))).positive_part());
        }
        acc
    }

    /// Payment with every ball bid at its cap.
    fn max_payment(&self) -> Affine {
        let mut acc = self.base_payment();
        for c in &self.cap {
            acc = acc.add(c).sub(&Affine::new(Q::zero(), q(1), &self.theta));
        }
        acc
    }
}

/// Exact box test: can the payment bullet be met at all within the bid caps?
pub fn payment_possible(ctx: &Ctx, st: &DualState, i: FacilityRef, eta: &Q) -> bool {
    let v = View::new(ctx, st, i);
    v.max_payment().sub(&v.aff(ctx.pay_target(eta))).sign() != Ordering::Less
}

#[derive(Default)]
struct RowBuilder {
    coeffs: BTreeMap<usize, Q>,
}

impl RowBuilder {
    fn push(&mut self, var: usize, c: Q) {
        *self.coeffs.entry(var).or_insert_with(Q::zero) += c;
    }
    fn finish(self) -> Vec<(usize, Q)> {
        self.coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect()
    }
}

/// Decides η-openability of `i` in state `st`, returning bids when it is openable.
pub fn is_openable(ctx: &Ctx, st: &DualState, i: FacilityRef, eta: &Q) -> Openability {
    let v = View::new(ctx, st, i);
    let target = v.aff(ctx.pay_target(eta));
    if v.max_payment().sub(&target).sign() == Ordering::Less {
        return Openability::NotOpenable;
    }
    let fhat = v.aff(ctx.params.fhat().clone());
    let one = q(1);
    let mut sys: LinearSystem<Affine> = LinearSystem::new();
    // x_j = τ_j − θ for ball clients
    let xs: Vec<usize> = v
        .ball
        .iter()
        .zip(&v.cap)
        .map(|(j, cap)| {
            let ub = cap.sub(&Affine::new(Q::zero(), one.clone(), &v.theta));
            sys.add_var(format!("x{j}"), v.aff(Q::zero()), ub)
        })
        .collect();

    let deficit = target.sub(&v.base_payment());
    if deficit.is_positive() {
        sys.add_row(xs.iter().map(|&x| (x, one.clone())).collect(), Relation::Ge, deficit);
    }

    for i0 in 0..ctx.inst.m() {
        let r0 = FacilityRef::Regular(i0);
        let d0 = |j: usize| ctx.inst.cf(j, i0).clone();
        // A-part: constant, linear terms and window auxiliaries, plus its maximum
        let mut a_const = v.aff(Q::zero());
        let mut a_max = v.aff(Q::zero());
        let mut a_lin: Vec<(usize, Q)> = Vec::new();
        let mut a_windows: Vec<(usize, usize, Affine, Affine)> = Vec::new();
        for &j in &v.far {
            let term = v.theta_minus(&d0(j)).positive_part();
            a_const = a_const.add(&term);
            a_max = a_max.add(&term);
        }
        for (b, &j) in v.ball.iter().enumerate() {
            let dj = d0(j);
            let at_theta = v.theta_minus(&dj);
            let at_cap = v.cap[b].sub(&v.aff(dj.clone()));
            if at_theta.sign() != Ordering::Less {
                a_const = a_const.add(&at_theta);
                a_lin.push((xs[b], one.clone()));
                a_max = a_max.add(&at_cap);
            } else if at_cap.is_positive() {
                a_windows.push((b, j, at_theta, at_cap.clone()));
                a_max = a_max.add(&at_cap);
            }
        }

        // I-part maxima per k; c_j = 2d(j,i0) + d(k,i0)
        let breakpoints = |k: usize| -> Vec<Q> {
            let dk = d0(k);
            let mut cs: Vec<Q> = v.inactive.iter().map(|&j| q(2) * ctx.dist(j, &r0) + &dk).collect();
            cs.sort();
            cs
        };
        let far_phi = v
            .far
            .iter()
            .map(|&k| breakpoints(k).iter().fold(v.aff(Q::zero()), |acc, c| acc.add(&v.theta_minus(c).positive_part())))
            .max_by(|a, b| a.cmp_value(b));

        struct KRow {
            b: usize,
            lin_count: usize,
            lin_const: Affine,
            window: Vec<Q>,
            max: Affine,
        }
        let mut k_rows = Vec::new();
        for (b, &k) in v.ball.iter().enumerate() {
            let cs = breakpoints(k);
            let mut lin_count = 0usize;
            let mut lin_const = v.aff(Q::zero());
            let mut window = Vec::new();
            let mut max = v.aff(Q::zero());
            for c in cs {
                let at_theta = v.theta_minus(&c);
                let at_cap = v.cap[b].sub(&v.aff(c.clone()));
                if at_theta.sign() != Ordering::Less {
                    lin_count += 1;
                    lin_const = lin_const.add(&at_theta);
                    max = max.add(&at_cap);
                } else if at_cap.is_positive() {
                    max = max.add(&at_cap);
                    window.push(c);
                }
            }
            k_rows.push(KRow { b, lin_count, lin_const, window, max });
        }

        let row_needed = |i_max: &Affine| a_max.add(i_max).sub(&fhat).is_positive();
        let need_far = far_phi.as_ref().filter(|phi| row_needed(phi));
        let need_ball: Vec<&KRow> = k_rows.iter().filter(|r| row_needed(&r.max)).collect();
        if need_far.is_none() && need_ball.is_empty() {
            continue;
        }

        // materialize A-part auxiliaries once per i0
        let mut a_row = RowBuilder::default();
        for (x, c) in &a_lin {
            a_row.push(*x, c.clone());
        }
        for (b, j, at_theta, at_cap) in &a_windows {
            let t = sys.add_var(format!("a{i0}_{j}"), v.aff(Q::zero()), at_cap.clone());
            sys.add_row(vec![(t, one.clone()), (xs[*b], -one.clone())], Relation::Ge, at_theta.clone());
            a_row.push(t, one.clone());
        }
        let a_coeffs = a_row.coeffs;

        let emit = |extra: Vec<(usize, Q)>, constant: Affine, sys: &mut LinearSystem<Affine>| -> bool {
            let mut row = RowBuilder { coeffs: a_coeffs.clone() };
            for (x, c) in extra {
                row.push(x, c);
            }
            let coeffs = row.finish();
            let rhs = fhat.sub(&a_const).sub(&constant);
            if coeffs.is_empty() {
                return rhs.sign() != Ordering::Less;
            }
            sys.add_row(coeffs, Relation::Le, rhs);
            true
        };

        if let Some(phi) = need_far {
            if !emit(Vec::new(), phi.clone(), &mut sys) {
                return Openability::NotOpenable;
            }
        }
        for r in need_ball {
            let k = v.ball[r.b];
            let mut extra = vec![(xs[r.b], q(r.lin_count as i64))];
            if !r.window.is_empty() {
                let s_ub = r.window.iter().fold(v.aff(Q::zero()), |acc, c| acc.add(&v.cap[r.b].sub(&v.aff(c.clone()))));
                let s = sys.add_var(format!("s{i0}_{k}"), v.aff(Q::zero()), s_ub);
                let mut prefix = Q::zero();
                for (m, c) in r.window.iter().enumerate() {
                    prefix += c;
                    let cnt = q(m as i64 + 1);
                    // s ≥ Σ_{l≤m}(θ + x_k − c_l)
                    sys.add_row(
                        vec![(s, one.clone()), (xs[r.b], -cnt.clone())],
                        Relation::Ge,
                        Affine::new(-prefix.clone(), cnt, &v.theta),
                    );
                }
                extra.push((s, one.clone()));
            }
            if !emit(extra, r.lin_const.clone(), &mut sys) {
                return Openability::NotOpenable;
            }
        }
    }

    match solve_feasibility(&sys) {
        Ok(Feasibility::Feasible(x)) => {
            let mut tau = BTreeMap::new();
            for &j in &v.far {
                tau.insert(j, st.theta.clone());
            }
            for (b, &j) in v.ball.iter().enumerate() {
                tau.insert(j, &st.theta + x[xs[b]].eval());
            }
            Openability::Feasible(tau)
        }
        Ok(Feasibility::Infeasible) => Openability::NotOpenable,
        Err(e) => panic!("openability system is malformed: {e}"),
    }
}

/// Checks the four bullets for explicit bids, exactly; `Err` names the failing bullet.
pub fn check_bids(ctx: &Ctx, st: &DualState, i: FacilityRef, tau: &BTreeMap<usize, Q>, eta: &Q) -> Result<(), String> {
    let active = st.active_clients();
    if tau.len() != active.len() || active.iter().any(|j| !tau.contains_key(j)) {
        return Err("bids must cover exactly the active clients".into());
    }
    let radius = ctx.params.epsilon() * &st.theta;
    let boosted = &ctx.boost * &st.theta;
    for &j in &active {
        let t = &tau[&j];
        if ctx.dist(j, &i) <= radius {
            let cap = st.kept_dist(ctx, j).min_q(&boosted);
            if *t < st.theta || *t > cap {
                return Err(format!("bid of client {j} outside [θ, cap]"));
            }
        } else if *t != st.theta {
            return Err(format!("far client {j} changed its bid"));
        }
    }
    let keep = &ctx.keep;
    let mut pay = Q::zero();
    for &j in &active {
        let g = &tau[&j] - keep * ctx.dist(j, &i);
        if g.is_positive() {
            pay += g;
        }
    }
    let inactive = st.inactive_clients();
    for &j in &inactive {
        if let Ext::Fin(ds) = &st.dist_s[j] {
            let g = (ds - ctx.dist(j, &i)) * keep;
            if g.is_positive() {
                pay += g;
            }
        }
    }
    if pay < ctx.pay_target(eta) {
        return Err("payment below target".into());
    }
    let fhat = ctx.params.fhat();
    for i0 in 0..ctx.inst.m() {
        let mut a_part = Q::zero();
        for &j in &active {
            let g = &tau[&j] - ctx.inst.cf(j, i0);
            if g.is_positive() {
                a_part += g;
            }
        }
        for &k in &active {
            let base = &tau[&k] - ctx.inst.cf(k, i0);
            let mut total = a_part.clone();
            for &j in &inactive {
                let g = &base - q(2) * ctx.inst.cf(j, i0);
                if g.is_positive() {
                    total += g;
                }
            }
            if total > *fhat {
                return Err(format!("dual row for facility {i0}, client {k} exceeds f̂"));
            }
        }
    }
    Ok(())
}
