//! Exact linear feasibility by a dense phase-1 simplex with Bland's rule.
//!
//! Coefficients are always rationals. Right-hand sides and bounds are generic over
//! [`LpValue`] so a caller can carry values that are affine in a symbolic parameter and
//! only resolve signs exactly, which keeps huge rationals out of the pivoting.

use std::cmp::Ordering;
use std::fmt::Debug;

use num_traits::{Signed, Zero};

use crate::num::Q;

pub trait LpValue: Clone + Debug {
    fn zero_like(&self) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn scale(&self, c: &Q) -> Self;
    /// Sign relative to zero.
    fn sign(&self) -> Ordering;

    fn cmp_value(&self, other: &Self) -> Ordering {
        self.sub(other).sign()
    }
}

impl LpValue for Q {
    fn zero_like(&self) -> Self {
        Q::zero()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn scale(&self, c: &Q) -> Self {
        self * c
    }
    fn sign(&self) -> Ordering {
        if self.is_positive() {
            Ordering::Greater
        } else if self.is_negative() {
            Ordering::Less
        } else {
            Ordering::Equal
        }
    }
    fn cmp_value(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Variable<V> {
    pub name: String,
    pub lower: V,
    pub upper: V,
}

#[derive(Clone, Debug)]
pub struct Row<V> {
    pub coeffs: Vec<(usize, Q)>,
    pub relation: Relation,
    pub rhs: V,
}

#[derive(Clone, Debug)]
pub struct LinearSystem<V = Q> {
    pub variables: Vec<Variable<V>>,
    pub rows: Vec<Row<V>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("row {row} references undeclared variable {var}")]
    UnknownVariable { row: usize, var: usize },
    #[error("variable {0} has lower bound above upper bound")]
    EmptyBox(String),
    #[error("simplex reported an unbounded phase-1 direction")]
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility<V> {
    Feasible(Vec<V>),
    Infeasible,
}

impl<V> Feasibility<V> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

impl<V: LpValue> Default for LinearSystem<V> {
    fn default() -> Self {
        LinearSystem { variables: Vec::new(), rows: Vec::new() }
    }
}

impl<V: LpValue> LinearSystem<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: V, upper: V) -> usize {
        self.variables.push(Variable { name: name.into(), lower, upper });
        self.variables.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, Q)>, relation: Relation, rhs: V) {
        self.rows.push(Row { coeffs, relation, rhs });
    }

    pub fn validate(&self) -> Result<(), LpError> {
        for (r, row) in self.rows.iter().enumerate() {
            if let Some(&(var, _)) = row.coeffs.iter().find(|(v, _)| *v >= self.variables.len()) {
                return Err(LpError::UnknownVariable { row: r, var });
            }
        }
        for v in &self.variables {
            if v.lower.cmp_value(&v.upper) == Ordering::Greater {
                return Err(LpError::EmptyBox(v.name.clone()));
            }
        }
        Ok(())
    }

    /// Exact re-substitution of an assignment into every bound and row.
    pub fn satisfied_by(&self, x: &[V]) -> bool {
        if x.len() != self.variables.len() {
            return false;
        }
        for (v, val) in self.variables.iter().zip(x) {
            if val.cmp_value(&v.lower) == Ordering::Less || val.cmp_value(&v.upper) == Ordering::Greater {
                return false;
            }
        }
        self.rows.iter().all(|row| {
            let zero = row.rhs.zero_like();
            let lhs = row.coeffs.iter().fold(zero, |acc, (v, c)| acc.add(&x[*v].scale(c)));
            let ord = lhs.cmp_value(&row.rhs);
            match row.relation {
                Relation::Le => ord != Ordering::Greater,
                Relation::Ge => ord != Ordering::Less,
                Relation::Eq => ord == Ordering::Equal,
            }
        })
    }
}

struct Tableau<V> {
    a: Vec<Vec<Q>>,
    rhs: Vec<V>,
    basis: Vec<usize>,
    reduced: Vec<Q>,
    objective: V,
}

impl<V: LpValue> Tableau<V> {
    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.a[r][j].clone();
        let inv = Q::from_integer(1.into()) / &piv;
        let nz: Vec<usize> = (0..self.a[r].len()).filter(|&c| !self.a[r][c].is_zero()).collect();
        for &c in &nz {
            self.a[r][c] *= &inv;
        }
        self.rhs[r] = self.rhs[r].scale(&inv);
        let prow: Vec<(usize, Q)> = nz.iter().map(|&c| (c, self.a[r][c].clone())).collect();
        let prhs = self.rhs[r].clone();
        for s in 0..self.a.len() {
            if s == r || self.a[s][j].is_zero() {
                continue;
            }
            let factor = self.a[s][j].clone();
            for (c, v) in &prow {
                let delta = v * &factor;
                self.a[s][*c] -= delta;
            }
            self.rhs[s] = self.rhs[s].sub(&prhs.scale(&factor));
        }
        if !self.reduced[j].is_zero() {
            let factor = self.reduced[j].clone();
            for (c, v) in &prow {
                let delta = v * &factor;
                self.reduced[*c] -= delta;
            }
            self.objective = self.objective.add(&prhs.scale(&factor));
        }
        self.basis[r] = j;
    }
}

pub fn solve_feasibility<V: LpValue>(sys: &LinearSystem<V>) -> Result<Feasibility<V>, LpError> {
    sys.validate()?;
    let nv = sys.variables.len();
    let zero = match (sys.variables.first(), sys.rows.first()) {
        (Some(v), _) => v.lower.zero_like(),
        (None, Some(r)) => r.rhs.zero_like(),
        (None, None) => return Ok(Feasibility::Feasible(Vec::new())),
    };
    if nv == 0 {
        let ok = sys.rows.iter().all(|r| match r.relation {
            Relation::Le => r.rhs.sign() != Ordering::Less,
            Relation::Ge => r.rhs.sign() != Ordering::Greater,
            Relation::Eq => r.rhs.sign() == Ordering::Equal,
        });
        return Ok(if ok { Feasibility::Feasible(Vec::new()) } else { Feasibility::Infeasible });
    }

    // Shift every variable to y = x - lower >= 0 and turn upper bounds into rows.
    let mut rows: Vec<(Vec<Q>, Relation, V)> = Vec::with_capacity(sys.rows.len() + nv);
    for row in &sys.rows {
        let mut dense = vec![Q::zero(); nv];
        let mut rhs = row.rhs.clone();
        for (v, c) in &row.coeffs {
            dense[*v] += c;
        }
        for (v, c) in dense.iter().enumerate() {
            if !c.is_zero() {
                rhs = rhs.sub(&sys.variables[v].lower.scale(c));
            }
        }
        rows.push((dense, row.relation, rhs));
    }
    for (v, var) in sys.variables.iter().enumerate() {
        let mut dense = vec![Q::zero(); nv];
        dense[v] = Q::from_integer(1.into());
        rows.push((dense, Relation::Le, var.upper.sub(&var.lower)));
    }
    for (a, rel, rhs) in rows.iter_mut() {
        if rhs.sign() == Ordering::Less {
            for c in a.iter_mut() {
                *c = -c.clone();
            }
            *rhs = rhs.scale(&Q::from_integer((-1).into()));
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = nv + n_slack + n_art;
    let one = Q::from_integer(1.into());
    let mut t = Tableau {
        a: Vec::with_capacity(rows.len()),
        rhs: Vec::with_capacity(rows.len()),
        basis: Vec::with_capacity(rows.len()),
        reduced: vec![Q::zero(); cols],
        objective: zero.clone(),
    };
    let (mut next_slack, mut next_art) = (nv, nv + n_slack);
    for (a, rel, rhs) in rows {
        let mut full = a;
        full.resize(cols, Q::zero());
        match rel {
            Relation::Le => {
                full[next_slack] = one.clone();
                t.basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                full[next_slack] = -one.clone();
                next_slack += 1;
                full[next_art] = one.clone();
                t.basis.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                full[next_art] = one.clone();
                t.basis.push(next_art);
                next_art += 1;
            }
        }
        t.a.push(full);
        t.rhs.push(rhs);
    }
    let art_start = nv + n_slack;
    for r in 0..t.a.len() {
        if t.basis[r] >= art_start {
            for c in 0..art_start {
                if !t.a[r][c].is_zero() {
                    let v = t.a[r][c].clone();
                    t.reduced[c] -= v;
                }
            }
            t.objective = t.objective.add(&t.rhs[r]);
        }
    }

    loop {
        let Some(j) = (0..cols).find(|&c| t.reduced[c].is_negative()) else {
            break;
        };
        let mut best: Option<(usize, V)> = None;
        for r in 0..t.a.len() {
            if !t.a[r][j].is_positive() {
                continue;
            }
            let ratio = t.rhs[r].scale(&(&one / &t.a[r][j]));
            let better = match &best {
                None => true,
                Some((br, bv)) => match ratio.cmp_value(bv) {
                    Ordering::Less => true,
                    Ordering::Equal => t.basis[r] < t.basis[*br],
                    Ordering::Greater => false,
                },
            };
            if better {
                best = Some((r, ratio));
            }
        }
        let Some((r, _)) = best else {
            return Err(LpError::Unbounded);
        };
        t.pivot(r, j);
    }

    if t.objective.sign() == Ordering::Greater {
        return Ok(Feasibility::Infeasible);
    }
    let mut y = vec![zero; nv];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < nv {
            y[b] = t.rhs[r].clone();
        }
    }
    let x = y.iter().zip(&sys.variables).map(|(yv, var)| var.lower.add(yv)).collect();
    Ok(Feasibility::Feasible(x))
}
