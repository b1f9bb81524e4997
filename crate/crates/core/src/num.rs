//! Exact rational helpers and the "p/q" string encoding used in every file format.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// `[x]⁺`
pub fn pos(x: Q) -> Q {
    if x.is_negative() {
        Q::zero()
    } else {
        x
    }
}

pub fn ceil_int(x: &Q) -> BigInt {
    x.ceil().to_integer()
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // numerator and denominator may each overflow f64 while the ratio does not
        let nb = x.numer().bits() as i64;
        let db = x.denom().bits() as i64;
        let shift = (nb.max(db) - 1000).max(0) as usize;
        let n = (x.numer() >> shift).to_f64().unwrap_or(f64::MAX);
        let d = (x.denom() >> shift).to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse rational from {0:?}")]
pub struct ParseRationalError(pub String);

/// Parses `"p/q"`, `"p"` or a finite decimal such as `"0.125"`.
pub fn parse_q(s: &str) -> Result<Q, ParseRationalError> {
    let t = s.trim();
    let err = || ParseRationalError(s.to_string());
    if let Some((a, b)) = t.split_once('/') {
        let n: BigInt = a.trim().parse().map_err(|_| err())?;
        let d: BigInt = b.trim().parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let neg = whole.starts_with('-');
        let w: BigInt =
            if whole.is_empty() || whole == "-" { BigInt::zero() } else { whole.parse().map_err(|_| err())? };
        let f: BigInt = frac.parse().map_err(|_| err())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let mag = w.abs() * &scale + f;
        let n = if neg { -mag } else { mag };
        return Ok(Q::new(n, scale));
    }
    let n: BigInt = t.parse().map_err(|_| err())?;
    Ok(Q::from_integer(n))
}

/// Always `"p/q"`, with `q = 1` for integers.
pub fn fmt_q(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// A rational extended with +∞, used for `d(j, ∅)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Ext {
    Fin(Q),
    Inf,
}

impl Ext {
    pub fn finite(&self) -> Option<&Q> {
        match self {
            Ext::Fin(x) => Some(x),
            Ext::Inf => None,
        }
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, Ext::Inf)
    }

    /// `self < x` for a finite `x`.
    pub fn lt_q(&self, x: &Q) -> bool {
        match self {
            Ext::Fin(v) => v < x,
            Ext::Inf => false,
        }
    }

    pub fn gt_q(&self, x: &Q) -> bool {
        match self {
            Ext::Fin(v) => v > x,
            Ext::Inf => true,
        }
    }

    pub fn min_q(&self, x: &Q) -> Q {
        match self {
            Ext::Fin(v) if v < x => v.clone(),
            _ => x.clone(),
        }
    }

    pub fn scale(&self, c: &Q) -> Ext {
        match self {
            Ext::Fin(v) => Ext::Fin(v * c),
            Ext::Inf => Ext::Inf,
        }
    }
}

impl PartialOrd for Ext {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ext {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Ext::Inf, Ext::Inf) => Ordering::Equal,
            (Ext::Inf, _) => Ordering::Greater,
            (_, Ext::Inf) => Ordering::Less,
            (Ext::Fin(a), Ext::Fin(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ext::Fin(x) => write!(f, "{}", fmt_q(x)),
            Ext::Inf => write!(f, "inf"),
        }
    }
}

/// Smallest integer `e ≥ 0` with `base^e ≥ target`, for `base > 1`.
pub fn ceil_log(base: &Q, target: &Q) -> u64 {
    if *target <= Q::one() {
        return 0;
    }
    let est = (to_f64(target).ln() / to_f64(base).ln()).ceil().max(0.0) as u64;
    let mut e = est.saturating_sub(2);
    let mut v = pow_q(base, e);
    while v < *target {
        v *= base;
        e += 1;
    }
    while e > 0 {
        let prev = &v / base;
        if prev >= *target {
            v = prev;
            e -= 1;
        } else {
            break;
        }
    }
    e
}

pub fn pow_q(base: &Q, e: u64) -> Q {
    let n = num_traits::pow(base.numer().clone(), e as usize);
    let d = num_traits::pow(base.denom().clone(), e as usize);
    // base is in lowest terms, so its powers are too
    Q::new_raw(n, d)
}

pub fn is_integer(x: &Q) -> bool {
    x.denom().is_one()
}

pub fn gcd_lcm_denoms<'a>(xs: impl IntoIterator<Item = &'a Q>) -> BigInt {
    xs.into_iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

/// serde adapters for `Q` as `"p/q"` strings.
pub mod serde_q {
    use super::*;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s).map_err(D::Error::custom)
    }
}

pub mod serde_q_vec {
    use super::*;
    use serde::{de::Error, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[Q], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&fmt_q(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| parse_q(s).map_err(D::Error::custom)).collect()
    }
}

pub mod serde_q_map {
    use super::*;
    use serde::{de::Error, ser::SerializeMap, Deserialize, Deserializer, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<K, S>(m: &BTreeMap<K, Q>, s: S) -> Result<S::Ok, S::Error>
    where
        K: serde::Serialize,
        S: Serializer,
    {
        let mut map = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            map.serialize_entry(k, &fmt_q(v))?;
        }
        map.end()
    }

    pub fn deserialize<'de, K, D>(d: D) -> Result<BTreeMap<K, Q>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        D: Deserializer<'de>,
    {
        let raw = BTreeMap::<K, String>::deserialize(d)?;
        raw.into_iter().map(|(k, v)| parse_q(&v).map(|x| (k, x)).map_err(D::Error::custom)).collect()
    }
}

pub mod serde_q_opt_map {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super::serde_q_map")] BTreeMap<usize, Q>);

    pub fn serialize<S: Serializer>(m: &Option<BTreeMap<usize, Q>>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(|x| Wrap(x.clone())).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BTreeMap<usize, Q>>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

pub mod serde_q_opt {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "super::serde_q")] Q);

    pub fn serialize<S: Serializer>(x: &Option<Q>, s: S) -> Result<S::Ok, S::Error> {
        x.as_ref().map(|v| Wrap(v.clone())).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Q>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_q("3/6").unwrap(), qf(1, 2));
        assert_eq!(parse_q("7").unwrap(), q(7));
        assert_eq!(parse_q("0.125").unwrap(), qf(1, 8));
        assert_eq!(parse_q("-1.5").unwrap(), qf(-3, 2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("x").is_err());
        assert_eq!(fmt_q(&q(4)), "4/1");
    }

    #[test]
    fn ext_order() {
        assert!(Ext::Inf > Ext::Fin(q(1_000_000)));
        assert!(Ext::Fin(q(1)) < Ext::Fin(q(2)));
        assert!(!Ext::Inf.lt_q(&q(5)));
        assert_eq!(Ext::Inf.min_q(&q(3)), q(3));
    }

    #[test]
    fn ceil_log_exact() {
        let b = qf(5, 4);
        assert_eq!(ceil_log(&b, &q(6)), 9);
        assert_eq!(ceil_log(&b, &q(1)), 0);
        assert_eq!(ceil_log(&b, &qf(5, 4)), 1);
        let b = qf(65, 64);
        let e = ceil_log(&b, &q(180));
        assert!(pow_q(&b, e) >= q(180));
        assert!(pow_q(&b, e - 1) < q(180));
    }

    #[test]
    fn f64_of_huge_ratio() {
        let b = qf(65, 64);
        let v = pow_q(&b, 20000);
        let want = 20000.0 * (65f64 / 64.0).ln();
        assert!((to_f64(&v).ln() - want).abs() < 1e-6 * want);
    }
}
