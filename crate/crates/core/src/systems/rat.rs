//! Exact rationals with the "p/q" wire format used by system spec files.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serializer};

pub type Rat = BigRational;

pub fn rat(p: i64, q: i64) -> Rat {
    Rat::new(p.into(), q.into())
}

pub fn rat_zero() -> Rat {
    Rat::zero()
}

pub fn rat_one() -> Rat {
    Rat::one()
}

/// `2^{-k}` as an exact rational.
pub fn two_pow_neg(k: u32) -> Rat {
    Rat::new(1.into(), num_bigint_pow2(k))
}

fn num_bigint_pow2(k: u32) -> num_bigint::BigInt {
    num_bigint::BigInt::from(1) << k
}

/// Least `m ≥ 0` with `2^{-m} < eps`; `None` when `eps > 1` already
/// exceeds every cylinder diameter at level 0.
pub fn level_for_epsilon(eps: &Rat) -> Option<u32> {
    assert!(eps.is_positive(), "epsilon must be positive");
    if *eps > rat_one() {
        return None;
    }
    let mut m = 0u32;
    while two_pow_neg(m) >= *eps {
        m += 1;
        assert!(m < 4096, "epsilon unreasonably small");
    }
    Some(m)
}

pub fn format_rat(r: &Rat) -> String {
    if r.denom() == &1.into() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: num_bigint::BigInt = num.parse().map_err(|_| format!("bad numerator in {s:?}"))?;
    let d: num_bigint::BigInt = den.parse().map_err(|_| format!("bad denominator in {s:?}"))?;
    if d.is_zero() {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(Rat::new(n, d))
}

pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rat(r))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
    let s = String::deserialize(d)?;
    parse_rat(&s).map_err(serde::de::Error::custom)
}

pub mod vec_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(format_rat))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| parse_rat(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(format_rat(&rat(3, 5)), "3/5");
        assert_eq!(format_rat(&rat(4, 2)), "2");
        assert_eq!(parse_rat("3/5").unwrap(), rat(3, 5));
        assert_eq!(parse_rat("-1/2").unwrap(), rat(-1, 2));
        assert_eq!(parse_rat("7").unwrap(), rat(7, 1));
        assert!(parse_rat("1/0").is_err());
    }

    #[test]
    fn epsilon_levels() {
        // 2^-2 = 1/4 < 1/3 ≤ 2^-1
        assert_eq!(level_for_epsilon(&rat(1, 3)), Some(2));
        assert_eq!(level_for_epsilon(&rat(1, 4)), Some(3));
        assert_eq!(level_for_epsilon(&rat(1, 1)), Some(1));
        assert_eq!(level_for_epsilon(&rat(3, 2)), None);
    }
}
