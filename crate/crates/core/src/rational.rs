//! Exact rational scalars and the handful of combinatorial helpers the
//! engine needs (generalized binomials, factorials, string round-trips).

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

use crate::error::VoaError;

/// Exact scalar used for every structure constant and Gram entry.
pub type Q = BigRational;

pub fn q_int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_frac(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Ratio::to_f64 only fails on overflow of both parts; fall back to a
        // quotient of scaled floats.
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Generalized binomial coefficient `C(x, j) = x(x-1)...(x-j+1)/j!` for any
/// integer `x`, including negative ones.
pub fn binomial(x: i64, j: u64) -> BigInt {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..j {
        num *= BigInt::from(x) - BigInt::from(i);
        den *= BigInt::from(i + 1);
    }
    num / den
}

pub fn binomial_q(x: i64, j: u64) -> Q {
    Q::from_integer(binomial(x, j))
}

pub fn factorial(j: u64) -> BigInt {
    (1..=j).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

pub fn sign(parity: i64) -> Q {
    if parity.rem_euclid(2) == 0 {
        Q::one()
    } else {
        -Q::one()
    }
}

/// Formats as `"numerator/denominator"` (denominator always present).
pub fn format_q(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parses `"p/q"`, `"p"` or a finite decimal such as `"0.25"`.
pub fn parse_q(s: &str) -> Result<Q, VoaError> {
    let s = s.trim();
    let bad = || VoaError::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.trim_start().starts_with('-');
        let int_part: BigInt =
            if int.is_empty() || int == "-" { BigInt::zero() } else { int.parse().map_err(|_| bad())? };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let scale = num::pow(BigInt::from(10), frac.len());
        let frac_part: BigInt = frac.parse().map_err(|_| bad())?;
        let frac_q = Q::new(frac_part, scale);
        let int_q = Q::from_integer(int_part.abs());
        let magnitude = int_q + frac_q;
        return Ok(if negative { -magnitude } else { magnitude });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Q::from_integer(n))
}

/// Serde adapter storing a rational as its `"n/d"` string.
pub mod serde_q {
    use super::{format_q, parse_q, Q};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_q(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s).map_err(serde::de::Error::custom)
    }
}

pub mod serde_q_matrix {
    use super::{format_q, parse_q, Q};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<Q>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = m.iter().map(|r| r.iter().map(format_q).collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Q>>, D::Error> {
        let rows = Vec::<Vec<String>>::deserialize(d)?;
        rows.into_iter().map(|r| r.iter().map(|x| parse_q(x).map_err(serde::de::Error::custom)).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalized_binomials() {
        assert_eq!(binomial(5, 2), BigInt::from(10));
        assert_eq!(binomial(2, 3), BigInt::from(0));
        // C(-1, j) = (-1)^j
        for j in 0..6 {
            assert_eq!(binomial(-1, j), if j % 2 == 0 { 1.into() } else { (-1).into() });
        }
        // C(-3, 2) = (-3)(-4)/2 = 6
        assert_eq!(binomial(-3, 2), BigInt::from(6));
        assert_eq!(binomial(7, 0), BigInt::from(1));
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_q("7/10").unwrap(), q_frac(7, 10));
        assert_eq!(parse_q("-3").unwrap(), q_int(-3));
        assert_eq!(parse_q("0.25").unwrap(), q_frac(1, 4));
        assert_eq!(parse_q("-1.5").unwrap(), q_frac(-3, 2));
        assert_eq!(parse_q("-0.5").unwrap(), q_frac(-1, 2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("abc").is_err());
        assert_eq!(format_q(&q_frac(2, 4)), "1/2");
        assert_eq!(format_q(&q_int(3)), "3/1");
    }
}
