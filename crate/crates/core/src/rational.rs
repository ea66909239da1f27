//! Exact rational helpers: construction, parsing, powers of two and decimal
//! rendering. All public numeric output of this crate goes through
//! [`format_rat`] / [`decimal_string`] so downstream tools never see floats.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{Euclid, One, Signed, ToPrimitive, Zero};
use std::str::FromStr;

pub type Rat = BigRational;

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// 2^e for any integer e (negative exponents give 1/2^|e|).
pub fn pow2(e: i64) -> Rat {
    let p = BigInt::one() << e.unsigned_abs() as usize;
    if e >= 0 {
        Rat::from_integer(p)
    } else {
        Rat::new(BigInt::one(), p)
    }
}

/// 1/2^e for a non-negative big exponent.
pub fn pow2_neg(e: &BigUint) -> Rat {
    let bits = e.to_u64().expect("exponent too large to materialize");
    Rat::new(BigInt::one(), BigInt::one() << bits as usize)
}

/// Smallest n ≥ 0 with 2^-n ≤ x, for 0 < x ≤ 1. Used to size certified tails
/// without materializing huge denominators.
pub fn neg_log2_ceil(x: &Rat) -> u64 {
    assert!(x.is_positive(), "neg_log2_ceil needs a positive bound");
    let mut n = 0u64;
    let mut v = Rat::one();
    let two = rat_int(2);
    while &v > x {
        v /= &two;
        n += 1;
        assert!(n < 1 << 24, "tolerance unreasonably small");
    }
    n
}

/// Canonical "p/q" form; integers print without the "/1".
pub fn format_rat(x: &Rat) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses "p/q", plain integers, and decimal/scientific literals such as
/// "0.07" or "1e-10", all exactly.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty rational literal".into());
    }
    if let Some((p, q)) = s.split_once('/') {
        let num = BigInt::from_str(p.trim()).map_err(|e| e.to_string())?;
        let den = BigInt::from_str(q.trim()).map_err(|e| e.to_string())?;
        if den.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(Rat::new(num, den));
    }
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, i64::from_str(e).map_err(|e| e.to_string())?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    let digits = format!(
        "{}{}",
        if int_part.is_empty() || int_part == "-" || int_part == "+" {
            format!("{int_part}0")
        } else {
            int_part.to_string()
        },
        frac_part
    );
    let num = BigInt::from_str(&digits).map_err(|e| e.to_string())?;
    let shift = exp - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    let scale = ten.pow(shift.unsigned_abs() as u32);
    Ok(if shift >= 0 {
        Rat::from_integer(num * scale)
    } else {
        Rat::new(num, scale)
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    Floor,
    Ceil,
}

/// Exact decimal expansion of `x` with `digits` fractional digits, rounded
/// toward -inf or +inf. The output is an ordinary decimal string.
pub fn decimal_string(x: &Rat, digits: usize, rounding: Rounding) -> String {
    let scale = BigInt::from(10u32).pow(digits as u32);
    let scaled = x * Rat::from_integer(scale.clone());
    let mut q = scaled.numer().div_euclid(scaled.denom());
    // div_euclid floors; bump for Ceil when inexact
    if rounding == Rounding::Ceil && &q * scaled.denom() != *scaled.numer() {
        q += 1;
    }
    let neg = q.sign() == Sign::Minus;
    let abs = q.magnitude().to_string();
    let padded = if abs.len() <= digits {
        format!("{}{}", "0".repeat(digits + 1 - abs.len()), abs)
    } else {
        abs
    };
    let (int_part, frac_part) = padded.split_at(padded.len() - digits);
    let body = if digits == 0 {
        int_part.to_string()
    } else {
        format!("{int_part}.{frac_part}")
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rat("3/4").unwrap(), rat(3, 4));
        assert_eq!(parse_rat("-7").unwrap(), rat_int(-7));
        assert_eq!(parse_rat("0.07").unwrap(), rat(7, 100));
        assert_eq!(parse_rat("1e-10").unwrap(), rat(1, 10_000_000_000));
        assert_eq!(parse_rat("2.5e2").unwrap(), rat_int(250));
        assert!(parse_rat("1/0").is_err());
    }

    #[test]
    fn decimals() {
        let x = rat(1, 3);
        assert_eq!(decimal_string(&x, 5, Rounding::Floor), "0.33333");
        assert_eq!(decimal_string(&x, 5, Rounding::Ceil), "0.33334");
        let y = rat(-1, 8);
        assert_eq!(decimal_string(&y, 3, Rounding::Floor), "-0.125");
        assert_eq!(decimal_string(&y, 2, Rounding::Floor), "-0.13");
        assert_eq!(decimal_string(&rat_int(42), 0, Rounding::Floor), "42");
    }

    #[test]
    fn pow2_signs() {
        assert_eq!(pow2(3), rat_int(8));
        assert_eq!(pow2(-3), rat(1, 8));
        assert_eq!(neg_log2_ceil(&rat(1, 8)), 3);
        assert_eq!(neg_log2_ceil(&rat(1, 7)), 3);
        assert_eq!(neg_log2_ceil(&rat_int(1)), 0);
    }
}
