//! Exact rational scalars used throughout the crate.
//!
//! All probabilities, interval endpoints and computed values are
//! arbitrary-precision rationals. `BigRational` keeps values reduced with a
//! positive denominator, which is what the canonical-form comparisons in
//! [`crate::geometry`] rely on.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Zero};

pub type Rat = BigRational;

/// `n / d` as an exact rational. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn zero() -> Rat {
    Rat::zero()
}

pub fn one() -> Rat {
    Rat::one()
}

/// Parses `"3/10"`, `"0.3"`, `"1"` into an exact rational.
///
/// Decimal literals convert exactly (`0.3` becomes `3/10`), never through
/// floating point.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty number".to_string());
    }
    if let Some((n, d)) = s.split_once('/') {
        let num: BigInt = n
            .parse()
            .map_err(|_| format!("malformed numerator `{n}`"))?;
        let den: BigInt = d
            .parse()
            .map_err(|_| format!("malformed denominator `{d}`"))?;
        if den.is_zero() {
            return Err(format!("zero denominator in `{s}`"));
        }
        return Ok(Rat::new(num, den));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let int_part = if int_part.is_empty() { "0" } else { int_part };
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("malformed decimal `{s}`"));
        }
        let negative = int_part.starts_with('-');
        let whole: BigInt = int_part
            .parse()
            .map_err(|_| format!("malformed decimal `{s}`"))?;
        let frac: BigInt = frac_part
            .parse()
            .map_err(|_| format!("malformed decimal `{s}`"))?;
        let scale = num::pow::pow(BigInt::from(10), frac_part.len());
        let mut numer = whole * &scale;
        if negative {
            numer -= &frac;
        } else {
            numer += &frac;
        }
        return Ok(Rat::new(numer, scale));
    }
    let n: BigInt = s.parse().map_err(|_| format!("malformed number `{s}`"))?;
    Ok(Rat::from_integer(n))
}
