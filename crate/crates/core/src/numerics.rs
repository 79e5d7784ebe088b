//! Exact rationals, rational interval enclosures of `e^{-N}`, and the
//! `"num/den"` text form used in every serialized artifact.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational number, always held in canonical (reduced) form.
pub type Rational = BigRational;

/// One-based index into an event sequence.
pub type Index = u64;

/// Default ceiling, in bits, for enclosure refinement.
pub const DEFAULT_PRECISION_BUDGET: u32 = 512;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericsError {
    #[error("could not decide the comparison within a {budget}-bit precision budget")]
    Undecided { budget: u32 },
    #[error("malformed rational {0:?}: expected \"num/den\" or an integer")]
    Parse(String),
    #[error("interval endpoints are inverted: lo = {lo}, hi = {hi}")]
    Inverted { lo: String, hi: String },
}

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// `2^{-exp}`.
pub fn pow2_neg(exp: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << exp as usize)
}

/// `2^{exp}` for a possibly negative exponent.
pub fn pow2(exp: i64) -> Rational {
    if exp >= 0 {
        Rational::from_integer(BigInt::one() << exp as usize)
    } else {
        Rational::new(BigInt::one(), BigInt::one() << (-exp) as usize)
    }
}

/// Least integer `>= x`.
pub fn ceil_to_integer(x: &Rational) -> BigInt {
    x.ceil().to_integer()
}

/// Canonical text form, always with an explicit denominator: `"255/1024"`, `"3/1"`.
pub fn format_rational(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Accepts `"num/den"` or a bare integer; the result is reduced.
pub fn parse_rational(text: &str) -> Result<Rational, NumericsError> {
    let err = || NumericsError::Parse(text.to_string());
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| err())?;
    let den: BigInt = den.parse().map_err(|_| err())?;
    if den.is_zero() {
        return Err(err());
    }
    Ok(Rational::new(num, den))
}

/// Decimal rendering with `sig` significant digits, rounded half-up from the
/// exact value. Display only; nothing is ever decided on this string.
pub fn to_decimal(x: &Rational, sig: usize) -> String {
    assert!(sig >= 1);
    if x.is_zero() {
        return "0".to_string();
    }
    let sign = if x.is_negative() { "-" } else { "" };
    let num = x.numer().abs();
    let den = x.denom().clone();
    // Start from a digit-count estimate of floor(log10 |x|), then correct it.
    let mut exp = num.to_string().len() as i64 - den.to_string().len() as i64;
    let ten = BigInt::from(10);
    let scaled_value = |e: i64| -> Rational {
        let v = Rational::new(num.clone(), den.clone());
        if e >= 0 {
            v / Rational::from_integer(num_traits::pow(ten.clone(), e as usize))
        } else {
            v * Rational::from_integer(num_traits::pow(ten.clone(), (-e) as usize))
        }
    };
    loop {
        let m = scaled_value(exp);
        if m >= int(10) {
            exp += 1;
        } else if m < int(1) {
            exp -= 1;
        } else {
            break;
        }
    }
    let mantissa = scaled_value(exp) * Rational::from_integer(num_traits::pow(ten.clone(), sig - 1));
    let mut digits = (mantissa + rat(1, 2)).floor().to_integer();
    if digits >= num_traits::pow(ten.clone(), sig) {
        digits /= &ten;
        exp += 1;
    }
    let digits = digits.to_string();
    let (head, tail) = digits.split_at(1);
    if tail.is_empty() {
        format!("{sign}{head}e{exp}")
    } else {
        format!("{sign}{head}.{tail}e{exp}")
    }
}

/// Closed interval `[lo, hi]` with rational endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatInterval {
    #[serde(with = "serde_rational")]
    lo: Rational,
    #[serde(with = "serde_rational")]
    hi: Rational,
}

impl RatInterval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self, NumericsError> {
        if lo > hi {
            return Err(NumericsError::Inverted { lo: format_rational(&lo), hi: format_rational(&hi) });
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: Rational) -> Self {
        Self { lo: x.clone(), hi: x }
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / int(2)
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn is_within(&self, outer: &RatInterval) -> bool {
        outer.lo <= self.lo && self.hi <= outer.hi
    }

    /// `{1 - x : x in self}`.
    pub fn one_minus(&self) -> Self {
        Self { lo: Rational::one() - &self.hi, hi: Rational::one() - &self.lo }
    }
}

impl fmt::Display for RatInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", format_rational(&self.lo), format_rational(&self.hi))
    }
}

/// Rational enclosure of `e^{-n}` by truncated Taylor series of `e^{n}`:
/// returns `(lo, hi)` with `lo < e^{-n} < hi` and `hi - lo <= 2^{-bits}`.
fn exp_neg_taylor(n: u32, bits: u32) -> (Rational, Rational) {
    let x = Rational::from_integer(BigInt::from(n));
    let target = pow2_neg(bits);
    let mut sum = Rational::one();
    let mut term = Rational::one();
    let mut k: u64 = 0;
    loop {
        k += 1;
        term = term * &x / Rational::from_integer(BigInt::from(k));
        sum += &term;
        if k + 2 <= u64::from(n) {
            continue;
        }
        // Tail after the k-th term is dominated by a geometric series with
        // ratio n/(k+2) < 1.
        let next = &term * &x / Rational::from_integer(BigInt::from(k + 1));
        let tail = next * rat((k + 2) as i64, (k + 2 - u64::from(n)) as i64);
        let hi = sum.recip();
        let lo = (&sum + &tail).recip();
        if &hi - &lo <= target {
            return (lo, hi);
        }
    }
}

/// Enclosure of `e^{-n}` of width at most `2^{-prec}`.
///
/// The result is `[f/2^k, (f+1)/2^k]` with `f = floor(e^{-n} 2^k)` and
/// `k = max(prec + 1, 2n + 1)`, so enclosures at increasing precision are
/// nested and both endpoints lie strictly inside `(0, 1)`.
///
/// # Panics
///
/// If `n == 0` or `prec == 0`.
pub fn exp_neg_enclosure(n: u32, prec: u32) -> RatInterval {
    assert!(n >= 1, "exp_neg_enclosure requires N >= 1");
    assert!(prec >= 1, "exp_neg_enclosure requires prec >= 1");
    let grid = (prec + 1).max(2 * n + 1);
    let scale = Rational::from_integer(BigInt::one() << grid as usize);
    let mut inner = grid + 8;
    loop {
        let (lo, hi) = exp_neg_taylor(n, inner);
        let floor_lo = (&lo * &scale).floor();
        let floor_hi = (&hi * &scale).floor();
        // e^{-n} 2^k is irrational, so this settles once `inner` is large enough.
        if floor_lo == floor_hi {
            let lo = &floor_lo / &scale;
            let hi = (floor_lo + Rational::one()) / &scale;
            return RatInterval { lo, hi };
        }
        inner += 16;
    }
}

/// Decides `p` against a real known only through enclosures, refining by
/// doubling the precision from 8 bits until `budget`.
///
/// The enclosed real must differ from `p` (true for any irrational target);
/// otherwise the budget is exhausted and `Undecided` is returned.
pub fn compare_rational_vs_enclosed<F>(
    p: &Rational,
    make_enclosure: F,
    budget: u32,
) -> Result<(Ordering, RatInterval), NumericsError>
where
    F: Fn(u32) -> RatInterval,
{
    let mut prec = 8u32.min(budget.max(1));
    loop {
        let enc = make_enclosure(prec);
        if p < enc.lo() {
            return Ok((Ordering::Less, enc));
        }
        if p > enc.hi() {
            return Ok((Ordering::Greater, enc));
        }
        if prec >= budget {
            return Err(NumericsError::Undecided { budget });
        }
        prec = prec.saturating_mul(2).min(budget);
    }
}

/// Exact `x^e` for a small non-negative exponent.
pub fn pow(x: &Rational, e: u64) -> Rational {
    num_traits::pow(x.clone(), e as usize)
}

pub(crate) fn lcm_extend(den: &BigInt, other: &BigInt) -> BigInt {
    // machine-word gcd when the new denominator fits
    let g = match other.to_u64() {
        Some(small) => {
            let r = (den % other).to_u64().unwrap_or(0);
            BigInt::from(r.gcd(&small))
        }
        None => den.gcd(other),
    };
    other / g
}

/// Serde adapter writing a [`Rational`] as `"num/den"`; integers and
/// `"num/den"` strings are both accepted on input.
pub mod serde_rational {
    use super::*;
    use serde::{de, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        struct Visitor;
        impl de::Visitor<'_> for Visitor {
            type Value = Rational;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rational as \"num/den\" or an integer")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
                parse_rational(v).map_err(E::custom)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
                Ok(Rational::from_integer(BigInt::from(v)))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
                Ok(Rational::from_integer(BigInt::from(v)))
            }
        }
        d.deserialize_any(Visitor)
    }
}

pub mod serde_rational_vec {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrapped(#[serde(with = "serde_rational")] Rational);

    pub fn serialize<S: Serializer>(xs: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(format_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let wrapped = Vec::<Wrapped>::deserialize(d)?;
        Ok(wrapped.into_iter().map(|w| w.0).collect())
    }
}
