//! Integer money and exact decimal parsing.
//!
//! All USD amounts inside the kernel are whole cents. Decimal inputs (YAML
//! dollars, JSON ratios) are parsed from their shortest decimal rendering so
//! that `10.0` becomes exactly `1000` cents and `0.35` becomes exactly `35/100`.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// A signed amount of US cents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cents(pub i64);

impl Cents {
    pub const ZERO: Cents = Cents(0);

    pub fn get(self) -> i64 {
        self.0
    }

    /// Renders as dollars with two fractional digits, e.g. `12` -> `0.12`.
    pub fn to_usd_string(self) -> String {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        format!("{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}c", self.0)
    }
}

impl Add for Cents {
    type Output = Cents;
    fn add(self, rhs: Cents) -> Cents {
        Cents(self.0 + rhs.0)
    }
}

impl AddAssign for Cents {
    fn add_assign(&mut self, rhs: Cents) {
        self.0 += rhs.0;
    }
}

impl Sub for Cents {
    type Output = Cents;
    fn sub(self, rhs: Cents) -> Cents {
        Cents(self.0 - rhs.0)
    }
}

impl Sum for Cents {
    fn sum<I: Iterator<Item = Cents>>(iter: I) -> Cents {
        Cents(iter.map(|c| c.0).sum())
    }
}

/// A parsed decimal literal: `digits / 10^scale`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decimal {
    pub digits: i128,
    pub scale: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecimalError {
    #[error("not a decimal number: {0:?}")]
    Malformed(String),
    #[error("{text} has more than {max} fractional digits")]
    TooPrecise { text: String, max: u32 },
    #[error("{0} is out of range")]
    OutOfRange(String),
}

impl Decimal {
    /// Parses plain decimal text (`-12`, `0.35`, `10.0`). Exponents are not accepted.
    pub fn parse(text: &str) -> Result<Decimal, DecimalError> {
        let malformed = || DecimalError::Malformed(text.to_string());
        let (negative, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text.strip_prefix('+').unwrap_or(text)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(malformed());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        let frac_trimmed = frac_part.trim_end_matches('0');
        let mut digits: i128 = 0;
        for b in int_part.bytes().chain(frac_trimmed.bytes()) {
            digits = digits
                .checked_mul(10)
                .and_then(|d| d.checked_add(i128::from(b - b'0')))
                .ok_or_else(|| DecimalError::OutOfRange(text.to_string()))?;
        }
        let scale = frac_trimmed.len() as u32;
        Ok(Decimal { digits: if negative { -digits } else { digits }, scale })
    }

    /// Parses the shortest round-trip rendering of a float.
    pub fn from_f64(value: f64) -> Result<Decimal, DecimalError> {
        if !value.is_finite() {
            return Err(DecimalError::Malformed(value.to_string()));
        }
        Decimal::parse(&format!("{value}"))
    }

    /// Rescales to exactly `scale` fractional digits, failing if precision would be lost.
    pub fn to_scaled(self, scale: u32) -> Result<i128, DecimalError> {
        if self.scale > scale {
            return Err(DecimalError::TooPrecise { text: self.to_string(), max: scale });
        }
        10i128
            .checked_pow(scale - self.scale)
            .and_then(|m| self.digits.checked_mul(m))
            .ok_or_else(|| DecimalError::OutOfRange(self.to_string()))
    }

    pub fn to_ratio(self) -> Ratio<i64> {
        let denom = 10i64.pow(self.scale);
        Ratio::new(self.digits as i64, denom)
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 0 {
            return write!(f, "{}", self.digits);
        }
        let pow = 10i128.pow(self.scale);
        let sign = if self.digits < 0 { "-" } else { "" };
        let abs = self.digits.abs();
        write!(f, "{sign}{}.{:0width$}", abs / pow, abs % pow, width = self.scale as usize)
    }
}

/// Converts decimal dollars to cents, rejecting sub-cent precision.
pub fn usd_to_cents(dollars: Decimal) -> Result<Cents, DecimalError> {
    let cents = dollars.to_scaled(2)?;
    i64::try_from(cents).map(Cents).map_err(|_| DecimalError::OutOfRange(dollars.to_string()))
}

/// Renders an exact ratio as a short decimal, falling back to `n/d` when it does not terminate.
pub fn ratio_to_string(r: &Ratio<i64>) -> String {
    let mut d = *r.denom();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    if d != 1 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let scale = twos.max(fives);
    let digits = i128::from(*r.numer()) * 10i128.pow(scale) / i128::from(*r.denom());
    let dec = Decimal { digits, scale };
    let s = dec.to_string();
    if scale == 0 {
        format!("{s}.0")
    } else {
        s
    }
}
