//! Exact money arithmetic in integer cents.
//!
//! All game accounting runs on [`Cents`] so payoff math never touches
//! floating point. Pool multipliers are exact rationals parsed from decimal
//! strings; division rounds half to even.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A money amount in whole cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cents(pub i64);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MoneyError {
    #[error("malformed money amount {0:?}")]
    MalformedAmount(String),
    #[error("malformed multiplier {0:?}")]
    MalformedMultiplier(String),
}

impl Cents {
    pub const ZERO: Cents = Cents(0);

    pub fn from_dollars(dollars: i64) -> Cents {
        Cents(dollars * 100)
    }

    /// Whole dollars, truncated toward zero.
    pub fn whole_dollars(self) -> i64 {
        self.0 / 100
    }

    pub fn as_f64_dollars(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// Parses a decimal dollar string: `"12"`, `"12.5"`, `"12.50"`, with an
    /// optional leading `$`. Bare numbers are the caller's job to reject;
    /// this type's JSON form is always a string.
    pub fn parse(text: &str) -> Result<Cents, MoneyError> {
        let raw = text.trim();
        let raw = raw.strip_prefix('$').unwrap_or(raw).trim_start();
        let bad = || MoneyError::MalformedAmount(text.to_string());
        let (int_part, frac_part) = match raw.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (raw, None),
        };
        if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let mut cents: i64 = int_part.parse::<i64>().map_err(|_| bad())? * 100;
        match frac_part {
            None => {}
            Some(f) if f.len() == 1 && f.bytes().all(|b| b.is_ascii_digit()) => {
                cents += f.parse::<i64>().map_err(|_| bad())? * 10;
            }
            Some(f) if f.len() == 2 && f.bytes().all(|b| b.is_ascii_digit()) => {
                cents += f.parse::<i64>().map_err(|_| bad())?;
            }
            Some(_) => return Err(bad()),
        }
        Ok(Cents(cents))
    }

    /// Decimal form without the currency symbol, always two decimals.
    pub fn decimal_string(self) -> String {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        format!("{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl fmt::Display for Cents {
    /// Renders as `$12.34` (or `-$0.50`).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}${}.{:02}", abs / 100, abs % 100)
    }
}

impl std::ops::Add for Cents {
    type Output = Cents;
    fn add(self, rhs: Cents) -> Cents {
        Cents(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Cents {
    type Output = Cents;
    fn sub(self, rhs: Cents) -> Cents {
        Cents(self.0 - rhs.0)
    }
}

impl std::iter::Sum for Cents {
    fn sum<I: Iterator<Item = Cents>>(iter: I) -> Cents {
        Cents(iter.map(|c| c.0).sum())
    }
}

impl Serialize for Cents {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.decimal_string())
    }
}

impl<'de> Deserialize<'de> for Cents {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Cents, D::Error> {
        let text = String::deserialize(deserializer)?;
        Cents::parse(&text).map_err(D::Error::custom)
    }
}

/// Exact positive rational multiplier for the public pool, e.g. `1.6 = 8/5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Multiplier {
    num: u32,
    den: u32,
}

impl Multiplier {
    /// Parses `"1.6"` or `"8/5"`. The value must be positive.
    pub fn parse(text: &str) -> Result<Multiplier, MoneyError> {
        let raw = text.trim();
        let bad = || MoneyError::MalformedMultiplier(text.to_string());
        let (mut num, mut den): (u64, u64) = if let Some((n, d)) = raw.split_once('/') {
            (
                n.trim().parse().map_err(|_| bad())?,
                d.trim().parse().map_err(|_| bad())?,
            )
        } else {
            let (int_part, frac_part) = match raw.split_once('.') {
                Some((i, f)) => (i, f),
                None => (raw, ""),
            };
            if int_part.is_empty()
                || !int_part.bytes().all(|b| b.is_ascii_digit())
                || !frac_part.bytes().all(|b| b.is_ascii_digit())
                || frac_part.len() > 9
            {
                return Err(bad());
            }
            let scale = 10u64.pow(frac_part.len() as u32);
            let int: u64 = int_part.parse().map_err(|_| bad())?;
            let frac: u64 = if frac_part.is_empty() {
                0
            } else {
                frac_part.parse().map_err(|_| bad())?
            };
            (int * scale + frac, scale)
        };
        if num == 0 || den == 0 {
            return Err(bad());
        }
        let g = gcd(num, den);
        num /= g;
        den /= g;
        if num > u32::MAX as u64 || den > u32::MAX as u64 {
            return Err(bad());
        }
        Ok(Multiplier {
            num: num as u32,
            den: den as u32,
        })
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// True when the multiplied pool divides evenly among `n` players, i.e.
    /// the per-player share needs no rounding.
    pub fn divides_evenly(self, pool: Cents, n: usize) -> bool {
        (self.num as i128 * pool.0 as i128) % (self.den as i128 * n as i128) == 0
    }

    /// Per-player share of the multiplied pool, `M * pool / n`, rounded half
    /// to even.
    pub fn share(self, pool: Cents, n: usize) -> Cents {
        let num = self.num as i128 * pool.0 as i128;
        let den = self.den as i128 * n as i128;
        Cents(div_round_half_even(num, den) as i64)
    }

    /// Smallest decimal rendering when the denominator divides a power of
    /// ten, otherwise `num/den`.
    pub fn canonical_string(self) -> String {
        let mut scale: u64 = 1;
        for decimals in 0..=9u32 {
            if scale % self.den as u64 == 0 {
                let units = self.num as u64 * (scale / self.den as u64);
                if decimals == 0 {
                    return units.to_string();
                }
                let int = units / scale;
                let frac = units % scale;
                let frac = format!("{frac:0width$}", width = decimals as usize);
                let frac = frac.trim_end_matches('0');
                return if frac.is_empty() {
                    int.to_string()
                } else {
                    format!("{int}.{frac}")
                };
            }
            scale *= 10;
        }
        format!("{}/{}", self.num, self.den)
    }
}

impl Default for Multiplier {
    fn default() -> Self {
        Multiplier { num: 8, den: 5 }
    }
}

impl fmt::Display for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_string())
    }
}

impl Serialize for Multiplier {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical_string())
    }
}

impl<'de> Deserialize<'de> for Multiplier {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Multiplier, D::Error> {
        let text = String::deserialize(deserializer)?;
        Multiplier::parse(&text).map_err(D::Error::custom)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `num / den` rounded to the nearest integer, ties to even. `den > 0`.
fn div_round_half_even(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => {
            if q % 2 == 0 {
                q
            } else {
                q + 1
            }
        }
    }
}
