use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// An exact non-negative rational, written `num/den` in config files.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid fraction {0:?}: expected `num/den` with den > 0")]
pub struct FractionError(String);

impl Fraction {
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };
    pub const HALF: Fraction = Fraction { num: 1, den: 2 };
    pub const TWO_THIRDS: Fraction = Fraction { num: 2, den: 3 };

    pub fn new(num: u64, den: u64) -> Result<Fraction, FractionError> {
        if den == 0 {
            return Err(FractionError(format!("{num}/{den}")));
        }
        Ok(Fraction { num, den })
    }

    /// `floor(amount * self)`.
    pub fn apply_floor(&self, amount: u64) -> u64 {
        ((amount as u128 * self.num as u128) / self.den as u128) as u64
    }

    /// `part / whole > self`, compared exactly.
    pub fn exceeded_by(&self, part: u128, whole: u128) -> bool {
        if whole == 0 {
            return false;
        }
        use num_bigint::BigUint;
        BigUint::from(part) * BigUint::from(self.den) > BigUint::from(whole) * BigUint::from(self.num)
    }

    pub fn is_at_most_one(&self) -> bool {
        self.num <= self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl fmt::Debug for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Fraction {
    type Err = FractionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FractionError(s.to_string());
        match s.split_once('/') {
            Some((n, d)) => {
                let num = n.trim().parse().map_err(|_| bad())?;
                let den = d.trim().parse().map_err(|_| bad())?;
                Fraction::new(num, den).map_err(|_| bad())
            }
            None => {
                let num = s.trim().parse().map_err(|_| bad())?;
                Ok(Fraction { num, den: 1 })
            }
        }
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
