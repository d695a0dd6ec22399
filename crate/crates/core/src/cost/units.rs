use std::fmt;
use std::iter::Sum;
use std::ops::Add;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

const SCALE: f64 = 1e12;
const FRACTION_DIGITS: usize = 12;

/// Non-negative additive edge weight in fixed-point units of 1e-12.
///
/// Integer arithmetic makes path and tree sums exact and independent of
/// summation order, so `0.08 + 0.09` is exactly `0.17`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cost(u64);

impl Cost {
    pub const ZERO: Cost = Cost(0);

    /// Rounds a finite, non-negative real to the nearest unit.
    pub fn from_f64(x: f64) -> Option<Cost> {
        if !x.is_finite() || x < 0.0 || x * SCALE >= u64::MAX as f64 {
            return None;
        }
        Some(Cost((x * SCALE).round() as u64))
    }

    pub fn from_units(units: u64) -> Cost {
        Cost(units)
    }

    pub fn units(self) -> u64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE
    }

    pub fn checked_add(self, other: Cost) -> Option<Cost> {
        self.0.checked_add(other.0).map(Cost)
    }

    /// `self / other` as a real; `1.0` when both are zero.
    pub fn ratio(self, other: Cost) -> f64 {
        match (self.0, other.0) {
            (0, 0) => 1.0,
            (_, 0) => f64::INFINITY,
            (a, b) => a as f64 / b as f64,
        }
    }
}

impl Add for Cost {
    type Output = Cost;

    fn add(self, rhs: Cost) -> Cost {
        Cost(self.0 + rhs.0)
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, Add::add)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let scale = 10u64.pow(FRACTION_DIGITS as u32);
        let whole = self.0 / scale;
        let frac = self.0 % scale;
        if frac == 0 {
            return write!(f, "{whole}");
        }
        let digits = format!("{frac:0width$}", width = FRACTION_DIGITS);
        write!(f, "{whole}.{}", digits.trim_end_matches('0'))
    }
}

impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Cost {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let x = f64::deserialize(deserializer)?;
        Cost::from_f64(x).ok_or_else(|| serde::de::Error::custom(format!("invalid cost {x}")))
    }
}
