//! Non-negative costs with an infinity sentinel.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Serialize, Serializer};

/// A non-negative cost, or `Cost::INFINITE` for "no intervention exists".
///
/// Infinity compares greater than every finite cost and absorbs addition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cost(f64);

impl Cost {
    pub const ZERO: Cost = Cost(0.0);
    pub const INFINITE: Cost = Cost(f64::INFINITY);

    /// Panics on negative or NaN values.
    pub fn finite(value: f64) -> Cost {
        assert!(
            value.is_finite() && value >= 0.0,
            "cost must be finite and non-negative, got {value}"
        );
        Cost(value)
    }

    pub fn from_count(count: usize) -> Cost {
        Cost(count as f64)
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn is_finite(self) -> bool {
        !self.is_infinite()
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The finite value, or `None` for infinity.
    pub fn as_finite(self) -> Option<f64> {
        self.is_finite().then_some(self.0)
    }

    /// `self - other` for the knowledge-cost gap.
    ///
    /// `∞ - finite = ∞`. `∞ - ∞` has no value; the caller gets `None` and
    /// decides how to report it. A finite minuend below the subtrahend also
    /// yields `None`.
    pub fn checked_gap(self, other: Cost) -> Option<Cost> {
        match (self.is_infinite(), other.is_infinite()) {
            (true, true) => None,
            (true, false) => Some(Cost::INFINITE),
            (false, true) => None,
            (false, false) if self.0 >= other.0 => Some(Cost(self.0 - other.0)),
            _ => None,
        }
    }
}

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add for Cost {
    type Output = Cost;

    fn add(self, rhs: Cost) -> Cost {
        Cost(self.0 + rhs.0)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_infinite() {
            serializer.serialize_str("inf")
        } else if self.0.fract() == 0.0 && self.0 < 9.0e15 {
            serializer.serialize_u64(self.0 as u64)
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}
