//! Extended-real values.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Serialize, Serializer};

/// A value in `ℝ ∪ {+∞}`; used for function values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExtReal<T> {
    Finite(T),
    PosInf,
}

impl<T> ExtReal<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<T> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::PosInf => None,
        }
    }

    pub fn as_finite(&self) -> Option<&T> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::PosInf => None,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> ExtReal<U> {
        match self {
            ExtReal::Finite(x) => ExtReal::Finite(f(x)),
            ExtReal::PosInf => ExtReal::PosInf,
        }
    }
}

impl<T: num_traits::Float> ExtReal<T> {
    /// Maps `+∞` to the float infinity.
    pub fn to_float(self) -> T {
        match self {
            ExtReal::Finite(x) => x,
            ExtReal::PosInf => T::infinity(),
        }
    }

    /// Any non-finite float (including NaN) is read as `+∞`.
    pub fn from_float(x: T) -> Self {
        if x.is_finite() {
            ExtReal::Finite(x)
        } else {
            ExtReal::PosInf
        }
    }
}

impl<T: PartialOrd> PartialOrd for ExtReal<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::PosInf) => Some(Ordering::Less),
            (ExtReal::PosInf, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::PosInf, ExtReal::PosInf) => Some(Ordering::Equal),
        }
    }
}

impl<T: Add<Output = T>> Add for ExtReal<T> {
    type Output = ExtReal<T>;
    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::PosInf,
        }
    }
}

impl<T: fmt::Display> fmt::Display for ExtReal<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::PosInf => write!(f, "+inf"),
        }
    }
}

impl<T: Serialize> Serialize for ExtReal<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(x) => x.serialize(s),
            ExtReal::PosInf => s.serialize_str("+inf"),
        }
    }
}

/// A value in `[-∞, +∞]`; used for second subderivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Extended<T> {
    NegInf,
    Finite(T),
    PosInf,
}

impl<T> Extended<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(self) -> Option<T> {
        match self {
            Extended::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Extended<U> {
        match self {
            Extended::NegInf => Extended::NegInf,
            Extended::Finite(x) => Extended::Finite(f(x)),
            Extended::PosInf => Extended::PosInf,
        }
    }

    /// Short label: `"-inf"`, `"finite"` or `"+inf"`.
    pub fn class(&self) -> &'static str {
        match self {
            Extended::NegInf => "-inf",
            Extended::Finite(_) => "finite",
            Extended::PosInf => "+inf",
        }
    }
}

impl<T: num_traits::Float> Extended<T> {
    pub fn to_float(self) -> T {
        match self {
            Extended::NegInf => T::neg_infinity(),
            Extended::Finite(x) => x,
            Extended::PosInf => T::infinity(),
        }
    }

    pub fn from_float(x: T) -> Self {
        if x.is_finite() {
            Extended::Finite(x)
        } else if x < T::zero() {
            Extended::NegInf
        } else {
            Extended::PosInf
        }
    }
}

impl<T> From<ExtReal<T>> for Extended<T> {
    fn from(v: ExtReal<T>) -> Self {
        match v {
            ExtReal::Finite(x) => Extended::Finite(x),
            ExtReal::PosInf => Extended::PosInf,
        }
    }
}

impl<T: PartialOrd> PartialOrd for Extended<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use Extended::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(b),
            (NegInf, NegInf) | (PosInf, PosInf) => Some(Ordering::Equal),
            (NegInf, _) | (_, PosInf) => Some(Ordering::Less),
            (PosInf, _) | (_, NegInf) => Some(Ordering::Greater),
        }
    }
}

impl<T: fmt::Display> fmt::Display for Extended<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::NegInf => write!(f, "-inf"),
            Extended::Finite(x) => write!(f, "{x}"),
            Extended::PosInf => write!(f, "+inf"),
        }
    }
}

impl<T: Serialize> Serialize for Extended<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Extended::NegInf => s.serialize_str("-inf"),
            Extended::Finite(x) => x.serialize(s),
            Extended::PosInf => s.serialize_str("+inf"),
        }
    }
}
