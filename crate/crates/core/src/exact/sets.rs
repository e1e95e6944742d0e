//! Finite unions of closed intervals with exact endpoints.

use std::cmp::Ordering;
use std::fmt;

use crate::ext::Extended;
use crate::interval::Interval;
use crate::scalar::ExactScalar;

fn lo_cmp<E: ExactScalar>(a: &Option<E>, b: &Option<E>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, _) => Ordering::Less,
        (_, None) => Ordering::Greater,
        (Some(x), Some(y)) => x.compare(y),
    }
}

fn hi_cmp<E: ExactScalar>(a: &Option<E>, b: &Option<E>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, _) => Ordering::Greater,
        (_, None) => Ordering::Less,
        (Some(x), Some(y)) => x.compare(y),
    }
}

/// A normalized union of disjoint closed intervals, sorted by lower end.
#[derive(Clone, Debug)]
pub struct IntervalSet<E> {
    parts: Vec<Interval<E>>,
}

impl<E: ExactScalar> IntervalSet<E> {
    pub fn from_intervals(parts: Vec<Interval<E>>) -> Self {
        let mut parts: Vec<Interval<E>> = parts
            .into_iter()
            .filter(|iv| match (&iv.lo, &iv.hi) {
                (Some(l), Some(h)) => l.le_exact(h),
                _ => true,
            })
            .collect();
        parts.sort_by(|a, b| lo_cmp(&a.lo, &b.lo));
        let mut out: Vec<Interval<E>> = Vec::new();
        for iv in parts {
            if let Some(last) = out.last_mut() {
                let overlaps = match (&last.hi, &iv.lo) {
                    (None, _) | (_, None) => true,
                    (Some(h), Some(l)) => l.le_exact(h),
                };
                if overlaps {
                    if hi_cmp(&iv.hi, &last.hi) == Ordering::Greater {
                        last.hi = iv.hi;
                    }
                    continue;
                }
            }
            out.push(iv);
        }
        IntervalSet { parts: out }
    }

    pub fn empty() -> Self {
        IntervalSet { parts: vec![] }
    }

    pub fn all() -> Self {
        IntervalSet { parts: vec![Interval::all()] }
    }

    pub fn point(x: E) -> Self {
        IntervalSet { parts: vec![Interval::point(x)] }
    }

    pub fn closed(lo: E, hi: E) -> Self {
        Self::from_intervals(vec![Interval::closed(lo, hi)])
    }

    pub fn at_least(lo: E) -> Self {
        IntervalSet { parts: vec![Interval::at_least(lo)] }
    }

    pub fn at_most(hi: E) -> Self {
        IntervalSet { parts: vec![Interval::at_most(hi)] }
    }

    pub fn from_points(points: Vec<E>) -> Self {
        Self::from_intervals(points.into_iter().map(Interval::point).collect())
    }

    pub fn parts(&self) -> &[Interval<E>] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn is_all(&self) -> bool {
        self.parts.len() == 1 && self.parts[0].lo.is_none() && self.parts[0].hi.is_none()
    }

    pub fn contains(&self, x: &E) -> bool {
        self.parts.iter().any(|iv| {
            iv.lo.as_ref().is_none_or(|l| l.le_exact(x)) && iv.hi.as_ref().is_none_or(|h| x.le_exact(h))
        })
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::from_intervals(self.parts.iter().chain(&other.parts).cloned().collect())
    }

    pub fn shift(&self, s: &E) -> Self {
        IntervalSet {
            parts: self
                .parts
                .iter()
                .map(|iv| Interval {
                    lo: iv.lo.clone().map(|l| l + s.clone()),
                    hi: iv.hi.clone().map(|h| h + s.clone()),
                })
                .collect(),
        }
    }

    /// `inf { z·w : z ∈ S }`, or `+∞` for the empty set.
    pub fn min_pairing(&self, w: &E) -> Extended<E> {
        if self.is_empty() {
            return Extended::PosInf;
        }
        match w.sign_cmp() {
            Ordering::Equal => Extended::Finite(E::zero()),
            Ordering::Greater => match &self.parts[0].lo {
                Some(l) => Extended::Finite(l.clone() * w.clone()),
                None => Extended::NegInf,
            },
            Ordering::Less => match &self.parts.last().expect("nonempty").hi {
                Some(h) => Extended::Finite(h.clone() * w.clone()),
                None => Extended::NegInf,
            },
        }
    }

    /// Finite sample points: endpoints, midpoints, and offsets along unbounded ends.
    pub fn sample_points(&self) -> Vec<E> {
        let mut out = Vec::new();
        for iv in &self.parts {
            match (&iv.lo, &iv.hi) {
                (Some(l), Some(h)) => {
                    out.push(l.clone());
                    if l.lt_exact(h) {
                        out.push((l.clone() + h.clone()) * E::half());
                        out.push(h.clone());
                    }
                }
                (Some(l), None) => {
                    out.push(l.clone());
                    out.push(l.clone() + E::one());
                }
                (None, Some(h)) => {
                    out.push(h.clone() - E::one());
                    out.push(h.clone());
                }
                (None, None) => {
                    out.extend([-E::one(), E::zero(), E::one()]);
                }
            }
        }
        out
    }
}

impl<E: ExactScalar> PartialEq for IntervalSet<E> {
    fn eq(&self, other: &Self) -> bool {
        self.parts.len() == other.parts.len()
            && self.parts.iter().zip(&other.parts).all(|(a, b)| {
                lo_cmp(&a.lo, &b.lo) == Ordering::Equal && hi_cmp(&a.hi, &b.hi) == Ordering::Equal
            })
    }
}

impl<E: ExactScalar> fmt::Display for IntervalSet<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "{{}}");
        }
        for (i, iv) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, " u ")?;
            }
            match (&iv.lo, &iv.hi) {
                (Some(l), Some(h)) if l.eq_exact(h) => write!(f, "{{{l}}}")?,
                (Some(l), Some(h)) => write!(f, "[{l}, {h}]")?,
                (Some(l), None) => write!(f, "[{l}, +inf)")?,
                (None, Some(h)) => write!(f, "(-inf, {h}]")?,
                (None, None) => write!(f, "(-inf, +inf)")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn normalization_merges() {
        let s = IntervalSet::from_intervals(vec![Interval::closed(q(2), q(3)), Interval::closed(q(0), q(2)), Interval::point(q(5))]);
        assert_eq!(s.parts().len(), 2);
        assert!(s.contains(&q(1)) && !s.contains(&q(4)));
        let t = IntervalSet::at_most(q(0)).union(&IntervalSet::at_least(q(-1)));
        assert!(t.is_all());
    }

    #[test]
    fn pairing() {
        let s = IntervalSet::closed(q(-1), q(2));
        assert_eq!(s.min_pairing(&q(1)), Extended::Finite(q(-1)));
        assert_eq!(s.min_pairing(&q(-1)), Extended::Finite(q(-2)));
        assert_eq!(IntervalSet::<BigRational>::all().min_pairing(&q(1)), Extended::NegInf);
        assert_eq!(IntervalSet::<BigRational>::empty().min_pairing(&q(1)), Extended::PosInf);
    }
}
