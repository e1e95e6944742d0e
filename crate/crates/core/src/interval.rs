//! Closed intervals with optional bounds.

use serde::Serialize;

use crate::scalar::Real;

/// Closed interval `[lo, hi]`; `None` marks an infinite end.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Interval<T> {
    pub lo: Option<T>,
    pub hi: Option<T>,
}

impl<T> Interval<T> {
    pub fn new(lo: Option<T>, hi: Option<T>) -> Self {
        Interval { lo, hi }
    }

    pub fn all() -> Self {
        Interval { lo: None, hi: None }
    }

    pub fn at_least(lo: T) -> Self {
        Interval { lo: Some(lo), hi: None }
    }

    pub fn at_most(hi: T) -> Self {
        Interval { lo: None, hi: Some(hi) }
    }
}

impl<T: Clone> Interval<T> {
    pub fn point(x: T) -> Self {
        Interval { lo: Some(x.clone()), hi: Some(x) }
    }

    pub fn closed(lo: T, hi: T) -> Self {
        Interval { lo: Some(lo), hi: Some(hi) }
    }
}

impl<T: Real> Interval<T> {
    /// Euclidean distance from `x` to the interval.
    pub fn distance_to(&self, x: T) -> T {
        let below = self.lo.map_or(T::zero(), |l| (l - x).max(T::zero()));
        let above = self.hi.map_or(T::zero(), |h| (x - h).max(T::zero()));
        below.max(above)
    }

    /// Nearest point of the interval.
    pub fn clamp(&self, x: T) -> T {
        let mut y = x;
        if let Some(l) = self.lo {
            y = y.max(l);
        }
        if let Some(h) = self.hi {
            y = y.min(h);
        }
        y
    }

    pub fn shifted(&self, s: T) -> Self {
        Interval { lo: self.lo.map(|l| l + s), hi: self.hi.map(|h| h + s) }
    }

    pub fn is_point(&self) -> bool {
        matches!((self.lo, self.hi), (Some(l), Some(h)) if l == h)
    }

    /// Finite representatives. Unbounded ends are sampled geometrically with the given spread.
    pub fn representatives(&self, spread: T) -> Vec<T> {
        let ladder = [1e-3, 1e-1, 1.0, 10.0, 100.0, 1e3];
        match (self.lo, self.hi) {
            (Some(l), Some(h)) if l == h => vec![l],
            (Some(l), Some(h)) => vec![l, (l + h) / T::lit(2.0), h],
            (Some(l), None) => std::iter::once(l)
                .chain(ladder.iter().map(|&k| l + spread * T::lit(k)))
                .collect(),
            (None, Some(h)) => std::iter::once(h)
                .chain(ladder.iter().map(|&k| h - spread * T::lit(k)))
                .collect(),
            (None, None) => {
                let mut v = vec![T::zero()];
                for &k in &ladder {
                    v.push(spread * T::lit(k));
                    v.push(-spread * T::lit(k));
                }
                v
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_and_clamp() {
        let i = Interval::closed(-1.0, 1.0);
        assert_eq!(i.distance_to(3.0), 2.0);
        assert_eq!(i.distance_to(0.2), 0.0);
        assert_eq!(Interval::at_least(0.0).clamp(-5.0), 0.0);
        assert_eq!(Interval::<f64>::all().distance_to(1e9), 0.0);
    }

    #[test]
    fn representatives_cover_both_signs_of_line() {
        let r = Interval::<f64>::all().representatives(1.0);
        assert!(r.iter().any(|&x| x > 100.0) && r.iter().any(|&x| x < -100.0));
        assert_eq!(Interval::point(2.0).representatives(1.0), vec![2.0]);
    }
}
