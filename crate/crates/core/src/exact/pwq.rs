//! Continuous piecewise quadratic functions of one variable.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::scalar::ExactScalar;

/// `a x² + c x + d`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadPiece<E> {
    pub a: E,
    pub c: E,
    pub d: E,
}

impl<E: ExactScalar> QuadPiece<E> {
    pub fn new(a: E, c: E, d: E) -> Self {
        QuadPiece { a, c, d }
    }

    pub fn value(&self, x: &E) -> E {
        self.a.clone() * x.clone() * x.clone() + self.c.clone() * x.clone() + self.d.clone()
    }

    pub fn slope(&self, x: &E) -> E {
        E::from_int(2) * self.a.clone() * x.clone() + self.c.clone()
    }

    /// Second derivative `2a`.
    pub fn curvature(&self) -> E {
        E::from_int(2) * self.a.clone()
    }

    pub fn same_as(&self, o: &Self) -> bool {
        self.a.eq_exact(&o.a) && self.c.eq_exact(&o.c) && self.d.eq_exact(&o.d)
    }

    pub fn plus(&self, o: &Self) -> Self {
        QuadPiece {
            a: self.a.clone() + o.a.clone(),
            c: self.c.clone() + o.c.clone(),
            d: self.d.clone() + o.d.clone(),
        }
    }
}

/// Effective domain `[lo, hi]`; `None` marks an infinite end.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain<E> {
    pub lo: Option<E>,
    pub hi: Option<E>,
}

impl<E> Domain<E> {
    pub fn real_line() -> Self {
        Domain { lo: None, hi: None }
    }
}

/// Position of a point relative to the breakpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Outside,
    /// Strictly inside piece `i`.
    Interior(usize),
    /// At breakpoint `i`, between pieces `i` and `i + 1`.
    Breakpoint(usize),
    LowerEnd,
    UpperEnd,
}

/// A kink `b` with one-sided slopes `d₋ = φ'(b⁻)`, `d₊ = φ'(b⁺)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kink<E> {
    pub index: usize,
    pub at: E,
    pub left_slope: E,
    pub right_slope: E,
}

impl<E: ExactScalar> Kink<E> {
    pub fn is_concave(&self) -> bool {
        self.right_slope.lt_exact(&self.left_slope)
    }

    pub fn is_convex(&self) -> bool {
        self.left_slope.lt_exact(&self.right_slope)
    }
}

/// Continuous piecewise quadratic `φ : ℝ → ℝ ∪ {+∞}` with finitely many breakpoints.
///
/// Piece `i` lives on `[b_{i-1}, b_i]` intersected with the domain; the function is `+∞`
/// outside the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseQuad1D<E> {
    breakpoints: Vec<E>,
    pieces: Vec<QuadPiece<E>>,
    domain: Domain<E>,
}

impl<E: ExactScalar> PiecewiseQuad1D<E> {
    pub fn new(breakpoints: Vec<E>, pieces: Vec<QuadPiece<E>>, domain: Domain<E>) -> Result<Self> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidPiecewise(format!(
                "{} pieces need {} breakpoints, got {}",
                pieces.len(),
                pieces.len().saturating_sub(1),
                breakpoints.len()
            )));
        }
        if let (Some(l), Some(h)) = (&domain.lo, &domain.hi) {
            if !l.lt_exact(h) {
                return Err(Error::InvalidPiecewise("domain must satisfy lo < hi".into()));
            }
        }
        for w in breakpoints.windows(2) {
            if !w[0].lt_exact(&w[1]) {
                return Err(Error::InvalidPiecewise("breakpoints must be strictly increasing".into()));
            }
        }
        for b in &breakpoints {
            let inside = domain.lo.as_ref().is_none_or(|l| l.lt_exact(b)) && domain.hi.as_ref().is_none_or(|h| b.lt_exact(h));
            if !inside {
                return Err(Error::InvalidPiecewise(format!("breakpoint {b} is not interior to the domain")));
            }
        }
        for (i, b) in breakpoints.iter().enumerate() {
            if !pieces[i].value(b).eq_exact(&pieces[i + 1].value(b)) {
                return Err(Error::InvalidPiecewise(format!("discontinuity at breakpoint {b}")));
            }
        }
        Ok(PiecewiseQuad1D { breakpoints, pieces, domain })
    }

    /// A single quadratic on the real line.
    pub fn smooth(piece: QuadPiece<E>) -> Self {
        PiecewiseQuad1D { breakpoints: vec![], pieces: vec![piece], domain: Domain::real_line() }
    }

    /// `|x|`
    pub fn abs() -> Self {
        let z = E::zero;
        Self::new(
            vec![z()],
            vec![QuadPiece::new(z(), -E::one(), z()), QuadPiece::new(z(), E::one(), z())],
            Domain::real_line(),
        )
        .expect("valid")
    }

    /// `-|x|`
    pub fn neg_abs() -> Self {
        let z = E::zero;
        Self::new(
            vec![z()],
            vec![QuadPiece::new(z(), E::one(), z()), QuadPiece::new(z(), -E::one(), z())],
            Domain::real_line(),
        )
        .expect("valid")
    }

    pub fn breakpoints(&self) -> &[E] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[QuadPiece<E>] {
        &self.pieces
    }

    pub fn domain(&self) -> &Domain<E> {
        &self.domain
    }

    /// Closed interval of piece `i`.
    pub fn piece_bounds(&self, i: usize) -> (Option<E>, Option<E>) {
        let lo = if i == 0 { self.domain.lo.clone() } else { Some(self.breakpoints[i - 1].clone()) };
        let hi = if i + 1 == self.pieces.len() { self.domain.hi.clone() } else { Some(self.breakpoints[i].clone()) };
        (lo, hi)
    }

    pub fn in_domain(&self, x: &E) -> bool {
        self.domain.lo.as_ref().is_none_or(|l| l.le_exact(x)) && self.domain.hi.as_ref().is_none_or(|h| x.le_exact(h))
    }

    pub fn locate(&self, x: &E) -> Location {
        if !self.in_domain(x) {
            return Location::Outside;
        }
        if self.domain.lo.as_ref().is_some_and(|l| l.eq_exact(x)) {
            return Location::LowerEnd;
        }
        if self.domain.hi.as_ref().is_some_and(|h| h.eq_exact(x)) {
            return Location::UpperEnd;
        }
        for (i, b) in self.breakpoints.iter().enumerate() {
            match x.compare(b) {
                Ordering::Less => return Location::Interior(i),
                Ordering::Equal => return Location::Breakpoint(i),
                Ordering::Greater => {}
            }
        }
        Location::Interior(self.breakpoints.len())
    }

    /// Index of a piece whose closed interval contains `x`.
    pub fn piece_at(&self, x: &E) -> Option<usize> {
        match self.locate(x) {
            Location::Outside => None,
            Location::Interior(i) | Location::Breakpoint(i) => Some(i),
            Location::LowerEnd => Some(0),
            Location::UpperEnd => Some(self.pieces.len() - 1),
        }
    }

    pub fn value(&self, x: &E) -> ExtReal<E> {
        match self.piece_at(x) {
            Some(i) => ExtReal::Finite(self.pieces[i].value(x)),
            None => ExtReal::PosInf,
        }
    }

    pub fn kinks(&self) -> Vec<Kink<E>> {
        self.breakpoints
            .iter()
            .enumerate()
            .map(|(i, b)| Kink {
                index: i,
                at: b.clone(),
                left_slope: self.pieces[i].slope(b),
                right_slope: self.pieces[i + 1].slope(b),
            })
            .collect()
    }

    /// `φ + (κ/2) x²`
    pub fn tilt(&self, kappa: &E) -> Self {
        let half = kappa.clone() * E::half();
        PiecewiseQuad1D {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|p| QuadPiece::new(p.a.clone() + half.clone(), p.c.clone(), p.d.clone()))
                .collect(),
            domain: self.domain.clone(),
        }
    }

    /// Pointwise sum on the intersection of the domains.
    pub fn add(&self, other: &Self) -> Result<Self> {
        let lo = match (&self.domain.lo, &other.domain.lo) {
            (Some(a), Some(b)) => Some(E::max_of(a, b)),
            (a, b) => a.clone().or(b.clone()),
        };
        let hi = match (&self.domain.hi, &other.domain.hi) {
            (Some(a), Some(b)) => Some(E::min_of(a, b)),
            (a, b) => a.clone().or(b.clone()),
        };
        let domain = Domain { lo, hi };
        let mut bps: Vec<E> = self.breakpoints.iter().chain(&other.breakpoints).cloned().collect();
        bps.sort_by(|a, b| a.compare(b));
        bps.dedup_by(|a, b| a.eq_exact(b));
        bps.retain(|b| {
            domain.lo.as_ref().is_none_or(|l| l.lt_exact(b)) && domain.hi.as_ref().is_none_or(|h| b.lt_exact(h))
        });
        let n = bps.len() + 1;
        let mut pieces = Vec::with_capacity(n);
        for i in 0..n {
            let lo = if i == 0 { domain.lo.clone() } else { Some(bps[i - 1].clone()) };
            let hi = if i + 1 == n { domain.hi.clone() } else { Some(bps[i].clone()) };
            let s = sample_between(lo.as_ref(), hi.as_ref());
            let (pa, pb) = (self.piece_at(&s), other.piece_at(&s));
            match (pa, pb) {
                (Some(a), Some(b)) => pieces.push(self.pieces[a].plus(&other.pieces[b])),
                _ => return Err(Error::InvalidPiecewise("domains do not overlap".into())),
            }
        }
        Self::new(bps, pieces, domain).map(|f| f.merged())
    }

    /// Drops breakpoints between identical pieces.
    pub fn merged(self) -> Self {
        let mut bps = Vec::new();
        let mut pieces = vec![self.pieces[0].clone()];
        for (i, b) in self.breakpoints.iter().enumerate() {
            let next = &self.pieces[i + 1];
            if !pieces.last().expect("nonempty").same_as(next) {
                bps.push(b.clone());
                pieces.push(next.clone());
            }
        }
        PiecewiseQuad1D { breakpoints: bps, pieces, domain: self.domain }
    }

    /// Exact decomposition of `max_i q_i` on the real line.
    ///
    /// `None` when some tie point is not representable in `E`.
    pub fn max_of(quads: &[QuadPiece<E>]) -> Option<Self> {
        let mut uniq: Vec<QuadPiece<E>> = Vec::new();
        for q in quads {
            if !uniq.iter().any(|u| u.same_as(q)) {
                uniq.push(q.clone());
            }
        }
        if uniq.is_empty() {
            return None;
        }
        let mut roots: Vec<E> = Vec::new();
        for i in 0..uniq.len() {
            for j in i + 1..uniq.len() {
                let da = uniq[i].a.clone() - uniq[j].a.clone();
                let dc = uniq[i].c.clone() - uniq[j].c.clone();
                let dd = uniq[i].d.clone() - uniq[j].d.clone();
                if da.is_zero_exact() {
                    if !dc.is_zero_exact() {
                        roots.push(-dd / dc);
                    }
                } else {
                    let disc = dc.clone() * dc.clone() - E::from_int(4) * da.clone() * dd;
                    if disc.is_neg() {
                        continue;
                    }
                    let s = disc.sqrt_exact()?;
                    let two_a = E::from_int(2) * da;
                    roots.push((-dc.clone() - s.clone()) / two_a.clone());
                    roots.push((-dc + s) / two_a);
                }
            }
        }
        roots.sort_by(|a, b| a.compare(b));
        roots.dedup_by(|a, b| a.eq_exact(b));
        let n = roots.len() + 1;
        let mut pieces = Vec::with_capacity(n);
        for k in 0..n {
            let lo = if k == 0 { None } else { Some(&roots[k - 1]) };
            let hi = if k + 1 == n { None } else { Some(&roots[k]) };
            let s = sample_between(lo, hi);
            let best = uniq
                .iter()
                .max_by(|p, q| p.value(&s).compare(&q.value(&s)))
                .expect("nonempty");
            pieces.push(best.clone());
        }
        Self::new(roots, pieces, Domain::real_line()).ok().map(|f| f.merged())
    }

    /// Converts every coefficient with `f`.
    pub fn map_scalar<F: ExactScalar>(&self, f: impl Fn(&E) -> F) -> PiecewiseQuad1D<F> {
        PiecewiseQuad1D {
            breakpoints: self.breakpoints.iter().map(&f).collect(),
            pieces: self.pieces.iter().map(|p| QuadPiece::new(f(&p.a), f(&p.c), f(&p.d))).collect(),
            domain: Domain { lo: self.domain.lo.as_ref().map(&f), hi: self.domain.hi.as_ref().map(&f) },
        }
    }

    /// Breakpoints, finite domain ends and one interior point per piece.
    pub fn test_points(&self) -> Vec<E> {
        let mut pts: Vec<E> = Vec::new();
        pts.extend(self.domain.lo.iter().cloned());
        pts.extend(self.breakpoints.iter().cloned());
        pts.extend(self.domain.hi.iter().cloned());
        for i in 0..self.pieces.len() {
            let (lo, hi) = self.piece_bounds(i);
            pts.push(sample_between(lo.as_ref(), hi.as_ref()));
        }
        pts.sort_by(|a, b| a.compare(b));
        pts.dedup_by(|a, b| a.eq_exact(b));
        pts
    }
}

/// A point strictly inside `(lo, hi)`.
pub(crate) fn sample_between<E: ExactScalar>(lo: Option<&E>, hi: Option<&E>) -> E {
    match (lo, hi) {
        (Some(l), Some(h)) => (l.clone() + h.clone()) * E::half(),
        (Some(l), None) => l.clone() + E::one(),
        (None, Some(h)) => h.clone() - E::one(),
        (None, None) => E::zero(),
    }
}

impl<E: ExactScalar> fmt::Display for PiecewiseQuad1D<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.pieces.iter().enumerate() {
            let (lo, hi) = self.piece_bounds(i);
            let lo = lo.map_or("-inf".to_string(), |v| v.to_string());
            let hi = hi.map_or("+inf".to_string(), |v| v.to_string());
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "[{lo}, {hi}]: {}x^2 + {}x + {}", p.a, p.c, p.d)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn rejects_discontinuity() {
        let r = PiecewiseQuad1D::new(
            vec![q(0, 1)],
            vec![QuadPiece::new(q(0, 1), q(0, 1), q(1, 1)), QuadPiece::new(q(0, 1), q(0, 1), q(0, 1))],
            Domain::real_line(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn max_of_abs_of_square_minus_one() {
        let f = PiecewiseQuad1D::max_of(&[
            QuadPiece::new(q(1, 1), q(0, 1), q(-1, 1)),
            QuadPiece::new(q(-1, 1), q(0, 1), q(1, 1)),
        ])
        .unwrap();
        assert_eq!(f.breakpoints(), &[q(-1, 1), q(1, 1)]);
        assert_eq!(f.value(&q(0, 1)), ExtReal::Finite(q(1, 1)));
        assert_eq!(f.value(&q(3, 1)), ExtReal::Finite(q(8, 1)));
    }

    #[test]
    fn max_of_irrational_ties_is_none() {
        let f = PiecewiseQuad1D::max_of(&[
            QuadPiece::new(q(1, 1), q(0, 1), q(0, 1)),
            QuadPiece::new(q(0, 1), q(0, 1), q(2, 1)),
        ]);
        assert!(f.is_none());
    }

    #[test]
    fn sum_merges_breakpoints() {
        let f = PiecewiseQuad1D::<BigRational>::abs();
        let g = PiecewiseQuad1D::neg_abs();
        let h = f.add(&g).unwrap();
        assert!(h.breakpoints().is_empty());
        assert_eq!(h.value(&q(5, 1)), ExtReal::Finite(q(0, 1)));
    }

    #[test]
    fn domain_handling() {
        let f = PiecewiseQuad1D::new(vec![], vec![QuadPiece::new(q(0, 1), q(0, 1), q(0, 1))], Domain { lo: Some(q(0, 1)), hi: Some(q(1, 1)) }).unwrap();
        assert_eq!(f.value(&q(2, 1)), ExtReal::PosInf);
        assert_eq!(f.locate(&q(0, 1)), Location::LowerEnd);
        assert_eq!(f.locate(&q(1, 1)), Location::UpperEnd);
    }
}
