//! Closed cones in the plane with exact membership.

use std::cmp::Ordering;

use crate::interval::Interval;
use crate::scalar::ExactScalar;

use super::sets::IntervalSet;

#[derive(Clone, Debug, PartialEq)]
pub struct Vec2<E> {
    pub x: E,
    pub y: E,
}

impl<E: ExactScalar> Vec2<E> {
    pub fn new(x: E, y: E) -> Self {
        Vec2 { x, y }
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero_exact() && self.y.is_zero_exact()
    }

    pub fn dot(&self, o: &Self) -> E {
        self.x.clone() * o.x.clone() + self.y.clone() * o.y.clone()
    }

    pub fn cross(&self, o: &Self) -> E {
        self.x.clone() * o.y.clone() - self.y.clone() * o.x.clone()
    }

    pub fn neg(&self) -> Self {
        Vec2::new(-self.x.clone(), -self.y.clone())
    }

    /// Rotation by +90 degrees.
    pub fn perp(&self) -> Self {
        Vec2::new(-self.y.clone(), self.x.clone())
    }

    pub fn swap(&self) -> Self {
        Vec2::new(self.y.clone(), self.x.clone())
    }

    pub fn sub(&self, o: &Self) -> Self {
        Vec2::new(self.x.clone() - o.x.clone(), self.y.clone() - o.y.clone())
    }

    pub fn eq_exact(&self, o: &Self) -> bool {
        self.x.eq_exact(&o.x) && self.y.eq_exact(&o.y)
    }

    fn same_direction(&self, o: &Self) -> bool {
        self.cross(o).is_zero_exact() && self.dot(o).is_pos()
    }
}

/// Shape of a closed convex cone in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeKind {
    Zero,
    Ray,
    Line,
    Wedge,
    HalfPlane,
    Plane,
}

/// Conic hull of finitely many generators (`{0}` when there are none).
#[derive(Clone, Debug)]
pub struct ConvexCone2<E> {
    gens: Vec<Vec2<E>>,
}

impl<E: ExactScalar> ConvexCone2<E> {
    pub fn new(gens: Vec<Vec2<E>>) -> Self {
        ConvexCone2 { gens: gens.into_iter().filter(|g| !g.is_zero()).collect() }
    }

    pub fn zero() -> Self {
        ConvexCone2 { gens: vec![] }
    }

    pub fn ray(d: Vec2<E>) -> Self {
        Self::new(vec![d])
    }

    pub fn line(d: Vec2<E>) -> Self {
        let n = d.neg();
        Self::new(vec![d, n])
    }

    pub fn plane() -> Self {
        let (o, z) = (E::one, E::zero);
        Self::new(vec![Vec2::new(o(), z()), Vec2::new(-o(), z()), Vec2::new(z(), o()), Vec2::new(z(), -o())])
    }

    pub fn generators(&self) -> &[Vec2<E>] {
        &self.gens
    }

    pub fn contains(&self, p: &Vec2<E>) -> bool {
        if p.is_zero() {
            return true;
        }
        if self.gens.iter().any(|g| g.same_direction(p)) {
            return true;
        }
        for i in 0..self.gens.len() {
            for j in i + 1..self.gens.len() {
                let (gi, gj) = (&self.gens[i], &self.gens[j]);
                let det = gi.cross(gj);
                if det.is_zero_exact() {
                    continue;
                }
                let alpha = p.cross(gj) / det.clone();
                let beta = gi.cross(p) / det;
                if !alpha.is_neg() && !beta.is_neg() {
                    return true;
                }
            }
        }
        false
    }

    pub fn swapped(&self) -> Self {
        ConvexCone2 { gens: self.gens.iter().map(Vec2::swap).collect() }
    }

    pub fn kind(&self) -> ConeKind {
        if self.gens.is_empty() {
            return ConeKind::Zero;
        }
        let (o, z) = (E::one, E::zero);
        let axes = [Vec2::new(o(), z()), Vec2::new(-o(), z()), Vec2::new(z(), o()), Vec2::new(z(), -o())];
        if axes.iter().all(|a| self.contains(a)) {
            return ConeKind::Plane;
        }
        let line_dir = self.gens.iter().find(|g| self.contains(&g.neg()));
        let d0 = &self.gens[0];
        match line_dir {
            Some(d) => {
                if self.gens.iter().all(|g| g.cross(d).is_zero_exact()) {
                    ConeKind::Line
                } else {
                    ConeKind::HalfPlane
                }
            }
            None => {
                if self.gens.iter().all(|g| g.same_direction(d0)) {
                    ConeKind::Ray
                } else {
                    ConeKind::Wedge
                }
            }
        }
    }

    /// Polar cone `{n : ⟨n, r⟩ ≤ 0 for all r}`.
    pub fn polar(&self) -> Self {
        polar_of(&self.gens)
    }

    /// `{z : (w, z) ∈ K}`.
    pub fn slice_x(&self, w: &E) -> IntervalSet<E> {
        let (o, z) = (E::one, E::zero);
        let up = self.contains(&Vec2::new(z(), o()));
        let down = self.contains(&Vec2::new(z(), -o()));
        if w.is_zero_exact() {
            return match (down, up) {
                (true, true) => IntervalSet::all(),
                (false, true) => IntervalSet::at_least(z()),
                (true, false) => IntervalSet::at_most(z()),
                (false, false) => IntervalSet::point(z()),
            };
        }
        let cands: Vec<E> = self
            .gens
            .iter()
            .filter(|g| g.x.sign_cmp() == w.sign_cmp())
            .map(|g| w.clone() * g.y.clone() / g.x.clone())
            .collect();
        if cands.is_empty() {
            return IntervalSet::empty();
        }
        let lo = cands.iter().cloned().reduce(|a, b| E::min_of(&a, &b)).expect("nonempty");
        let hi = cands.iter().cloned().reduce(|a, b| E::max_of(&a, &b)).expect("nonempty");
        IntervalSet::from_intervals(vec![Interval::new((!down).then_some(lo), (!up).then_some(hi))])
    }

    /// `{z : (z, c) ∈ K}`.
    pub fn slice_y(&self, c: &E) -> IntervalSet<E> {
        self.swapped().slice_x(c)
    }

    /// Equality as sets (mutual containment of generators).
    pub fn same_set(&self, o: &Self) -> bool {
        self.gens.iter().all(|g| o.contains(g)) && o.gens.iter().all(|g| self.contains(g))
    }
}

fn polar_of<E: ExactScalar>(gens: &[Vec2<E>]) -> ConvexCone2<E> {
    if gens.is_empty() {
        return ConvexCone2::plane();
    }
    let feasible = |c: &Vec2<E>| gens.iter().all(|r| c.dot(r).sign_cmp() != Ordering::Greater);
    let mut out: Vec<Vec2<E>> = Vec::new();
    for r in gens {
        for c in [r.perp(), r.perp().neg(), r.neg()] {
            if feasible(&c) && !out.iter().any(|o| o.eq_exact(&c)) {
                out.push(c);
            }
        }
    }
    ConvexCone2::new(out)
}

/// Finite union of closed convex cones.
#[derive(Clone, Debug)]
pub struct Cone2D<E> {
    parts: Vec<ConvexCone2<E>>,
}

impl<E: ExactScalar> Cone2D<E> {
    pub fn new(parts: Vec<ConvexCone2<E>>) -> Self {
        Cone2D { parts }
    }

    pub fn convex(k: ConvexCone2<E>) -> Self {
        Cone2D { parts: vec![k] }
    }

    pub fn parts(&self) -> &[ConvexCone2<E>] {
        &self.parts
    }

    pub fn contains(&self, p: &Vec2<E>) -> bool {
        p.is_zero() || self.parts.iter().any(|k| k.contains(p))
    }

    pub fn union(&self, other: &Self) -> Self {
        Cone2D { parts: self.parts.iter().chain(&other.parts).cloned().collect() }
    }

    /// Polar of the union, which is the polar of the conic hull.
    pub fn polar(&self) -> ConvexCone2<E> {
        let gens: Vec<Vec2<E>> = self.parts.iter().flat_map(|k| k.gens.iter().cloned()).collect();
        polar_of(&gens)
    }

    pub fn slice_x(&self, w: &E) -> IntervalSet<E> {
        self.parts.iter().fold(IntervalSet::empty(), |acc, k| acc.union(&k.slice_x(w)))
    }

    pub fn slice_y(&self, c: &E) -> IntervalSet<E> {
        self.parts.iter().fold(IntervalSet::empty(), |acc, k| acc.union(&k.slice_y(c)))
    }

    /// True when the union is itself convex (one part contains all generators).
    pub fn is_convex(&self) -> bool {
        let gens: Vec<&Vec2<E>> = self.parts.iter().flat_map(|k| k.gens.iter()).collect();
        let hull = ConvexCone2::new(gens.iter().map(|g| (*g).clone()).collect());
        let test: Vec<Vec2<E>> = hull_probe_points(&hull);
        test.iter().all(|p| self.contains(p))
    }
}

/// Generators plus pairwise sums; a union of convex cones equals its hull iff it contains these.
fn hull_probe_points<E: ExactScalar>(k: &ConvexCone2<E>) -> Vec<Vec2<E>> {
    let g = &k.gens;
    let mut out = g.clone();
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            out.push(Vec2::new(g[i].x.clone() + g[j].x.clone(), g[i].y.clone() + g[j].y.clone()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }
    fn v(x: i64, y: i64) -> Vec2<BigRational> {
        Vec2::new(q(x), q(y))
    }

    #[test]
    fn membership_and_kind() {
        let k = ConvexCone2::new(vec![v(1, 0), v(0, 1)]);
        assert!(k.contains(&v(2, 3)));
        assert!(!k.contains(&v(-1, 1)));
        assert_eq!(k.kind(), ConeKind::Wedge);
        assert_eq!(ConvexCone2::line(v(1, 2)).kind(), ConeKind::Line);
        assert_eq!(ConvexCone2::new(vec![v(1, 0), v(-1, 0), v(0, 1)]).kind(), ConeKind::HalfPlane);
        assert_eq!(ConvexCone2::<BigRational>::plane().kind(), ConeKind::Plane);
        assert_eq!(ConvexCone2::<BigRational>::zero().kind(), ConeKind::Zero);
    }

    #[test]
    fn polar_of_quadrant_edges() {
        let t = Cone2D::new(vec![ConvexCone2::ray(v(1, 0)), ConvexCone2::ray(v(0, -1))]);
        let n = t.polar();
        assert!(n.contains(&v(-1, 1)) && n.contains(&v(-3, 0)) && n.contains(&v(0, 2)));
        assert!(!n.contains(&v(1, 1)));
        assert_eq!(n.kind(), ConeKind::Wedge);
    }

    #[test]
    fn slices() {
        let k = ConvexCone2::new(vec![v(1, -1), v(1, 1)]);
        assert_eq!(k.slice_x(&q(2)), IntervalSet::closed(q(-2), q(2)));
        assert!(k.slice_x(&q(-1)).is_empty());
        assert_eq!(k.slice_x(&q(0)), IntervalSet::point(q(0)));
        let h = ConvexCone2::new(vec![v(1, 0), v(-1, 0), v(0, 1)]);
        assert_eq!(h.slice_x(&q(1)), IntervalSet::at_least(q(0)));
        assert_eq!(h.slice_y(&q(1)), IntervalSet::all());
        assert!(h.slice_y(&q(-1)).is_empty());
    }

    #[test]
    fn union_convexity() {
        let cross = Cone2D::new(vec![ConvexCone2::line(v(1, 0)), ConvexCone2::line(v(0, 1))]);
        assert!(!cross.is_convex());
        let half = Cone2D::new(vec![ConvexCone2::ray(v(1, 0)), ConvexCone2::ray(v(-1, 0)), ConvexCone2::new(vec![v(1, 0), v(0, 1), v(-1, 0)])]);
        assert!(half.is_convex());
    }
}
