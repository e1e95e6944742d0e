//! The graph of the subdifferential of a 1-D piecewise quadratic, and its cones.

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::scalar::ExactScalar;

use super::cone::{Cone2D, ConvexCone2, Vec2};
use super::pwq::PiecewiseQuad1D;
use super::sets::IntervalSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComponentKind {
    /// Graph of the derivative of piece `i`.
    Arc(usize),
    /// Vertical segment `{b} × [d₋, d₊]` at a convex kink.
    KinkSegment(usize),
    /// Vertical normal-cone ray at a finite domain end.
    BoundaryRay,
    /// Any other line or segment.
    Free,
}

/// `{anchor + s·dir : s ∈ [lo, hi]}` with `lo < hi` and `dir ≠ 0`.
#[derive(Clone, Debug)]
pub struct GraphComponent<E> {
    pub kind: ComponentKind,
    pub anchor: Vec2<E>,
    pub dir: Vec2<E>,
    pub lo: Option<E>,
    pub hi: Option<E>,
}

impl<E: ExactScalar> GraphComponent<E> {
    pub fn new(kind: ComponentKind, anchor: Vec2<E>, dir: Vec2<E>, lo: Option<E>, hi: Option<E>) -> Self {
        GraphComponent { kind, anchor, dir, lo, hi }
    }

    /// Parameter of `p` if `p` lies on the component.
    pub fn param_of(&self, p: &Vec2<E>) -> Option<E> {
        let r = p.sub(&self.anchor);
        if !r.cross(&self.dir).is_zero_exact() {
            return None;
        }
        let s = r.dot(&self.dir) / self.dir.dot(&self.dir);
        let ok = self.lo.as_ref().is_none_or(|l| l.le_exact(&s)) && self.hi.as_ref().is_none_or(|h| s.le_exact(h));
        ok.then_some(s)
    }

    pub fn contains(&self, p: &Vec2<E>) -> bool {
        self.param_of(p).is_some()
    }

    /// Tangent cone of the component at `p`: a line in the relative interior, a ray at an end.
    pub fn tangent_at(&self, p: &Vec2<E>) -> Option<ConvexCone2<E>> {
        let s = self.param_of(p)?;
        let at_lo = self.lo.as_ref().is_some_and(|l| l.eq_exact(&s));
        let at_hi = self.hi.as_ref().is_some_and(|h| h.eq_exact(&s));
        Some(match (at_lo, at_hi) {
            (false, false) => ConvexCone2::line(self.dir.clone()),
            (true, false) => ConvexCone2::ray(self.dir.clone()),
            (false, true) => ConvexCone2::ray(self.dir.neg()),
            (true, true) => ConvexCone2::zero(),
        })
    }

    pub fn normal_line(&self) -> ConvexCone2<E> {
        ConvexCone2::line(self.dir.perp())
    }

    fn is_vertical(&self) -> bool {
        self.dir.x.is_zero_exact()
    }
}

/// Two-point fiber `{(b, d₊), (b, d₋)}` at a concave kink; recorded for display only.
#[derive(Clone, Debug)]
pub struct ConcavePair<E> {
    pub at: E,
    pub lower: E,
    pub upper: E,
}

/// Tangent, regular normal and limiting normal cones at a graph point.
#[derive(Clone, Debug)]
pub struct PointCones<E> {
    pub tangent: Cone2D<E>,
    pub regular_normal: ConvexCone2<E>,
    pub limiting_normal: Cone2D<E>,
}

/// Graphical derivative, combined and limiting second-order subdifferentials at `(x, v)` in direction `w`.
#[derive(Clone, Debug)]
pub struct SecondOrderSets<E> {
    pub graphical: IntervalSet<E>,
    pub combined: IntervalSet<E>,
    pub limiting: IntervalSet<E>,
}

/// A closed subset of the plane given as a finite union of segments, rays and lines.
#[derive(Clone, Debug)]
pub struct SubdiffGraph1D<E> {
    pub components: Vec<GraphComponent<E>>,
    pub concave_pairs: Vec<ConcavePair<E>>,
}

impl<E: ExactScalar> PartialEq for SecondOrderSets<E> {
    fn eq(&self, o: &Self) -> bool {
        self.graphical == o.graphical && self.combined == o.combined && self.limiting == o.limiting
    }
}

impl<E: ExactScalar> SubdiffGraph1D<E> {
    pub fn from_components(components: Vec<GraphComponent<E>>) -> Self {
        SubdiffGraph1D { components, concave_pairs: vec![] }
    }

    /// gph ∂φ for a piecewise quadratic `φ`.
    pub fn of(f: &PiecewiseQuad1D<E>) -> Self {
        let mut comps = Vec::new();
        for (i, p) in f.pieces().iter().enumerate() {
            let (lo, hi) = f.piece_bounds(i);
            let x0 = lo.clone().or(hi.clone()).unwrap_or_else(E::zero);
            let anchor = Vec2::new(x0.clone(), p.slope(&x0));
            let dir = Vec2::new(E::one(), p.curvature());
            comps.push(GraphComponent::new(
                ComponentKind::Arc(i),
                anchor,
                dir,
                lo.map(|l| l - x0.clone()),
                hi.map(|h| h - x0.clone()),
            ));
        }
        let mut concave = Vec::new();
        for k in f.kinks() {
            if k.is_convex() {
                comps.push(GraphComponent::new(
                    ComponentKind::KinkSegment(k.index),
                    Vec2::new(k.at.clone(), k.left_slope.clone()),
                    Vec2::new(E::zero(), E::one()),
                    Some(E::zero()),
                    Some(k.right_slope.clone() - k.left_slope.clone()),
                ));
            } else if k.is_concave() {
                concave.push(ConcavePair { at: k.at.clone(), lower: k.right_slope.clone(), upper: k.left_slope.clone() });
            }
        }
        let down = Vec2::new(E::zero(), -E::one());
        let up = Vec2::new(E::zero(), E::one());
        if let Some(l) = &f.domain().lo {
            let s = f.pieces()[0].slope(l);
            comps.push(GraphComponent::new(ComponentKind::BoundaryRay, Vec2::new(l.clone(), s), down, Some(E::zero()), None));
        }
        if let Some(h) = &f.domain().hi {
            let s = f.pieces().last().expect("nonempty").slope(h);
            comps.push(GraphComponent::new(ComponentKind::BoundaryRay, Vec2::new(h.clone(), s), up, Some(E::zero()), None));
        }
        SubdiffGraph1D { components: comps, concave_pairs: concave }
    }

    /// gph ∂φ for `φ = 1 - δ_{0}` (0 at the origin, 1 elsewhere): `(ℝ × {0}) ∪ ({0} × ℝ)`.
    pub fn unit_except_origin() -> Self {
        let z = || Vec2::new(E::zero(), E::zero());
        Self::from_components(vec![
            GraphComponent::new(ComponentKind::Free, z(), Vec2::new(E::one(), E::zero()), None, None),
            GraphComponent::new(ComponentKind::Free, z(), Vec2::new(E::zero(), E::one()), None, None),
        ])
    }

    pub fn contains(&self, p: &Vec2<E>) -> bool {
        self.components.iter().any(|c| c.contains(p))
    }

    /// `{v : (x, v) ∈ gph}`.
    pub fn fiber(&self, x: &E) -> IntervalSet<E> {
        let mut parts = Vec::new();
        for c in &self.components {
            if c.is_vertical() {
                if !c.anchor.x.eq_exact(x) {
                    continue;
                }
                let at = |s: &E| c.anchor.y.clone() + s.clone() * c.dir.y.clone();
                let (a, b) = (c.lo.as_ref().map(at), c.hi.as_ref().map(at));
                let iv = if c.dir.y.is_pos() { Interval::new(a, b) } else { Interval::new(b, a) };
                parts.push(iv);
            } else {
                let s = (x.clone() - c.anchor.x.clone()) / c.dir.x.clone();
                let ok = c.lo.as_ref().is_none_or(|l| l.le_exact(&s)) && c.hi.as_ref().is_none_or(|h| s.le_exact(h));
                if ok {
                    parts.push(Interval::point(c.anchor.y.clone() + s * c.dir.y.clone()));
                }
            }
        }
        IntervalSet::from_intervals(parts)
    }

    pub fn cones_at(&self, p: &Vec2<E>) -> Result<PointCones<E>> {
        let through: Vec<&GraphComponent<E>> = self.components.iter().filter(|c| c.contains(p)).collect();
        if through.is_empty() {
            return Err(Error::PointNotOnGraph(format!("({}, {})", p.x, p.y)));
        }
        let tangent = Cone2D::new(through.iter().filter_map(|c| c.tangent_at(p)).collect());
        let regular_normal = tangent.polar();
        let mut limiting = vec![regular_normal.clone()];
        limiting.extend(through.iter().map(|c| c.normal_line()));
        Ok(PointCones { tangent, regular_normal, limiting_normal: Cone2D::new(limiting) })
    }

    /// Second-order sets at `(x, v)` in direction `w`:
    /// graphical `{z : (w, z) ∈ T}`, combined `{z : (z, -w) ∈ N̂}`, limiting `{z : (z, -w) ∈ N}`.
    pub fn second_order_maps(&self, x: &E, v: &E, w: &E) -> Result<SecondOrderSets<E>> {
        let cones = self.cones_at(&Vec2::new(x.clone(), v.clone()))?;
        let mw = -w.clone();
        Ok(SecondOrderSets {
            graphical: cones.tangent.slice_x(w),
            combined: cones.regular_normal.slice_y(&mw),
            limiting: cones.limiting_normal.slice_y(&mw),
        })
    }
}
