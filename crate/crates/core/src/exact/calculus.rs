//! Exact first- and second-order objects of a 1-D piecewise quadratic.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::ext::{ExtReal, Extended};
use crate::scalar::ExactScalar;

use super::cone::Vec2;
use super::graph::{SecondOrderSets, SubdiffGraph1D};
use super::pwq::{sample_between, Location, PiecewiseQuad1D};
use super::sets::IntervalSet;

/// Limiting subdifferential `∂φ(x)`.
pub fn subdifferential<E: ExactScalar>(f: &PiecewiseQuad1D<E>, x: &E) -> Result<IntervalSet<E>> {
    let p = f.pieces();
    Ok(match f.locate(x) {
        Location::Outside => return Err(Error::OutOfDomain(x.to_string())),
        Location::Interior(i) => IntervalSet::point(p[i].slope(x)),
        Location::LowerEnd => IntervalSet::at_most(p[0].slope(x)),
        Location::UpperEnd => IntervalSet::at_least(p[p.len() - 1].slope(x)),
        Location::Breakpoint(i) => {
            let (dl, dr) = (p[i].slope(x), p[i + 1].slope(x));
            if dl.le_exact(&dr) {
                IntervalSet::closed(dl, dr)
            } else {
                IntervalSet::from_points(vec![dr, dl])
            }
        }
    })
}

/// One side of the second subderivative: `d²φ(x,v)(w) = α w²`, `+∞` or `-∞` for `w` of that sign.
#[derive(Clone, Debug, PartialEq)]
pub enum Branch<E> {
    Quad(E),
    PosInf,
    NegInf,
}

impl<E: ExactScalar> Branch<E> {
    fn same(&self, o: &Self) -> bool {
        match (self, o) {
            (Branch::Quad(a), Branch::Quad(b)) => a.eq_exact(b),
            (Branch::PosInf, Branch::PosInf) | (Branch::NegInf, Branch::NegInf) => true,
            _ => false,
        }
    }
}

/// `w ↦ d²φ(x,v)(w)` as a pair of half-line branches.
#[derive(Clone, Debug, PartialEq)]
pub struct D2Form<E> {
    pub left: Branch<E>,
    pub right: Branch<E>,
}

impl<E: ExactScalar> D2Form<E> {
    pub fn eval(&self, w: &E) -> Extended<E> {
        let branch = match w.sign_cmp() {
            Ordering::Greater => &self.right,
            Ordering::Less => &self.left,
            Ordering::Equal => {
                let neg = matches!(self.left, Branch::NegInf) || matches!(self.right, Branch::NegInf);
                return if neg { Extended::NegInf } else { Extended::Finite(E::zero()) };
            }
        };
        match branch {
            Branch::Quad(a) => Extended::Finite(a.clone() * w.clone() * w.clone()),
            Branch::PosInf => Extended::PosInf,
            Branch::NegInf => Extended::NegInf,
        }
    }

    /// True when `d²` is a quadratic form on a subspace and `+∞` off it.
    pub fn is_generalized_quadratic(&self) -> bool {
        match (&self.left, &self.right) {
            (Branch::PosInf, Branch::PosInf) => true,
            (l @ Branch::Quad(_), r) => l.same(r),
            _ => false,
        }
    }

    /// `∂(½ d²)(w)`; `None` when a branch is `-∞`.
    pub fn half_subdifferential(&self, w: &E) -> Option<IntervalSet<E>> {
        if matches!(self.left, Branch::NegInf) || matches!(self.right, Branch::NegInf) {
            return None;
        }
        Some(match w.sign_cmp() {
            Ordering::Greater => match &self.right {
                Branch::Quad(a) => IntervalSet::point(a.clone() * w.clone()),
                _ => IntervalSet::empty(),
            },
            Ordering::Less => match &self.left {
                Branch::Quad(a) => IntervalSet::point(a.clone() * w.clone()),
                _ => IntervalSet::empty(),
            },
            Ordering::Equal => match (&self.left, &self.right) {
                (Branch::Quad(_), Branch::Quad(_)) => IntervalSet::point(E::zero()),
                (Branch::Quad(_), _) => IntervalSet::at_least(E::zero()),
                (_, Branch::Quad(_)) => IntervalSet::at_most(E::zero()),
                _ => IntervalSet::all(),
            },
        })
    }
}

fn side<E: ExactScalar>(slope: &E, v: &E, curvature: E, right: bool) -> Branch<E> {
    match v.compare(slope) {
        Ordering::Equal => Branch::Quad(curvature),
        Ordering::Less => {
            if right {
                Branch::PosInf
            } else {
                Branch::NegInf
            }
        }
        Ordering::Greater => {
            if right {
                Branch::NegInf
            } else {
                Branch::PosInf
            }
        }
    }
}

/// The second subderivative `d²φ(x, v)` for `v ∈ ∂φ(x)`.
pub fn d2_form<E: ExactScalar>(f: &PiecewiseQuad1D<E>, x: &E, v: &E) -> Result<D2Form<E>> {
    let sub = subdifferential(f, x)?;
    if !sub.contains(v) {
        return Err(Error::NotASubgradient(format!("{v} not in {sub} at x = {x}")));
    }
    let p = f.pieces();
    Ok(match f.locate(x) {
        Location::Outside => unreachable!("checked above"),
        Location::Interior(i) => {
            let c = p[i].curvature();
            D2Form { left: Branch::Quad(c.clone()), right: Branch::Quad(c) }
        }
        Location::Breakpoint(i) => D2Form {
            left: side(&p[i].slope(x), v, p[i].curvature(), false),
            right: side(&p[i + 1].slope(x), v, p[i + 1].curvature(), true),
        },
        Location::LowerEnd => D2Form { left: Branch::PosInf, right: side(&p[0].slope(x), v, p[0].curvature(), true) },
        Location::UpperEnd => {
            let last = &p[p.len() - 1];
            D2Form { left: side(&last.slope(x), v, last.curvature(), false), right: Branch::PosInf }
        }
    })
}

pub fn d2_exact<E: ExactScalar>(f: &PiecewiseQuad1D<E>, x: &E, v: &E, w: &E) -> Result<Extended<E>> {
    Ok(d2_form(f, x, v)?.eval(w))
}

pub fn second_order_maps_exact<E: ExactScalar>(
    f: &PiecewiseQuad1D<E>,
    x: &E,
    v: &E,
    w: &E,
) -> Result<SecondOrderSets<E>> {
    SubdiffGraph1D::of(f).second_order_maps(x, v, w)
}

/// Exact curvature class.
#[derive(Clone, Debug, PartialEq)]
pub enum ExactVerdict<E> {
    NotWeaklyConvex { kink: E },
    WeaklyConvex { rho: E },
    Convex,
    StronglyConvex { kappa: E },
}

impl<E: ExactScalar> ExactVerdict<E> {
    /// `s*`: the largest `s` with `φ - s/2 x²` convex; `None` when not weakly convex.
    pub fn sharp_modulus(&self) -> Option<E> {
        match self {
            ExactVerdict::NotWeaklyConvex { .. } => None,
            ExactVerdict::WeaklyConvex { rho } => Some(-rho.clone()),
            ExactVerdict::Convex => Some(E::zero()),
            ExactVerdict::StronglyConvex { kappa } => Some(kappa.clone()),
        }
    }

    pub fn is_convex(&self) -> bool {
        matches!(self, ExactVerdict::Convex | ExactVerdict::StronglyConvex { .. })
    }

    pub fn is_weakly_convex(&self) -> bool {
        !matches!(self, ExactVerdict::NotWeaklyConvex { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            ExactVerdict::NotWeaklyConvex { .. } => "not_weakly_convex",
            ExactVerdict::WeaklyConvex { .. } => "weakly_convex",
            ExactVerdict::Convex => "convex",
            ExactVerdict::StronglyConvex { .. } => "strongly_convex",
        }
    }
}

pub fn convexity_decide_exact<E: ExactScalar>(f: &PiecewiseQuad1D<E>) -> ExactVerdict<E> {
    if let Some(k) = f.kinks().into_iter().find(|k| k.is_concave()) {
        return ExactVerdict::NotWeaklyConvex { kink: k.at };
    }
    let min_curv = f
        .pieces()
        .iter()
        .map(|p| p.curvature())
        .reduce(|a, b| E::min_of(&a, &b))
        .expect("at least one piece");
    match min_curv.sign_cmp() {
        Ordering::Less => ExactVerdict::WeaklyConvex { rho: -min_curv },
        Ordering::Equal => ExactVerdict::Convex,
        Ordering::Greater => ExactVerdict::StronglyConvex { kappa: min_curv },
    }
}

/// `s(x, y, λ) = 2[(1-λ)φ(x) + λφ(y) - φ((1-λ)x + λy)] / (λ(1-λ)(x-y)²)`.
///
/// `None` when an endpoint is outside the domain or `x = y`; `-∞` when only the midpoint is.
pub fn segment_s_exact<E: ExactScalar>(f: &PiecewiseQuad1D<E>, x: &E, y: &E, lambda: &E) -> Option<Extended<E>> {
    let (fx, fy) = (f.value(x).finite()?, f.value(y).finite()?);
    let d = x.clone() - y.clone();
    if d.is_zero_exact() {
        return None;
    }
    let one_m = E::one() - lambda.clone();
    let m = one_m.clone() * x.clone() + lambda.clone() * y.clone();
    let fm = match f.value(&m) {
        ExtReal::Finite(v) => v,
        ExtReal::PosInf => return Some(Extended::NegInf),
    };
    let num = E::from_int(2) * (one_m.clone() * fx + lambda.clone() * fy - fm);
    Some(Extended::Finite(num / (lambda.clone() * one_m * d.clone() * d)))
}

/// A triple with exactly computed `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactTriple<E> {
    pub x: E,
    pub y: E,
    pub lambda: E,
    pub s: Extended<E>,
}

/// A triple with `s < threshold`, if the function admits one.
pub fn segment_witness<E: ExactScalar>(f: &PiecewiseQuad1D<E>, threshold: &E) -> Option<ExactTriple<E>> {
    let half = E::half();
    let below = |t: &ExactTriple<E>| match &t.s {
        Extended::NegInf => true,
        Extended::Finite(s) => s.lt_exact(threshold),
        Extended::PosInf => false,
    };
    let gaps: Vec<E> = {
        let mut pts: Vec<E> = f.domain().lo.iter().cloned().collect();
        pts.extend(f.breakpoints().iter().cloned());
        pts.extend(f.domain().hi.iter().cloned());
        pts.windows(2).map(|w| w[1].clone() - w[0].clone()).collect()
    };
    let base_h = gaps.iter().cloned().fold(E::one(), |a, b| E::min_of(&a, &b)) * E::half();
    for k in f.kinks().into_iter().filter(|k| k.is_concave()) {
        let mut h = base_h.clone();
        for _ in 0..200 {
            let t = ExactTriple {
                x: k.at.clone() - h.clone(),
                y: k.at.clone() + h.clone(),
                lambda: half.clone(),
                s: segment_s_exact(f, &(k.at.clone() - h.clone()), &(k.at.clone() + h.clone()), &half)?,
            };
            if below(&t) {
                return Some(t);
            }
            h = h * E::half();
        }
    }
    for (i, p) in f.pieces().iter().enumerate() {
        if !p.curvature().lt_exact(threshold) {
            continue;
        }
        let (lo, hi) = f.piece_bounds(i);
        let c = sample_between(lo.as_ref(), hi.as_ref());
        let h = match (&lo, &hi) {
            (Some(l), Some(u)) => (u.clone() - l.clone()) * (E::one() / E::from_int(4)),
            _ => E::one(),
        };
        let (x, y) = (c.clone() - h.clone(), c + h);
        let s = segment_s_exact(f, &x, &y, &half)?;
        let t = ExactTriple { x, y, lambda: half.clone(), s };
        if below(&t) {
            return Some(t);
        }
    }
    None
}

/// Which PSD-type second-order conditions hold on the test set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct ConditionFlags {
    /// `z w ≥ 0` for `z` in the graphical derivative.
    pub graphical: bool,
    /// `d²φ(x,v)(w) ≥ 0`.
    pub subderivative: bool,
    /// `d²φ(x,v)(w) ≥ 0` where `d²φ(x,v)` is a generalized quadratic form.
    pub subderivative_gq: bool,
    /// `z w ≥ 0` for `z` in the combined second-order subdifferential.
    pub combined: bool,
    /// `z w ≥ 0` for `z` in the limiting second-order subdifferential.
    pub limiting: bool,
}

#[derive(Clone, Debug)]
pub struct EquivalenceReport<E> {
    pub verdict: ExactVerdict<E>,
    /// Weak convexity holds, so the characterizations apply.
    pub gate_passed: bool,
    pub conditions: ConditionFlags,
    /// `Some(true)` when every condition agrees with the convexity verdict; `None` when gated out.
    pub equivalences_hold: Option<bool>,
    /// Graphical derivative equals `∂(½ d²)` at every tested triple.
    pub half_subdiff_identity: bool,
    pub tested: usize,
    pub failures: Vec<String>,
}

fn pairing_nonneg<E: ExactScalar>(s: &IntervalSet<E>, w: &E) -> bool {
    s.min_pairing(w) >= Extended::Finite(E::zero())
}

/// Evaluates all five conditions on breakpoints, domain ends and interior points, with
/// `v` ranging over sample points of `∂φ(x)` and `w ∈ {-1, 0, 1}`.
pub fn verify_theorem_equivalences<E: ExactScalar>(f: &PiecewiseQuad1D<E>) -> EquivalenceReport<E> {
    let verdict = convexity_decide_exact(f);
    let graph = SubdiffGraph1D::of(f);
    let mut flags =
        ConditionFlags { graphical: true, subderivative: true, subderivative_gq: true, combined: true, limiting: true };
    let mut identity = true;
    let mut failures = Vec::new();
    let mut tested = 0;
    let dirs = [-E::one(), E::zero(), E::one()];
    for x in f.test_points() {
        let Ok(sub) = subdifferential(f, &x) else { continue };
        for v in sub.sample_points() {
            let Ok(form) = d2_form(f, &x, &v) else { continue };
            for w in &dirs {
                let Ok(sets) = graph.second_order_maps(&x, &v, w) else { continue };
                tested += 1;
                let d2 = form.eval(w);
                let nonneg = d2 >= Extended::Finite(E::zero());
                flags.subderivative &= nonneg;
                if form.is_generalized_quadratic() {
                    flags.subderivative_gq &= nonneg;
                }
                flags.graphical &= pairing_nonneg(&sets.graphical, w);
                flags.combined &= pairing_nonneg(&sets.combined, w);
                flags.limiting &= pairing_nonneg(&sets.limiting, w);
                if let Some(h) = form.half_subdifferential(w) {
                    if h != sets.graphical {
                        identity = false;
                        failures.push(format!(
                            "graphical {} != subdiff of half d2 {} at x={x}, v={v}, w={w}",
                            sets.graphical, h
                        ));
                    }
                }
            }
        }
    }
    let gate_passed = verdict.is_weakly_convex();
    let equivalences_hold = gate_passed.then(|| {
        let c = verdict.is_convex();
        let ok = [flags.graphical, flags.subderivative, flags.subderivative_gq, flags.combined, flags.limiting]
            .iter()
            .all(|&b| b == c);
        if !ok {
            failures.push(format!("conditions {flags:?} disagree with verdict {}", verdict.label()));
        }
        ok
    });
    EquivalenceReport { verdict, gate_passed, conditions: flags, equivalences_hold, half_subdiff_identity: identity, tested, failures }
}

/// `(x, v)` as a graph point.
pub fn graph_point<E: ExactScalar>(x: &E, v: &E) -> Vec2<E> {
    Vec2::new(x.clone(), v.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::pwq::{Domain, QuadPiece};
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn abs_second_subderivative() {
        let f = PiecewiseQuad1D::<BigRational>::abs();
        assert_eq!(d2_exact(&f, &q(0, 1), &q(1, 1), &q(1, 1)).unwrap(), Extended::Finite(q(0, 1)));
        assert_eq!(d2_exact(&f, &q(0, 1), &q(1, 1), &q(-1, 1)).unwrap(), Extended::PosInf);
        assert_eq!(d2_exact(&f, &q(0, 1), &q(1, 2), &q(1, 1)).unwrap(), Extended::PosInf);
        assert_eq!(d2_exact(&f, &q(0, 1), &q(1, 2), &q(0, 1)).unwrap(), Extended::Finite(q(0, 1)));
        assert!(matches!(d2_exact(&f, &q(0, 1), &q(2, 1), &q(1, 1)), Err(Error::NotASubgradient(_))));
    }

    #[test]
    fn half_square_second_subderivative() {
        let f = PiecewiseQuad1D::smooth(QuadPiece::new(q(1, 2), q(0, 1), q(0, 1)));
        assert_eq!(d2_exact(&f, &q(3, 1), &q(3, 1), &q(2, 1)).unwrap(), Extended::Finite(q(4, 1)));
    }

    #[test]
    fn concave_kink_branches() {
        let f = PiecewiseQuad1D::<BigRational>::neg_abs();
        // v = d₊ = -1: the left side diverges to -∞.
        let form = d2_form(&f, &q(0, 1), &q(-1, 1)).unwrap();
        assert_eq!(form.eval(&q(1, 1)), Extended::Finite(q(0, 1)));
        assert_eq!(form.eval(&q(-1, 1)), Extended::NegInf);
        assert_eq!(form.eval(&q(0, 1)), Extended::NegInf);
    }

    #[test]
    fn decide_classes() {
        assert_eq!(convexity_decide_exact(&PiecewiseQuad1D::<BigRational>::abs()), ExactVerdict::Convex);
        assert!(matches!(convexity_decide_exact(&PiecewiseQuad1D::<BigRational>::neg_abs()), ExactVerdict::NotWeaklyConvex { .. }));
        let g = PiecewiseQuad1D::max_of(&[QuadPiece::new(q(1, 1), q(0, 1), q(-1, 1)), QuadPiece::new(q(-1, 1), q(0, 1), q(1, 1))]).unwrap();
        assert_eq!(convexity_decide_exact(&g), ExactVerdict::WeaklyConvex { rho: q(2, 1) });
    }

    #[test]
    fn segment_witnesses() {
        let f = PiecewiseQuad1D::<BigRational>::neg_abs();
        let t = segment_witness(&f, &q(0, 1)).unwrap();
        assert!(matches!(t.s, Extended::Finite(ref s) if s.is_neg()));
        assert!(segment_witness(&PiecewiseQuad1D::<BigRational>::abs(), &q(0, 1)).is_none());
        let ind = PiecewiseQuad1D::new(vec![], vec![QuadPiece::new(q(0, 1), q(0, 1), q(0, 1))], Domain { lo: Some(q(0, 1)), hi: Some(q(1, 1)) }).unwrap();
        assert_eq!(segment_s_exact(&ind, &q(0, 1), &q(2, 1), &q(1, 2)), None);
    }

    #[test]
    fn equivalences_on_basic_functions() {
        let r = verify_theorem_equivalences(&PiecewiseQuad1D::<BigRational>::abs());
        assert_eq!(r.equivalences_hold, Some(true), "{:?}", r.failures);
        assert!(r.half_subdiff_identity);
        let g = PiecewiseQuad1D::max_of(&[QuadPiece::new(q(1, 1), q(0, 1), q(-1, 1)), QuadPiece::new(q(-1, 1), q(0, 1), q(1, 1))]).unwrap();
        let r = verify_theorem_equivalences(&g);
        assert_eq!(r.equivalences_hold, Some(true), "{:?}", r.failures);
        assert!(!r.conditions.graphical);
        let r = verify_theorem_equivalences(&PiecewiseQuad1D::<BigRational>::neg_abs());
        assert!(!r.gate_passed && r.equivalences_hold.is_none());
    }
}
