//! Core value types, the oracle interface, and subgradient-pair sampling.

use std::ops::Deref;

use num_rational::BigRational;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::PiecewiseQuad1D;
use crate::ext::ExtReal;
use crate::interval::Interval;
use crate::linalg;
use crate::parallel;
use crate::scalar::Real;

/// A point of `ℝⁿ` with finite coordinates and `n ≥ 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Point<T>(Vec<T>);

impl<T: Real> Point<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("point must have dimension >= 1".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("point coordinates must be finite".into()));
        }
        Ok(Point(coords))
    }

    /// One-dimensional point. Panics on a non-finite coordinate.
    pub fn scalar(x: T) -> Self {
        Point::new(vec![x]).expect("finite coordinate")
    }

    pub fn zeros(n: usize) -> Self {
        Point(vec![T::zero(); n.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for Point<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// Axis-aligned evaluation region with `lo < hi` coordinatewise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxRegion<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Real> BoxRegion<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::DegenerateBox("bounds must have equal positive length".into()));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !l.is_finite() || !h.is_finite() || l >= h {
                return Err(Error::DegenerateBox(format!("need finite lo < hi, got [{l}, {h}]")));
            }
        }
        Ok(BoxRegion { lo, hi })
    }

    /// The cube `[lo, hi]ⁿ`.
    pub fn cube(n: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    pub fn diameter(&self) -> T {
        linalg::norm(&linalg::sub(&self.hi, &self.lo))
    }

    pub fn center(&self) -> Vec<T> {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| (l + h) / T::lit(2.0)).collect()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&l, &h))| l <= v && v <= h)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| l + (h - l) * T::lit(rng.random::<f64>()))
            .collect()
    }

    /// Center and all corners when `n ≤ 4`, otherwise center and face centers.
    pub fn anchors(&self) -> Vec<Vec<T>> {
        let c = self.center();
        let n = self.dim();
        let mut out = vec![c.clone()];
        if n <= 4 {
            for mask in 0..(1usize << n) {
                out.push((0..n).map(|i| if mask & (1 << i) != 0 { self.hi[i] } else { self.lo[i] }).collect());
            }
        } else {
            for i in 0..n {
                for b in [self.lo[i], self.hi[i]] {
                    let mut p = c.clone();
                    p[i] = b;
                    out.push(p);
                }
            }
        }
        out
    }

    /// Dyadic lattice with `2^level + 1` points per axis, truncated to `cap` points.
    pub fn lattice(&self, level: u32, cap: usize) -> Vec<Vec<T>> {
        let per = (1usize << level) + 1;
        let n = self.dim();
        let mut out = Vec::new();
        let total = per.checked_pow(n as u32).unwrap_or(usize::MAX);
        for idx in 0..total.min(cap) {
            let mut rem = idx;
            let mut p = Vec::with_capacity(n);
            for i in 0..n {
                let k = rem % per;
                rem /= per;
                let frac = T::lit(k as f64 / (per - 1) as f64);
                p.push(self.lo[i] + (self.hi[i] - self.lo[i]) * frac);
            }
            out.push(p);
        }
        out
    }
}

/// A subdifferential value `∂φ(x)` in one of the forms the oracles can describe exactly.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum SubdiffSet<T> {
    Empty,
    /// Finitely many vectors (a singleton at smooth points, several at concave kinks).
    Finite(Vec<Vec<T>>),
    /// Convex hull of finitely many vectors.
    Hull(Vec<Vec<T>>),
    /// Cartesian product of closed, possibly unbounded intervals.
    Product(Vec<Interval<T>>),
}

impl<T: Real> SubdiffSet<T> {
    pub fn singleton(v: Vec<T>) -> Self {
        SubdiffSet::Finite(vec![v])
    }

    pub fn is_empty(&self) -> bool {
        match self {
            SubdiffSet::Empty => true,
            SubdiffSet::Finite(p) | SubdiffSet::Hull(p) => p.is_empty(),
            SubdiffSet::Product(_) => false,
        }
    }

    /// Euclidean distance from `v` to the set (`+∞` for the empty set).
    pub fn distance(&self, v: &[T]) -> T {
        match self {
            SubdiffSet::Empty => T::infinity(),
            SubdiffSet::Finite(pts) => pts
                .iter()
                .map(|p| linalg::norm(&linalg::sub(v, p)))
                .fold(T::infinity(), T::min),
            SubdiffSet::Hull(pts) => linalg::hull_distance(pts, v),
            SubdiffSet::Product(ivs) => ivs
                .iter()
                .zip(v)
                .map(|(iv, &x)| {
                    let d = iv.distance_to(x);
                    d * d
                })
                .sum::<T>()
                .sqrt(),
        }
    }

    pub fn contains(&self, v: &[T], tol: T) -> bool {
        self.distance(v) <= tol
    }

    /// Finite representatives; unbounded factors are sampled with the given spread.
    pub fn selections(&self, spread: T) -> Vec<Vec<T>> {
        match self {
            SubdiffSet::Empty => vec![],
            SubdiffSet::Finite(pts) => pts.clone(),
            SubdiffSet::Hull(pts) => {
                let mut out = pts.clone();
                if pts.len() > 1 {
                    let k = T::lit(pts.len() as f64);
                    let mut c = vec![T::zero(); pts[0].len()];
                    for p in pts {
                        c = linalg::add(&c, p);
                    }
                    out.push(linalg::scale(&c, T::one() / k));
                }
                out
            }
            SubdiffSet::Product(ivs) => {
                let reps: Vec<Vec<T>> = ivs.iter().map(|iv| iv.representatives(spread)).collect();
                let total: usize = reps.iter().map(Vec::len).product();
                if total <= 64 {
                    let mut out = vec![vec![]];
                    for r in &reps {
                        out = out
                            .into_iter()
                            .flat_map(|prefix: Vec<T>| {
                                r.iter().map(move |&x| {
                                    let mut p = prefix.clone();
                                    p.push(x);
                                    p
                                })
                            })
                            .collect();
                    }
                    out
                } else {
                    let longest = reps.iter().map(Vec::len).max().unwrap_or(0);
                    (0..longest).map(|k| reps.iter().map(|r| r[k.min(r.len() - 1)]).collect()).collect()
                }
            }
        }
    }

    /// The set `{v + s : v ∈ self}`.
    pub fn translate(&self, s: &[T]) -> Self {
        match self {
            SubdiffSet::Empty => SubdiffSet::Empty,
            SubdiffSet::Finite(p) => SubdiffSet::Finite(p.iter().map(|v| linalg::add(v, s)).collect()),
            SubdiffSet::Hull(p) => SubdiffSet::Hull(p.iter().map(|v| linalg::add(v, s)).collect()),
            SubdiffSet::Product(ivs) => {
                SubdiffSet::Product(ivs.iter().zip(s).map(|(iv, &x)| iv.shifted(x)).collect())
            }
        }
    }

    /// Minkowski sum, when the result stays in a representable form.
    pub fn minkowski(&self, other: &Self) -> Option<Self> {
        use SubdiffSet::*;
        match (self, other) {
            (Empty, _) | (_, Empty) => Some(Empty),
            (Finite(a), b) if a.len() == 1 => Some(b.translate(&a[0])),
            (a, Finite(b)) if b.len() == 1 => Some(a.translate(&b[0])),
            (Finite(a), Finite(b)) => {
                Some(Finite(a.iter().flat_map(|x| b.iter().map(move |y| linalg::add(x, y))).collect()))
            }
            (Hull(a), Hull(b)) => {
                Some(Hull(a.iter().flat_map(|x| b.iter().map(move |y| linalg::add(x, y))).collect()))
            }
            (Product(a), Product(b)) => Some(Product(
                a.iter()
                    .zip(b)
                    .map(|(x, y)| Interval {
                        lo: x.lo.zip(y.lo).map(|(p, q)| p + q),
                        hi: x.hi.zip(y.hi).map(|(p, q)| p + q),
                    })
                    .collect(),
            )),
            _ => None,
        }
    }
}

/// A sampled element `(x, v)` of the subdifferential graph.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubgradientPair<T> {
    pub x: Point<T>,
    pub v: Point<T>,
    /// Optimality residual of `x` for the proximal subproblem that produced it (0 when exact).
    pub residual: T,
    /// The prox input `u` when the pair came from `v = (u - x)/λ`.
    pub draw: Option<Point<T>>,
}

/// Known curvature class of a function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Truth<T> {
    pub is_convex: bool,
    /// Largest `κ ≥ 0` with `φ - κ/2‖·‖²` convex, when convex.
    pub strong_modulus: Option<T>,
    /// Smallest `ρ ≥ 0` with `φ + ρ/2‖·‖²` convex, when weakly convex.
    pub weak_modulus: Option<T>,
}

impl<T: Real> Truth<T> {
    /// Builds the record from the sharp modulus `s*` (`None`: not weakly convex).
    pub fn from_s_star(s: Option<T>) -> Self {
        match s {
            None => Truth { is_convex: false, strong_modulus: None, weak_modulus: None },
            Some(s) if s >= T::zero() => {
                Truth { is_convex: true, strong_modulus: Some(s), weak_modulus: Some(T::zero()) }
            }
            Some(s) => Truth { is_convex: false, strong_modulus: None, weak_modulus: Some(-s) },
        }
    }

    pub fn s_star(&self) -> Option<T> {
        match (self.strong_modulus, self.weak_modulus) {
            (Some(k), _) => Some(k),
            (None, Some(r)) => Some(-r),
            _ => None,
        }
    }

    /// Truth of `φ + κ/2‖·‖²`.
    pub fn tilted(&self, kappa: T) -> Self {
        Self::from_s_star(self.s_star().map(|s| s + kappa))
    }
}

/// Access to an extended-real-valued function `φ : ℝⁿ → ℝ ∪ {+∞}`.
///
/// Only `dimension` and `value` are required; the remaining capabilities are optional.
pub trait FunctionOracle<T: Real>: Send + Sync {
    fn name(&self) -> String;

    fn dimension(&self) -> usize;

    fn value(&self, x: &[T]) -> ExtReal<T>;

    fn has_subdifferential(&self) -> bool {
        false
    }

    /// The limiting subdifferential at `x`; `Empty` outside the domain.
    fn subdifferential(&self, _x: &[T]) -> Result<SubdiffSet<T>> {
        Err(Error::CapabilityMissing("subdifferential"))
    }

    fn has_prox(&self) -> bool {
        false
    }

    /// A minimizer of `φ(y) + ‖y - x‖²/(2λ)`.
    fn prox(&self, _lambda: T, _x: &[T]) -> Result<Vec<T>> {
        Err(Error::CapabilityMissing("prox"))
    }

    fn truth(&self) -> Option<Truth<T>> {
        None
    }

    /// Exact rational form for one-dimensional piecewise quadratics.
    fn piecewise_form(&self) -> Option<PiecewiseQuad1D<BigRational>> {
        None
    }
}

/// Evaluates with a dimension check.
pub fn eval_checked<T: Real>(oracle: &dyn FunctionOracle<T>, x: &[T]) -> Result<ExtReal<T>> {
    if x.len() != oracle.dimension() {
        return Err(Error::DimensionMismatch { expected: oracle.dimension(), found: x.len() });
    }
    Ok(oracle.value(x))
}

/// Caps `λ` at `1/(2ρ)` when the oracle declares a weak modulus `ρ > 0`.
pub fn effective_lambda<T: Real>(lambda: T, truth: Option<Truth<T>>) -> T {
    match truth.and_then(|t| t.weak_modulus) {
        Some(rho) if rho > T::zero() => lambda.min(T::one() / (T::lit(2.0) * rho)),
        _ => lambda,
    }
}

fn prox_objective<T: Real>(oracle: &dyn FunctionOracle<T>, lambda: T, u: &[T], y: &[T]) -> T {
    oracle.value(y).to_float() + linalg::norm_sq(&linalg::sub(y, u)) / (T::lit(2.0) * lambda)
}

/// `max(0, obj(p) - min obj)` over a coordinate grid around `p`.
pub fn prox_residual<T: Real>(oracle: &dyn FunctionOracle<T>, lambda: T, u: &[T], p: &[T]) -> T {
    let base = prox_objective(oracle, lambda, u, p);
    if !base.is_finite() {
        return T::infinity();
    }
    let scale = T::one().max(linalg::norm(p));
    let mut best = base;
    let mut y = p.to_vec();
    for i in 0..p.len() {
        for e in 1..=6 {
            let h = scale * T::lit(10f64.powi(-e));
            for s in [h, -h] {
                y[i] = p[i] + s;
                best = best.min(prox_objective(oracle, lambda, u, &y));
            }
        }
        y[i] = p[i];
    }
    (base - best).max(T::zero())
}

/// The pair `(prox(u), (u - prox(u))/λ)` for one draw `u`.
pub fn pair_from_draw<T: Real>(oracle: &dyn FunctionOracle<T>, lambda: T, u: &[T]) -> Result<SubgradientPair<T>> {
    let p = oracle.prox(lambda, u)?;
    let v = linalg::scale(&linalg::sub(u, &p), T::one() / lambda);
    let residual = prox_residual(oracle, lambda, u, &p);
    Ok(SubgradientPair {
        x: Point::new(p)?,
        v: Point::new(v)?,
        residual,
        draw: Some(Point::new(u.to_vec())?),
    })
}

const STREAM_PAIRS: u64 = 0x5041_4952;

/// Samples `count` elements of gph ∂φ from draws in `region`.
///
/// Uses the proximal route when available (with `λ` capped by the declared weak modulus),
/// otherwise a selection of the analytic subdifferential.
pub fn sample_subgradient_pairs<T: Real>(
    oracle: &dyn FunctionOracle<T>,
    region: &BoxRegion<T>,
    lambda: T,
    count: usize,
    seed: u64,
) -> Result<Vec<SubgradientPair<T>>> {
    if region.dim() != oracle.dimension() {
        return Err(Error::DimensionMismatch { expected: oracle.dimension(), found: region.dim() });
    }
    if !(lambda > T::zero()) {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    if oracle.has_prox() {
        let lam = effective_lambda(lambda, oracle.truth());
        let results = parallel::par_map(count, |i| {
            let mut rng = parallel::rng_for(seed, STREAM_PAIRS, i as u64);
            let u = region.sample(&mut rng);
            pair_from_draw(oracle, lam, &u)
        });
        results.into_iter().collect()
    } else if oracle.has_subdifferential() {
        let results = parallel::par_map(count, |i| -> Result<Option<SubgradientPair<T>>> {
            let mut rng = parallel::rng_for(seed, STREAM_PAIRS, i as u64);
            let x = region.sample(&mut rng);
            let set = oracle.subdifferential(&x)?;
            let sel = set.selections(T::one());
            if sel.is_empty() {
                return Ok(None);
            }
            let v = sel[rng.random_range(0..sel.len())].clone();
            Ok(Some(SubgradientPair { x: Point::new(x)?, v: Point::new(v)?, residual: T::zero(), draw: None }))
        });
        let mut out = Vec::with_capacity(count);
        for r in results {
            if let Some(p) = r? {
                out.push(p);
            }
        }
        Ok(out)
    } else {
        Err(Error::CapabilityMissing("prox or subdifferential"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_rejects_nonfinite() {
        assert!(Point::new(vec![f64::NAN]).is_err());
        assert!(Point::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn box_validation() {
        assert!(BoxRegion::new(vec![1.0], vec![1.0]).is_err());
        let b = BoxRegion::cube(2, -1.0, 1.0).unwrap();
        assert_eq!(b.anchors().len(), 5);
        assert_eq!(b.lattice(1, 100).len(), 9);
    }

    #[test]
    fn truth_from_modulus() {
        let t = Truth::from_s_star(Some(-2.0));
        assert!(!t.is_convex);
        assert_eq!(t.weak_modulus, Some(2.0));
        assert_eq!(t.tilted(3.0).strong_modulus, Some(1.0));
        assert_eq!(Truth::<f64>::from_s_star(None).tilted(1.0).weak_modulus, None);
    }

    #[test]
    fn subdiff_distance_forms() {
        let p = SubdiffSet::Product(vec![Interval::closed(-1.0, 1.0), Interval::at_least(0.0)]);
        assert!((p.distance(&[2.0, -1.0]) - 2f64.sqrt()).abs() < 1e-12);
        let f = SubdiffSet::Finite(vec![vec![-1.0], vec![1.0]]);
        assert_eq!(f.distance(&[0.0]), 1.0);
        assert_eq!(SubdiffSet::<f64>::Empty.distance(&[0.0]), f64::INFINITY);
    }

    #[test]
    fn effective_lambda_caps() {
        let t = Truth::from_s_star(Some(-2.0));
        assert_eq!(effective_lambda(1.0, Some(t)), 0.25);
        assert_eq!(effective_lambda(1.0, None), 1.0);
    }
}
