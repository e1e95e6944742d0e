//! Reference oracles with closed-form subdifferentials, proxes and curvature.

use std::sync::Arc;

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::exact::{convexity_decide_exact, Domain, PiecewiseQuad1D, QuadPiece};
use crate::ext::ExtReal;
use crate::interval::Interval;
use crate::linalg;
use crate::scalar::{ExactScalar, Real};
use crate::types::{FunctionOracle, SubdiffSet, Truth};

fn rat<T: Real>(x: T) -> BigRational {
    BigRational::from_float(x.as_f64()).expect("finite parameter")
}

fn check_dim<T: Real>(expected: usize, x: &[T]) {
    assert_eq!(x.len(), expected, "dimension mismatch");
}

fn sign<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// `½⟨Qx, x⟩ + ⟨b, x⟩ + c` with symmetric `Q`.
#[derive(Clone, Debug)]
pub struct Quadratic<T> {
    q: Vec<Vec<T>>,
    b: Vec<T>,
    c: T,
}

impl<T: Real> Quadratic<T> {
    pub fn new(q: Vec<Vec<T>>, b: Vec<T>, c: T) -> Result<Self> {
        let n = q.len();
        if n == 0 || q.iter().any(|r| r.len() != n) || b.len() != n {
            return Err(Error::InvalidParameter("Q must be n x n and b of length n".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let (a, bb) = (q[i][j], q[j][i]);
                if (a - bb).abs() > T::lit(1e-12) * (T::one() + a.abs()) {
                    return Err(Error::InvalidParameter("Q must be symmetric".into()));
                }
            }
        }
        Ok(Quadratic { q, b, c })
    }

    pub fn gradient(&self, x: &[T]) -> Vec<T> {
        linalg::add(&linalg::mat_vec(&self.q, x), &self.b)
    }

    pub fn eval(&self, x: &[T]) -> T {
        T::lit(0.5) * linalg::dot(&linalg::mat_vec(&self.q, x), x) + linalg::dot(&self.b, x) + self.c
    }

    pub fn min_curvature(&self) -> T {
        linalg::min_eigenvalue(&self.q)
    }

    pub fn matrix(&self) -> &[Vec<T>] {
        &self.q
    }

    /// Coefficients `(a, c, d)` of `a x² + c x + d` for `n = 1`.
    pub fn coeffs_1d(&self) -> Option<(T, T, T)> {
        (self.q.len() == 1).then(|| (self.q[0][0] / T::lit(2.0), self.b[0], self.c))
    }
}

impl<T: Real> FunctionOracle<T> for Quadratic<T> {
    fn name(&self) -> String {
        "quadratic".into()
    }
    fn dimension(&self) -> usize {
        self.q.len()
    }
    fn value(&self, x: &[T]) -> ExtReal<T> {
        check_dim(self.dimension(), x);
        ExtReal::from_float(self.eval(x))
    }
    fn has_subdifferential(&self) -> bool {
        true
    }
    fn subdifferential(&self, x: &[T]) -> Result<SubdiffSet<T>> {
        Ok(SubdiffSet::singleton(self.gradient(x)))
    }
    fn has_prox(&self) -> bool {
        true
    }
    fn prox(&self, lambda: T, x: &[T]) -> Result<Vec<T>> {
        let n = self.q.len();
        let a: Vec<Vec<T>> = (0..n)
            .map(|i| (0..n).map(|j| lambda * self.q[i][j] + if i == j { T::one() } else { T::zero() }).collect())
            .collect();
        if linalg::min_eigenvalue(&a) <= T::zero() {
            return Err(Error::ProxDiverged(format!("I + lambda Q is not positive definite for lambda = {lambda}")));
        }
        let rhs = linalg::axpy(x, -lambda, &self.b);
        linalg::solve(&a, &rhs).ok_or_else(|| Error::InnerSolverFailed("singular system".into()))
    }
    fn truth(&self) -> Option<Truth<T>> {
        Some(Truth::from_s_star(Some(self.min_curvature())))
    }
    fn piecewise_form(&self) -> Option<PiecewiseQuad1D<BigRational>> {
        let (a, c, d) = self.coeffs_1d()?;
        Some(PiecewiseQuad1D::smooth(QuadPiece::new(rat(a), rat(c), rat(d))))
    }
}

/// `‖x‖₁`; registered as `abs` in one dimension.
#[derive(Clone, Debug)]
pub struct L1<T> {
    n: usize,
    label: &'static str,
    _t: std::marker::PhantomData<T>,
}

impl<T: Real> L1<T> {
    pub fn new(n: usize) -> Self {
        L1 { n, label: "l1", _t: Default::default() }
    }
    pub fn abs() -> Self {
        L1 { n: 1, label: "abs", _t: Default::default() }
    }
}

impl<T: Real> FunctionOracle<T> for L1<T> {
    fn name(&self) -> String {
        self.label.into()
    }
    fn dimension(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[T]) -> ExtReal<T> {
        check_dim(self.n, x);
        ExtReal::Finite(x.iter().map(|v| v.abs()).sum())
    }
    fn has_subdifferential(&self) -> bool {
        true
    }
    fn subdifferential(&self, x: &[T]) -> Result<SubdiffSet<T>> {
        Ok(SubdiffSet::Product(
            x.iter()
                .map(|&v| if v == T::zero() { Interval::closed(-T::one(), T::one()) } else { Interval::point(sign(v)) })
                .collect(),
        ))
    }
    fn has_prox(&self) -> bool {
        true
    }
    fn prox(&self, lambda: T, x: &[T]) -> Result<Vec<T>> {
        Ok(x.iter().map(|&v| sign(v) * (v.abs() - lambda).max(T::zero())).collect())
    }
    fn truth(&self) -> Option<Truth<T>> {
        Some(Truth::from_s_star(Some(T::zero())))
    }
    fn piecewise_form(&self) -> Option<PiecewiseQuad1D<BigRational>> {
        (self.n == 1).then(PiecewiseQuad1D::abs)
    }
}

/// Separable Huber function with parameter `δ > 0`.
#[derive(Clone, Debug)]
pub struct Huber<T> {
    delta: T,
    n: usize,
}

impl<T: Real> Huber<T> {
    pub fn new(delta: T, n: usize) -> Result<Self> {
        if !(delta > T::zero()) {
            return Err(Error::InvalidParameter("huber delta must be positive".into()));
        }
        Ok(Huber { delta, n })
    }
    fn h(&self, x: T) -> T {
        if x.abs() <= self.delta {
            x * x / (T::lit(2.0) * self.delta)
        } else {
            x.abs() - self.delta / T::lit(2.0)
        }
    }
}

impl<T: Real> FunctionOracle<T> for Huber<T> {
    fn name(&self) -> String {
        "huber".into()
    }
    fn dimension(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[T]) -> ExtReal<T> {
        check_dim(self.n, x);
        ExtReal::Finite(x.iter().map(|&v| self.h(v)).sum())
    }
    fn has_subdifferential(&self) -> bool {
        true
    }
    fn subdifferential(&self, x: &[T]) -> Result<SubdiffSet<T>> {
        Ok(SubdiffSet::singleton(x.iter().map(|&v| (v / self.delta).max(-T::one()).min(T::one())).collect()))
    }
    fn has_prox(&self) -> bool {
        true
    }
    fn prox(&self, lambda: T, x: &[T]) -> Result<Vec<T>> {
        let d = self.delta;
        Ok(x.iter().map(|&v| if v.abs() <= d + lambda { v * d / (d + lambda) } else { v - lambda * sign(v) }).collect())
    }
    fn truth(&self) -> Option<Truth<T>> {
        Some(Truth::from_s_star(Some(T::zero())))
    }
    fn piecewise_form(&self) -> Option<PiecewiseQuad1D<BigRational>> {
        if self.n != 1 {
            return None;
        }
        let d = rat(self.delta);
        let z = BigRational::from_int(0);
        let one = BigRational::from_int(1);
        let half_d = d.clone() / BigRational::from_int(2);
        PiecewiseQuad1D::new(
            vec![-d.clone(), d.clone()],
            vec![
                QuadPiece::new(z.clone(), -one.clone(), -half_d.clone()),
                QuadPiece::new(one.clone() / (BigRational::from_int(2) * d), z.clone(), z.clone()),
                QuadPiece::new(z, one, -half_d),
            ],
            Domain::real_line(),
        )
        .ok()
    }
}

/// `-½‖x‖²`
#[derive(Clone, Debug)]
pub struct NegHalfSquare<T> {
    n: usize,
    _t: std::marker::PhantomData<T>,
}

impl<T: Real> NegHalfSquare<T> {
    pub fn new(n: usize) -> Self {
        NegHalfSquare { n, _t: Default::default() }
    }
}

impl<T: Real> FunctionOracle<T> for NegHalfSquare<T> {
    fn name(&self) -> String {
        "neg_half_square".into()
    }
    fn dimension(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[T]) -> ExtReal<T> {
        check_dim(self.n, x);
        ExtReal::Finite(-T::lit(0.5) * linalg::norm_sq(x))
    }
    fn has_subdifferential(&self) -> bool {
        true
    }
    fn subdifferential(&self, x: &[T]) -> Result<SubdiffSet<T>> {
        Ok(SubdiffSet::singleton(linalg::scale(x, -T::one())))
    }
    fn has_prox(&self) -> bool {
        true
    }
    fn prox(&self, lambda: T, x: &[T]) -> Result<Vec<T>> {
        if lambda >= T::one() {
            return Err(Error::ProxDiverged(format!("lambda = {lambda} >= 1")));
        }
        Ok(linalg::scale(x, T::one() / (T::one() - lambda)))
    }
    fn truth(&self) -> Option<Truth<T>> {
        Some(Truth::from_s_star(Some(-T::one())))
    }
    fn piecewise_form(&self) -> Option<PiecewiseQuad1D<BigRational>> {
        (self.n == 1).then(|| {
            let z = BigRational::from_int(0);
            PiecewiseQuad1D::smooth(QuadPiece::new(-BigRational::half(), z.clone(), z))
        })
    }
}

/// Pointwise maximum of quadratics.
#[derive(Clone, Debug)]
pub struct MaxQuadratics<T> {
    pieces: Vec<Quadratic<T>>,
    label: String,
}

impl<T: Real> MaxQuadratics<T> {
    pub fn new(pieces: Vec<Quadratic<T>>) -> Result<Self> {
        Self::named(pieces, "max_quadratics")
    }

    pub fn named(pieces: Vec<Quadratic<T>>, label: &str) -> Result<Self> {
        let n = pieces.first().ok_or_else(|| Error::InvalidParameter("need at least one piece".into()))?.dimension();
        if pieces.iter().any(|p| p.dimension() != n) {
            return Err(Error::InvalidParameter("pieces must share a dimension".into()));
        }
        Ok(MaxQuadratics { pieces, label: label.into() })
    }

    /// `|x² - 1| = max(x² - 1, 1 - x²)`.
    pub fn abs_sq_minus_one() -> Self {
        let p = |a: f64, c: f64| Quadratic::new(vec![vec![T::lit(2.0 * a)]], vec![T::zero()], T::lit(c)).expect("valid");
        Self::named(vec![p(1.0, -1.0), p(-1.0, 1.0)], "abs_sq_minus_one").expect("valid")
    }

    pub fn pieces(&self) -> &[Quadratic<T>] {
        &self.pieces
    }

    fn coeffs_1d(&self) -> Option<Vec<(T, T, T)>> {
        self.pieces.iter().map(|p| p.coeffs_1d()).collect()
    }

    fn exact_form(&self) -> Option<PiecewiseQuad1D<BigRational>> {
        let c = self.coeffs_1d()?;
        let quads: Vec<QuadPiece<BigRational>> = c.iter().map(|&(a, b, d)| QuadPiece::new(rat(a), rat(b), rat(d))).collect();
        PiecewiseQuad1D::max_of(&quads)
    }
}

impl<T: Real> FunctionOracle<T> for MaxQuadratics<T> {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn dimension(&self) -> usize {
        self.pieces[0].dimension()
    }
    fn value(&self, x: &[T]) -> ExtReal<T> {
        check_dim(self.dimension(), x);
        ExtReal::from_float(self.pieces.iter().map(|p| p.eval(x)).fold(T::neg_infinity(), T::max))
    }
    fn has_subdifferential(&self) -> bool {
        true
    }
    fn subdifferential(&self, x: &[T]) -> Result<SubdiffSet<T>> {
        let vals: Vec<T> = self.pieces.iter().map(|p| p.eval(x)).collect();
        let m = vals.iter().copied().fold(T::neg_infinity(), T::max);
        let tol = T::lit(1e-12) * (T::one() + m.abs());
        let active: Vec<Vec<T>> = self
            .pieces
            .iter()
            .zip(&vals)
            .filter(|(_, &v)| m - v <= tol)
            .map(|(p, _)| p.gradient(x))
            .collect();
        Ok(if active.len() == 1 { SubdiffSet::Finite(active) } else { SubdiffSet::Hull(active) })
    }
    fn has_prox(&self) -> bool {
        self.dimension() == 1
    }
    fn prox(&self, lambda: T, x: &[T]) -> Result<Vec<T>> {
        let coeffs = self.coeffs_1d().ok_or(Error::CapabilityMissing("prox"))?;
        let u = x[0];
        let lead = coeffs.iter().map(|c| c.0).fold(T::neg_infinity(), T::max);
        if lead + T::one() / (T::lit(2.0) * lambda) <= T::zero() {
            return Err(Error::ProxDiverged(format!("leading curvature {lead} with lambda = {lambda}")));
        }
        let mut cands = vec![u];
        for &(a, b, _) in &coeffs {
            let den = T::lit(2.0) * a + T::one() / lambda;
            if den > T::zero() {
                cands.push((u / lambda - b) / den);
            }
        }
        for i in 0..coeffs.len() {
            for j in i + 1..coeffs.len() {
                let (da, db, dc) = (coeffs[i].0 - coeffs[j].0, coeffs[i].1 - coeffs[j].1, coeffs[i].2 - coeffs[j].2);
                if da == T::zero() {
                    if db != T::zero() {
                        cands.push(-dc / db);
                    }
                } else {
                    let disc = db * db - T::lit(4.0) * da * dc;
                    if disc >= T::zero() {
                        let s = disc.sqrt();
                        cands.push((-db - s) / (T::lit(2.0) * da));
                        cands.push((-db + s) / (T::lit(2.0) * da));
                    }
                }
            }
        }
        let obj = |y: T| self.value(&[y]).to_float() + (y - u) * (y - u) / (T::lit(2.0) * lambda);
        let best = cands.into_iter().min_by(|&a, &b| obj(a).partial_cmp(&obj(b)).unwrap_or(std::cmp::Ordering::Equal));
        Ok(vec![best.expect("nonempty")])
    }
    fn truth(&self) -> Option<Truth<T>> {
        if let Some(f) = self.exact_form() {
            let s = convexity_decide_exact(&f).sharp_modulus();
            return Some(Truth::from_s_star(s.map(|v| T::lit(v.approx_f64()))));
        }
        if self.dimension() == 1 {
            let f = PiecewiseQuad1D::max_of(
                &self.coeffs_1d()?.iter().map(|&(a, b, d)| QuadPiece::new(a.as_f64(), b.as_f64(), d.as_f64())).collect::<Vec<_>>(),
            )?;
            let s = convexity_decide_exact(&f).sharp_modulus();
            return Some(Truth::from_s_star(s.map(T::lit)));
        }
        let s = self.pieces.iter().map(|p| p.min_curvature()).fold(T::infinity(), T::min);
        Some(Truth::from_s_star(Some(s)))
    }
    fn piecewise_form(&self) -> Option<PiecewiseQuad1D<BigRational>> {
        self.exact_form()
    }
}

/// Indicator of the box `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct IndicatorBox<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Real> IndicatorBox<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::InvalidParameter("indicator box needs lo < hi".into()));
        }
        Ok(IndicatorBox { lo, hi })
    }
}

impl<T: Real> FunctionOracle<T> for IndicatorBox<T> {
    fn name(&self) -> String {
        "indicator_box".into()
    }
    fn dimension(&self) -> usize {
        self.lo.len()
    }
    fn value(&self, x: &[T]) -> ExtReal<T> {
        check_dim(self.dimension(), x);
        let inside = x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(&v, (&l, &h))| l <= v && v <= h);
        if inside {
            ExtReal::Finite(T::zero())
        } else {
            ExtReal::PosInf
        }
    }
    fn has_subdifferential(&self) -> bool {
        true
    }
    fn subdifferential(&self, x: &[T]) -> Result<SubdiffSet<T>> {
        if !self.value(x).is_finite() {
            return Ok(SubdiffSet::Empty);
        }
        Ok(SubdiffSet::Product(
            x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .map(|(&v, (&l, &h))| {
                    if v == l {
                        Interval::at_most(T::zero())
                    } else if v == h {
                        Interval::at_least(T::zero())
                    } else {
                        Interval::point(T::zero())
                    }
                })
                .collect(),
        ))
    }
    fn has_prox(&self) -> bool {
        true
    }
    fn prox(&self, _lambda: T, x: &[T]) -> Result<Vec<T>> {
        Ok(x.iter().zip(self.lo.iter().zip(&self.hi)).map(|(&v, (&l, &h))| v.max(l).min(h)).collect())
    }
    fn truth(&self) -> Option<Truth<T>> {
        Some(Truth::from_s_star(Some(T::zero())))
    }
    fn piecewise_form(&self) -> Option<PiecewiseQuad1D<BigRational>> {
        if self.lo.len() != 1 {
            return None;
        }
        let z = BigRational::from_int(0);
        PiecewiseQuad1D::new(
            vec![],
            vec![QuadPiece::new(z.clone(), z.clone(), z)],
            Domain { lo: Some(rat(self.lo[0])), hi: Some(rat(self.hi[0])) },
        )
        .ok()
    }
}

/// `φ(x) = 1` for `x ≠ 0`, `φ(0) = 0`.
#[derive(Clone, Debug, Default)]
pub struct UnitExceptOrigin<T> {
    _t: std::marker::PhantomData<T>,
}

impl<T: Real> UnitExceptOrigin<T> {
    pub fn new() -> Self {
        UnitExceptOrigin { _t: Default::default() }
    }
}

impl<T: Real> FunctionOracle<T> for UnitExceptOrigin<T> {
    fn name(&self) -> String {
        "unit_except_origin".into()
    }
    fn dimension(&self) -> usize {
        1
    }
    fn value(&self, x: &[T]) -> ExtReal<T> {
        check_dim(1, x);
        ExtReal::Finite(if x[0] == T::zero() { T::zero() } else { T::one() })
    }
    fn has_subdifferential(&self) -> bool {
        true
    }
    fn subdifferential(&self, x: &[T]) -> Result<SubdiffSet<T>> {
        Ok(if x[0] == T::zero() { SubdiffSet::Product(vec![Interval::all()]) } else { SubdiffSet::singleton(vec![T::zero()]) })
    }
    fn has_prox(&self) -> bool {
        true
    }
    fn prox(&self, lambda: T, x: &[T]) -> Result<Vec<T>> {
        let u = x[0];
        Ok(vec![if u * u <= T::lit(2.0) * lambda { T::zero() } else { u }])
    }
    fn truth(&self) -> Option<Truth<T>> {
        Some(Truth::from_s_star(None))
    }
}

/// `-|x|`
#[derive(Clone, Debug, Default)]
pub struct NegAbs<T> {
    _t: std::marker::PhantomData<T>,
}

impl<T: Real> NegAbs<T> {
    pub fn new() -> Self {
        NegAbs { _t: Default::default() }
    }
}

impl<T: Real> FunctionOracle<T> for NegAbs<T> {
    fn name(&self) -> String {
        "neg_abs".into()
    }
    fn dimension(&self) -> usize {
        1
    }
    fn value(&self, x: &[T]) -> ExtReal<T> {
        check_dim(1, x);
        ExtReal::Finite(-x[0].abs())
    }
    fn has_subdifferential(&self) -> bool {
        true
    }
    fn subdifferential(&self, x: &[T]) -> Result<SubdiffSet<T>> {
        Ok(if x[0] == T::zero() {
            SubdiffSet::Finite(vec![vec![-T::one()], vec![T::one()]])
        } else {
            SubdiffSet::singleton(vec![-sign(x[0])])
        })
    }
    fn has_prox(&self) -> bool {
        true
    }
    fn prox(&self, lambda: T, x: &[T]) -> Result<Vec<T>> {
        let u = x[0];
        Ok(vec![if u >= T::zero() { u + lambda } else { u - lambda }])
    }
    fn truth(&self) -> Option<Truth<T>> {
        Some(Truth::from_s_star(None))
    }
    fn piecewise_form(&self) -> Option<PiecewiseQuad1D<BigRational>> {
        Some(PiecewiseQuad1D::neg_abs())
    }
}

/// `φ + (κ/2)‖·‖²` for any real `κ`.
#[derive(Clone)]
pub struct Tilt<T> {
    inner: Arc<dyn FunctionOracle<T>>,
    kappa: T,
}

impl<T: Real> Tilt<T> {
    pub fn new(inner: Arc<dyn FunctionOracle<T>>, kappa: T) -> Self {
        Tilt { inner, kappa }
    }
    pub fn kappa(&self) -> T {
        self.kappa
    }
}

impl<T: Real> FunctionOracle<T> for Tilt<T> {
    fn name(&self) -> String {
        format!("tilt({},{})", self.inner.name(), self.kappa)
    }
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }
    fn value(&self, x: &[T]) -> ExtReal<T> {
        self.inner.value(x).map(|v| v + self.kappa / T::lit(2.0) * linalg::norm_sq(x))
    }
    fn has_subdifferential(&self) -> bool {
        self.inner.has_subdifferential()
    }
    fn subdifferential(&self, x: &[T]) -> Result<SubdiffSet<T>> {
        Ok(self.inner.subdifferential(x)?.translate(&linalg::scale(x, self.kappa)))
    }
    fn has_prox(&self) -> bool {
        self.inner.has_prox()
    }
    fn prox(&self, lambda: T, x: &[T]) -> Result<Vec<T>> {
        let s = T::one() + lambda * self.kappa;
        if s <= T::zero() {
            return Err(Error::ProxDiverged(format!("1 + lambda kappa = {s} <= 0")));
        }
        self.inner.prox(lambda / s, &linalg::scale(x, T::one() / s))
    }
    fn truth(&self) -> Option<Truth<T>> {
        self.inner.truth().map(|t| t.tilted(self.kappa))
    }
    fn piecewise_form(&self) -> Option<PiecewiseQuad1D<BigRational>> {
        Some(self.inner.piecewise_form()?.tilt(&rat(self.kappa)))
    }
}

/// Sum of oracles. The subdifferential is the Minkowski sum of the summands' sets,
/// which is exact when at most one summand is nonsmooth at the point.
#[derive(Clone)]
pub struct Sum<T> {
    terms: Vec<Arc<dyn FunctionOracle<T>>>,
}

impl<T: Real> Sum<T> {
    pub fn new(terms: Vec<Arc<dyn FunctionOracle<T>>>) -> Result<Self> {
        let n = terms.first().ok_or_else(|| Error::InvalidParameter("empty sum".into()))?.dimension();
        if terms.iter().any(|t| t.dimension() != n) {
            return Err(Error::InvalidParameter("summands must share a dimension".into()));
        }
        Ok(Sum { terms })
    }
}

impl<T: Real> FunctionOracle<T> for Sum<T> {
    fn name(&self) -> String {
        format!("sum({})", self.terms.iter().map(|t| t.name()).collect::<Vec<_>>().join(","))
    }
    fn dimension(&self) -> usize {
        self.terms[0].dimension()
    }
    fn value(&self, x: &[T]) -> ExtReal<T> {
        self.terms.iter().map(|t| t.value(x)).fold(ExtReal::Finite(T::zero()), |a, b| a + b)
    }
    fn has_subdifferential(&self) -> bool {
        self.terms.iter().all(|t| t.has_subdifferential())
    }
    fn subdifferential(&self, x: &[T]) -> Result<SubdiffSet<T>> {
        let mut acc = SubdiffSet::singleton(vec![T::zero(); x.len()]);
        for t in &self.terms {
            acc = acc
                .minkowski(&t.subdifferential(x)?)
                .ok_or(Error::NoAnalyticForm("Minkowski sum of these set forms".into()))?;
        }
        Ok(acc)
    }
    fn piecewise_form(&self) -> Option<PiecewiseQuad1D<BigRational>> {
        let mut it = self.terms.iter();
        let mut acc = it.next()?.piecewise_form()?;
        for t in it {
            acc = acc.add(&t.piecewise_form()?).ok()?;
        }
        Some(acc)
    }
    fn truth(&self) -> Option<Truth<T>> {
        let f = self.piecewise_form()?;
        let s = convexity_decide_exact(&f).sharp_modulus();
        Some(Truth::from_s_star(s.map(|v| T::lit(v.approx_f64()))))
    }
}

/// A 1-D piecewise quadratic given by exact coefficients.
#[derive(Clone, Debug)]
pub struct Piecewise1D<T> {
    exact: PiecewiseQuad1D<BigRational>,
    float: PiecewiseQuad1D<f64>,
    _t: std::marker::PhantomData<T>,
}

impl<T: Real> Piecewise1D<T> {
    pub fn new(exact: PiecewiseQuad1D<BigRational>) -> Self {
        let float = exact.map_scalar(|v| v.approx_f64());
        Piecewise1D { exact, float, _t: Default::default() }
    }

    pub fn exact(&self) -> &PiecewiseQuad1D<BigRational> {
        &self.exact
    }

    fn piece_at(&self, x: f64) -> Option<usize> {
        let f = &self.float;
        if f.domain().lo.is_some_and(|l| x < l) || f.domain().hi.is_some_and(|h| x > h) {
            return None;
        }
        Some(f.breakpoints().iter().take_while(|&&b| b < x).count())
    }
}

impl<T: Real> FunctionOracle<T> for Piecewise1D<T> {
    fn name(&self) -> String {
        "piecewise1d".into()
    }
    fn dimension(&self) -> usize {
        1
    }
    fn value(&self, x: &[T]) -> ExtReal<T> {
        check_dim(1, x);
        let xf = x[0].as_f64();
        match self.piece_at(xf) {
            Some(i) => {
                let p = &self.float.pieces()[i];
                let (a, c, d) = (T::lit(p.a), T::lit(p.c), T::lit(p.d));
                ExtReal::Finite(a * x[0] * x[0] + c * x[0] + d)
            }
            None => ExtReal::PosInf,
        }
    }
    fn has_subdifferential(&self) -> bool {
        true
    }
    fn subdifferential(&self, x: &[T]) -> Result<SubdiffSet<T>> {
        let xf = x[0].as_f64();
        let f = &self.float;
        if self.piece_at(xf).is_none() {
            return Ok(SubdiffSet::Empty);
        }
        let slope = |i: usize| T::lit(f.pieces()[i].slope(&xf));
        let last = f.pieces().len() - 1;
        if f.domain().lo == Some(xf) {
            return Ok(SubdiffSet::Product(vec![Interval::at_most(slope(0))]));
        }
        if f.domain().hi == Some(xf) {
            return Ok(SubdiffSet::Product(vec![Interval::at_least(slope(last))]));
        }
        if let Some(i) = f.breakpoints().iter().position(|&b| b == xf) {
            let (dl, dr) = (slope(i), slope(i + 1));
            return Ok(if dl <= dr {
                SubdiffSet::Product(vec![Interval::closed(dl, dr)])
            } else {
                SubdiffSet::Finite(vec![vec![dr], vec![dl]])
            });
        }
        Ok(SubdiffSet::singleton(vec![slope(self.piece_at(xf).expect("in domain"))]))
    }
    fn has_prox(&self) -> bool {
        true
    }
    fn prox(&self, lambda: T, x: &[T]) -> Result<Vec<T>> {
        let f = &self.float;
        let u = x[0].as_f64();
        let lam = lambda.as_f64();
        let pieces = f.pieces();
        let inv = 1.0 / (2.0 * lam);
        if (f.domain().lo.is_none() && pieces[0].a + inv <= 0.0)
            || (f.domain().hi.is_none() && pieces[pieces.len() - 1].a + inv <= 0.0)
        {
            return Err(Error::ProxDiverged(format!("negative leading curvature with lambda = {lam}")));
        }
        let mut cands: Vec<f64> = f.breakpoints().to_vec();
        cands.extend(f.domain().lo);
        cands.extend(f.domain().hi);
        for (i, p) in pieces.iter().enumerate() {
            let den = 2.0 * p.a + 1.0 / lam;
            if den > 0.0 {
                let y = (u / lam - p.c) / den;
                let (lo, hi) = f.piece_bounds(i);
                let y = y.max(lo.unwrap_or(f64::NEG_INFINITY)).min(hi.unwrap_or(f64::INFINITY));
                cands.push(y);
            }
        }
        let obj = |y: f64| self.value(&[T::lit(y)]).to_float().as_f64() + (y - u) * (y - u) * inv;
        let best = cands
            .into_iter()
            .filter(|y| y.is_finite())
            .min_by(|&a, &b| obj(a).total_cmp(&obj(b)))
            .ok_or_else(|| Error::InnerSolverFailed("no prox candidate".into()))?;
        Ok(vec![T::lit(best)])
    }
    fn truth(&self) -> Option<Truth<T>> {
        let s = convexity_decide_exact(&self.exact).sharp_modulus();
        Some(Truth::from_s_star(s.map(|v| T::lit(v.approx_f64()))))
    }
    fn piecewise_form(&self) -> Option<PiecewiseQuad1D<BigRational>> {
        Some(self.exact.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_prox(o: &dyn FunctionOracle<f64>, lambda: f64, u: f64) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for k in -800_000..=800_000 {
            let y = k as f64 * 1e-5;
            let v = o.value(&[y]).to_float() + (y - u) * (y - u) / (2.0 * lambda);
            if v < best.0 {
                best = (v, y);
            }
        }
        best.1
    }

    #[test]
    fn closed_form_proxes_match_grid() {
        let oracles: Vec<Box<dyn FunctionOracle<f64>>> = vec![
            Box::new(L1::abs()),
            Box::new(Huber::new(0.7, 1).unwrap()),
            Box::new(NegHalfSquare::new(1)),
            Box::new(MaxQuadratics::<f64>::abs_sq_minus_one()),
            Box::new(IndicatorBox::new(vec![0.0], vec![1.0]).unwrap()),
            Box::new(UnitExceptOrigin::new()),
            Box::new(NegAbs::new()),
            Box::new(Piecewise1D::new(PiecewiseQuad1D::abs())),
        ];
        for o in &oracles {
            let lambda = if o.name() == "abs_sq_minus_one" { 0.2 } else { 0.5 };
            for u in [-2.3, -0.4, 0.3, 1.7] {
                let p = o.prox(lambda, &[u]).unwrap()[0];
                let g = grid_prox(o.as_ref(), lambda, u);
                assert!((p - g).abs() < 2e-5, "{}: u={u} prox={p} grid={g}", o.name());
            }
        }
    }

    #[test]
    fn tilt_prox_matches_grid() {
        let t = Tilt::new(Arc::new(L1::<f64>::abs()), 0.8);
        for u in [-1.5, 0.2, 2.0] {
            let p = t.prox(0.5, &[u]).unwrap()[0];
            assert!((p - grid_prox(&t, 0.5, u)).abs() < 2e-5);
        }
        let neg = Tilt::new(Arc::new(L1::<f64>::abs()), -4.0);
        assert!(matches!(neg.prox(0.5, &[1.0]), Err(Error::ProxDiverged(_))));
    }

    #[test]
    fn quadratic_prox_solves_linear_system() {
        let q = Quadratic::new(vec![vec![2.0, 0.5], vec![0.5, 1.0]], vec![1.0, -1.0], 0.0).unwrap();
        let x = [0.3f64, -0.7];
        let p = q.prox(0.4, &x).unwrap();
        let g = q.gradient(&p);
        for i in 0..2 {
            assert!((p[i] - x[i] + 0.4 * g[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn truths() {
        assert_eq!(MaxQuadratics::<f64>::abs_sq_minus_one().truth().unwrap().weak_modulus, Some(2.0));
        assert!(UnitExceptOrigin::<f64>::new().truth().unwrap().weak_modulus.is_none());
        assert_eq!(NegHalfSquare::<f64>::new(3).truth().unwrap().weak_modulus, Some(1.0));
        let q = Quadratic::new(vec![vec![3.0]], vec![0.0], 0.0).unwrap();
        assert_eq!(q.truth().unwrap().strong_modulus, Some(3.0));
    }

    #[test]
    fn piecewise_forms_agree_with_values() {
        let oracles: Vec<Box<dyn FunctionOracle<f64>>> = vec![
            Box::new(L1::abs()),
            Box::new(Huber::new(0.5, 1).unwrap()),
            Box::new(NegHalfSquare::new(1)),
            Box::new(MaxQuadratics::<f64>::abs_sq_minus_one()),
            Box::new(NegAbs::new()),
            Box::new(Tilt::new(Arc::new(Huber::new(0.5, 1).unwrap()), -0.3)),
            Box::new(Sum::new(vec![Arc::new(L1::abs()), Arc::new(NegHalfSquare::new(1))]).unwrap()),
        ];
        for o in &oracles {
            let f = o.piecewise_form().unwrap();
            for k in -20..=20 {
                let x = k as f64 * 0.17;
                let exact = f.value(&BigRational::from_float(x).unwrap()).finite().unwrap().approx_f64();
                assert!((exact - o.value(&[x]).to_float()).abs() < 1e-12, "{} at {x}", o.name());
            }
        }
    }

    #[test]
    fn subdifferential_shapes() {
        assert_eq!(NegAbs::<f64>::new().subdifferential(&[0.0]).unwrap().distance(&[1.0]), 0.0);
        assert!(IndicatorBox::new(vec![0.0], vec![1.0]).unwrap().subdifferential(&[2.0]).unwrap().is_empty());
        let m = MaxQuadratics::<f64>::abs_sq_minus_one().subdifferential(&[1.0]).unwrap();
        assert!(m.contains(&[0.0], 1e-12) && m.contains(&[1.5], 1e-12) && !m.contains(&[2.5], 1e-9));
    }
}
