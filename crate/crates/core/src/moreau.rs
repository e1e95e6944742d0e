//! Moreau envelopes, proximal points and envelope derivatives.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::parallel;
use crate::scalar::Real;
use crate::types::{prox_residual, BoxRegion, FunctionOracle};

/// Settings for the numerical proximal solver.
#[derive(Clone, Debug, Serialize)]
pub struct InnerSolver<T> {
    /// Final step size of the 1-D polish and the pattern search.
    pub tol: T,
    pub max_evals: usize,
    /// Largest distance from the prox input searched before reporting divergence.
    pub search_radius: T,
    /// Random restarts for the multidimensional search.
    pub starts: usize,
    /// Use the oracle's closed-form prox when it has one.
    pub use_analytic: bool,
    pub seed: u64,
}

impl<T: Real> Default for InnerSolver<T> {
    fn default() -> Self {
        InnerSolver {
            tol: T::lit(1e-10),
            max_evals: 400_000,
            search_radius: T::lit(40.0),
            starts: 6,
            use_analytic: true,
            seed: 0,
        }
    }
}

impl<T: Real> InnerSolver<T> {
    /// Numerical solver only, with the search radius set to ten box diameters.
    pub fn numeric_for(region: &BoxRegion<T>) -> Self {
        InnerSolver { use_analytic: false, search_radius: T::lit(10.0) * region.diameter(), ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProxPoint<T> {
    pub point: Vec<T>,
    pub objective: T,
    /// Optimality gap against a coordinate verification grid.
    pub residual: T,
    pub analytic: bool,
}

/// Central-difference Hessian of the envelope, symmetrized.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FdHessian<T> {
    pub matrix: Vec<Vec<T>>,
    /// `max |H - Hᵀ| / 2` before symmetrization.
    pub symmetry_defect: T,
    pub step: T,
}

/// `e_λφ` for a fixed `λ`.
pub struct EnvelopeHandle<'a, T> {
    oracle: &'a dyn FunctionOracle<T>,
    lambda: T,
    solver: InnerSolver<T>,
}

impl<'a, T: Real> EnvelopeHandle<'a, T> {
    /// Requires `λ > 0` and, for a declared weak modulus `ρ > 0`, `λ < 1/ρ`.
    pub fn new(oracle: &'a dyn FunctionOracle<T>, lambda: T, solver: InnerSolver<T>) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        if let Some(rho) = oracle.truth().and_then(|t| t.weak_modulus) {
            if rho > T::zero() && lambda * rho >= T::one() {
                return Err(Error::InvalidParameter(format!("lambda = {lambda} must be below 1/rho = {}", T::one() / rho)));
            }
        }
        Ok(EnvelopeHandle { oracle, lambda, solver })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn oracle(&self) -> &dyn FunctionOracle<T> {
        self.oracle
    }

    fn objective(&self, u: &[T], y: &[T]) -> T {
        self.oracle.value(y).to_float() + linalg::norm_sq(&linalg::sub(y, u)) / (T::lit(2.0) * self.lambda)
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.oracle.dimension() {
            return Err(Error::DimensionMismatch { expected: self.oracle.dimension(), found: x.len() });
        }
        Ok(())
    }

    pub fn prox(&self, x: &[T]) -> Result<ProxPoint<T>> {
        self.check_dim(x)?;
        let (point, analytic) = if self.solver.use_analytic && self.oracle.has_prox() {
            (self.oracle.prox(self.lambda, x)?, true)
        } else if x.len() == 1 {
            (vec![self.prox_1d(x[0])?], false)
        } else {
            (self.prox_nd(x)?, false)
        };
        let objective = self.objective(x, &point);
        if !objective.is_finite() {
            return Err(Error::InnerSolverFailed("proximal point has infinite objective".into()));
        }
        let residual = prox_residual(self.oracle, self.lambda, x, &point);
        Ok(ProxPoint { point, objective, residual, analytic })
    }

    pub fn envelope(&self, x: &[T]) -> Result<T> {
        Ok(self.prox(x)?.objective)
    }

    /// `∇e_λφ(x) = (x - prox_λφ(x))/λ`
    pub fn envelope_gradient(&self, x: &[T]) -> Result<Vec<T>> {
        let p = self.prox(x)?;
        Ok(linalg::scale(&linalg::sub(x, &p.point), T::one() / self.lambda))
    }

    pub fn envelope_hessian_fd(&self, x: &[T], step: T) -> Result<FdHessian<T>> {
        self.check_dim(x)?;
        let n = x.len();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += step;
            xm[j] -= step;
            let gp = self.envelope_gradient(&xp)?;
            let gm = self.envelope_gradient(&xm)?;
            cols.push(linalg::scale(&linalg::sub(&gp, &gm), T::one() / (T::lit(2.0) * step)));
        }
        let mut defect = T::zero();
        let mut m = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (cols[j][i], cols[i][j]);
                defect = defect.max((a - b).abs() / T::lit(2.0));
                m[i][j] = (a + b) / T::lit(2.0);
            }
        }
        Ok(FdHessian { matrix: m, symmetry_defect: defect, step })
    }

    fn prox_1d(&self, u: T) -> Result<T> {
        let obj = |y: T| self.objective(&[u], &[y]);
        let n_grid = 2048usize;
        let mut r = (T::lit(4.0) * self.lambda).max(T::one()) * (T::one() + u.abs());
        let mut evals = 0usize;
        loop {
            let h = T::lit(2.0) * r / T::lit(n_grid as f64);
            let k0 = ((u - r) / h).ceil().as_f64() as i64;
            let k1 = ((u + r) / h).floor().as_f64() as i64;
            let mut best = (obj(u), u);
            for k in k0..=k1 {
                let y = T::lit(k as f64) * h;
                let v = obj(y);
                if v < best.0 {
                    best = (v, y);
                }
            }
            evals += (k1 - k0 + 1).max(0) as usize;
            let near_edge = (best.1 - u).abs() > r - T::lit(2.0) * h;
            if !near_edge {
                let polished = golden(&obj, best.1 - h, best.1 + h, self.solver.tol);
                let cands = [polished, best.1, u];
                let y = cands.into_iter().fold(best.1, |a, b| if obj(b) < obj(a) { b } else { a });
                return Ok(y);
            }
            if r > self.solver.search_radius || evals > self.solver.max_evals {
                return Err(Error::ProxDiverged(format!("objective still decreasing at distance {r} from {u}")));
            }
            r = r * T::lit(2.0);
        }
    }

    fn prox_nd(&self, u: &[T]) -> Result<Vec<T>> {
        let n = u.len();
        let mut dirs: Vec<Vec<T>> = Vec::new();
        for i in 0..n {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            dirs.push(e.clone());
            dirs.push(linalg::scale(&e, -T::one()));
            if n <= 6 {
                for j in i + 1..n {
                    for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                        let mut d = vec![T::zero(); n];
                        d[i] = T::lit(si / 2f64.sqrt());
                        d[j] = T::lit(sj / 2f64.sqrt());
                        dirs.push(d);
                    }
                }
            }
        }
        let mut rng = parallel::rng_for(self.solver.seed, 0x4e44, 0);
        for _ in 0..2 * n {
            let d: Vec<T> = linalg::random_unit(&mut rng, n);
            dirs.push(linalg::scale(&d, -T::one()));
            dirs.push(d);
        }
        let obj = |y: &[T]| self.objective(u, y);
        let step0 = self.lambda.max(T::lit(0.1)) * (T::one() + linalg::norm(u));
        let mut starts = vec![u.to_vec()];
        for _ in 0..self.solver.starts {
            let d: Vec<T> = linalg::random_unit(&mut rng, n);
            starts.push(linalg::axpy(u, step0 * T::lit(2.0), &d));
        }
        let budget = self.solver.max_evals / starts.len().max(1);
        let mut best: Option<(T, Vec<T>)> = None;
        for s in starts {
            let (v, y) = pattern_search(&obj, s, &dirs, step0, self.solver.tol, budget, u, self.solver.search_radius);
            if linalg::norm(&linalg::sub(&y, u)) >= self.solver.search_radius {
                return Err(Error::ProxDiverged(format!("pattern search left the radius {}", self.solver.search_radius)));
            }
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, y));
            }
        }
        Ok(best.expect("at least one start").1)
    }
}

fn golden<T: Real>(f: &impl Fn(T) -> T, mut a: T, mut b: T, tol: T) -> T {
    let g = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / T::lit(2.0)
}

#[allow(clippy::too_many_arguments)]
fn pattern_search<T: Real>(
    f: &impl Fn(&[T]) -> T,
    mut y: Vec<T>,
    dirs: &[Vec<T>],
    mut step: T,
    tol: T,
    budget: usize,
    center: &[T],
    radius: T,
) -> (T, Vec<T>) {
    let mut fy = f(&y);
    let mut evals = 1;
    while step > tol && evals < budget {
        let mut improved = false;
        for d in dirs {
            let cand = linalg::axpy(&y, step, d);
            let fc = f(&cand);
            evals += 1;
            if fc < fy {
                y = cand;
                fy = fc;
                improved = true;
                break;
            }
        }
        if !improved {
            step = step / T::lit(2.0);
        } else {
            step = step * T::lit(1.5);
        }
        if linalg::norm(&linalg::sub(&y, center)) >= radius {
            break;
        }
    }
    (fy, y)
}

/// Outcome of the unboundedness probe for the proximal subproblem.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProxBound<T> {
    pub bounded: bool,
    pub anchor: Option<Vec<T>>,
    pub direction: Option<Vec<T>>,
    /// Objective values along the ray at distances `R, 2R, 4R`.
    pub values: Vec<T>,
}

/// Checks whether `y ↦ φ(y) + ‖y - a‖²/(2λ)` keeps decreasing along coordinate rays from the
/// box anchors, at distances up to forty box diameters.
pub fn prox_bound_probe<T: Real>(oracle: &dyn FunctionOracle<T>, lambda: T, region: &BoxRegion<T>) -> ProxBound<T> {
    let r = T::lit(10.0) * region.diameter();
    let n = region.dim();
    for a in region.anchors() {
        let obj = |y: &[T]| oracle.value(y).to_float() + linalg::norm_sq(&linalg::sub(y, &a)) / (T::lit(2.0) * lambda);
        let base = obj(&a);
        for i in 0..n {
            for s in [T::one(), -T::one()] {
                let mut d = vec![T::zero(); n];
                d[i] = s;
                let vals: Vec<T> = [1.0, 2.0, 4.0].iter().map(|&k| obj(&linalg::axpy(&a, r * T::lit(k), &d))).collect();
                if vals[0] < base && vals[1] < vals[0] && vals[2] < vals[1] {
                    return ProxBound { bounded: false, anchor: Some(a.clone()), direction: Some(d), values: vals };
                }
            }
        }
    }
    ProxBound { bounded: true, anchor: None, direction: None, values: vec![] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{get, Quadratic, L1};

    #[test]
    fn numeric_prox_matches_analytic_1d() {
        for name in ["abs", "huber", "abs_sq_minus_one", "neg_abs", "unit_except_origin", "indicator_box"] {
            let e = get::<f64>(name).unwrap();
            let lambda = 0.2;
            let a = EnvelopeHandle::new(e.oracle.as_ref(), lambda, InnerSolver::default()).unwrap();
            let n = EnvelopeHandle::new(e.oracle.as_ref(), lambda, InnerSolver::numeric_for(&e.default_box)).unwrap();
            for u in [-1.7, -0.45, 0.0, 0.3, 1.2] {
                let pa = a.prox(&[u]).unwrap();
                let pn = n.prox(&[u]).unwrap();
                assert!(pn.objective - pa.objective < 1e-9, "{name} u={u}: {pn:?} vs {pa:?}");
                assert!(pn.residual < 1e-8, "{name} residual {}", pn.residual);
            }
        }
    }

    #[test]
    fn numeric_prox_nd() {
        let q = Quadratic::new(vec![vec![2.0, 0.3], vec![0.3, 1.0]], vec![0.5, -0.5], 0.0).unwrap();
        let region = BoxRegion::cube(2, -2.0, 2.0).unwrap();
        let a = EnvelopeHandle::new(&q, 0.5, InnerSolver::default()).unwrap();
        let n = EnvelopeHandle::new(&q, 0.5, InnerSolver::numeric_for(&region)).unwrap();
        let u = [0.7, -1.1];
        let (pa, pn) = (a.prox(&u).unwrap(), n.prox(&u).unwrap());
        assert!(linalg::norm(&linalg::sub(&pa.point, &pn.point)) < 1e-6);
    }

    #[test]
    fn divergence_detected() {
        let e = get::<f64>("neg_half_square").unwrap();
        let h = EnvelopeHandle::new(e.oracle.as_ref(), 0.5, InnerSolver::numeric_for(&e.default_box)).unwrap();
        assert!(h.prox(&[0.3]).is_ok());
        assert!(EnvelopeHandle::new(e.oracle.as_ref(), 2.0, InnerSolver::default()).is_err());
        assert!(!prox_bound_probe(e.oracle.as_ref(), 2.0, &e.default_box).bounded);
        assert!(prox_bound_probe(e.oracle.as_ref(), 0.5, &e.default_box).bounded);
        assert!(prox_bound_probe(&L1::<f64>::abs(), 10.0, &e.default_box).bounded);
    }

    #[test]
    fn abs_envelope_closed_form() {
        let o = L1::<f64>::abs();
        let h = EnvelopeHandle::new(&o, 1.0, InnerSolver::default()).unwrap();
        assert!((h.envelope(&[0.5]).unwrap() - 0.125).abs() < 1e-12);
        assert!((h.envelope_gradient(&[0.5]).unwrap()[0] - 0.5).abs() < 1e-12);
        assert!((h.envelope(&[3.0]).unwrap() - 2.5).abs() < 1e-12);
        let hess = h.envelope_hessian_fd(&[0.2], 1e-4).unwrap();
        assert!((hess.matrix[0][0] - 1.0).abs() < 1e-6);
    }
}
