//! Numerical estimators for second-order objects along shrinking grids.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ext::{ExtReal, Extended};
use crate::linalg;
use crate::moreau::{EnvelopeHandle, InnerSolver};
use crate::parallel;
use crate::scalar::Real;
use crate::types::{sample_subgradient_pairs, BoxRegion, FunctionOracle, SubgradientPair};
use crate::zoo::Tilt;

/// Values at or above this magnitude count as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;
/// Number of finest reliable levels used for limits.
pub const TAIL: usize = 5;
/// A level is reliable when its rounding-error bound is below this fraction of its value.
pub const RELIABILITY: f64 = 1e-7;

/// Shrinking grid `τ_k = τ₀ r^k`, `k = 0..=K`, with `m` perturbed directions in a ball of radius `δ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridConfig<T> {
    pub tau0: T,
    pub ratio: T,
    pub depth: usize,
    pub radius: T,
    pub samples: usize,
}

impl<T: Real> Default for GridConfig<T> {
    fn default() -> Self {
        GridConfig { tau0: T::lit(0.1), ratio: T::lit(0.5), depth: 20, radius: T::lit(1e-2), samples: 8 }
    }
}

impl<T: Real> GridConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > T::zero()) || !(self.ratio > T::zero() && self.ratio < T::one()) || !(self.radius >= T::zero()) {
            return Err(Error::InvalidParameter("grid needs tau0 > 0, 0 < r < 1, delta >= 0".into()));
        }
        Ok(())
    }

    pub fn step(&self, k: usize) -> T {
        self.tau0 * self.ratio.powi(k as i32)
    }

    /// Perturbation radius at level `k`: fixed `δ` for `w = 0`, else `δ‖w‖ r^{3k}`.
    pub fn ball(&self, k: usize, w_norm: T) -> T {
        if w_norm == T::zero() {
            self.radius
        } else {
            self.radius * w_norm * self.ratio.powi(3 * k as i32)
        }
    }
}

fn tol_psd<T: Real>(w: &[T]) -> T {
    T::lit(1e-6) * (T::one() + linalg::norm_sq(w))
}

/// Deterministic perturbation directions of length at most one; prefix-stable in `m`.
pub fn perturbations<T: Real>(n: usize, m: usize) -> Vec<Vec<T>> {
    if n == 1 {
        let mags = [1.0, 0.5, 0.25, 0.75, 0.125, 0.875, 0.375, 0.625];
        return (0..m).map(|j| {
            let mag = mags[(j / 2) % mags.len()] / (1 + j / 16) as f64;
            vec![T::lit(if j % 2 == 0 { mag } else { -mag })]
        }).collect();
    }
    let mut rng = parallel::rng_for(0x5eed, 0x7e57, n as u64);
    (0..m)
        .map(|j| {
            let d: Vec<T> = linalg::random_unit(&mut rng, n);
            let mag = T::lit(1.0 - 0.5 * ((j % 4) as f64) / 4.0);
            linalg::scale(&d, mag)
        })
        .collect()
}

/// `Δ²_τφ(x, v)(u) = [φ(x + τu) - φ(x) - τ⟨v, u⟩] / (½τ²)`.
pub fn delta2<T: Real>(oracle: &dyn FunctionOracle<T>, x: &[T], v: &[T], tau: T, u: &[T]) -> Result<ExtReal<T>> {
    let n = oracle.dimension();
    for len in [x.len(), v.len(), u.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    if !(tau > T::zero()) {
        return Err(Error::InvalidParameter("tau must be positive".into()));
    }
    let fx = oracle.value(x).finite().ok_or(Error::BasePointInfeasible)?;
    Ok(quotient(oracle, x, v, fx, tau, u).0)
}

/// Quotient and its rounding-error bound.
fn quotient<T: Real>(oracle: &dyn FunctionOracle<T>, x: &[T], v: &[T], fx: T, tau: T, u: &[T]) -> (ExtReal<T>, T) {
    let y = linalg::axpy(x, tau, u);
    match oracle.value(&y) {
        ExtReal::PosInf => (ExtReal::PosInf, T::zero()),
        ExtReal::Finite(fy) => {
            let lin = tau * linalg::dot(v, u);
            let q = (fy - fx - lin) / (T::lit(0.5) * tau * tau);
            let err = T::lit(8.0) * T::epsilon()
                * (fx.abs() + fy.abs() + lin.abs() + linalg::norm(x) * linalg::norm(v))
                / (tau * tau);
            (ExtReal::Finite(q), err)
        }
    }
}

/// A point of the `(τ, u)` grid with its quotient.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint<T> {
    pub level: usize,
    pub tau: T,
    pub u: Vec<T>,
    pub value: ExtReal<T>,
    pub error_bound: T,
}

/// Minimum of one level over the perturbation ball.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelMin<T> {
    pub point: GridPoint<T>,
    pub reliable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubderivativeEstimate<T> {
    pub value: Extended<T>,
    /// Finest reliable level minimum.
    pub argmin: GridPoint<T>,
    pub levels: Vec<LevelMin<T>>,
    /// Minimum over every evaluated grid value; non-increasing as the grid is refined.
    pub grid_min: Extended<T>,
    pub reliable_levels: usize,
}

fn classify_tail<T: Real>(tail: &[&LevelMin<T>], ratio: T) -> Extended<T> {
    let vals: Vec<ExtReal<T>> = tail.iter().map(|l| l.point.value).collect();
    if vals.iter().all(|v| !v.is_finite()) {
        return Extended::PosInf;
    }
    if let Some(first_inf) = vals.iter().position(|v| !v.is_finite()) {
        let finite_prefix = &vals[..first_inf];
        let monotone = finite_prefix.windows(2).all(|w| w[0] <= w[1]);
        if monotone && vals[first_inf..].iter().all(|v| !v.is_finite()) {
            return Extended::PosInf;
        }
    }
    let fin: Vec<(T, T)> = tail.iter().filter_map(|l| l.point.value.finite().map(|v| (v, l.point.error_bound))).collect();
    let big = T::lit(DIVERGENCE_THRESHOLD);
    if fin.iter().all(|&(v, _)| v >= big) {
        return Extended::PosInf;
    }
    if fin.iter().all(|&(v, _)| v <= -big) {
        return Extended::NegInf;
    }
    let finest = fin[fin.len() - 1].0;
    if fin.len() >= 3 {
        let growth = T::one() / ratio.sqrt();
        let diffs: Vec<(T, T)> = fin.windows(2).map(|w| (w[1].0 - w[0].0, w[1].1 + w[0].1)).collect();
        let significant = |d: T, e: T| d.abs() > T::lit(10.0) * e && d.abs() > T::lit(1e-6) * T::one().max(finest.abs());
        let geometric = diffs.windows(2).all(|p| p[1].0.abs() >= growth * p[0].0.abs());
        let sig = diffs.iter().all(|&(d, e)| significant(d, e));
        if geometric && sig && diffs.iter().all(|&(d, _)| d > T::zero()) {
            return Extended::PosInf;
        }
        if geometric && sig && diffs.iter().all(|&(d, _)| d < T::zero()) {
            return Extended::NegInf;
        }
    }
    Extended::Finite(finest)
}

/// `d²φ(x, v)(w)` estimated as a liminf over the grid.
pub fn second_subderivative<T: Real>(
    oracle: &dyn FunctionOracle<T>,
    x: &[T],
    v: &[T],
    w: &[T],
    g: &GridConfig<T>,
) -> Result<SubderivativeEstimate<T>> {
    second_subderivative_shifted(oracle, x, v, w, g, T::zero())
}

/// Liminf of `Δ²_τφ(x, v)(u) - κ‖u‖²`, i.e. `d²φ(x, v)(w) - κ‖w‖²`.
pub fn second_subderivative_shifted<T: Real>(
    oracle: &dyn FunctionOracle<T>,
    x: &[T],
    v: &[T],
    w: &[T],
    g: &GridConfig<T>,
    kappa: T,
) -> Result<SubderivativeEstimate<T>> {
    g.validate()?;
    let n = oracle.dimension();
    for len in [x.len(), v.len(), w.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    let fx = oracle.value(x).finite().ok_or(Error::BasePointInfeasible)?;
    let pert = perturbations::<T>(n, g.samples);
    let w_norm = linalg::norm(w);
    let mut levels = Vec::with_capacity(g.depth + 1);
    let mut grid_min = Extended::PosInf;
    for k in 0..=g.depth {
        let tau = g.step(k);
        let ball = g.ball(k, w_norm);
        let mut best: Option<GridPoint<T>> = None;
        let cands = std::iter::once(w.to_vec()).chain(pert.iter().map(|p| linalg::axpy(w, ball, p)));
        for u in cands {
            let (q, err) = quotient(oracle, x, v, fx, tau, &u);
            let q = q.map(|q| q - kappa * linalg::norm_sq(&u));
            let e: Extended<T> = q.into();
            if e < grid_min {
                grid_min = e;
            }
            if best.as_ref().is_none_or(|b| q < b.value) {
                best = Some(GridPoint { level: k, tau, u, value: q, error_bound: err });
            }
        }
        let point = best.expect("at least the direction itself");
        let reliable = match point.value {
            ExtReal::PosInf => true,
            ExtReal::Finite(q) => point.error_bound <= T::lit(RELIABILITY) * T::one().max(q.abs()),
        };
        levels.push(LevelMin { point, reliable });
    }
    let reliable: Vec<&LevelMin<T>> = levels.iter().filter(|l| l.reliable).collect();
    let reliable_levels = reliable.len();
    let tail: Vec<&LevelMin<T>> = if reliable.is_empty() {
        vec![&levels[0]]
    } else {
        reliable[reliable.len().saturating_sub(TAIL)..].to_vec()
    };
    let mut value = classify_tail(&tail, g.ratio);
    if w_norm == T::zero() {
        value = if value == Extended::NegInf { Extended::NegInf } else { Extended::Finite(T::zero()) };
    }
    let argmin = tail[tail.len() - 1].point.clone();
    Ok(SubderivativeEstimate { value, argmin, levels, grid_min, reliable_levels })
}

/// How a graphical probe obtained its second pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProbeSource {
    /// Selections of the analytic subdifferential at `x + t w'`.
    Structured,
    /// Nearest sampled pairs.
    Cloud,
}

/// One candidate `z = (v' - v)/t` for the graphical derivative at `(x, v)` in direction `w`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeResult<T> {
    pub x: Vec<T>,
    pub v: Vec<T>,
    pub direction: Vec<T>,
    pub level: usize,
    pub step: T,
    /// Realized direction `w'` with `x' = x + t w'`.
    pub realized: Vec<T>,
    pub v_prime: Vec<T>,
    pub z: Vec<T>,
    /// `⟨z, w'⟩`
    pub pairing: T,
    /// Candidates sharing a path id follow one selection as `t` shrinks.
    pub path: usize,
    pub source: ProbeSource,
}

/// Candidates for `D(∂φ)(x | v)(w)` over the grid.
///
/// Uses the oracle's subdifferential when available, otherwise the sampled `pairs`.
pub fn graphical_derivative_probe<T: Real>(
    oracle: &dyn FunctionOracle<T>,
    pairs: &[SubgradientPair<T>],
    base: &SubgradientPair<T>,
    w: &[T],
    g: &GridConfig<T>,
) -> Result<Vec<ProbeResult<T>>> {
    g.validate()?;
    let n = oracle.dimension();
    if w.len() != n || base.x.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: w.len() });
    }
    let (x, v) = (base.x.coords(), base.v.coords());
    let mut out = Vec::new();
    if oracle.has_subdifferential() {
        let pert = perturbations::<T>(n, g.samples);
        let w_norm = linalg::norm(w);
        for k in 0..=g.depth {
            let t = g.step(k);
            let ball = g.ball(k, w_norm);
            let dirs = std::iter::once(w.to_vec()).chain(pert.iter().map(|p| linalg::axpy(w, ball, p)));
            for (j, wp) in dirs.enumerate() {
                let xp = linalg::axpy(x, t, &wp);
                if !oracle.value(&xp).is_finite() {
                    continue;
                }
                let sel = oracle.subdifferential(&xp)?.selections(T::one());
                for (s, vp) in sel.into_iter().enumerate() {
                    let z = linalg::scale(&linalg::sub(&vp, v), T::one() / t);
                    let pairing = linalg::dot(&z, &wp);
                    out.push(ProbeResult {
                        x: x.to_vec(),
                        v: v.to_vec(),
                        direction: w.to_vec(),
                        level: k,
                        step: t,
                        realized: wp.clone(),
                        v_prime: vp,
                        z,
                        pairing,
                        path: j * 64 + s,
                        source: ProbeSource::Structured,
                    });
                }
            }
        }
    } else {
        let w_norm = linalg::norm(w);
        if w_norm == T::zero() {
            return Ok(out);
        }
        let log_r = g.ratio.ln();
        for (i, p) in pairs.iter().enumerate() {
            let d = linalg::sub(p.x.coords(), x);
            let dist = linalg::norm(&d);
            if dist == T::zero() {
                continue;
            }
            let t = dist / w_norm;
            if t > g.tau0 {
                continue;
            }
            let wp = linalg::scale(&d, T::one() / t);
            if linalg::norm(&linalg::sub(&wp, w)) > T::lit(0.25) * w_norm {
                continue;
            }
            let z = linalg::scale(&linalg::sub(p.v.coords(), v), T::one() / t);
            let level = ((t / g.tau0).ln() / log_r).floor().as_f64().max(0.0) as usize;
            out.push(ProbeResult {
                x: x.to_vec(),
                v: v.to_vec(),
                direction: w.to_vec(),
                level,
                step: t,
                pairing: linalg::dot(&z, &wp),
                realized: wp,
                v_prime: p.v.coords().to_vec(),
                z,
                path: i,
                source: ProbeSource::Cloud,
            });
        }
        out.sort_by(|a, b| a.level.cmp(&b.level).then(a.path.cmp(&b.path)));
    }
    Ok(out)
}

/// True when a path's `‖z‖` grows geometrically over its finest levels.
fn path_diverges<T: Real>(tail: &[&ProbeResult<T>], ratio: T) -> bool {
    if tail.len() < 3 {
        return false;
    }
    let norms: Vec<T> = tail.iter().map(|p| linalg::norm(&p.z)).collect();
    let growth = T::one() / ratio.sqrt();
    norms[0] > T::zero() && norms.windows(2).all(|w| w[1] >= growth * w[0])
}

/// Probes on paths whose `z` stays bounded, restricted to each path's finest levels.
pub fn convergent_tail<T: Real>(probes: &[ProbeResult<T>], ratio: T) -> Vec<&ProbeResult<T>> {
    let mut by_path: BTreeMap<usize, Vec<&ProbeResult<T>>> = BTreeMap::new();
    for p in probes {
        by_path.entry(p.path).or_default().push(p);
    }
    let mut out = Vec::new();
    for (_, mut ps) in by_path {
        ps.sort_by_key(|p| p.level);
        let tail = &ps[ps.len().saturating_sub(TAIL)..];
        if !path_diverges(tail, ratio) {
            out.extend_from_slice(tail);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphicalVerdict<T> {
    pub refuted: bool,
    pub witness: Option<ProbeResult<T>>,
    pub probes: usize,
    pub checked: usize,
    /// Smallest `⟨z, w'⟩ - κ‖w'‖²` over checked probes.
    pub min_margin: T,
    pub tolerance: T,
}

/// Directions: `±e_i`, then `extra` random unit vectors.
pub fn test_directions<T: Real>(n: usize, extra: usize, seed: u64) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut e = vec![T::zero(); n];
            e[i] = T::lit(s);
            out.push(e);
        }
    }
    if n > 1 {
        let mut rng = parallel::rng_for(seed, 0xd1, 0);
        for _ in 0..extra {
            out.push(linalg::random_unit(&mut rng, n));
        }
    }
    out
}

/// Pair tolerance used when filtering sampled pairs.
pub fn pair_tolerance<T: Real>(n: usize) -> T {
    if n == 1 {
        T::lit(1e-8)
    } else {
        T::lit(1e-6)
    }
}

/// Checks `⟨z, w'⟩ ≥ κ‖w'‖²` on convergent graphical-derivative candidates.
#[allow(clippy::too_many_arguments)]
pub fn psd_graphical_test<T: Real>(
    oracle: &dyn FunctionOracle<T>,
    region: &BoxRegion<T>,
    kappa: T,
    lambda: T,
    n_pairs: usize,
    n_dirs: usize,
    g: &GridConfig<T>,
    seed: u64,
) -> Result<GraphicalVerdict<T>> {
    let n = oracle.dimension();
    let tol_pair = pair_tolerance::<T>(n);
    let pairs: Vec<SubgradientPair<T>> = sample_subgradient_pairs(oracle, region, lambda, n_pairs, seed)?
        .into_iter()
        .filter(|p| p.residual <= tol_pair)
        .collect();
    let dirs = test_directions::<T>(n, n_dirs, seed);
    let results = parallel::par_map(pairs.len(), |i| -> Result<(usize, usize, Option<(T, ProbeResult<T>)>)> {
        let mut worst: Option<(T, ProbeResult<T>)> = None;
        let (mut probes, mut checked) = (0, 0);
        for w in &dirs {
            let all = graphical_derivative_probe(oracle, &pairs, &pairs[i], w, g)?;
            probes += all.len();
            for p in convergent_tail(&all, g.ratio) {
                checked += 1;
                let margin = p.pairing - kappa * linalg::norm_sq(&p.realized) + tol_psd(&p.realized);
                if worst.as_ref().is_none_or(|(m, _)| margin < *m) {
                    worst = Some((margin, p.clone()));
                }
            }
        }
        Ok((probes, checked, worst))
    });
    let mut total = 0;
    let mut checked = 0;
    let mut worst: Option<(T, ProbeResult<T>)> = None;
    for r in results {
        let (p, c, w) = r?;
        total += p;
        checked += c;
        if let Some((m, pr)) = w {
            if worst.as_ref().is_none_or(|(wm, _)| m < *wm) {
                worst = Some((m, pr));
            }
        }
    }
    let min_margin = worst.as_ref().map_or(T::infinity(), |(m, p)| *m - tol_psd(&p.realized));
    let refuted = worst.as_ref().is_some_and(|(m, _)| *m < T::zero());
    Ok(GraphicalVerdict {
        refuted,
        witness: if refuted { worst.map(|(_, p)| p) } else { None },
        probes: total,
        checked,
        min_margin,
        tolerance: T::lit(1e-6),
    })
}

/// Data from which a violated envelope-curvature inequality can be recomputed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeWitness<T> {
    pub point: Vec<T>,
    pub lambda: T,
    pub step: T,
    pub hessian: Vec<Vec<T>>,
    /// Unit eigenvector for the smallest eigenvalue.
    pub direction: Vec<T>,
    /// `⟨H w, w⟩`
    pub quadratic: T,
    /// `κ_λ = κ/(1 + λκ)`
    pub threshold: T,
    pub prox: Vec<T>,
    pub gradient: Vec<T>,
    /// `z = H w`, a coderivative element of the envelope gradient.
    pub z: Vec<T>,
    /// `w - λ z`: the matching direction at the proximal point.
    pub unwound_direction: Vec<T>,
    /// `⟨z, w - λz⟩`
    pub unwound_pairing: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoderivativeVerdict<T> {
    pub refuted: bool,
    pub witness: Option<EnvelopeWitness<T>>,
    pub points: usize,
    pub min_eigenvalue: T,
    pub threshold: T,
    pub tolerance: T,
}

/// `κ_λ = κ/(1 + λκ)`
pub fn envelope_threshold<T: Real>(kappa: T, lambda: T) -> T {
    kappa / (T::one() + lambda * kappa)
}

/// Builds the witness data at `u` from a finite-difference Hessian.
pub fn envelope_witness<T: Real>(env: &EnvelopeHandle<'_, T>, u: &[T], step: T, kappa: T) -> Result<EnvelopeWitness<T>> {
    let h = env.envelope_hessian_fd(u, step)?;
    let (vals, vecs) = linalg::sym_eigen(&h.matrix);
    let w = vecs[0].clone();
    let z = linalg::mat_vec(&h.matrix, &w);
    let quadratic = linalg::dot(&z, &w);
    let lambda = env.lambda();
    let unwound = linalg::axpy(&w, -lambda, &z);
    let prox = env.prox(u)?.point;
    let gradient = linalg::scale(&linalg::sub(u, &prox), T::one() / lambda);
    let _ = vals;
    Ok(EnvelopeWitness {
        point: u.to_vec(),
        lambda,
        step,
        hessian: h.matrix,
        direction: w,
        quadratic,
        threshold: envelope_threshold(kappa, lambda),
        prox,
        gradient,
        unwound_pairing: linalg::dot(&z, &unwound),
        z,
        unwound_direction: unwound,
    })
}

/// Checks `∇²e_λφ ⪰ κ_λ I` at sampled points via finite differences of the envelope gradient.
#[allow(clippy::too_many_arguments)]
pub fn coderivative_psd_via_envelope<T: Real>(
    oracle: &dyn FunctionOracle<T>,
    region: &BoxRegion<T>,
    kappa: T,
    lambda: T,
    n_points: usize,
    step: T,
    seed: u64,
    solver: InnerSolver<T>,
) -> Result<CoderivativeVerdict<T>> {
    let env = EnvelopeHandle::new(oracle, lambda, solver)?;
    let threshold = envelope_threshold(kappa, lambda);
    let results = parallel::par_map(n_points, |i| -> Result<EnvelopeWitness<T>> {
        let mut rng = parallel::rng_for(seed, 0xc0de, i as u64);
        let u = region.sample(&mut rng);
        envelope_witness(&env, &u, step, kappa)
    });
    let mut worst: Option<EnvelopeWitness<T>> = None;
    for r in results {
        let w = r?;
        if worst.as_ref().is_none_or(|b| w.quadratic < b.quadratic) {
            worst = Some(w);
        }
    }
    let tol = T::lit(2e-6);
    let min_eig = worst.as_ref().map_or(T::infinity(), |w| w.quadratic);
    let refuted = min_eig < threshold - tol;
    Ok(CoderivativeVerdict {
        refuted,
        witness: if refuted { worst } else { None },
        points: n_points,
        min_eigenvalue: min_eig,
        threshold,
        tolerance: tol,
    })
}

/// Residuals of the tilt rules between `φ` and `ψ = φ - κ/2‖·‖²`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SumRuleReport<T> {
    pub samples: usize,
    /// `max |d²φ(x,v)(w) - d²ψ(x, v - κx)(w) - κ‖w‖²|` over pairs where both are finite.
    pub d2_max_residual: T,
    pub d2_compared: usize,
    /// Pairs where the two sides differ in being finite, `+∞` or `-∞`.
    pub classification_mismatches: usize,
    /// Largest gap between matched graphical candidates after the `κw'` shift.
    pub graphical_max_gap: T,
    /// Largest residual of the combined second-order shift at smooth points.
    pub coderivative_max_residual: T,
    pub coderivative_compared: usize,
}

fn jacobian_t_w<T: Real>(oracle: &dyn FunctionOracle<T>, x: &[T], w: &[T], h: T) -> Option<Vec<T>> {
    let n = x.len();
    let grad = |y: &[T]| -> Option<Vec<T>> {
        match oracle.subdifferential(y).ok()? {
            crate::types::SubdiffSet::Finite(p) if p.len() == 1 => Some(p[0].clone()),
            _ => None,
        }
    };
    let mut z = vec![T::zero(); n];
    for j in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let col = linalg::scale(&linalg::sub(&grad(&xp)?, &grad(&xm)?), T::one() / (T::lit(2.0) * h));
        z[j] = linalg::dot(&col, w);
    }
    Some(z)
}

/// Compares estimates for `φ` and its tilt `ψ = φ - κ/2‖·‖²` at sampled pairs.
#[allow(clippy::too_many_arguments)]
pub fn sum_rule_residuals<T: Real>(
    oracle: Arc<dyn FunctionOracle<T>>,
    region: &BoxRegion<T>,
    kappa: T,
    lambda: T,
    samples: usize,
    g: &GridConfig<T>,
    seed: u64,
) -> Result<SumRuleReport<T>> {
    let pairs = sample_subgradient_pairs(oracle.as_ref(), region, lambda, samples, seed)?;
    sum_rule_residuals_at(oracle, &pairs, kappa, g, seed)
}

/// `sum_rule_residuals` at given pairs `(x, v)` with `v ∈ ∂φ(x)`.
pub fn sum_rule_residuals_at<T: Real>(
    oracle: Arc<dyn FunctionOracle<T>>,
    pairs: &[SubgradientPair<T>],
    kappa: T,
    g: &GridConfig<T>,
    seed: u64,
) -> Result<SumRuleReport<T>> {
    let n = oracle.dimension();
    let psi = Tilt::new(oracle.clone(), -kappa);
    let mut rep = SumRuleReport {
        samples: pairs.len(),
        d2_max_residual: T::zero(),
        d2_compared: 0,
        classification_mismatches: 0,
        graphical_max_gap: T::zero(),
        coderivative_max_residual: T::zero(),
        coderivative_compared: 0,
    };
    for (i, p) in pairs.iter().enumerate() {
        let mut rng = parallel::rng_for(seed, 0x5a, i as u64);
        let w: Vec<T> = linalg::random_unit(&mut rng, n);
        let (x, v) = (p.x.coords(), p.v.coords());
        let v_psi = linalg::axpy(v, -kappa, x);
        let a = second_subderivative(oracle.as_ref(), x, v, &w, g)?.value;
        let b = second_subderivative(&psi, x, &v_psi, &w, g)?.value;
        match (a, b) {
            (Extended::Finite(a), Extended::Finite(b)) => {
                rep.d2_compared += 1;
                rep.d2_max_residual = rep.d2_max_residual.max((a - b - kappa * linalg::norm_sq(&w)).abs());
            }
            (a, b) if a.class() != b.class() => rep.classification_mismatches += 1,
            _ => {}
        }
        if oracle.has_subdifferential() {
            let base_psi = SubgradientPair { x: p.x.clone(), v: crate::types::Point::new(v_psi.clone())?, residual: p.residual, draw: None };
            let pa = graphical_derivative_probe(oracle.as_ref(), &[], p, &w, g)?;
            let pb = graphical_derivative_probe(&psi, &[], &base_psi, &w, g)?;
            for (qa, qb) in pa.iter().zip(&pb) {
                if qa.level == qb.level && qa.path == qb.path {
                    let shifted = linalg::axpy(&qb.z, kappa, &qb.realized);
                    let gap = linalg::norm(&linalg::sub(&qa.z, &shifted)) / (T::one() + linalg::norm(&qa.z));
                    rep.graphical_max_gap = rep.graphical_max_gap.max(gap);
                }
            }
            let h = T::lit(1e-6);
            if let (Some(za), Some(zb)) = (jacobian_t_w(oracle.as_ref(), x, &w, h), jacobian_t_w(&psi, x, &w, h)) {
                rep.coderivative_compared += 1;
                let expect = linalg::axpy(&za, -kappa, &w);
                rep.coderivative_max_residual = rep.coderivative_max_residual.max(linalg::norm(&linalg::sub(&zb, &expect)));
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Point;
    use crate::zoo::get;

    fn d2(name: &str, x: f64, v: f64, w: f64) -> Extended<f64> {
        let e = get::<f64>(name).unwrap();
        second_subderivative(e.oracle.as_ref(), &[x], &[v], &[w], &GridConfig::default()).unwrap().value
    }

    #[test]
    fn delta2_unit_except_origin() {
        let e = get::<f64>("unit_except_origin").unwrap();
        let q = delta2(e.oracle.as_ref(), &[0.0], &[0.0], 0.1, &[1.0]).unwrap();
        assert!((q.finite().unwrap() - 200.0).abs() < 1e-9);
        let ind = get::<f64>("indicator_box").unwrap();
        assert!(matches!(delta2(ind.oracle.as_ref(), &[2.0], &[0.0], 0.1, &[1.0]), Err(Error::BasePointInfeasible)));
    }

    #[test]
    fn abs_second_subderivative_cases() {
        assert!(matches!(d2("abs", 0.0, 1.0, 1.0), Extended::Finite(v) if v.abs() < 1e-9));
        assert_eq!(d2("abs", 0.0, 1.0, -1.0), Extended::PosInf);
        assert_eq!(d2("abs", 0.0, 0.5, 1.0), Extended::PosInf);
        assert!(matches!(d2("abs", 0.0, 0.5, 0.0), Extended::Finite(v) if v == 0.0));
    }

    #[test]
    fn smooth_and_concave_cases() {
        assert!(matches!(d2("quadratic", 3.0, 3.0, 2.0), Extended::Finite(v) if (v - 4.0).abs() < 1e-6));
        assert_eq!(d2("neg_abs", 0.0, -1.0, -1.0), Extended::NegInf);
        assert_eq!(d2("neg_abs", 0.0, -1.0, 0.0), Extended::NegInf);
        assert!(matches!(d2("neg_abs", 0.0, -1.0, 1.0), Extended::Finite(v) if v.abs() < 1e-9));
        assert_eq!(d2("unit_except_origin", 0.0, 0.0, 1.0), Extended::PosInf);
    }

    #[test]
    fn grid_min_monotone_in_depth_and_samples() {
        let e = get::<f64>("abs_sq_minus_one").unwrap();
        let g1 = GridConfig { depth: 8, samples: 4, ..GridConfig::default() };
        let g2 = GridConfig { depth: 16, samples: 8, ..GridConfig::default() };
        let a = second_subderivative(e.oracle.as_ref(), &[0.9], &[-1.8], &[1.0], &g1).unwrap();
        let b = second_subderivative(e.oracle.as_ref(), &[0.9], &[-1.8], &[1.0], &g2).unwrap();
        assert!(b.grid_min <= a.grid_min);
    }

    #[test]
    fn graphical_probe_unit_except_origin() {
        let e = get::<f64>("unit_except_origin").unwrap();
        let g = GridConfig::default();
        let base = SubgradientPair { x: Point::scalar(0.0), v: Point::scalar(0.0), residual: 0.0, draw: None };
        let probes = graphical_derivative_probe(e.oracle.as_ref(), &[], &base, &[1.0], &g).unwrap();
        assert!(probes.iter().all(|p| p.z[0] == 0.0));
        let probes = graphical_derivative_probe(e.oracle.as_ref(), &[], &base, &[0.0], &g).unwrap();
        let zs: Vec<f64> = probes.iter().map(|p| p.z[0]).collect();
        assert!(zs.iter().any(|&z| z > 1e6) && zs.iter().any(|&z| z < -1e6));
    }

    #[test]
    fn psd_graphical_consistent_on_unit_except_origin_and_refutes_weakly_convex() {
        let g = GridConfig::default();
        let e = get::<f64>("unit_except_origin").unwrap();
        let r = psd_graphical_test(e.oracle.as_ref(), &e.default_box, 0.0, 1.0, 40, 2, &g, 7).unwrap();
        assert!(!r.refuted, "{r:?}");
        let e = get::<f64>("abs_sq_minus_one").unwrap();
        let r = psd_graphical_test(e.oracle.as_ref(), &e.default_box, 0.0, 0.25, 40, 2, &g, 7).unwrap();
        assert!(r.refuted);
        let e = get::<f64>("huber").unwrap();
        let r = psd_graphical_test(e.oracle.as_ref(), &e.default_box, 0.0, 0.5, 40, 2, &g, 7).unwrap();
        assert!(!r.refuted, "{r:?}");
    }

    #[test]
    fn envelope_route() {
        let e = get::<f64>("abs_sq_minus_one").unwrap();
        let r = coderivative_psd_via_envelope(e.oracle.as_ref(), &e.default_box, 0.0, 0.25, 30, 1e-4, 3, InnerSolver::default()).unwrap();
        assert!(r.refuted);
        let w = r.witness.unwrap();
        assert!(w.quadratic < 0.0);
        let e = get::<f64>("abs").unwrap();
        let r = coderivative_psd_via_envelope(e.oracle.as_ref(), &e.default_box, 0.0, 0.5, 30, 1e-4, 3, InnerSolver::default()).unwrap();
        assert!(!r.refuted);
    }
}
