//! Segment-inequality modulus estimates.

use serde::Serialize;

use crate::ext::ExtReal;
use crate::linalg;
use crate::parallel;
use crate::scalar::Real;
use crate::types::{BoxRegion, FunctionOracle};

const STREAM_TRIPLES: u64 = 0x7219;
const ZOOM_STEPS: usize = 48;
const ZOOM_SEEDS: usize = 8;

/// `x`, `y`, `λ` and the computed `s(x, y, λ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentTriple<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub lambda: T,
    /// `None` means `-∞` (midpoint outside the domain).
    pub s: Option<T>,
}

impl<T: Real> SegmentTriple<T> {
    pub fn value(&self) -> T {
        self.s.unwrap_or(T::neg_infinity())
    }
}

/// `s(x, y, λ) = 2[(1-λ)φ(x) + λφ(y) - φ((1-λ)x + λy)] / (λ(1-λ)‖x-y‖²)` with its rounding bound.
///
/// `None` when `x = y` or an endpoint is outside the domain.
pub fn segment_s<T: Real>(oracle: &dyn FunctionOracle<T>, x: &[T], y: &[T], lambda: T) -> Option<(Option<T>, T)> {
    let d2 = linalg::norm_sq(&linalg::sub(x, y));
    if d2 == T::zero() {
        return None;
    }
    let fx = oracle.value(x).finite()?;
    let fy = oracle.value(y).finite()?;
    let one_m = T::one() - lambda;
    let m: Vec<T> = x.iter().zip(y).map(|(&a, &b)| one_m * a + lambda * b).collect();
    let fm = match oracle.value(&m) {
        ExtReal::Finite(v) => v,
        ExtReal::PosInf => return Some((None, T::zero())),
    };
    let den = lambda * one_m * d2;
    let s = T::lit(2.0) * (one_m * fx + lambda * fy - fm) / den;
    let err = T::lit(4.0) * T::epsilon() * (fx.abs() + fy.abs() + fm.abs()) / den;
    Some((Some(s), err))
}

fn reliable<T: Real>(s: Option<T>, err: T) -> bool {
    match s {
        None => true,
        Some(s) => s.is_finite() && err <= T::lit(1e-9) * T::one().max(s.abs()),
    }
}

fn triple<T: Real>(oracle: &dyn FunctionOracle<T>, x: Vec<T>, y: Vec<T>, lambda: T) -> Option<SegmentTriple<T>> {
    let (s, err) = segment_s(oracle, &x, &y, lambda)?;
    reliable(s, err).then_some(SegmentTriple { x, y, lambda, s })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModulusVerdict<T> {
    ConsistentConvex,
    WeaklyConvex { rho: T },
    NotWeaklyConvex,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulusEstimate<T> {
    /// Smallest reliable `s` found; `-∞` when some midpoint left the domain.
    pub s_hat: T,
    pub argmin: Option<SegmentTriple<T>>,
    /// Some refinement sequence decreased geometrically.
    pub diverged: bool,
    /// Minimum along the refinement sequence that reached `s_hat`.
    pub refinement: Vec<T>,
    pub samples: usize,
    pub seed: u64,
    pub verdict: ModulusVerdict<T>,
}

/// Repeatedly keeps the most negative of the two halves and the middle half of `[a, b]`.
fn zoom<T: Real>(oracle: &dyn FunctionOracle<T>, a: Vec<T>, b: Vec<T>) -> (Vec<SegmentTriple<T>>, usize) {
    let half = T::lit(0.5);
    let (mut a, mut b) = (a, b);
    let mut out = Vec::new();
    let mut evals = 0;
    for _ in 0..ZOOM_STEPS {
        let d = linalg::sub(&b, &a);
        let m = linalg::axpy(&a, half, &d);
        let q1 = linalg::axpy(&a, T::lit(0.25), &d);
        let q3 = linalg::axpy(&a, T::lit(0.75), &d);
        let cands = [(a.clone(), m.clone()), (m, b.clone()), (q1, q3)];
        evals += 3;
        let best = cands
            .into_iter()
            .filter_map(|(x, y)| triple(oracle, x, y, half))
            .min_by(|p, q| p.value().partial_cmp(&q.value()).unwrap_or(std::cmp::Ordering::Equal));
        match best {
            Some(t) => {
                a = t.x.clone();
                b = t.y.clone();
                let stop = t.s.is_none();
                out.push(t);
                if stop {
                    break;
                }
            }
            None => break,
        }
    }
    (out, evals)
}

fn geometric_decrease<T: Real>(seq: &[SegmentTriple<T>]) -> bool {
    let vals: Vec<T> = seq.iter().map(|t| t.value()).collect();
    if vals.iter().any(|v| *v == T::neg_infinity()) {
        return true;
    }
    if vals.len() < 5 {
        return false;
    }
    let tail = &vals[vals.len() - 5..];
    let growth = T::lit(std::f64::consts::SQRT_2);
    tail[0] < T::zero() && tail.windows(2).all(|w| w[1] <= growth * w[0])
}

/// Estimates the tightest `s` over random triples, then refines around the most negative ones and
/// along axis segments through lattice centers.
pub fn segment_modulus<T: Real>(
    oracle: &dyn FunctionOracle<T>,
    region: &BoxRegion<T>,
    n_triples: usize,
    seed: u64,
    tol: T,
    rho_max: T,
) -> ModulusEstimate<T> {
    let random: Vec<Option<SegmentTriple<T>>> = parallel::par_map(n_triples, |i| {
        let mut rng = parallel::rng_for(seed, STREAM_TRIPLES, i as u64);
        let x = region.sample(&mut rng);
        let y = region.sample(&mut rng);
        let lambda = T::lit(0.02 + 0.96 * rand::Rng::random::<f64>(&mut rng));
        triple(oracle, x, y, lambda)
    });
    let mut found: Vec<SegmentTriple<T>> = random.into_iter().flatten().collect();
    found.sort_by(|p, q| p.value().partial_cmp(&q.value()).unwrap_or(std::cmp::Ordering::Equal));

    let n = region.dim();
    let mut starts: Vec<(Vec<T>, Vec<T>)> = found.iter().take(ZOOM_SEEDS).map(|t| (t.x.clone(), t.y.clone())).collect();
    let level = if n == 1 { 4 } else { 1 };
    let h0 = region.diameter() * T::lit(0.25);
    for c in region.lattice(level, 64) {
        for i in 0..n {
            let mut a = c.clone();
            let mut b = c.clone();
            a[i] -= h0;
            b[i] += h0;
            let a = linalg::clamp_to(&a, region.lo(), region.hi());
            let b = linalg::clamp_to(&b, region.lo(), region.hi());
            starts.push((a, b));
        }
    }
    let zooms = parallel::par_map(starts.len(), |i| zoom(oracle, starts[i].0.clone(), starts[i].1.clone()));

    let mut samples = n_triples;
    let mut diverged = false;
    let mut best = found.first().cloned();
    let mut refinement = Vec::new();
    for (seq, evals) in zooms {
        samples += evals;
        diverged |= geometric_decrease(&seq);
        if let Some(m) = seq.iter().min_by(|p, q| p.value().partial_cmp(&q.value()).unwrap_or(std::cmp::Ordering::Equal)) {
            if best.as_ref().is_none_or(|b| m.value() < b.value()) {
                best = Some(m.clone());
                refinement = seq.iter().map(|t| t.value()).collect();
            }
        }
    }
    let s_hat = best.as_ref().map_or(T::infinity(), |t| t.value());
    let verdict = if s_hat < -rho_max {
        ModulusVerdict::NotWeaklyConvex
    } else if s_hat >= -tol {
        ModulusVerdict::ConsistentConvex
    } else {
        ModulusVerdict::WeaklyConvex { rho: -s_hat }
    };
    ModulusEstimate { s_hat, argmin: best, diverged, refinement, samples, seed, verdict }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::get;

    fn est(name: &str) -> ModulusEstimate<f64> {
        let e = get::<f64>(name).unwrap();
        segment_modulus(e.oracle.as_ref(), &e.default_box, 2000, 1, 1e-6, 1e4)
    }

    #[test]
    fn quadratic_equality_case() {
        let m = est("neg_half_square");
        assert!((m.s_hat + 1.0).abs() < 1e-8, "{}", m.s_hat);
        assert_eq!(m.verdict, ModulusVerdict::WeaklyConvex { rho: -m.s_hat });
    }

    #[test]
    fn convex_and_divergent_cases() {
        assert_eq!(est("abs").verdict, ModulusVerdict::ConsistentConvex);
        let m = est("unit_except_origin");
        assert!(m.diverged && m.s_hat < -1e6);
        assert_eq!(m.verdict, ModulusVerdict::NotWeaklyConvex);
        let m = est("neg_abs");
        assert!(m.diverged && m.verdict == ModulusVerdict::NotWeaklyConvex);
    }

    #[test]
    fn unit_except_origin_triple() {
        let e = get::<f64>("unit_except_origin").unwrap();
        let (s, _) = segment_s(e.oracle.as_ref(), &[0.01], &[0.0], 0.5).unwrap();
        assert!((s.unwrap() + 40000.0).abs() < 1e-6);
    }

    #[test]
    fn argmin_replays_exactly() {
        let e = get::<f64>("abs_sq_minus_one").unwrap();
        let m = segment_modulus(e.oracle.as_ref(), &e.default_box, 2000, 5, 1e-6, 1e4);
        let t = m.argmin.unwrap();
        let (s, _) = segment_s(e.oracle.as_ref(), &t.x, &t.y, t.lambda).unwrap();
        assert_eq!(s.unwrap(), m.s_hat);
        assert!((m.s_hat + 2.0).abs() < 0.1);
    }
}
