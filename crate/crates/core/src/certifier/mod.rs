//! Convexity and strong-convexity certification with replayable witnesses.

mod modulus;

pub use modulus::{segment_modulus, segment_s, ModulusEstimate, ModulusVerdict, SegmentTriple};

use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::BigRational;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::estimators::{
    convergent_tail, coderivative_psd_via_envelope, envelope_threshold, envelope_witness, pair_tolerance,
    psd_graphical_test, second_subderivative_shifted, test_directions, EnvelopeWitness, GridConfig, GridPoint,
    ProbeResult,
};
use crate::exact::{convexity_decide_exact, segment_s_exact, segment_witness, verify_theorem_equivalences};
use crate::ext::Extended;
use crate::linalg;
use crate::moreau::{EnvelopeHandle, InnerSolver};
use crate::parallel;
use crate::scalar::{format_rational, ExactScalar, Real};
use crate::types::{effective_lambda, sample_subgradient_pairs, BoxRegion, FunctionOracle, SubgradientPair};
use crate::zoo::Tilt;

const STREAM_MOREAU: u64 = 0x30e;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Segment,
    Graphical,
    Subderivative,
    Coderivative,
    Moreau,
    Exact1d,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::Segment, Method::Graphical, Method::Subderivative, Method::Coderivative, Method::Moreau, Method::Exact1d];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Segment => "segment",
            Method::Graphical => "graphical",
            Method::Subderivative => "subderivative",
            Method::Coderivative => "coderivative",
            Method::Moreau => "moreau",
            Method::Exact1d => "exact1d",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Proved,
    Refuted,
    Consistent,
    Inconclusive,
    GateFailed,
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Proved | Verdict::Consistent => 0,
            Verdict::Refuted => 1,
            Verdict::Inconclusive | Verdict::GateFailed => 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CertifyConfig<T> {
    pub region: BoxRegion<T>,
    /// Routes to run besides the segment gate, which always runs.
    pub methods: Vec<Method>,
    /// Subgradient pairs, envelope points and gradient pairs per route.
    pub samples: usize,
    /// Random directions added to `±e_i`.
    pub directions: usize,
    pub triples: usize,
    pub seed: u64,
    pub tol: T,
    pub lambda: T,
    pub rho_max: T,
    pub fd_step: T,
    pub grid: GridConfig<T>,
    pub solver: InnerSolver<T>,
}

impl<T: Real> CertifyConfig<T> {
    pub fn new(region: BoxRegion<T>) -> Self {
        CertifyConfig {
            region,
            methods: Method::ALL.to_vec(),
            samples: 48,
            directions: 4,
            triples: 10_000,
            seed: 0,
            tol: T::lit(1e-6),
            lambda: T::lit(0.5),
            rho_max: T::lit(1e4),
            fd_step: T::lit(1e-4),
            grid: GridConfig::default(),
            solver: InnerSolver::default(),
        }
    }
}

/// Data from which a violated inequality is recomputed. Each variant reports a value that
/// must not fall below `bound` under the claim being tested.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness<T> {
    /// `s(x, y, λ) < bound`.
    Segment { triple: SegmentTriple<T>, bound: T },
    /// `⟨z, w'⟩ < bound` for `z = (v' - v)/t`, `v' ∈ ∂φ(x + t w')`.
    Graphical { probe: ProbeResult<T>, bound: T },
    /// `Δ²_τφ(x, v)(u) - κ‖u‖² < bound`.
    Subderivative { x: Vec<T>, v: Vec<T>, w: Vec<T>, kappa: T, point: GridPoint<T>, bound: T },
    /// `⟨H w, w⟩ < bound` for the finite-difference envelope Hessian `H`.
    Envelope { data: EnvelopeWitness<T>, bound: T },
    /// `⟨∇e_λφ(x) - ∇e_λφ(y), x - y⟩ < bound`.
    MoreauPair { x: Vec<T>, y: Vec<T>, lambda: T, grad_x: Vec<T>, grad_y: Vec<T>, inner: T, bound: T },
    /// `⟨x - x', v - v'⟩ < bound` for `v ∈ ∂φ(x)`, `v' ∈ ∂φ(x')`.
    Monotonicity { x: Vec<T>, v: Vec<T>, x2: Vec<T>, v2: Vec<T>, inner: T, bound: T },
    /// Exact rational `s(x, y, λ) < bound` on the piecewise form; `s = "-inf"` when the midpoint leaves the domain.
    Exact { x: String, y: String, lambda: String, s: String, bound: String, s_approx: T },
}

impl<T: Real> Witness<T> {
    /// The reported value and the bound it violates.
    pub fn reported(&self) -> (T, T) {
        match self {
            Witness::Segment { triple, bound } => (triple.value(), *bound),
            Witness::Graphical { probe, bound } => (probe.pairing, *bound),
            Witness::Subderivative { point, bound, .. } => (point.value.to_float(), *bound),
            Witness::Envelope { data, bound } => (data.quadratic, *bound),
            Witness::MoreauPair { inner, bound, .. } | Witness::Monotonicity { inner, bound, .. } => (*inner, *bound),
            Witness::Exact { s, bound, s_approx, .. } => {
                let b = crate::scalar::parse_rational(bound).map_or(T::nan(), |b| T::lit(b.approx_f64()));
                let v = if s == "-inf" { T::neg_infinity() } else { *s_approx };
                (v, b)
            }
        }
    }
}

/// Result of recomputing a witness from its recorded data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Replay<T> {
    pub reported: T,
    pub recomputed: T,
    /// Recomputed value equals the reported one bit for bit (exactly for rational witnesses).
    pub exact_match: bool,
    /// Recomputed value is below the bound.
    pub violates: bool,
    /// Extra membership checks (e.g. `v' ∈ ∂φ(x')`) passed.
    pub memberships_ok: bool,
}

fn replay_value<T: Real>(reported: T, recomputed: T, bound: T, memberships_ok: bool) -> Replay<T> {
    Replay {
        reported,
        recomputed,
        exact_match: reported == recomputed || (reported.is_infinite() && reported == recomputed),
        violates: recomputed < bound,
        memberships_ok,
    }
}

/// Recomputes the violated inequality recorded in `w`.
pub fn replay_witness<T: Real>(oracle: &dyn FunctionOracle<T>, w: &Witness<T>, solver: &InnerSolver<T>) -> Result<Replay<T>> {
    match w {
        Witness::Segment { triple, bound } => {
            let (s, _) = segment_s(oracle, &triple.x, &triple.y, triple.lambda)
                .ok_or_else(|| Error::InvalidParameter("segment witness endpoints infeasible".into()))?;
            Ok(replay_value(triple.value(), s.unwrap_or(T::neg_infinity()), *bound, true))
        }
        Witness::Graphical { probe, bound } => {
            let z = linalg::scale(&linalg::sub(&probe.v_prime, &probe.v), T::one() / probe.step);
            let pairing = linalg::dot(&z, &probe.realized);
            let xp = linalg::axpy(&probe.x, probe.step, &probe.realized);
            let member = if oracle.has_subdifferential() && probe.source == crate::estimators::ProbeSource::Structured {
                oracle.subdifferential(&xp)?.contains(&probe.v_prime, T::lit(1e-9))
            } else {
                true
            };
            Ok(replay_value(probe.pairing, pairing, *bound, member && z == probe.z))
        }
        Witness::Subderivative { x, v, kappa, point, bound, .. } => {
            let q = crate::estimators::delta2(oracle, x, v, point.tau, &point.u)?;
            let q = q.map(|q| q - *kappa * linalg::norm_sq(&point.u)).to_float();
            Ok(replay_value(point.value.to_float(), q, *bound, true))
        }
        Witness::Envelope { data, bound } => {
            let kappa = recover_kappa(data.threshold, data.lambda);
            let env = EnvelopeHandle::new(oracle, data.lambda, solver.clone())?;
            let again = envelope_witness(&env, &data.point, data.step, kappa)?;
            let q = linalg::dot(&linalg::mat_vec(&again.hessian, &data.direction), &data.direction);
            Ok(replay_value(data.quadratic, q, *bound, again.hessian == data.hessian))
        }
        Witness::MoreauPair { x, y, lambda, inner, bound, .. } => {
            let env = EnvelopeHandle::new(oracle, *lambda, solver.clone())?;
            let gx = env.envelope_gradient(x)?;
            let gy = env.envelope_gradient(y)?;
            let val = linalg::dot(&linalg::sub(&gx, &gy), &linalg::sub(x, y));
            Ok(replay_value(*inner, val, *bound, true))
        }
        Witness::Monotonicity { x, v, x2, v2, inner, bound } => {
            let val = linalg::dot(&linalg::sub(x, x2), &linalg::sub(v, v2));
            let member = if oracle.has_subdifferential() {
                oracle.subdifferential(x)?.contains(v, T::lit(1e-9)) && oracle.subdifferential(x2)?.contains(v2, T::lit(1e-9))
            } else {
                true
            };
            Ok(replay_value(*inner, val, *bound, member))
        }
        Witness::Exact { x, y, lambda, s, bound, s_approx } => {
            let f = oracle.piecewise_form().ok_or(Error::CapabilityMissing("piecewise form"))?;
            let parse = |t: &str| {
                crate::scalar::parse_rational(t).ok_or_else(|| Error::InvalidParameter(format!("not a rational: {t}")))
            };
            let (xr, yr, lr, br) = (parse(x)?, parse(y)?, parse(lambda)?, parse(bound)?);
            let again = segment_s_exact(&f, &xr, &yr, &lr)
                .ok_or_else(|| Error::InvalidParameter("exact witness endpoints infeasible".into()))?;
            let (text, violates) = match &again {
                Extended::NegInf => ("-inf".to_string(), true),
                Extended::Finite(v) => (format_rational(v), v.lt_exact(&br)),
                Extended::PosInf => ("+inf".to_string(), false),
            };
            let recomputed = match &again {
                Extended::Finite(v) => T::lit(v.approx_f64()),
                Extended::NegInf => T::neg_infinity(),
                Extended::PosInf => T::infinity(),
            };
            let reported = if s == "-inf" { T::neg_infinity() } else { *s_approx };
            Ok(Replay { reported, recomputed, exact_match: &text == s, violates, memberships_ok: true })
        }
    }
}

fn recover_kappa<T: Real>(threshold: T, lambda: T) -> T {
    // κ_λ = κ/(1 + λκ)  ⇔  κ = κ_λ/(1 - λκ_λ)
    threshold / (T::one() - lambda * threshold)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodEntry<T> {
    pub method: Method,
    pub verdict: Verdict,
    pub witness: Option<Witness<T>>,
    pub replay: Option<Replay<T>>,
    pub probe_count: usize,
    pub tolerance: T,
    pub params: BTreeMap<String, Value>,
    pub detail: String,
}

impl<T: Real> MethodEntry<T> {
    fn new(method: Method, verdict: Verdict, probe_count: usize, tolerance: T, detail: impl Into<String>) -> Self {
        MethodEntry {
            method,
            verdict,
            witness: None,
            replay: None,
            probe_count,
            tolerance,
            params: BTreeMap::new(),
            detail: detail.into(),
        }
    }

    fn param(mut self, key: &str, v: Value) -> Self {
        self.params.insert(key.to_string(), v);
        self
    }

    fn inconclusive(method: Method, tolerance: T, err: &Error) -> Self {
        MethodEntry::new(method, Verdict::Inconclusive, 0, tolerance, err.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Overall {
    pub verdict: Verdict,
    pub exit_code: i32,
    pub gate_passed: bool,
    pub summary: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TiltCheck {
    /// Overall verdict of `certify_convexity` on `φ - κ/2‖·‖²`.
    pub tilted_verdict: Verdict,
    pub agrees: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport<T> {
    pub oracle: String,
    pub dimension: usize,
    /// Strong-convexity threshold; zero for plain convexity.
    pub kappa: T,
    pub seed: u64,
    pub gate: ModulusEstimate<T>,
    pub methods: Vec<MethodEntry<T>>,
    pub overall: Overall,
    pub tilt_check: Option<TiltCheck>,
}

fn f<T: Real>(x: T) -> Value {
    json!(x.as_f64())
}

fn tol_psd<T: Real>(w: &[T]) -> T {
    T::lit(1e-6) * (T::one() + linalg::norm_sq(w))
}

/// Attaches the witness and its replay; a witness that fails to replay downgrades the entry.
fn with_witness<T: Real>(
    mut entry: MethodEntry<T>,
    oracle: &dyn FunctionOracle<T>,
    witness: Witness<T>,
    solver: &InnerSolver<T>,
) -> MethodEntry<T> {
    match replay_witness(oracle, &witness, solver) {
        Ok(r) => {
            if !(r.violates && r.memberships_ok) {
                entry.verdict = Verdict::Inconclusive;
                entry.detail = format!("{}; witness did not replay", entry.detail);
            }
            entry.replay = Some(r);
        }
        Err(e) => {
            entry.verdict = Verdict::Inconclusive;
            entry.detail = format!("{}; witness replay failed: {e}", entry.detail);
        }
    }
    entry.witness = Some(witness);
    entry
}

fn gate_entry<T: Real>(oracle: &dyn FunctionOracle<T>, m: &ModulusEstimate<T>, kappa: T, cfg: &CertifyConfig<T>) -> MethodEntry<T> {
    let bound = kappa - cfg.tol;
    let base = |v: Verdict, d: String| {
        MethodEntry::new(Method::Segment, v, m.samples, cfg.tol, d)
            .param("rho_max", f(cfg.rho_max))
            .param("triples", json!(cfg.triples))
            .param("s_hat", f(m.s_hat))
            .param("diverged", json!(m.diverged))
    };
    let witness = m.argmin.clone().map(|t| Witness::Segment { triple: t, bound });
    match (&m.verdict, witness) {
        (ModulusVerdict::NotWeaklyConvex, Some(w)) => with_witness(
            base(Verdict::GateFailed, format!("not weakly convex evidence: s_hat {} below -rho_max", m.s_hat)),
            oracle,
            w,
            &cfg.solver,
        )
        .force(Verdict::GateFailed),
        (_, Some(w)) if m.s_hat < bound => {
            with_witness(base(Verdict::Refuted, format!("segment inequality fails with s = {}", m.s_hat)), oracle, w, &cfg.solver)
        }
        (_, _) => base(Verdict::Consistent, format!("s_hat = {}", m.s_hat)),
    }
}

impl<T: Real> MethodEntry<T> {
    fn force(mut self, v: Verdict) -> Self {
        self.verdict = v;
        self
    }
}

fn graphical_route<T: Real>(oracle: &dyn FunctionOracle<T>, kappa: T, lambda: T, cfg: &CertifyConfig<T>) -> MethodEntry<T> {
    let r = match psd_graphical_test(oracle, &cfg.region, kappa, lambda, cfg.samples, cfg.directions, &cfg.grid, cfg.seed) {
        Ok(r) => r,
        Err(e) => return MethodEntry::inconclusive(Method::Graphical, T::lit(1e-6), &e),
    };
    let entry = MethodEntry::new(
        Method::Graphical,
        Verdict::Consistent,
        r.probes,
        r.tolerance,
        format!("{} convergent candidates checked", r.checked),
    )
    .param("checked", json!(r.checked))
    .param("lambda", f(lambda));
    if r.checked == 0 {
        return entry.force(Verdict::Inconclusive);
    }
    match r.witness {
        Some(p) if r.refuted => {
            let bound = kappa * linalg::norm_sq(&p.realized) - tol_psd(&p.realized);
            let entry = MethodEntry { verdict: Verdict::Refuted, detail: format!("pairing {} below {}", p.pairing, bound), ..entry };
            with_witness(entry, oracle, Witness::Graphical { probe: p, bound }, &cfg.solver)
        }
        _ => entry.param("min_margin", f(r.min_margin)),
    }
}

fn sampled_pairs<T: Real>(oracle: &dyn FunctionOracle<T>, lambda: T, cfg: &CertifyConfig<T>) -> Result<Vec<SubgradientPair<T>>> {
    let tol = pair_tolerance::<T>(oracle.dimension());
    Ok(sample_subgradient_pairs(oracle, &cfg.region, lambda, cfg.samples, cfg.seed)?
        .into_iter()
        .filter(|p| p.residual <= tol)
        .collect())
}

type D2Hit<T> = (T, Witness<T>);

fn subderivative_route<T: Real>(oracle: &dyn FunctionOracle<T>, kappa: T, lambda: T, cfg: &CertifyConfig<T>) -> MethodEntry<T> {
    let pairs = match sampled_pairs(oracle, lambda, cfg) {
        Ok(p) => p,
        Err(e) => return MethodEntry::inconclusive(Method::Subderivative, T::lit(1e-6), &e),
    };
    let dirs = test_directions::<T>(oracle.dimension(), cfg.directions, cfg.seed);
    let results = parallel::par_map(pairs.len(), |i| -> Result<Option<D2Hit<T>>> {
        let (x, v) = (pairs[i].x.coords(), pairs[i].v.coords());
        let mut worst: Option<D2Hit<T>> = None;
        for w in &dirs {
            let est = second_subderivative_shifted(oracle, x, v, w, &cfg.grid, kappa)?;
            let bound = -tol_psd(w);
            let margin = match est.value {
                Extended::NegInf => T::neg_infinity(),
                Extended::Finite(q) => q - bound,
                Extended::PosInf => T::infinity(),
            };
            if margin < T::zero() && worst.as_ref().is_none_or(|(m, _)| margin < *m) {
                let wit = Witness::Subderivative { x: x.to_vec(), v: v.to_vec(), w: w.clone(), kappa, point: est.argmin, bound };
                worst = Some((margin, wit));
            }
        }
        Ok(worst)
    });
    let mut worst: Option<D2Hit<T>> = None;
    for r in results {
        match r {
            Ok(Some((m, w))) if worst.as_ref().is_none_or(|(b, _)| m < *b) => worst = Some((m, w)),
            Ok(_) => {}
            Err(e) => return MethodEntry::inconclusive(Method::Subderivative, T::lit(1e-6), &e),
        }
    }
    let count = pairs.len() * dirs.len();
    let entry = MethodEntry::new(Method::Subderivative, Verdict::Consistent, count, T::lit(1e-6), format!("{count} (pair, direction) estimates"))
        .param("lambda", f(lambda));
    if pairs.is_empty() {
        return entry.force(Verdict::Inconclusive);
    }
    match worst {
        Some((_, w)) => {
            let entry = MethodEntry { verdict: Verdict::Refuted, detail: "second subderivative below threshold".into(), ..entry };
            with_witness(entry, oracle, w, &cfg.solver)
        }
        None => entry,
    }
}

fn coderivative_route<T: Real>(oracle: &dyn FunctionOracle<T>, kappa: T, lambda: T, cfg: &CertifyConfig<T>) -> MethodEntry<T> {
    let solver = InnerSolver { seed: cfg.seed, ..cfg.solver.clone() };
    let r = match coderivative_psd_via_envelope(oracle, &cfg.region, kappa, lambda, cfg.samples, cfg.fd_step, cfg.seed, solver) {
        Ok(r) => r,
        Err(e) => return MethodEntry::inconclusive(Method::Coderivative, T::lit(2e-6), &e),
    };
    let entry = MethodEntry::new(
        Method::Coderivative,
        Verdict::Consistent,
        r.points,
        r.tolerance,
        format!("smallest envelope curvature {} against {}", r.min_eigenvalue, r.threshold),
    )
    .param("lambda", f(lambda))
    .param("threshold", f(r.threshold))
    .param("step", f(cfg.fd_step));
    match r.witness {
        Some(data) if r.refuted => {
            let bound = r.threshold - r.tolerance;
            let entry = MethodEntry { verdict: Verdict::Refuted, ..entry };
            with_witness(entry, oracle, Witness::Envelope { data, bound }, &cfg.solver)
        }
        _ => entry,
    }
}

fn moreau_route<T: Real>(oracle: &dyn FunctionOracle<T>, kappa: T, lambda: T, cfg: &CertifyConfig<T>) -> MethodEntry<T> {
    let env = match EnvelopeHandle::new(oracle, lambda, cfg.solver.clone()) {
        Ok(e) => e,
        Err(e) => return MethodEntry::inconclusive(Method::Moreau, cfg.tol, &e),
    };
    let kl = envelope_threshold(kappa, lambda);
    let results = parallel::par_map(cfg.samples, |i| -> Result<(T, Witness<T>)> {
        let mut rng = parallel::rng_for(cfg.seed, STREAM_MOREAU, i as u64);
        let x = cfg.region.sample(&mut rng);
        let y = cfg.region.sample(&mut rng);
        let gx = env.envelope_gradient(&x)?;
        let gy = env.envelope_gradient(&y)?;
        let d = linalg::sub(&x, &y);
        let inner = linalg::dot(&linalg::sub(&gx, &gy), &d);
        let bound = kl * linalg::norm_sq(&d) - cfg.tol * (T::one() + linalg::norm_sq(&d));
        Ok((inner - bound, Witness::MoreauPair { x, y, lambda, grad_x: gx, grad_y: gy, inner, bound }))
    });
    let mut worst: Option<(T, Witness<T>)> = None;
    for r in results {
        match r {
            Ok((m, w)) => {
                if worst.as_ref().is_none_or(|(b, _)| m < *b) {
                    worst = Some((m, w));
                }
            }
            Err(e) => return MethodEntry::inconclusive(Method::Moreau, cfg.tol, &e),
        }
    }
    let entry = MethodEntry::new(Method::Moreau, Verdict::Consistent, cfg.samples, cfg.tol, "envelope gradient monotonicity")
        .param("lambda", f(lambda))
        .param("threshold", f(kl));
    match worst {
        Some((m, w)) if m < T::zero() => {
            let entry = MethodEntry { verdict: Verdict::Refuted, detail: format!("monotonicity margin {m}"), ..entry };
            with_witness(entry, oracle, w, &cfg.solver)
        }
        Some((m, _)) => entry.param("min_margin", f(m)),
        None => entry.force(Verdict::Inconclusive),
    }
}

fn exact_route<T: Real>(oracle: &dyn FunctionOracle<T>, kappa: T, cfg: &CertifyConfig<T>) -> MethodEntry<T> {
    let Some(form) = oracle.piecewise_form() else {
        return MethodEntry::new(Method::Exact1d, Verdict::Inconclusive, 0, T::zero(), "no exact piecewise form");
    };
    let Some(k) = BigRational::from_f64_exact(kappa.as_f64()) else {
        return MethodEntry::new(Method::Exact1d, Verdict::Inconclusive, 0, T::zero(), "kappa not representable");
    };
    let tilted = form.tilt(&-k.clone());
    let verdict = convexity_decide_exact(&tilted);
    let eq = verify_theorem_equivalences(&tilted);
    let entry = MethodEntry::new(Method::Exact1d, Verdict::Proved, eq.tested, T::zero(), verdict.label())
        .param("gate_passed", json!(eq.gate_passed))
        .param("conditions", json!(eq.conditions))
        .param("equivalences_hold", json!(eq.equivalences_hold))
        .param("sharp_modulus", json!(convexity_decide_exact(&form).sharp_modulus().map(|s| format_rational(&s))));
    if verdict.is_convex() {
        return entry;
    }
    match segment_witness(&form, &k) {
        Some(t) => {
            let (s, s_approx) = match &t.s {
                Extended::Finite(v) => (format_rational(v), T::lit(v.approx_f64())),
                _ => ("-inf".to_string(), T::neg_infinity()),
            };
            let w = Witness::Exact {
                x: format_rational(&t.x),
                y: format_rational(&t.y),
                lambda: format_rational(&t.lambda),
                s,
                bound: format_rational(&k),
                s_approx,
            };
            with_witness(entry.force(Verdict::Refuted), oracle, w, &cfg.solver)
        }
        None => entry.force(Verdict::Inconclusive),
    }
}

fn run<T: Real>(oracle: &dyn FunctionOracle<T>, kappa: T, cfg: &CertifyConfig<T>) -> Result<CertificateReport<T>> {
    cfg.grid.validate()?;
    if cfg.region.dim() != oracle.dimension() {
        return Err(Error::DimensionMismatch { expected: oracle.dimension(), found: cfg.region.dim() });
    }
    let gate = segment_modulus(oracle, &cfg.region, cfg.triples, cfg.seed, cfg.tol, cfg.rho_max);
    let gate_passed = gate.verdict != ModulusVerdict::NotWeaklyConvex;
    let mut lambda = effective_lambda(cfg.lambda, oracle.truth());
    if let ModulusVerdict::WeaklyConvex { rho } = gate.verdict {
        lambda = lambda.min(T::lit(0.25) / rho);
    }
    let mut methods = vec![gate_entry(oracle, &gate, kappa, cfg)];
    for m in Method::ALL.iter().skip(1).filter(|m| cfg.methods.contains(m)) {
        methods.push(match m {
            Method::Graphical => graphical_route(oracle, kappa, lambda, cfg),
            Method::Subderivative => subderivative_route(oracle, kappa, lambda, cfg),
            Method::Coderivative => coderivative_route(oracle, kappa, lambda, cfg),
            Method::Moreau => moreau_route(oracle, kappa, lambda, cfg),
            Method::Exact1d => exact_route(oracle, kappa, cfg),
            Method::Segment => unreachable!(),
        });
    }
    let claim = if kappa > T::zero() { format!("{kappa}-strongly convex") } else { "convex".to_string() };
    let exact = methods.iter().find(|e| e.method == Method::Exact1d && matches!(e.verdict, Verdict::Proved | Verdict::Refuted));
    let (verdict, summary) = if let Some(e) = exact {
        let s = if e.verdict == Verdict::Proved { format!("proved {claim} (exact)") } else { format!("not {claim} (exact witness)") };
        (e.verdict, s)
    } else if !gate_passed {
        let witnessed = methods[0].witness.is_some() && methods[0].replay.as_ref().is_some_and(|r| r.violates);
        if witnessed {
            (Verdict::Refuted, format!("not {claim}: gate failed (not weakly convex evidence), segment witness s = {}", gate.s_hat))
        } else {
            (Verdict::GateFailed, "gate failed: not weakly convex evidence, theorems inapplicable".to_string())
        }
    } else if let Some(e) = methods.iter().find(|e| e.verdict == Verdict::Refuted) {
        (Verdict::Refuted, format!("not {claim}: {} route witness", e.method.name()))
    } else if methods.iter().any(|e| e.verdict == Verdict::Consistent) {
        (Verdict::Consistent, format!("consistent with {claim}"))
    } else {
        (Verdict::Inconclusive, "no route reached a verdict".to_string())
    };
    Ok(CertificateReport {
        oracle: oracle.name(),
        dimension: oracle.dimension(),
        kappa,
        seed: cfg.seed,
        gate,
        methods,
        overall: Overall { verdict, exit_code: verdict.exit_code(), gate_passed, summary },
        tilt_check: None,
    })
}

/// Runs the segment gate and then the graphical, subderivative, coderivative, Moreau and
/// exact routes selected in `cfg`.
pub fn certify_convexity<T: Real>(oracle: &dyn FunctionOracle<T>, cfg: &CertifyConfig<T>) -> Result<CertificateReport<T>> {
    run(oracle, T::zero(), cfg)
}

/// Same pipeline with thresholds `κ‖w‖²` (and `κ/(1 + λκ)` for envelopes), cross-checked
/// against `certify_convexity` on `φ - κ/2‖·‖²`.
pub fn certify_strong<T: Real>(oracle: Arc<dyn FunctionOracle<T>>, kappa: T, cfg: &CertifyConfig<T>) -> Result<CertificateReport<T>> {
    if !(kappa > T::zero()) {
        return Err(Error::InvalidParameter("kappa must be positive".into()));
    }
    let mut report = run(oracle.as_ref(), kappa, cfg)?;
    let tilted = Tilt::new(oracle, -kappa);
    let t = run(&tilted, T::zero(), cfg)?;
    let a = report.overall.verdict;
    let b = t.overall.verdict;
    let agrees = a == b || (matches!(a, Verdict::Proved | Verdict::Consistent) && matches!(b, Verdict::Proved | Verdict::Consistent));
    report.tilt_check = Some(TiltCheck { tilted_verdict: b, agrees });
    Ok(report)
}

/// All falsifying witnesses found, strongest first.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Falsification<T> {
    pub primary: Witness<T>,
    pub others: Vec<Witness<T>>,
}

fn monotonicity_witness<T: Real>(oracle: &dyn FunctionOracle<T>, cfg: &CertifyConfig<T>) -> Result<Option<Witness<T>>> {
    let mut pts: Vec<(Vec<T>, Vec<T>)> = Vec::new();
    if oracle.has_subdifferential() && oracle.dimension() <= 2 {
        for x in cfg.region.lattice(if oracle.dimension() == 1 { 4 } else { 2 }, 289) {
            if !oracle.value(&x).is_finite() {
                continue;
            }
            for v in oracle.subdifferential(&x)?.selections(T::one()) {
                pts.push((x.clone(), v));
            }
        }
    }
    let lambda = effective_lambda(cfg.lambda, oracle.truth());
    match sampled_pairs(oracle, lambda, cfg) {
        Ok(ps) => pts.extend(ps.into_iter().map(|p| (p.x.into_vec(), p.v.into_vec()))),
        Err(Error::CapabilityMissing(_)) => {}
        Err(e) => return Err(e),
    }
    let mut best: Option<(T, Witness<T>)> = None;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let dx = linalg::sub(&pts[i].0, &pts[j].0);
            let d2 = linalg::norm_sq(&dx);
            if d2 == T::zero() {
                continue;
            }
            let inner = linalg::dot(&dx, &linalg::sub(&pts[i].1, &pts[j].1));
            let bound = -cfg.tol * (T::one() + d2);
            let score = inner / d2;
            if inner < bound && best.as_ref().is_none_or(|(s, _)| score < *s) {
                let w = Witness::Monotonicity {
                    x: pts[i].0.clone(),
                    v: pts[i].1.clone(),
                    x2: pts[j].0.clone(),
                    v2: pts[j].1.clone(),
                    inner,
                    bound,
                };
                best = Some((score, w));
            }
        }
    }
    Ok(best.map(|(_, w)| w))
}

/// Direct nonconvexity witnesses: subgradient monotonicity failures, then exact and sampled
/// segment-inequality failures.
pub fn falsify<T: Real>(oracle: &dyn FunctionOracle<T>, cfg: &CertifyConfig<T>) -> Result<Option<Falsification<T>>> {
    let mut found = Vec::new();
    if let Some(w) = monotonicity_witness(oracle, cfg)? {
        found.push(w);
    }
    if let Some(form) = oracle.piecewise_form() {
        if let Some(t) = segment_witness(&form, &BigRational::from_int(0)) {
            let (s, s_approx) = match &t.s {
                Extended::Finite(v) => (format_rational(v), T::lit(v.approx_f64())),
                _ => ("-inf".to_string(), T::neg_infinity()),
            };
            found.push(Witness::Exact {
                x: format_rational(&t.x),
                y: format_rational(&t.y),
                lambda: format_rational(&t.lambda),
                s,
                bound: "0".into(),
                s_approx,
            });
        }
    }
    let m = segment_modulus(oracle, &cfg.region, cfg.triples, cfg.seed, cfg.tol, cfg.rho_max);
    if let Some(t) = m.argmin {
        if t.value() < -cfg.tol {
            found.push(Witness::Segment { triple: t, bound: -cfg.tol });
        }
    }
    let mut kept = Vec::new();
    for w in found {
        if replay_witness(oracle, &w, &cfg.solver).is_ok_and(|r| r.violates && r.memberships_ok) {
            kept.push(w);
        }
    }
    let mut it = kept.into_iter();
    Ok(it.next().map(|primary| Falsification { primary, others: it.collect() }))
}

/// Probes that the graphical route checks, exposed for diagnostics.
pub fn checked_probes<T: Real>(probes: &[ProbeResult<T>], ratio: T) -> Vec<ProbeResult<T>> {
    convergent_tail(probes, ratio).into_iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::get;

    fn cfg(e: &crate::zoo::ZooEntry<f64>) -> CertifyConfig<f64> {
        CertifyConfig { samples: 24, triples: 3000, ..CertifyConfig::new(e.default_box.clone()) }
    }

    #[test]
    fn abs_is_proved() {
        let e = get::<f64>("abs").unwrap();
        let r = certify_convexity(e.oracle.as_ref(), &cfg(&e)).unwrap();
        assert_eq!(r.overall.verdict, Verdict::Proved, "{r:#?}");
        assert!(r.methods.iter().all(|m| m.verdict != Verdict::Refuted));
    }

    #[test]
    fn counterexample_gate_fails() {
        let e = get::<f64>("unit_except_origin").unwrap();
        let r = certify_convexity(e.oracle.as_ref(), &cfg(&e)).unwrap();
        assert_eq!(r.overall.verdict, Verdict::Refuted);
        assert!(!r.overall.gate_passed);
        let g = r.methods.iter().find(|m| m.method == Method::Graphical).unwrap();
        assert_eq!(g.verdict, Verdict::Consistent, "{g:#?}");
    }

    #[test]
    fn weakly_convex_refuted_by_routes() {
        let e = get::<f64>("abs_sq_minus_one").unwrap();
        let c = CertifyConfig { methods: vec![Method::Graphical, Method::Subderivative, Method::Coderivative, Method::Moreau], ..cfg(&e) };
        let r = certify_convexity(e.oracle.as_ref(), &c).unwrap();
        assert!(r.overall.gate_passed);
        assert_eq!(r.overall.verdict, Verdict::Refuted);
        for m in &r.methods[1..] {
            assert_eq!(m.verdict, Verdict::Refuted, "{m:#?}");
            assert!(m.replay.as_ref().unwrap().exact_match, "{m:#?}");
        }
    }

    #[test]
    fn strong_thresholds() {
        let e = get::<f64>("quadratic").unwrap();
        let r = certify_strong(e.oracle.clone(), 1.0, &cfg(&e)).unwrap();
        assert_eq!(r.overall.verdict, Verdict::Proved);
        assert!(r.tilt_check.unwrap().agrees);
        let r = certify_strong(e.oracle.clone(), 1.5, &cfg(&e)).unwrap();
        assert_eq!(r.overall.verdict, Verdict::Refuted);
    }

    #[test]
    fn falsify_cases() {
        let e = get::<f64>("neg_half_square").unwrap();
        let w = falsify(e.oracle.as_ref(), &cfg(&e)).unwrap().unwrap();
        assert!(matches!(w.primary, Witness::Monotonicity { .. }));
        let e = get::<f64>("abs").unwrap();
        assert!(falsify(e.oracle.as_ref(), &cfg(&e)).unwrap().is_none());
        let e = get::<f64>("abs_sq_minus_one").unwrap();
        let w = falsify(e.oracle.as_ref(), &cfg(&e)).unwrap().unwrap();
        assert!(std::iter::once(&w.primary).chain(&w.others).any(|w| matches!(w, Witness::Exact { .. })));
    }
}
