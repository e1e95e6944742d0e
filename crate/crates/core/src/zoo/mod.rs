//! Registry of reference functions with known curvature.

mod functions;

use std::sync::Arc;

use num_rational::BigRational;
use serde::Serialize;
use serde_json::Value;

pub use functions::{
    Huber, IndicatorBox, MaxQuadratics, NegAbs, NegHalfSquare, Piecewise1D, Quadratic, Sum, Tilt, UnitExceptOrigin, L1,
};

use crate::error::{Error, Result};
use crate::exact::{Domain, PiecewiseQuad1D, QuadPiece};
use crate::scalar::{parse_rational, ExactScalar, Real};
use crate::types::{BoxRegion, FunctionOracle, SubdiffSet, Truth};

/// Ground truth stored with a zoo entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZooTruth<T> {
    pub is_convex: bool,
    pub strong_modulus: Option<T>,
    pub weak_modulus: Option<T>,
    pub analytic_subdiff: bool,
    pub analytic_prox: bool,
}

#[derive(Clone)]
pub struct ZooEntry<T> {
    pub name: String,
    pub description: &'static str,
    pub oracle: Arc<dyn FunctionOracle<T>>,
    pub truth: ZooTruth<T>,
    pub default_box: BoxRegion<T>,
}

/// Registered names with one-line descriptions.
pub const NAMES: &[(&str, &str)] = &[
    ("quadratic", "1/2 <Qx,x> + <b,x> + c"),
    ("abs", "|x|"),
    ("l1", "sum_i |x_i|"),
    ("huber", "separable Huber function with parameter delta"),
    ("neg_half_square", "-1/2 |x|^2"),
    ("max_quadratics", "pointwise max of quadratics"),
    ("abs_sq_minus_one", "|x^2 - 1|"),
    ("indicator_box", "indicator of the box [lo, hi]"),
    ("unit_except_origin", "0 at the origin, 1 elsewhere"),
    ("neg_abs", "-|x|"),
    ("tilt", "inner + kappa/2 |x|^2"),
    ("sum", "sum of terms"),
    ("piecewise1d", "continuous piecewise quadratic on the line (exact coefficients)"),
];

pub fn list() -> Vec<&'static str> {
    NAMES.iter().map(|(n, _)| *n).collect()
}

/// Entry with default parameters.
pub fn get<T: Real>(name: &str) -> Result<ZooEntry<T>> {
    get_with(name, &Value::Null, None)
}

/// Entry with JSON parameters (`null` for defaults) and an optional dimension.
pub fn get_with<T: Real>(name: &str, params: &Value, dimension: Option<usize>) -> Result<ZooEntry<T>> {
    let description = NAMES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, d)| *d)
        .ok_or_else(|| Error::UnknownName(name.to_string()))?;
    let oracle = build::<T>(name, params, dimension)?;
    if let Some(d) = dimension {
        if d != oracle.dimension() {
            return Err(Error::DimensionMismatch { expected: d, found: oracle.dimension() });
        }
    }
    let truth = oracle.truth().unwrap_or(Truth::from_s_star(None));
    let default_box = default_box(name, params, oracle.as_ref())?;
    Ok(ZooEntry {
        name: name.to_string(),
        description,
        truth: ZooTruth {
            is_convex: truth.is_convex,
            strong_modulus: truth.strong_modulus,
            weak_modulus: truth.weak_modulus,
            analytic_subdiff: oracle.has_subdifferential(),
            analytic_prox: oracle.has_prox(),
        },
        oracle,
        default_box,
    })
}

/// The analytic subdifferential of a zoo entry.
pub fn subdiff_analytic<T: Real>(entry: &ZooEntry<T>, x: &[T]) -> Result<SubdiffSet<T>> {
    if !entry.truth.analytic_subdiff {
        return Err(Error::NoAnalyticForm(format!("{} has no closed-form subdifferential", entry.name)));
    }
    entry.oracle.subdifferential(x)
}

fn param<'a>(params: &'a Value, key: &str) -> Option<&'a Value> {
    params.get(key).filter(|v| !v.is_null())
}

fn num<T: Real>(v: &Value, what: &str) -> Result<T> {
    match v {
        Value::Number(n) => n.as_f64().map(T::lit),
        Value::String(s) => parse_rational(s).map(|r| T::lit(r.approx_f64())),
        _ => None,
    }
    .ok_or_else(|| Error::SpecParse(format!("{what}: expected a number")))
}

fn num_or<T: Real>(params: &Value, key: &str, default: f64) -> Result<T> {
    param(params, key).map_or(Ok(T::lit(default)), |v| num(v, key))
}

fn vector<T: Real>(v: &Value, what: &str) -> Result<Vec<T>> {
    match v {
        Value::Array(a) => a.iter().map(|x| num(x, what)).collect(),
        other => Ok(vec![num(other, what)?]),
    }
}

fn matrix<T: Real>(v: &Value, what: &str) -> Result<Vec<Vec<T>>> {
    match v {
        Value::Array(rows) if rows.iter().all(Value::is_array) => rows.iter().map(|r| vector(r, what)).collect(),
        Value::Array(diag) => {
            let d: Vec<T> = diag.iter().map(|x| num(x, what)).collect::<Result<_>>()?;
            let n = d.len();
            Ok((0..n).map(|i| (0..n).map(|j| if i == j { d[i] } else { T::zero() }).collect()).collect())
        }
        other => Ok(vec![vec![num(other, what)?]]),
    }
}

fn quadratic_from<T: Real>(params: &Value, dimension: Option<usize>) -> Result<Quadratic<T>> {
    let q: Vec<Vec<T>> = match param(params, "q") {
        Some(v) => matrix(v, "q")?,
        None => {
            let n = dimension.unwrap_or(1);
            (0..n).map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect()).collect()
        }
    };
    let n = q.len();
    let b = match param(params, "b") {
        Some(v) => vector(v, "b")?,
        None => vec![T::zero(); n],
    };
    Quadratic::new(q, b, num_or(params, "c", 0.0)?)
}

fn dim_param(params: &Value, dimension: Option<usize>, default: usize) -> Result<usize> {
    match param(params, "dimension") {
        Some(v) => v.as_u64().map(|d| d as usize).filter(|&d| d > 0).ok_or_else(|| Error::SpecParse("dimension must be a positive integer".into())),
        None => Ok(dimension.unwrap_or(default)),
    }
}

/// Exact rational from a JSON number or string.
pub fn rational_value(v: &Value, what: &str) -> Result<BigRational> {
    let r = match v {
        Value::String(s) => parse_rational(s),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Some(BigRational::from_int(i))
            } else {
                n.as_f64().and_then(|f| parse_rational(&format!("{f}")))
            }
        }
        _ => None,
    };
    r.ok_or_else(|| Error::SpecParse(format!("{what}: expected a rational (number, \"p/q\" or decimal string)")))
}

/// Parses `{breakpoints, pieces: [{a, c, d}], domain: {lo, hi}}`.
pub fn piecewise_from_params(params: &Value) -> Result<PiecewiseQuad1D<BigRational>> {
    if params.is_null() {
        return Ok(PiecewiseQuad1D::abs());
    }
    let bps = match param(params, "breakpoints") {
        Some(Value::Array(a)) => a.iter().map(|v| rational_value(v, "breakpoint")).collect::<Result<Vec<_>>>()?,
        Some(_) => return Err(Error::SpecParse("breakpoints must be an array".into())),
        None => vec![],
    };
    let pieces = match param(params, "pieces") {
        Some(Value::Array(a)) => a
            .iter()
            .map(|p| {
                let get = |k: &str| p.get(k).map_or(Ok(BigRational::from_int(0)), |v| rational_value(v, k));
                Ok(QuadPiece::new(get("a")?, get("c")?, get("d")?))
            })
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(Error::SpecParse("piecewise1d needs a pieces array".into())),
    };
    let dom = param(params, "domain");
    let bound = |k: &str| -> Result<Option<BigRational>> {
        match dom.and_then(|d| param(d, k)) {
            Some(v) => rational_value(v, k).map(Some),
            None => Ok(None),
        }
    };
    let domain = Domain { lo: bound("lo")?, hi: bound("hi")? };
    PiecewiseQuad1D::new(bps, pieces, domain)
}

fn build<T: Real>(name: &str, params: &Value, dimension: Option<usize>) -> Result<Arc<dyn FunctionOracle<T>>> {
    Ok(match name {
        "quadratic" => Arc::new(quadratic_from::<T>(params, dimension)?),
        "abs" => Arc::new(L1::<T>::abs()),
        "l1" => Arc::new(L1::<T>::new(dim_param(params, dimension, 2)?)),
        "huber" => Arc::new(Huber::new(num_or(params, "delta", 1.0)?, dim_param(params, dimension, 1)?)?),
        "neg_half_square" => Arc::new(NegHalfSquare::<T>::new(dim_param(params, dimension, 1)?)),
        "max_quadratics" => {
            let pieces = match param(params, "pieces") {
                Some(Value::Array(a)) => a.iter().map(|p| quadratic_from::<T>(p, dimension)).collect::<Result<Vec<_>>>()?,
                Some(_) => return Err(Error::SpecParse("pieces must be an array".into())),
                None => vec![
                    Quadratic::new(vec![vec![T::lit(2.0)]], vec![T::zero()], T::zero())?,
                    Quadratic::new(vec![vec![T::zero()]], vec![T::lit(2.0)], T::lit(-1.0))?,
                ],
            };
            Arc::new(MaxQuadratics::new(pieces)?)
        }
        "abs_sq_minus_one" => Arc::new(MaxQuadratics::<T>::abs_sq_minus_one()),
        "indicator_box" => {
            let lo = param(params, "lo").map_or(Ok(vec![T::zero()]), |v| vector(v, "lo"))?;
            let hi = param(params, "hi").map_or(Ok(vec![T::one()]), |v| vector(v, "hi"))?;
            Arc::new(IndicatorBox::new(lo, hi)?)
        }
        "unit_except_origin" => Arc::new(UnitExceptOrigin::<T>::new()),
        "neg_abs" => Arc::new(NegAbs::<T>::new()),
        "tilt" => {
            let inner = match param(params, "inner") {
                Some(spec) => from_spec_value::<T>(spec)?,
                None => Arc::new(L1::<T>::abs()),
            };
            Arc::new(Tilt::new(inner, num_or(params, "kappa", 1.0)?))
        }
        "sum" => {
            let terms = match param(params, "terms") {
                Some(Value::Array(a)) => a.iter().map(from_spec_value::<T>).collect::<Result<Vec<_>>>()?,
                Some(_) => return Err(Error::SpecParse("terms must be an array".into())),
                None => vec![Arc::new(L1::<T>::abs()) as Arc<dyn FunctionOracle<T>>, Arc::new(NegHalfSquare::<T>::new(1))],
            };
            Arc::new(Sum::new(terms)?)
        }
        "piecewise1d" => Arc::new(Piecewise1D::<T>::new(piecewise_from_params(params)?)),
        other => return Err(Error::UnknownName(other.to_string())),
    })
}

/// Oracle from a nested `{kind, params, dimension}` object, or a bare name string.
pub fn from_spec_value<T: Real>(spec: &Value) -> Result<Arc<dyn FunctionOracle<T>>> {
    match spec {
        Value::String(name) => Ok(get::<T>(name)?.oracle),
        Value::Object(m) => {
            let kind = m.get("kind").and_then(Value::as_str).ok_or_else(|| Error::SpecParse("missing kind".into()))?;
            let dim = m.get("dimension").and_then(Value::as_u64).map(|d| d as usize);
            Ok(get_with::<T>(kind, m.get("params").unwrap_or(&Value::Null), dim)?.oracle)
        }
        _ => Err(Error::SpecParse("function spec must be a name or an object".into())),
    }
}

fn default_box<T: Real>(name: &str, params: &Value, oracle: &dyn FunctionOracle<T>) -> Result<BoxRegion<T>> {
    let n = oracle.dimension();
    match name {
        "indicator_box" => {
            let lo = param(params, "lo").map_or(Ok(vec![T::zero()]), |v| vector::<T>(v, "lo"))?;
            let hi = param(params, "hi").map_or(Ok(vec![T::one()]), |v| vector::<T>(v, "hi"))?;
            let pad = T::lit(0.5);
            BoxRegion::new(lo.iter().map(|&l| l - pad).collect(), hi.iter().map(|&h| h + pad).collect())
        }
        _ => {
            if let Some(f) = oracle.piecewise_form() {
                let (lo, hi) = (f.domain().lo.as_ref().map(|v| v.approx_f64()), f.domain().hi.as_ref().map(|v| v.approx_f64()));
                let bl = f.breakpoints().first().map(|b| b.approx_f64());
                let bh = f.breakpoints().last().map(|b| b.approx_f64());
                let l = lo.map(|v| v - 0.5).unwrap_or_else(|| bl.map_or(-2.0, |b| (b - 1.0).min(-2.0)));
                let h = hi.map(|v| v + 0.5).unwrap_or_else(|| bh.map_or(2.0, |b| (b + 1.0).max(2.0)));
                return BoxRegion::new(vec![T::lit(l)], vec![T::lit(h)]);
            }
            BoxRegion::cube(n, T::lit(-2.0), T::lit(2.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_builds_with_defaults() {
        for name in list() {
            let e = get::<f64>(name).unwrap_or_else(|err| panic!("{name}: {err}"));
            assert_eq!(e.default_box.dim(), e.oracle.dimension(), "{name}");
        }
        assert!(matches!(get::<f64>("nope"), Err(Error::UnknownName(_))));
    }

    #[test]
    fn parameterized_entries() {
        let params: Value = serde_json::from_str(r#"{"q": [[1, 0], [0, 3]], "b": [1, 1]}"#).unwrap();
        let e = get_with::<f64>("quadratic", &params, Some(2)).unwrap();
        assert_eq!(e.truth.strong_modulus, Some(1.0));
        let p: Value = serde_json::from_str(r#"{"breakpoints": ["0"], "pieces": [{"a": "0", "c": "-1", "d": 0}, {"a": "1/2", "c": "1/2", "d": 0}]}"#).unwrap();
        let e = get_with::<f64>("piecewise1d", &p, None).unwrap();
        assert!(e.truth.is_convex);
        let t: Value = serde_json::from_str(r#"{"inner": {"kind": "abs_sq_minus_one"}, "kappa": 3}"#).unwrap();
        let e = get_with::<f64>("tilt", &t, None).unwrap();
        assert_eq!(e.truth.strong_modulus, Some(1.0));
    }

    #[test]
    fn analytic_subdiff_errors_without_form() {
        let s: Value = serde_json::from_str(r#"{"terms": [{"kind": "abs"}, {"kind": "max_quadratics", "params": {"pieces": [{"q": 2}, {"q": 0}]}}]}"#).unwrap();
        let e = get_with::<f64>("sum", &s, None).unwrap();
        assert!(subdiff_analytic(&e, &[0.5]).is_ok());
        assert!(matches!(subdiff_analytic(&e, &[0.0]), Err(Error::NoAnalyticForm(_))));
    }
}
