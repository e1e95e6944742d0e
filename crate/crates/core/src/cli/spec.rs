//! Function-spec documents.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::scalar::{format_rational, Real};
use crate::types::{BoxRegion, FunctionOracle};
use crate::zoo;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// `{kind, params, box, dimension}`; `kind` is any zoo name, including `piecewise1d`, `sum` and `tilt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpecDoc {
    pub kind: String,
    #[serde(default)]
    pub params: Value,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub region: Option<BoxSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
}

impl FunctionSpecDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::SpecParse(e.to_string()))?;
        match v {
            Value::String(kind) => Ok(FunctionSpecDoc { kind, params: Value::Null, region: None, dimension: None }),
            other => serde_json::from_value(other).map_err(|e| Error::SpecParse(e.to_string())),
        }
    }

    /// A file path if one exists, otherwise a zoo name.
    pub fn load(arg: &str) -> Result<Self> {
        let path = std::path::Path::new(arg);
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            Self::parse(&text)
        } else if zoo::list().contains(&arg) {
            Ok(FunctionSpecDoc { kind: arg.to_string(), params: Value::Null, region: None, dimension: None })
        } else {
            Err(Error::SpecParse(format!("{arg}: no such file or zoo entry")))
        }
    }

    /// Canonical form: validated, rational coefficients as reduced strings, box and dimension filled in.
    pub fn normalize(&self) -> Result<Self> {
        let entry = zoo::get_with::<f64>(&self.kind, &self.params, self.dimension)?;
        let params = normalize_params(&self.kind, &self.params)?;
        let region = match &self.region {
            Some(b) => {
                BoxRegion::new(b.lo.clone(), b.hi.clone())?;
                if b.lo.len() != entry.oracle.dimension() {
                    return Err(Error::DimensionMismatch { expected: entry.oracle.dimension(), found: b.lo.len() });
                }
                b.clone()
            }
            None => BoxSpec { lo: entry.default_box.lo().to_vec(), hi: entry.default_box.hi().to_vec() },
        };
        Ok(FunctionSpecDoc { kind: self.kind.clone(), params, region: Some(region), dimension: Some(entry.oracle.dimension()) })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serializes");
        s.push('\n');
        s
    }

    pub fn build<T: Real>(&self) -> Result<(Arc<dyn FunctionOracle<T>>, BoxRegion<T>)> {
        let entry = zoo::get_with::<T>(&self.kind, &self.params, self.dimension)?;
        let region = match &self.region {
            Some(b) => BoxRegion::new(b.lo.iter().map(|&v| T::lit(v)).collect(), b.hi.iter().map(|&v| T::lit(v)).collect())?,
            None => entry.default_box,
        };
        if region.dim() != entry.oracle.dimension() {
            return Err(Error::DimensionMismatch { expected: entry.oracle.dimension(), found: region.dim() });
        }
        Ok((entry.oracle, region))
    }
}

fn rat_string(v: &Value, what: &str) -> Result<Value> {
    Ok(Value::String(format_rational(&zoo::rational_value(v, what)?)))
}

fn nested(v: &Value) -> Result<Value> {
    match v {
        Value::String(_) => Ok(v.clone()),
        Value::Object(m) => {
            let kind = m.get("kind").and_then(Value::as_str).ok_or_else(|| Error::SpecParse("missing kind".into()))?;
            let mut out = Map::new();
            out.insert("kind".into(), Value::String(kind.to_string()));
            let params = normalize_params(kind, m.get("params").unwrap_or(&Value::Null))?;
            if !params.is_null() {
                out.insert("params".into(), params);
            }
            if let Some(d) = m.get("dimension").filter(|d| !d.is_null()) {
                out.insert("dimension".into(), d.clone());
            }
            Ok(Value::Object(out))
        }
        _ => Err(Error::SpecParse("nested function must be a name or an object".into())),
    }
}

fn normalize_params(kind: &str, params: &Value) -> Result<Value> {
    match (kind, params) {
        (_, Value::Null) => Ok(Value::Null),
        ("piecewise1d", Value::Object(m)) => {
            let mut out = Map::new();
            let bps = match m.get("breakpoints") {
                Some(Value::Array(a)) => a.iter().map(|v| rat_string(v, "breakpoint")).collect::<Result<Vec<_>>>()?,
                _ => vec![],
            };
            out.insert("breakpoints".into(), Value::Array(bps));
            let pieces = match m.get("pieces") {
                Some(Value::Array(a)) => a
                    .iter()
                    .map(|p| {
                        let mut q = Map::new();
                        for k in ["a", "c", "d"] {
                            let v = p.get(k).cloned().unwrap_or(Value::from(0));
                            q.insert(k.into(), rat_string(&v, k)?);
                        }
                        Ok(Value::Object(q))
                    })
                    .collect::<Result<Vec<_>>>()?,
                _ => return Err(Error::SpecParse("piecewise1d needs a pieces array".into())),
            };
            out.insert("pieces".into(), Value::Array(pieces));
            let mut dom = Map::new();
            if let Some(Value::Object(d)) = m.get("domain") {
                for k in ["lo", "hi"] {
                    if let Some(v) = d.get(k).filter(|v| !v.is_null()) {
                        dom.insert(k.into(), rat_string(v, k)?);
                    }
                }
            }
            if !dom.is_empty() {
                out.insert("domain".into(), Value::Object(dom));
            }
            Ok(Value::Object(out))
        }
        ("tilt", Value::Object(m)) => {
            let mut out = m.clone();
            if let Some(inner) = m.get("inner").filter(|v| !v.is_null()) {
                out.insert("inner".into(), nested(inner)?);
            }
            Ok(Value::Object(out))
        }
        ("sum", Value::Object(m)) => {
            let mut out = m.clone();
            if let Some(Value::Array(ts)) = m.get("terms") {
                out.insert("terms".into(), Value::Array(ts.iter().map(nested).collect::<Result<Vec<_>>>()?));
            }
            Ok(Value::Object(out))
        }
        _ => Ok(params.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_roundtrip_is_byte_identical() {
        let text = r#"{"kind":"piecewise1d","params":{"breakpoints":[0],"pieces":[{"a":1,"c":0,"d":0},{"a":"-2/2","c":"0.0"}]}}"#;
        let doc = FunctionSpecDoc::parse(text).unwrap().normalize().unwrap();
        let once = doc.to_json();
        let twice = FunctionSpecDoc::parse(&once).unwrap().normalize().unwrap().to_json();
        assert_eq!(once, twice);
        assert!(once.contains("\"-1\""));
    }

    #[test]
    fn bare_name_and_errors() {
        let doc = FunctionSpecDoc::parse("\"abs\"").unwrap().normalize().unwrap();
        assert_eq!(doc.dimension, Some(1));
        assert!(matches!(FunctionSpecDoc::parse("{"), Err(Error::SpecParse(_))));
        assert!(matches!(FunctionSpecDoc::parse(r#"{"kind":"nope"}"#).unwrap().normalize(), Err(Error::UnknownName(_))));
    }
}
