//! JSON model files.
//!
//! ```json
//! {"kind": "magnetic-schrodinger", "dim": 1,
//!  "coeffs": [{"field": "V", "k": [1, 0], "value": [0.5, 0.0]}, ...]}
//! {"kind": "matrix", "dim": 2, "hoppings": [{"r": [1, 0], "matrix": [[[0, 0], [0.5, 0]], ...]}]}
//! {"kind": "appendix", "epsilon": 0.3, "nu": 1}
//! {"kind": "barrier", "dim": 2, "level": 2.0}
//! {"kind": "qwz", "mass": -1.0}
//! ```
//!
//! Matrix entries are `[re, im]` pairs or plain reals. Hopping lists must
//! contain both `r` and `-r` unless `"complete_adjoints": true` is given.

use std::path::Path;

use serde_json::Value;

use super::{AppendixModel, BulkModel, ContinuousKind, ContinuousModel, FourierSeries, LatticeModel, MatrixModel};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat, C64};

/// A parsed model definition.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Continuous(ContinuousModel),
    Matrix(MatrixModel),
    Appendix(AppendixModel),
}

impl ModelSpec {
    pub fn into_bulk(self) -> BulkModel {
        match self {
            ModelSpec::Continuous(m) => BulkModel::Continuous(m),
            ModelSpec::Matrix(m) => BulkModel::Lattice(m.into()),
            ModelSpec::Appendix(m) => BulkModel::Lattice(m.into()),
        }
    }

    pub fn into_lattice(self) -> Option<LatticeModel> {
        match self {
            ModelSpec::Continuous(_) => None,
            ModelSpec::Matrix(m) => Some(m.into()),
            ModelSpec::Appendix(m) => Some(m.into()),
        }
    }
}

fn err(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{path}: {msg}"))
}

fn get<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| err(path, format!("missing field {key:?}")))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| err(path, "expected a number"))
}

fn as_i32(v: &Value, path: &str) -> Result<i32> {
    v.as_i64()
        .and_then(|x| i32::try_from(x).ok())
        .ok_or_else(|| err(path, "expected an integer"))
}

fn as_pair_i32(v: &Value, path: &str) -> Result<(i32, i32)> {
    match v.as_array().map(Vec::as_slice) {
        Some([a, b]) => Ok((as_i32(a, &format!("{path}[0]"))?, as_i32(b, &format!("{path}[1]"))?)),
        _ => Err(err(path, "expected [int, int]")),
    }
}

fn as_complex(v: &Value, path: &str) -> Result<C64> {
    if let Some(x) = v.as_f64() {
        return Ok(c(x, 0.0));
    }
    match v.as_array().map(Vec::as_slice) {
        Some([a, b]) => Ok(c(as_f64(a, &format!("{path}[0]"))?, as_f64(b, &format!("{path}[1]"))?)),
        _ => Err(err(path, "expected a number or [re, im]")),
    }
}

fn as_matrix(v: &Value, dim: usize, path: &str) -> Result<CMat> {
    let rows = v.as_array().ok_or_else(|| err(path, "expected an array of rows"))?;
    if rows.len() != dim {
        return Err(err(path, format!("expected {dim} rows, found {}", rows.len())));
    }
    let mut m = crate::linalg::zeros(dim, dim);
    for (i, row) in rows.iter().enumerate() {
        let rp = format!("{path}[{i}]");
        let cols = row.as_array().ok_or_else(|| err(&rp, "expected a row array"))?;
        if cols.len() != dim {
            return Err(err(&rp, format!("expected {dim} entries, found {}", cols.len())));
        }
        for (j, e) in cols.iter().enumerate() {
            m[(i, j)] = as_complex(e, &format!("{rp}[{j}]"))?;
        }
    }
    Ok(m)
}

fn tag_model(e: Error, path: &str) -> Error {
    match e {
        Error::Parse(_) => e,
        other => err(path, other),
    }
}

/// Parses a model definition; errors carry a JSON field path rooted at `path`.
pub fn parse_model_at(v: &Value, path: &str) -> Result<ModelSpec> {
    let kind = get(v, "kind", path)?
        .as_str()
        .ok_or_else(|| err(&format!("{path}.kind"), "expected a string"))?;
    match kind {
        "appendix" => {
            let eps = as_f64(get(v, "epsilon", path)?, &format!("{path}.epsilon"))?;
            let nu = as_i32(get(v, "nu", path)?, &format!("{path}.nu"))?;
            AppendixModel::new(eps, nu)
                .map(ModelSpec::Appendix)
                .map_err(|e| tag_model(e, path))
        }
        "barrier" => {
            let dim = get(v, "dim", path)?
                .as_u64()
                .ok_or_else(|| err(&format!("{path}.dim"), "expected a positive integer"))? as usize;
            let level = as_f64(get(v, "level", path)?, &format!("{path}.level"))?;
            if dim == 0 {
                return Err(err(&format!("{path}.dim"), "must be positive"));
            }
            Ok(ModelSpec::Matrix(MatrixModel::barrier(dim, level)))
        }
        "qwz" => {
            let mass = as_f64(get(v, "mass", path)?, &format!("{path}.mass"))?;
            Ok(ModelSpec::Matrix(MatrixModel::qwz(mass)))
        }
        "matrix" => parse_matrix(v, path),
        "magnetic-schrodinger" | "divergence-form" | "general-second-order" => {
            let kind: ContinuousKind =
                serde_json::from_value(Value::String(kind.to_string())).map_err(|e| err(&format!("{path}.kind"), e))?;
            parse_continuous(v, kind, path)
        }
        other => Err(err(&format!("{path}.kind"), format!("unknown model kind {other:?}"))),
    }
}

pub fn parse_model(v: &Value) -> Result<ModelSpec> {
    parse_model_at(v, "$")
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let v: Value = serde_json::from_str(&text)?;
    parse_model(&v)
}

fn parse_matrix(v: &Value, path: &str) -> Result<ModelSpec> {
    let hops = get(v, "hoppings", path)?
        .as_array()
        .ok_or_else(|| err(&format!("{path}.hoppings"), "expected an array"))?;
    let dim = match v.get("dim") {
        Some(d) => d
            .as_u64()
            .ok_or_else(|| err(&format!("{path}.dim"), "expected a positive integer"))? as usize,
        None => hops
            .first()
            .and_then(|h| h.get("matrix"))
            .and_then(Value::as_array)
            .map(Vec::len)
            .ok_or_else(|| err(path, "cannot infer dim from empty hoppings"))?,
    };
    let mut entries = Vec::with_capacity(hops.len());
    for (i, h) in hops.iter().enumerate() {
        let hp = format!("{path}.hoppings[{i}]");
        let r = as_pair_i32(get(h, "r", &hp)?, &format!("{hp}.r"))?;
        let m = as_matrix(get(h, "matrix", &hp)?, dim, &format!("{hp}.matrix"))?;
        entries.push((r, m));
    }
    let complete = v.get("complete_adjoints").and_then(Value::as_bool).unwrap_or(false);
    let model = if complete {
        MatrixModel::from_half(dim, entries)
    } else {
        MatrixModel::new(dim, entries)
    };
    model.map(ModelSpec::Matrix).map_err(|e| tag_model(e, path))
}

fn parse_continuous(v: &Value, kind: ContinuousKind, path: &str) -> Result<ModelSpec> {
    if let Some(d) = v.get("dim") {
        if d.as_u64() != Some(1) {
            return Err(err(&format!("{path}.dim"), "continuous models are scalar (dim 1)"));
        }
    }
    let coeffs = match v.get("coeffs") {
        Some(c) => c
            .as_array()
            .ok_or_else(|| err(&format!("{path}.coeffs"), "expected an array"))?
            .as_slice(),
        None => &[],
    };
    let mut per_field: std::collections::BTreeMap<String, Vec<((i32, i32), C64)>> = Default::default();
    for (i, e) in coeffs.iter().enumerate() {
        let ep = format!("{path}.coeffs[{i}]");
        let field = get(e, "field", &ep)?
            .as_str()
            .ok_or_else(|| err(&format!("{ep}.field"), "expected a string"))?;
        if !kind.field_names().contains(&field) {
            return Err(err(
                &format!("{ep}.field"),
                format!("unknown field {field:?}; expected one of {:?}", kind.field_names()),
            ));
        }
        let k = as_pair_i32(get(e, "k", &ep)?, &format!("{ep}.k"))?;
        let val = as_complex(get(e, "value", &ep)?, &format!("{ep}.value"))?;
        per_field.entry(field.to_string()).or_default().push((k, val));
    }
    let fields = per_field.into_iter().map(|(n, t)| (n, FourierSeries::new(t)));
    ContinuousModel::new(kind, fields)
        .map(ModelSpec::Continuous)
        .map_err(|e| tag_model(e, path))
}
