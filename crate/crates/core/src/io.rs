//! JSON encodings for matrices, maps, bipartite states, unitaries, and codes.
//!
//! Matrices are row-major nested arrays whose entries are `[re, im]` pairs;
//! a bare number is accepted as a real entry on input.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::BipartiteState;
use crate::error::{Error, Result};
use crate::lqec::CodeProjector;
use crate::maps::{AnyMap, HermitianMapRep, LinearMapRep, QuantumMap, StandardMap};
use crate::numerics::{CMatrix, C64};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Entry> for C64 {
    fn from(e: Entry) -> Self {
        match e {
            Entry::Real(x) => C64::new(x, 0.0),
            Entry::Complex([a, b]) => C64::new(a, b),
        }
    }
}

/// Serde form of a complex matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JsonMatrix(Vec<Vec<Entry>>);

impl JsonMatrix {
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("matrix must be non-empty".into()));
        }
        if self.0.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("matrix rows have different lengths".into()));
        }
        let m = CMatrix::from_fn(rows, cols, |r, c| self.0[r][c].into());
        crate::numerics::ensure_finite(&m)?;
        Ok(m)
    }
}

impl From<&CMatrix> for JsonMatrix {
    fn from(m: &CMatrix) -> Self {
        JsonMatrix(
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| Entry::Complex([m[(r, c)].re, m[(r, c)].im])).collect())
                .collect(),
        )
    }
}

pub fn matrix_to_json(m: &CMatrix) -> Value {
    serde_json::to_value(JsonMatrix::from(m)).expect("matrices serialize")
}

pub fn matrix_from_json(v: &Value) -> Result<CMatrix> {
    serde_json::from_value::<JsonMatrix>(v.clone())?.to_matrix()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TermJson {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    c: Option<f64>,
    #[serde(rename = "E")]
    e: JsonMatrix,
    #[serde(rename = "Eprime", skip_serializing_if = "Option::is_none", default)]
    eprime: Option<JsonMatrix>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum MapJson {
    Linear { dim_in: usize, dim_out: usize, terms: Vec<TermJson> },
    Hermitian { dim_in: usize, dim_out: usize, terms: Vec<TermJson> },
    Standard {
        name: String,
        #[serde(default)]
        params: Vec<f64>,
        #[serde(default)]
        matrix: Option<JsonMatrix>,
    },
}

/// Accepts `{"dim": n}` in place of `dim_in`/`dim_out` for square maps.
fn normalize_dims(mut v: Value) -> Value {
    if let Some(obj) = v.as_object_mut() {
        if let Some(d) = obj.get("dim").cloned() {
            obj.entry("dim_in").or_insert(d.clone());
            obj.entry("dim_out").or_insert(d);
        }
    }
    v
}

pub fn map_from_json(v: &Value) -> Result<AnyMap> {
    match serde_json::from_value::<MapJson>(normalize_dims(v.clone()))? {
        MapJson::Linear { dim_in, dim_out, terms } => {
            let pairs = terms
                .iter()
                .enumerate()
                .map(|(idx, t)| {
                    let ep = t.eprime.as_ref().ok_or_else(|| {
                        Error::InvalidInput(format!("linear term {idx} is missing Eprime"))
                    })?;
                    Ok((t.e.to_matrix()?, ep.to_matrix()?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AnyMap::Linear(LinearMapRep::new(dim_in, dim_out, pairs)?))
        }
        MapJson::Hermitian { dim_in, dim_out, terms } => {
            let list = terms
                .iter()
                .enumerate()
                .map(|(idx, t)| {
                    let c = t.c.ok_or_else(|| {
                        Error::InvalidInput(format!("hermitian term {idx} is missing c"))
                    })?;
                    Ok((c, t.e.to_matrix()?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AnyMap::Hermitian(HermitianMapRep::new(dim_in, dim_out, list)?))
        }
        MapJson::Standard { name, params, matrix } => {
            let m = matrix.map(|m| m.to_matrix()).transpose()?;
            Ok(AnyMap::Hermitian(StandardMap::from_name(&name, &params, m.as_ref())?.build()?))
        }
    }
}

pub fn map_to_json(map: &AnyMap) -> Value {
    let repr = match map {
        AnyMap::Linear(l) => MapJson::Linear {
            dim_in: l.dim_in(),
            dim_out: l.dim_out(),
            terms: l
                .elements()
                .iter()
                .map(|(e, ep)| TermJson { c: None, e: e.into(), eprime: Some(ep.into()) })
                .collect(),
        },
        AnyMap::Hermitian(h) => MapJson::Hermitian {
            dim_in: h.dim_in(),
            dim_out: h.dim_out(),
            terms: h
                .terms()
                .iter()
                .map(|t| TermJson { c: Some(t.weight), e: (&t.op).into(), eprime: None })
                .collect(),
        },
    };
    serde_json::to_value(repr).expect("maps serialize")
}

/// A bare matrix or `{"matrix": ...}`.
pub fn matrix_or_wrapped(v: &Value) -> Result<CMatrix> {
    match v.get("matrix") {
        Some(inner) if v.is_object() => matrix_from_json(inner),
        _ => matrix_from_json(v),
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct BipartiteJson {
    #[serde(rename = "dim_S")]
    dim_s: usize,
    #[serde(rename = "dim_B")]
    dim_b: usize,
    matrix: JsonMatrix,
}

pub fn bipartite_from_json(v: &Value) -> Result<BipartiteState> {
    let b: BipartiteJson = serde_json::from_value(v.clone())?;
    BipartiteState::new(b.dim_s, b.dim_b, b.matrix.to_matrix()?)
}

pub fn bipartite_to_json(state: &BipartiteState) -> Value {
    serde_json::to_value(BipartiteJson {
        dim_s: state.dim_s(),
        dim_b: state.dim_b(),
        matrix: state.matrix().into(),
    })
    .expect("states serialize")
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CodeJson {
    Projector {
        dim: Option<usize>,
        projector: JsonMatrix,
    },
    Codewords {
        codewords: Vec<Vec<Entry>>,
    },
}

pub fn code_from_json(v: &Value) -> Result<CodeProjector> {
    match serde_json::from_value::<CodeJson>(v.clone())? {
        CodeJson::Projector { dim, projector } => {
            let p = projector.to_matrix()?;
            if let Some(d) = dim {
                if p.shape() != (d, d) {
                    return Err(Error::Shape(format!("projector is not {d}x{d}")));
                }
            }
            CodeProjector::new(p)
        }
        CodeJson::Codewords { codewords } => {
            let vecs: Vec<DVector<C64>> = codewords
                .into_iter()
                .map(|w| DVector::from_iterator(w.len(), w.into_iter().map(C64::from)))
                .collect();
            CodeProjector::from_codewords(&vecs)
        }
    }
}

pub fn code_to_json(code: &CodeProjector) -> Value {
    serde_json::json!({ "dim": code.dim(), "projector": matrix_to_json(code.matrix()) })
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}
