//! JSON document formats for systems, relations, inputs and boxes.
//!
//! All documents are UTF-8 JSON with an explicit `schema_version` field
//! (currently `"1"`) and matrices as nested row-major arrays. Numbers
//! round-trip exactly: serialization prints the shortest decimal that parses
//! back to the same binary value.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::montecarlo::BoxSet;
use crate::relations::LinearRelation;
use crate::sysmodel::{InputSequence, StochasticLinearSystem};
use crate::{Error, Result};

pub const SCHEMA_VERSION: &str = "1";

fn check_schema(version: &str, what: &str) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::Invalid(format!(
            "{what}: unsupported schema_version {version:?}, expected {SCHEMA_VERSION:?}"
        )));
    }
    Ok(())
}

/// Nested row-major array -> matrix, with shape validation.
fn matrix_from_nested(field: &str, rows: usize, cols: usize, data: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if data.len() != rows {
        return Err(Error::Invalid(format!(
            "field {field}: expected {rows} rows, found {}",
            data.len()
        )));
    }
    for (i, row) in data.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Invalid(format!(
                "field {field}: row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
    }
    let flat: Vec<f64> = data.iter().flatten().copied().collect();
    if !flat.iter().all(|v| v.is_finite()) {
        return Err(Error::Invalid(format!(
            "field {field}: contains non-finite entries"
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &flat))
}

fn matrix_to_nested(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Serialized stochastic linear control system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemDocument {
    pub schema_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub p: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    #[serde(rename = "Psi")]
    pub psi: Vec<Vec<f64>>,
    /// Disturbance covariance. The model normalizes it to the identity; a
    /// document may state it explicitly, but only the identity is accepted.
    #[serde(rename = "W", skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<f64>>>,
}

impl SystemDocument {
    pub fn from_system(sys: &StochasticLinearSystem, name: Option<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            name,
            n: sys.state_dim(),
            m: sys.input_dim(),
            l: sys.noise_dim(),
            p: sys.output_dim(),
            a: matrix_to_nested(sys.a()),
            b: matrix_to_nested(sys.b()),
            c: matrix_to_nested(sys.c()),
            g: matrix_to_nested(sys.g()),
            mu: sys.mu().iter().copied().collect(),
            psi: matrix_to_nested(sys.psi()),
            w: None,
        }
    }

    pub fn into_system(&self) -> Result<StochasticLinearSystem> {
        check_schema(&self.schema_version, "system document")?;
        let a = matrix_from_nested("A", self.n, self.n, &self.a)?;
        let b = matrix_from_nested("B", self.n, self.m, &self.b)?;
        let c = matrix_from_nested("C", self.p, self.n, &self.c)?;
        let g = matrix_from_nested("G", self.n, self.l, &self.g)?;
        if self.mu.len() != self.l {
            return Err(Error::Invalid(format!(
                "field mu: expected length {}, found {}",
                self.l,
                self.mu.len()
            )));
        }
        let mu = DVector::from_column_slice(&self.mu);
        let psi = matrix_from_nested("Psi", self.p, self.p, &self.psi)?;
        if let Some(w) = &self.w {
            let w = matrix_from_nested("W", self.l, self.l, w)?;
            let dev = (&w - DMatrix::<f64>::identity(self.l, self.l)).norm();
            if dev > 1e-12 * (1.0 + w.norm()) {
                return Err(Error::Invalid(
                    "field W: only the identity disturbance covariance is supported; \
                     fold any other covariance into G before loading"
                        .into(),
                ));
            }
        }
        StochasticLinearSystem::new(a, b, c, g, mu, psi)
    }
}

/// Serialized relation pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationDocument {
    pub schema_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "R1")]
    pub r1: Vec<Vec<f64>>,
    #[serde(rename = "R2")]
    pub r2: Vec<Vec<f64>>,
}

impl RelationDocument {
    pub fn from_relation(rel: &LinearRelation, name: Option<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            name,
            r1: matrix_to_nested(rel.r1()),
            r2: matrix_to_nested(rel.r2()),
        }
    }

    pub fn into_relation(&self) -> Result<LinearRelation> {
        check_schema(&self.schema_version, "relation document")?;
        let rows = self.r1.len();
        if self.r2.len() != rows {
            return Err(Error::Invalid(format!(
                "fields R1/R2: row counts differ ({rows} vs {})",
                self.r2.len()
            )));
        }
        let n1 = self.r1.first().map(|r| r.len()).unwrap_or(0);
        let n2 = self.r2.first().map(|r| r.len()).unwrap_or(0);
        let r1 = matrix_from_nested("R1", rows, n1, &self.r1)?;
        let r2 = matrix_from_nested("R2", rows, n2, &self.r2)?;
        LinearRelation::new(r1, r2)
    }
}

/// Serialized square transformation matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformDocument {
    pub schema_version: String,
    #[serde(rename = "T")]
    pub t: Vec<Vec<f64>>,
}

impl TransformDocument {
    pub fn from_matrix(t: &DMatrix<f64>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            t: matrix_to_nested(t),
        }
    }

    pub fn into_matrix(&self) -> Result<DMatrix<f64>> {
        check_schema(&self.schema_version, "transform document")?;
        let rows = self.t.len();
        let cols = self.t.first().map(|r| r.len()).unwrap_or(0);
        matrix_from_nested("T", rows, cols, &self.t)
    }
}

/// Serialized deterministic input sequence; row `t` is `u(t)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDocument {
    pub schema_version: String,
    pub u: Vec<Vec<f64>>,
}

impl InputDocument {
    pub fn from_input(u: &InputSequence) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            u: u.values().iter().map(|v| v.iter().copied().collect()).collect(),
        }
    }

    pub fn into_input(&self, dim: usize) -> Result<InputSequence> {
        check_schema(&self.schema_version, "input document")?;
        let values = self
            .u
            .iter()
            .enumerate()
            .map(|(t, row)| {
                if row.len() != dim {
                    return Err(Error::Invalid(format!(
                        "field u: row {t} has length {}, expected {dim}",
                        row.len()
                    )));
                }
                Ok(DVector::from_column_slice(row))
            })
            .collect::<Result<Vec<_>>>()?;
        InputSequence::new(dim, values)
    }
}

/// One box to test at one time; `null` bounds mean unbounded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxEntry {
    pub t: usize,
    /// Per-coordinate `[lower, upper]` with `null` for an infinite bound.
    pub intervals: Vec<[Option<f64>; 2]>,
}

impl BoxEntry {
    pub fn into_box(&self) -> Result<BoxSet> {
        let intervals = self
            .intervals
            .iter()
            .map(|[lo, hi]| {
                (
                    lo.unwrap_or(f64::NEG_INFINITY),
                    hi.unwrap_or(f64::INFINITY),
                )
            })
            .collect();
        BoxSet::new(intervals)
    }
}

/// Serialized list of box tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxesDocument {
    pub schema_version: String,
    pub boxes: Vec<BoxEntry>,
}

/// Loads a JSON document from a file, reporting parse positions on failure.
pub fn load_document<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Invalid(format!(
            "{}: {e} (line {}, column {})",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

/// Writes a JSON document with a trailing newline.
pub fn save_document<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| Error::Invalid(format!("serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_system(path: &Path) -> Result<StochasticLinearSystem> {
    load_document::<SystemDocument>(path)?.into_system()
}

pub fn load_relation(path: &Path) -> Result<LinearRelation> {
    load_document::<RelationDocument>(path)?.into_relation()
}
