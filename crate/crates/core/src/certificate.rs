//! Machine-readable outcome of a verification check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{CMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Degenerate,
    NonDegenerateCertified,
    Inconclusive,
}

impl Status {
    pub fn is_failure(self) -> bool {
        self == Status::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Orthonormal basis vectors of a subspace, each as `[re, im]` pairs.
    Subspace { ambient: usize, dim: usize, basis: Vec<Vec<[f64; 2]>> },
    MultiIndices { indices: Vec<Vec<u32>> },
    Points { points: Vec<Vec<[f64; 2]>> },
}

impl Witness {
    pub fn subspace(basis: &CMatrix) -> Self {
        Witness::Subspace {
            ambient: basis.nrows(),
            dim: basis.ncols(),
            basis: basis.column_iter().map(|c| c.iter().map(|z| [z.re, z.im]).collect()).collect(),
        }
    }

    pub fn points(points: &[Vec<C64>]) -> Self {
        Witness::Points {
            points: points.iter().map(|p| p.iter().map(|z| [z.re, z.im]).collect()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub check: String,
    pub status: Status,
    pub metrics: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn new(check: impl Into<String>) -> Self {
        Certificate {
            check: check.into(),
            status: Status::Inconclusive,
            metrics: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            witness: None,
            notes: Vec::new(),
        }
    }

    pub fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    pub fn tolerance(mut self, key: &str, value: f64) -> Self {
        self.tolerances.insert(key.to_string(), value);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn with_witness(mut self, witness: Witness) -> Self {
        self.witness = Some(witness);
        self
    }

    pub fn with_status(mut self, status: Status) -> Self {
        self.status = status;
        self
    }

    pub fn pass_if(self, ok: bool) -> Self {
        self.with_status(if ok { Status::Pass } else { Status::Fail })
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn get(&self, key: &str) -> f64 {
        self.metrics.get(key).copied().unwrap_or(f64::NAN)
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let metrics: Vec<String> = self.metrics.iter().map(|(k, v)| format!("{k}={v:.3e}")).collect();
        format!("{:<40} {:?} {}", self.check, self.status, metrics.join(" "))
    }
}

/// Maximum that propagates NaN, so a broken sample cannot hide.
pub fn worst(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}
