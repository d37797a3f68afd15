//! Dense complex linear algebra on top of nalgebra's SVD: numerical rank,
//! null spaces, orthonormal bases and principal angles.
//!
//! Every rank decision uses a threshold relative to the largest singular
//! value. Principal angles are measured through their sines so that angles
//! far below `sqrt(eps)` remain resolvable.

use nalgebra::DMatrix;
use num_traits::Zero;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// Singular values in decreasing order with the matching left and right
/// singular vectors (thin factors).
pub struct SortedSvd {
    pub values: Vec<f64>,
    pub u: CMatrix,
    pub v: CMatrix,
}

pub fn svd(a: &CMatrix) -> SortedSvd {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return SortedSvd {
            values: Vec::new(),
            u: CMatrix::zeros(m, 0),
            v: CMatrix::zeros(n, 0),
        };
    }
    let s = a.clone().svd(true, true);
    let u = s.u.expect("requested U");
    let v = s.v_t.expect("requested V^*").adjoint();
    let mut order: Vec<usize> = (0..s.singular_values.len()).collect();
    order.sort_by(|&i, &j| s.singular_values[j].total_cmp(&s.singular_values[i]));
    let values = order.iter().map(|&i| s.singular_values[i]).collect();
    let u = CMatrix::from_fn(m, order.len(), |r, c| u[(r, order[c])]);
    let v = CMatrix::from_fn(n, order.len(), |r, c| v[(r, order[c])]);
    SortedSvd { values, u, v }
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    svd(a).values
}

fn count_above(values: &[f64], tau_rel: f64) -> usize {
    let top = values.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    values.iter().filter(|&&s| s > tau_rel * top).count()
}

pub fn rank(a: &CMatrix, tau_rel: f64) -> usize {
    count_above(&singular_values(a), tau_rel)
}

pub fn smallest_singular_value(a: &CMatrix) -> f64 {
    let (m, n) = a.shape();
    if m < n {
        return 0.0;
    }
    singular_values(a).last().copied().unwrap_or(0.0)
}

/// Orthonormal basis (columns) of the null space of `a`.
pub fn null_space(a: &CMatrix, tau_rel: f64) -> CMatrix {
    let (m, n) = a.shape();
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    // pad to at least n rows so that the SVD returns a full right factor
    let padded = if m < n {
        let mut p = CMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let s = svd(&padded);
    let r = count_above(&s.values, tau_rel);
    s.v.columns(r, n - r).into_owned()
}

/// Orthonormal basis (columns) of the column space of `a`.
pub fn range_basis(a: &CMatrix, tau_rel: f64) -> CMatrix {
    let s = svd(a);
    let r = count_above(&s.values, tau_rel);
    s.u.columns(0, r).into_owned()
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns `q`.
pub fn complement(q: &CMatrix, tau_rel: f64) -> CMatrix {
    null_space(&q.adjoint(), tau_rel)
}

/// Sines of the angles between the columns of `qb` and the span of the
/// orthonormal columns `qa`, i.e. the singular values of `(I - Qa Qa^*) Qb`,
/// largest first.
pub fn residual_sines(qa: &CMatrix, qb: &CMatrix) -> Vec<f64> {
    if qb.ncols() == 0 {
        return Vec::new();
    }
    let r = qb - qa * (qa.adjoint() * qb);
    singular_values(&r).into_iter().map(|s| s.min(1.0)).collect()
}

/// Largest principal angle between two subspaces of equal dimension given by
/// orthonormal bases; `pi/2` when the dimensions differ.
pub fn largest_principal_angle(qa: &CMatrix, qb: &CMatrix) -> f64 {
    if qa.ncols() != qb.ncols() || qa.nrows() != qb.nrows() {
        return std::f64::consts::FRAC_PI_2;
    }
    let s1 = residual_sines(qa, qb).first().copied().unwrap_or(0.0);
    let s2 = residual_sines(qb, qa).first().copied().unwrap_or(0.0);
    s1.max(s2).asin()
}

/// Smallest principal angle between two subspaces (any dimensions), from the
/// largest cosine.
pub fn smallest_principal_angle(qa: &CMatrix, qb: &CMatrix) -> f64 {
    if qa.ncols() == 0 || qb.ncols() == 0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let cos = singular_values(&(qa.adjoint() * qb)).first().copied().unwrap_or(0.0);
    cos.clamp(-1.0, 1.0).acos()
}

pub fn column(v: &[C64]) -> CMatrix {
    CMatrix::from_column_slice(v.len(), 1, v)
}

pub fn matvec(a: &CMatrix, v: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), v.len(), "matvec dimension mismatch");
    (a * column(v)).iter().copied().collect()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn diag_real(d: &[f64]) -> CMatrix {
    CMatrix::from_fn(d.len(), d.len(), |i, j| if i == j { C64::new(d[i], 0.0) } else { C64::zero() })
}

/// Builds a matrix from row vectors.
pub fn from_rows(rows: &[Vec<C64>], ncols: usize) -> CMatrix {
    CMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

/// Horizontal concatenation.
pub fn hcat(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), b.nrows(), "hcat row mismatch");
    let mut out = CMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// JSON form of a complex matrix: a list of rows whose entries are numbers
/// or `[re, im]` pairs.
pub fn matrix_to_json(a: &CMatrix) -> Value {
    Value::Array(
        (0..a.nrows())
            .map(|i| Value::Array((0..a.ncols()).map(|j| complex_to_json(a[(i, j)])).collect()))
            .collect(),
    )
}

pub fn complex_to_json(z: C64) -> Value {
    serde_json::json!([z.re, z.im])
}

pub fn complex_from_json(v: &Value) -> Result<C64> {
    match v {
        Value::Number(x) => Ok(C64::new(x.as_f64().unwrap_or(f64::NAN), 0.0)),
        Value::Array(p) if p.len() == 2 => {
            let re = p[0].as_f64().ok_or_else(|| Error::Parse(format!("bad real part {v}")))?;
            let im = p[1].as_f64().ok_or_else(|| Error::Parse(format!("bad imaginary part {v}")))?;
            Ok(C64::new(re, im))
        }
        Value::Object(o) => {
            let re = o.get("re").and_then(Value::as_f64).unwrap_or(0.0);
            let im = o.get("im").and_then(Value::as_f64).unwrap_or(0.0);
            Ok(C64::new(re, im))
        }
        _ => Err(Error::Parse(format!("expected complex number, got {v}"))),
    }
}

pub fn matrix_from_json(v: &Value) -> Result<CMatrix> {
    let rows = v.as_array().ok_or_else(|| Error::Parse("matrix must be a list of rows".into()))?;
    let parsed: Vec<Vec<C64>> = rows
        .iter()
        .map(|r| {
            r.as_array()
                .ok_or_else(|| Error::Parse("matrix row must be a list".into()))?
                .iter()
                .map(complex_from_json)
                .collect()
        })
        .collect::<Result<_>>()?;
    let ncols = parsed.first().map_or(0, Vec::len);
    if parsed.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged matrix".into()));
    }
    Ok(from_rows(&parsed, ncols))
}

pub fn vector_from_json(v: &Value) -> Result<Vec<C64>> {
    v.as_array()
        .ok_or_else(|| Error::Parse("vector must be a list".into()))?
        .iter()
        .map(complex_from_json)
        .collect()
}

pub fn vector_to_json(v: &[C64]) -> Value {
    Value::Array(v.iter().map(|&z| complex_to_json(z)).collect())
}

/// Real-valued identity as a complex matrix.
pub fn identity(n: usize) -> CMatrix {
    DMatrix::identity(n, n)
}
