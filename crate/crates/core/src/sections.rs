//! Linear subspaces and the transfer `V -> ker(A M(f))` of source subspaces
//! `V = ker A` to target subspaces, together with a sampled check that `f`
//! maps affine slices `(V + v) cap B` onto affine sections of its image.

use num_traits::Zero;
use rand::Rng;
use rayon::prelude::*;
use serde_json::Value;

use crate::certificate::{worst, Certificate, Witness};
use crate::error::{Error, Result};
use crate::fibration::Fibration;
use crate::isometry::{self, IsometryMap};
use crate::tolerances::Tolerances;
use crate::{linalg, sampling, CMatrix, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum Presentation {
    /// Columns spanning the subspace.
    Span(CMatrix),
    /// Rows `A` with the subspace equal to `ker A`.
    Kernel(CMatrix),
}

#[derive(Clone, Debug)]
pub struct LinearSubspace {
    ambient: usize,
    basis: CMatrix,
    presentation: Presentation,
}

impl LinearSubspace {
    /// Span of the columns of `m`, which must have full column rank.
    pub fn from_span(m: CMatrix, tau_rank: f64) -> Result<Self> {
        let r = linalg::rank(&m, tau_rank);
        if r != m.ncols() {
            return Err(Error::Rank(format!("{} spanning vectors have rank {r}", m.ncols())));
        }
        Ok(LinearSubspace { ambient: m.nrows(), basis: linalg::range_basis(&m, tau_rank), presentation: Presentation::Span(m) })
    }

    /// `ker a` for `a` of full row rank.
    pub fn from_kernel(a: CMatrix, tau_rank: f64) -> Result<Self> {
        let r = linalg::rank(&a, tau_rank);
        if r != a.nrows() {
            return Err(Error::Rank(format!("{} defining equations have rank {r}", a.nrows())));
        }
        Ok(LinearSubspace { ambient: a.ncols(), basis: linalg::null_space(&a, tau_rank), presentation: Presentation::Kernel(a) })
    }

    pub fn whole(d: usize) -> Self {
        LinearSubspace { ambient: d, basis: linalg::identity(d), presentation: Presentation::Kernel(CMatrix::zeros(0, d)) }
    }

    /// Span of the listed coordinate axes.
    pub fn coordinate(d: usize, axes: &[usize]) -> Result<Self> {
        let m = CMatrix::from_fn(d, axes.len(), |i, j| if axes[j] == i { C64::new(1.0, 0.0) } else { C64::zero() });
        LinearSubspace::from_span(m, 1e-9)
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    /// Orthonormal basis, `ambient x dim`.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn presentation(&self) -> &Presentation {
        &self.presentation
    }

    /// Rows annihilating the subspace: conjugate transposes of an orthonormal
    /// complement basis, `(ambient - dim) x ambient`.
    pub fn annihilator(&self) -> CMatrix {
        linalg::complement(&self.basis, 1e-12).adjoint()
    }

    pub fn to_kernel_presentation(&self, tau_rank: f64) -> Result<Self> {
        LinearSubspace::from_kernel(self.annihilator(), tau_rank)
    }

    pub fn to_span_presentation(&self, tau_rank: f64) -> Result<Self> {
        LinearSubspace::from_span(self.basis.clone(), tau_rank)
    }

    /// Largest principal angle; `pi/2` when dimensions differ.
    pub fn angle_to(&self, other: &LinearSubspace) -> f64 {
        linalg::largest_principal_angle(&self.basis, &other.basis)
    }

    pub fn same_as(&self, other: &LinearSubspace, angle: f64) -> bool {
        self.ambient == other.ambient && self.dim() == other.dim() && self.angle_to(other) <= angle
    }

    /// Sine of the largest angle between `other` and `self`; zero when
    /// `other` is contained in `self`.
    pub fn containment_gap(&self, other: &LinearSubspace) -> f64 {
        linalg::residual_sines(&self.basis, &other.basis).first().copied().unwrap_or(0.0)
    }

    pub fn contains(&self, other: &LinearSubspace, angle: f64) -> bool {
        other.dim() <= self.dim() && self.containment_gap(other) <= angle.sin()
    }

    /// Component of `p` orthogonal to the subspace.
    pub fn residual(&self, p: &[C64]) -> Vec<C64> {
        let q = &self.basis;
        linalg::sub(p, &linalg::matvec(q, &linalg::matvec(&q.adjoint(), p)))
    }

    pub fn distance(&self, p: &[C64]) -> f64 {
        linalg::norm(&self.residual(p))
    }

    pub fn witness(&self) -> Witness {
        Witness::subspace(&self.basis)
    }

    /// `{"span": [v1, v2, ...]}` (spanning vectors) or
    /// `{"kernel": [a1, a2, ...]}` (rows of `A`).
    pub fn from_json(v: &Value, tau_rank: f64) -> Result<Self> {
        let vectors = |key: &str| -> Result<Option<Vec<Vec<C64>>>> {
            v.get(key).map(|rows| rows.as_array().ok_or_else(|| Error::Parse(format!("{key} must be a list"))))
                .transpose()?
                .map(|rows| rows.iter().map(linalg::vector_from_json).collect())
                .transpose()
        };
        let ambient = v.get("ambient").and_then(Value::as_u64).map(|d| d as usize);
        let check = |rows: &[Vec<C64>]| -> Result<usize> {
            let d = rows.first().map(Vec::len).or(ambient).ok_or_else(|| Error::Parse("empty subspace needs an ambient dimension".into()))?;
            if rows.iter().any(|r| r.len() != d) {
                return Err(Error::Parse("vectors of different lengths".into()));
            }
            Ok(d)
        };
        if let Some(span) = vectors("span")? {
            let d = check(&span)?;
            return LinearSubspace::from_span(CMatrix::from_fn(d, span.len(), |i, j| span[j][i]), tau_rank);
        }
        if let Some(rows) = vectors("kernel")? {
            let d = check(&rows)?;
            return LinearSubspace::from_kernel(linalg::from_rows(&rows, d), tau_rank);
        }
        Err(Error::Parse("subspace JSON needs a \"span\" or \"kernel\" entry".into()))
    }

    pub fn to_json(&self) -> Value {
        let cols: Vec<Value> = self.basis.column_iter().map(|c| linalg::vector_to_json(c.as_slice())).collect();
        serde_json::json!({ "ambient": self.ambient, "span": cols })
    }
}

/// Result of transferring a source subspace.
#[derive(Clone, Debug)]
pub struct Transfer {
    /// `ker(A M(f))`.
    pub subspace: LinearSubspace,
    /// `span[Jf(0) V | ker M(f)]`.
    pub direct_sum: LinearSubspace,
    /// Largest principal angle between the two presentations.
    pub angle: f64,
}

fn hypothesis_notes(f: &IsometryMap) -> Vec<String> {
    let mut notes = Vec::new();
    let k = f.k();
    if k != k.round() || k > f.target().rank() as f64 || !f.target().is_irreducible() {
        notes.push(format!(
            "hypothesis flag: k = {k} with target {}; the transfer statement assumes an integer k <= rank and an irreducible target",
            f.target()
        ));
    }
    notes
}

pub fn transfer(f: &IsometryMap, v: &LinearSubspace, tol: &Tolerances) -> Result<Transfer> {
    let (n, big_n) = (f.source_dim(), f.target_dim());
    if v.ambient() != n {
        return Err(Error::Dimension(format!("subspace of C^{} for a source of dimension {n}", v.ambient())));
    }
    let m = v.dim();
    if m < 1 || m + 1 > n {
        return Err(Error::Dimension(format!("subspace dimension {m} outside 1..={}", n.saturating_sub(1))));
    }
    let mf = isometry::matrix_m(f, tol)?;
    let jac = isometry::jacobian_at_zero(f, tol)?;
    let subspace = LinearSubspace::from_kernel(v.annihilator() * &mf, tol.tau_rank)?;
    if subspace.dim() != big_n - n + m {
        return Err(Error::Rank(format!("transfer has dimension {} instead of {}", subspace.dim(), big_n - n + m)));
    }
    let kernel = linalg::null_space(&mf, tol.tau_rank);
    let direct_sum = LinearSubspace::from_span(linalg::hcat(&(&jac.matrix * v.basis()), &kernel), tol.tau_rank)?;
    let angle = subspace.angle_to(&direct_sum);
    if angle.is_nan() || angle > tol.angle_agree {
        return Err(Error::Verification(format!("kernel and direct-sum presentations differ by angle {angle:e}")));
    }
    Ok(Transfer { subspace, direct_sum, angle })
}

/// `[Jf(0) Z | Z_0]` together with its angle to the transfer of `span Z`.
pub fn homogeneous_coordinates(f: &IsometryMap, z: &CMatrix, tol: &Tolerances) -> Result<(CMatrix, f64)> {
    let v = LinearSubspace::from_span(z.clone(), tol.tau_rank)?;
    let t = transfer(f, &v, tol)?;
    let jac = isometry::jacobian_at_zero(f, tol)?;
    let kernel = linalg::null_space(&isometry::matrix_m(f, tol)?, tol.tau_rank);
    let coords = linalg::hcat(&(&jac.matrix * z), &kernel);
    let span = LinearSubspace::from_span(coords.clone(), tol.tau_rank)?;
    Ok((coords, span.angle_to(&t.subspace)))
}

/// Sampled check that `f((V + v) cap B) = (T + Jf(0) v) cap f(B)` with
/// `T` the transfer of `V`.
pub fn section_preservation_check(
    f: &IsometryMap,
    v_space: &LinearSubspace,
    v: &[C64],
    samples: usize,
    rng: &mut impl Rng,
    tol: &Tolerances,
) -> Result<Certificate> {
    let n = f.source_dim();
    if n < 2 {
        return Err(Error::Hypothesis("affine sections need a source of dimension at least 2".into()));
    }
    if v.len() != n {
        return Err(Error::Dimension("offset has the wrong length".into()));
    }
    let outer = 0.9;
    let t = transfer(f, v_space, tol)?.subspace;
    let fib = Fibration::new(f.clone(), tol)?;
    let jac = fib.jacobian().matrix.clone();
    // closest point of the slice to the origin and the slice disc radius
    let p0 = v_space.residual(v);
    let gap = linalg::norm(&p0);
    if gap >= outer {
        return Err(Error::Domain(format!("slice V + v misses the {outer}-ball (distance {gap})")));
    }
    if !f.source().contains(v, 0.0) {
        return Err(Error::Domain("offset v lies outside the source".into()));
    }
    let rho = (outer * outer - gap * gap).sqrt();
    let q = v_space.basis();
    let center = linalg::matvec(&q.adjoint(), &linalg::sub(&p0, v));
    let sigma = 0.7 * rho / (v_space.dim() as f64).sqrt();
    let mut on_slice = Vec::with_capacity(samples);
    for _ in 0..samples * 200 {
        if on_slice.len() == samples {
            break;
        }
        let g: Vec<C64> = center.iter().map(|c| c + sampling::gaussian(rng) * sigma).collect();
        let w: Vec<C64> = v.iter().zip(linalg::matvec(q, &g)).map(|(a, b)| a + b).collect();
        if linalg::norm(&w) < outer {
            on_slice.push(w);
        }
    }
    let mut off_slice = Vec::with_capacity(samples);
    for _ in 0..samples * 200 {
        if off_slice.len() == samples {
            break;
        }
        let w = sampling::ball(rng, n, outer);
        if v_space.distance(&linalg::sub(&w, v)) > 1e-3 {
            off_slice.push(w);
        }
    }
    if on_slice.is_empty() {
        return Err(Error::Domain("no sample found on the slice".into()));
    }
    let jv = linalg::matvec(&jac, v);
    let fv = f.eval(v)?;

    let forward = on_slice
        .par_iter()
        .map(|w| -> Result<(f64, f64)> {
            let x = f.eval(w)?;
            let fwd = t.distance(&linalg::sub(&x, &jv)).max(t.distance(&linalg::sub(&x, &fv)));
            let back = fib.project_unchecked(&x);
            Ok((fwd, v_space.distance(&linalg::sub(&back, v))))
        })
        .collect::<Result<Vec<_>>>()?;
    let forward_residual = forward.iter().map(|r| r.0).fold(0.0, worst);
    let reverse_residual = forward.iter().map(|r| r.1).fold(0.0, worst);
    let off = off_slice
        .par_iter()
        .map(|w| -> Result<f64> { Ok(t.distance(&linalg::sub(&f.eval(w)?, &jv))) })
        .collect::<Result<Vec<_>>>()?;
    let false_hits = off.iter().filter(|&&d| d.is_nan() || d <= tol.eps_fun).count();
    let consistency = t.distance(&linalg::sub(&fv, &jv));

    let mut cert = Certificate::new("section_preservation")
        .metric("forward_residual", forward_residual)
        .metric("reverse_residual", reverse_residual)
        .metric("consistency_residual", consistency)
        .metric("off_slice_false_hits", false_hits as f64)
        .metric("on_slice_samples", on_slice.len() as f64)
        .metric("off_slice_samples", off.len() as f64)
        .metric("transfer_dim", t.dim() as f64)
        .tolerance("eps_fun", tol.eps_fun)
        .tolerance("eps_reverse", tol.eps_reverse)
        .pass_if(
            forward_residual <= tol.eps_fun
                && reverse_residual <= tol.eps_reverse
                && consistency <= tol.eps_fun
                && false_hits == 0,
        );
    if on_slice.len() < samples {
        cert = cert.note(format!("only {} of {samples} slice samples found", on_slice.len()));
    }
    for note in hypothesis_notes(f) {
        cert = cert.note(note);
    }
    Ok(cert)
}

/// Smallest principal angle between transfers of random distinct pairs of
/// subspaces, dimensions cycling through `1..n`.
pub fn injectivity_check(f: &IsometryMap, pairs: usize, rng: &mut impl Rng, tol: &Tolerances) -> Result<Certificate> {
    let n = f.source_dim();
    if n < 2 {
        return Err(Error::Hypothesis("injectivity needs a source of dimension at least 2".into()));
    }
    let mut separation = f64::INFINITY;
    for i in 0..pairs {
        let m = 1 + i % (n - 1);
        let (a, b) = (random_subspace(n, m, rng), random_subspace(n, m, rng));
        let (ta, tb) = (transfer(f, &a, tol)?, transfer(f, &b, tol)?);
        separation = separation.min(ta.subspace.angle_to(&tb.subspace));
    }
    Ok(Certificate::new("transfer_injectivity")
        .metric("min_separation", separation)
        .metric("pairs", pairs as f64)
        .tolerance("angle", tol.angle)
        .pass_if(separation > tol.angle))
}

/// Random subspace of dimension `m` in `C^n`.
pub fn random_subspace(n: usize, m: usize, rng: &mut impl Rng) -> LinearSubspace {
    let g = CMatrix::from_fn(n, m, |_, _| sampling::gaussian(rng));
    LinearSubspace::from_span(g, 1e-9).expect("Gaussian matrices have full rank")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isometry::catalog;
    use crate::sampling::Seeds;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn presentations_round_trip() {
        let mut rng = Seeds::new(1).stream("rt");
        for (n, m) in [(3, 1), (4, 2), (5, 4)] {
            let v = random_subspace(n, m, &mut rng);
            let k = v.to_kernel_presentation(1e-9).unwrap();
            let back = k.to_span_presentation(1e-9).unwrap();
            assert!(v.angle_to(&k) < 1e-10 && v.angle_to(&back) < 1e-10);
            assert_eq!(k.dim(), m);
        }
        let bad = CMatrix::from_fn(3, 2, |i, _| C64::new(i as f64, 0.0));
        assert!(matches!(LinearSubspace::from_span(bad.clone(), 1e-9), Err(Error::Rank(_))));
        assert!(matches!(LinearSubspace::from_kernel(bad.transpose(), 1e-9), Err(Error::Rank(_))));
    }

    #[test]
    fn json_forms() {
        let v = LinearSubspace::from_json(&serde_json::json!({"span": [[1, 0, 0], [0, [0, 1], 0]]}), 1e-9).unwrap();
        assert_eq!(v.dim(), 2);
        let k = LinearSubspace::from_json(&serde_json::json!({"kernel": [[0, 0, 1]]}), 1e-9).unwrap();
        assert!(v.same_as(&k, 1e-12));
        let back = LinearSubspace::from_json(&v.to_json(), 1e-9).unwrap();
        assert!(back.same_as(&v, 1e-12));
        assert!(LinearSubspace::from_json(&serde_json::json!({"basis": []}), 1e-9).is_err());
    }

    #[test]
    fn transfer_examples() {
        let t = tol();
        // identity: transfer is the same plane
        let id = catalog::identity(3);
        let v = LinearSubspace::coordinate(3, &[0, 1]).unwrap();
        assert!(transfer(&id, &v, &t).unwrap().subspace.same_as(&v, 1e-12));
        // typeIV graph: span{e1} goes to span{e1, e3}
        let f = catalog::type_iv_graph(3, 6);
        let tr = transfer(&f, &LinearSubspace::coordinate(2, &[0]).unwrap(), &t).unwrap();
        assert_eq!(tr.subspace.dim(), 2);
        assert!(tr.subspace.same_as(&LinearSubspace::coordinate(3, &[0, 2]).unwrap(), 1e-12));
        assert!(tr.angle < 1e-10);
        // dimension out of range
        assert!(matches!(transfer(&f, &LinearSubspace::whole(2), &t), Err(Error::Dimension(_))));
        assert!(matches!(transfer(&id, &LinearSubspace::coordinate(2, &[0]).unwrap(), &t), Err(Error::Dimension(_))));
    }

    #[test]
    fn injective_and_monotone() {
        let t = tol();
        let mut rng = Seeds::new(2).stream("inj");
        let f = catalog::type_iv_graph(5, 4);
        for _ in 0..20 {
            let a = random_subspace(4, 2, &mut rng);
            let b = random_subspace(4, 2, &mut rng);
            let (ta, tb) = (transfer(&f, &a, &t).unwrap(), transfer(&f, &b, &t).unwrap());
            assert!(ta.subspace.angle_to(&tb.subspace) > 1e-8);
            // a line inside a maps into the transfer of a
            let line = LinearSubspace::from_span(a.basis().columns(0, 1).into_owned(), 1e-9).unwrap();
            let tl = transfer(&f, &line, &t).unwrap();
            assert!(ta.subspace.contains(&tl.subspace, 1e-8));
        }
    }

    #[test]
    fn homogeneous_coordinates_are_well_defined() {
        let t = tol();
        let mut rng = Seeds::new(3).stream("hc");
        let f = catalog::type_iv_graph(4, 4);
        let z = CMatrix::from_fn(3, 2, |_, _| sampling::gaussian(&mut rng));
        let a = CMatrix::from_fn(2, 2, |_, _| sampling::gaussian(&mut rng));
        let (c1, ang1) = homogeneous_coordinates(&f, &z, &t).unwrap();
        let (c2, ang2) = homogeneous_coordinates(&f, &(&z * a), &t).unwrap();
        assert!(ang1 < 1e-10 && ang2 < 1e-10);
        let (s1, s2) = (LinearSubspace::from_span(c1, 1e-9).unwrap(), LinearSubspace::from_span(c2, 1e-9).unwrap());
        assert!(s1.same_as(&s2, 1e-10));
    }

    #[test]
    fn section_preservation_examples() {
        let t = tol();
        let mut rng = Seeds::new(4).stream("sec");
        let f = catalog::type_iv_graph(3, 8);
        let v = LinearSubspace::coordinate(2, &[0]).unwrap();
        let off = [C64::zero(), C64::new(0.4, 0.0)];
        let cert = section_preservation_check(&f, &v, &off, 300, &mut rng, &t).unwrap();
        assert!(cert.passed(), "{}", cert.summary());
        let cert = section_preservation_check(&f, &v, &[C64::zero(); 2], 100, &mut rng, &t).unwrap();
        assert!(cert.passed());
        assert_eq!(cert.get("consistency_residual"), 0.0);
        assert!(matches!(
            section_preservation_check(&catalog::diagonal(), &LinearSubspace::whole(1), &[C64::zero()], 10, &mut rng, &t),
            Err(Error::Hypothesis(_))
        ));
        let far = [C64::zero(), C64::new(0.95, 0.0)];
        assert!(matches!(section_preservation_check(&f, &v, &far, 10, &mut rng, &t), Err(Error::Domain(_))));
    }
}
