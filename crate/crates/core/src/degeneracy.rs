//! Jet-rank linear degeneracy, degeneracy inherited from slices and
//! factorizations, point-avoidance witnesses and the sufficient
//! non-degeneracy certificate.

use num_traits::Zero;
use rand::Rng;
use rayon::prelude::*;

use crate::certificate::{worst, Certificate, Status, Witness};
use crate::error::{Error, Result};
use crate::isometry::{self, IsometryMap};
use crate::sections::{self, LinearSubspace};
use crate::tolerances::Tolerances;
use crate::{linalg, sampling, CMatrix, DomainSpec, MultiIndex, C64};

pub const DEFAULT_MAX_ORDER: usize = 6;

/// Taylor derivatives `d^I F_j(0) = I! c_{I,j}` for `1 <= |I| <= k_max`,
/// rows in graded-lex order.
#[derive(Clone, Debug)]
pub struct JetMatrix {
    pub indices: Vec<MultiIndex>,
    pub rows: CMatrix,
    pub k_max: usize,
}

impl JetMatrix {
    pub fn new(f: &IsometryMap, k_max: usize) -> Result<Self> {
        if k_max < 1 {
            return Err(Error::Hypothesis("maximal order must be at least 1".into()));
        }
        if k_max > f.order() {
            return Err(Error::Hypothesis(format!("map has jets only through order {}", f.order())));
        }
        let n = f.source_dim();
        let indices: Vec<MultiIndex> = (1..=k_max).flat_map(|d| MultiIndex::all_of_degree(n, d)).collect();
        let rows = CMatrix::from_fn(indices.len(), f.target_dim(), |r, j| {
            f.jets()[j].coeff(&indices[r]) * indices[r].factorial()
        });
        Ok(JetMatrix { indices, rows, k_max })
    }

    pub fn rank(&self, tau_rank: f64) -> usize {
        linalg::rank(&self.rows, tau_rank)
    }

    /// Greedy graded-lex selection of linearly independent rows by
    /// Gram-Schmidt with a relative threshold. Returns row positions.
    pub fn select_rows(&self, tau_rank: f64) -> Vec<usize> {
        let big_n = self.rows.ncols();
        let scale = self.rows.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
        let mut basis: Vec<nalgebra::DVector<C64>> = Vec::new();
        let mut picked = Vec::new();
        for (r, row) in self.rows.row_iter().enumerate() {
            if picked.len() == big_n || scale == 0.0 {
                break;
            }
            let mut v: nalgebra::DVector<C64> = row.transpose();
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dotc(&v);
                    v -= q * c;
                }
            }
            let nv = v.norm();
            if nv > tau_rank * scale {
                basis.push(v / C64::new(nv, 0.0));
                picked.push(r);
            }
        }
        picked
    }

    fn submatrix(&self, picked: &[usize]) -> CMatrix {
        CMatrix::from_fn(picked.len(), self.rows.ncols(), |i, j| self.rows[(picked[i], j)])
    }

    fn witness(&self, picked: &[usize]) -> Witness {
        Witness::MultiIndices { indices: picked.iter().map(|&r| self.indices[r].exponents().to_vec()).collect() }
    }
}

/// True when every jet is an exact polynomial of degree at most `k_max`.
fn polynomial_within(f: &IsometryMap, k_max: usize) -> bool {
    f.jets().iter().all(|j| j.is_exact() && j.max_degree() <= k_max)
}

/// Linear span of the jet rows; `F(B)` lies in it through order `k_max`.
pub fn image_span(jm: &JetMatrix, tol: &Tolerances) -> Result<LinearSubspace> {
    let cols = jm.rows.transpose();
    let basis = linalg::range_basis(&cols, tol.tau_rank);
    LinearSubspace::from_span(basis, tol.tau_rank)
}

pub fn linear_degeneracy(f: &IsometryMap, k_max: usize, tol: &Tolerances) -> Result<Certificate> {
    let jm = JetMatrix::new(f, k_max)?;
    let big_n = f.target_dim();
    let r = jm.rank(tol.tau_rank);
    let cert = Certificate::new("linear_degeneracy")
        .metric("rank", r as f64)
        .metric("target_dim", big_n as f64)
        .tolerance("tau_rank", tol.tau_rank)
        .tolerance("k_max", k_max as f64);
    if r < big_n {
        let w = image_span(&jm, tol)?;
        let ann = w.annihilator();
        let orth = linalg::max_abs(&(&ann * jm.rows.transpose()));
        let cert = cert
            .metric("witness_dim", w.dim() as f64)
            .metric("annihilator_residual", orth)
            .with_witness(w.witness())
            .with_status(Status::Degenerate);
        return Ok(if polynomial_within(f, k_max) {
            cert.note("map is polynomial of degree <= k_max: image lies in W")
        } else {
            cert.note(format!("image lies in W through order {k_max}"))
        });
    }
    let picked = jm.select_rows(tol.tau_rank);
    if picked.len() < big_n {
        return Ok(cert
            .metric("selected", picked.len() as f64)
            .with_status(Status::Inconclusive)
            .note("full numerical rank but greedy selection stalled"));
    }
    Ok(cert
        .metric("selected_min_singular_value", linalg::smallest_singular_value(&jm.submatrix(&picked)))
        .with_witness(jm.witness(&picked))
        .with_status(Status::NonDegenerateCertified))
}

/// Degenerate-case helper: the witness subspace of [`linear_degeneracy`].
pub fn degeneracy_subspace(f: &IsometryMap, k_max: usize, tol: &Tolerances) -> Result<Option<LinearSubspace>> {
    let jm = JetMatrix::new(f, k_max)?;
    if jm.rank(tol.tau_rank) < f.target_dim() {
        Ok(Some(image_span(&jm, tol)?))
    } else {
        Ok(None)
    }
}

/// Sampled check that `f(ball ∩ V)` lies in `w`, with `V` given by an
/// orthonormal basis `q` of the source (the whole source when `None`).
pub fn image_containment(
    f: &IsometryMap,
    w: &LinearSubspace,
    q: Option<&CMatrix>,
    samples: usize,
    rng: &mut impl Rng,
    tol: &Tolerances,
) -> Result<Certificate> {
    let n = f.source_dim();
    let radius = if f.has_exact_evaluator() { 0.9 } else { tol.r_sample };
    let m = q.map_or(n, |q| q.ncols());
    let pts: Vec<Vec<C64>> = (0..samples)
        .map(|_| {
            let g = sampling::ball(rng, m, radius);
            q.map_or(g.clone(), |q| linalg::matvec(q, &g))
        })
        .collect();
    let residual = pts
        .par_iter()
        .map(|p| Ok(w.distance(&f.eval(p)?)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, worst);
    Ok(Certificate::new("image_containment")
        .metric("residual", residual)
        .metric("samples", samples as f64)
        .tolerance("eps_fun", tol.eps_fun)
        .tolerance("radius", radius)
        .pass_if(residual <= tol.eps_fun))
}

/// `W = df_0(V) + ker M(f)`, which contains `f(ball ∩ V)`.
pub fn degeneracy_from_slicing(
    f: &IsometryMap,
    v: &LinearSubspace,
    samples: usize,
    rng: &mut impl Rng,
    tol: &Tolerances,
) -> Result<(LinearSubspace, Certificate)> {
    if v.ambient() != f.source_dim() {
        return Err(Error::Dimension("subspace and source dimensions differ".into()));
    }
    let w = if v.dim() == f.source_dim() {
        LinearSubspace::whole(f.target_dim())
    } else {
        sections::transfer(f, v, tol)?.subspace
    };
    let cert = image_containment(f, &w, Some(v.basis()), samples, rng, tol)?;
    let cert = Certificate { check: "degeneracy_from_slicing".into(), ..cert }
        .metric("witness_dim", w.dim() as f64)
        .with_witness(w.witness());
    Ok((w, cert))
}

/// Given `G` and `A` (`m x (m-k)`, `A^T y = 0` on the image of an inner map
/// into the source of `G`), returns `W = ker(A^T M(G))`, of dimension
/// `N - (m - k)`.
pub fn degeneracy_from_factorization(g: &IsometryMap, a: &CMatrix, tol: &Tolerances) -> Result<(LinearSubspace, Certificate)> {
    let (m, big_n) = (g.source_dim(), g.target_dim());
    if a.nrows() != m {
        return Err(Error::Dimension(format!("annihilator has {} rows, source dimension is {m}", a.nrows())));
    }
    let codim = a.ncols();
    if codim > 0 && linalg::rank(a, tol.tau_rank) < codim {
        return Err(Error::Rank("annihilator does not have full column rank".into()));
    }
    let rows = a.transpose() * isometry::matrix_m(g, tol)?;
    let r = if codim == 0 { 0 } else { linalg::rank(&rows, tol.tau_rank) };
    if r < codim {
        return Err(Error::Rank(format!("rank of A^T M(G) is {r}, expected {codim}")));
    }
    let w = LinearSubspace::from_kernel(rows, tol.tau_rank)?;
    if w.dim() != big_n - codim {
        return Err(Error::Rank(format!("W has dimension {} instead of {}", w.dim(), big_n - codim)));
    }
    let cert = Certificate::new("degeneracy_from_factorization")
        .metric("rank", r as f64)
        .metric("witness_dim", w.dim() as f64)
        .tolerance("tau_rank", tol.tau_rank)
        .with_witness(w.witness())
        .with_status(Status::Degenerate);
    Ok((w, cert))
}

/// The origin followed by `N' - N + 2` scaled coordinate vectors inside the
/// target, certified linearly independent.
pub fn avoidance_witnesses(target: &DomainSpec, tol: &Tolerances) -> Result<(Vec<Vec<C64>>, Certificate)> {
    let (big_n, big_np) = (target.dim(), target.n_prime());
    if !target.is_irreducible() || target.rank() != 2 || 2 * big_n <= big_np + 1 {
        return Err(Error::Hypothesis(format!("{target} is not an irreducible rank-2 domain with 2N - N' > 1")));
    }
    let count = big_np - big_n + 2;
    if count > big_n {
        return Err(Error::Hypothesis("not enough coordinate directions".into()));
    }
    let mut pts = vec![vec![C64::zero(); big_n]];
    for i in 0..count {
        let mut e = vec![C64::zero(); big_n];
        e[i] = C64::new(0.1, 0.0);
        pts.push(e);
    }
    let min_margin = pts.iter().map(|p| target.membership(p).map(|m| m.margin)).collect::<Result<Vec<_>>>()?.into_iter().fold(f64::INFINITY, f64::min);
    let stacked = CMatrix::from_fn(big_n, count, |i, j| pts[j + 1][i]);
    let smin = linalg::smallest_singular_value(&stacked);
    let cert = Certificate::new("avoidance_witnesses")
        .metric("count", pts.len() as f64)
        .metric("min_singular_value", smin)
        .metric("min_membership_margin", min_margin)
        .tolerance("tau_rank", tol.tau_rank)
        .with_witness(Witness::points(&pts))
        .pass_if(smin > tol.tau_rank && min_margin > 0.0);
    Ok((pts, cert))
}

/// For a degenerate map into a rank-2 target, confirms that some avoidance
/// witness lies off the degeneracy subspace, and that sampled image points
/// stay inside it.
pub fn witness_miss_check(
    f: &IsometryMap,
    k_max: usize,
    samples: usize,
    rng: &mut impl Rng,
    tol: &Tolerances,
) -> Result<Certificate> {
    let (pts, _) = avoidance_witnesses(f.target(), tol)?;
    let Some(w) = degeneracy_subspace(f, k_max, tol)? else {
        return Ok(Certificate::new("witness_miss")
            .with_status(Status::Inconclusive)
            .note("map is not linearly degenerate through the given order"));
    };
    let dists: Vec<f64> = pts.iter().map(|p| w.distance(p)).collect();
    let missed = dists.iter().filter(|&&d| d > tol.eps_fun).count();
    let inside = image_containment(f, &w, None, samples, rng, tol)?;
    Ok(Certificate::new("witness_miss")
        .metric("missed", missed as f64)
        .metric("max_witness_distance", dists.iter().copied().fold(0.0, f64::max))
        .metric("image_residual", inside.get("residual"))
        .metric("witness_dim", w.dim() as f64)
        .tolerance("eps_fun", tol.eps_fun)
        .with_witness(w.witness())
        .pass_if(missed >= 1 && inside.passed()))
}

/// Looks for `N` multi-indices whose rows `-mu_j conj(d^I F_j(0))` form an
/// invertible matrix. Failure is inconclusive, never a proof of degeneracy.
pub fn sufficient_nondegeneracy(f: &IsometryMap, k_max: usize, tol: &Tolerances) -> Result<Certificate> {
    let jm = JetMatrix::new(f, k_max)?;
    let big_n = f.target_dim();
    let mu = f.target_weights();
    let picked = jm.select_rows(tol.tau_rank);
    let cert = Certificate::new("sufficient_nondegeneracy")
        .metric("selected", picked.len() as f64)
        .metric("target_dim", big_n as f64)
        .tolerance("tau_rank", tol.tau_rank)
        .tolerance("k_max", k_max as f64);
    if picked.len() < big_n {
        return Ok(cert
            .with_status(Status::Inconclusive)
            .note(format!("no {big_n} independent derivative rows through order {k_max}")));
    }
    let sub = jm.submatrix(&picked);
    let system = CMatrix::from_fn(big_n, big_n, |i, j| -sub[(i, j)].conj() * mu[j]);
    let sv = linalg::singular_values(&system);
    let ratio = sv.last().copied().unwrap_or(0.0) / sv[0];
    Ok(cert
        .metric("relative_min_singular_value", ratio)
        .with_witness(jm.witness(&picked))
        .with_status(if ratio > tol.tau_rank { Status::NonDegenerateCertified } else { Status::Inconclusive }))
}

/// Solutions `(z1, z2)` of `-z1 - z2 + 2w = 0`, `2 z1 z2 - 2 w^2 = 0`, with
/// multiplicity collapsed.
pub fn example_fiber(w: C64) -> Vec<(C64, C64)> {
    // z1 = 2w - z2 turns the second equation into z2^2 - 2w z2 + w^2 = 0.
    let (b, c) = (-2.0 * w, w * w);
    let disc = (b * b - 4.0 * c).sqrt();
    let roots = [(-b + disc) / 2.0, (-b - disc) / 2.0];
    let mut out: Vec<(C64, C64)> = Vec::new();
    for z2 in roots {
        let z1 = 2.0 * w - z2;
        if !out.iter().any(|&(a, b)| (a - z1).norm() + (b - z2).norm() < 1e-12) {
            out.push((z1, z2));
        }
    }
    out
}

pub fn example_fiber_probe(samples: usize, rng: &mut impl Rng, tol: &Tolerances) -> Certificate {
    let ws: Vec<C64> = (0..samples).map(|_| sampling::ball(rng, 1, 1.0)[0]).collect();
    let (mut deviation, mut residual, mut max_solutions) = (0.0, 0.0, 0usize);
    for &w in &ws {
        let sols = example_fiber(w);
        max_solutions = max_solutions.max(sols.len());
        for (z1, z2) in sols {
            deviation = worst(deviation, (z1 - w).norm().max((z2 - w).norm()));
            let r = (-z1 - z2 + 2.0 * w).norm().max((2.0 * z1 * z2 - 2.0 * w * w).norm());
            residual = worst(residual, r);
        }
    }
    Certificate::new("example_fiber_probe")
        .metric("max_deviation", deviation)
        .metric("max_equation_residual", residual)
        .metric("max_solutions", max_solutions as f64)
        .metric("fiber_dim", 0.0)
        .metric("samples", samples as f64)
        .tolerance("eps_fun", tol.eps_fun)
        .note("fibers are single points, so the component through the graph has dimension 1")
        .pass_if(deviation <= tol.eps_fun && residual <= tol.eps_fun && max_solutions == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct;
    use crate::isometry::catalog;
    use crate::sampling::Seeds;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn jet_matrix_rows_are_taylor_derivatives() {
        let f = catalog::type_iv_graph(3, 6);
        let jm = JetMatrix::new(&f, 4).unwrap();
        // phi = (w1^2 + w2^2)/2 + ..., so d^(2,0) phi = 1
        let r = jm.indices.iter().position(|i| i.exponents() == [2, 0]).unwrap();
        assert!((jm.rows[(r, 2)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        // degree-4 term (s^2)/8 -> d^(2,2) phi = 2!2!*2/8
        let r = jm.indices.iter().position(|i| i.exponents() == [2, 2]).unwrap();
        assert!((jm.rows[(r, 2)].re - 1.0).abs() < 1e-14);
        assert!(matches!(JetMatrix::new(&f, 0), Err(Error::Hypothesis(_))));
        assert!(matches!(JetMatrix::new(&f, 7), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn diagonal_is_degenerate_and_inconclusive() {
        let t = tol();
        let f = catalog::diagonal();
        let c = linear_degeneracy(&f, 3, &t).unwrap();
        assert_eq!(c.status, Status::Degenerate);
        assert!(c.notes[0].contains("polynomial"));
        let w = degeneracy_subspace(&f, 3, &t).unwrap().unwrap();
        let truth = LinearSubspace::from_kernel(CMatrix::from_row_slice(1, 2, &[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]), 1e-9).unwrap();
        assert!(w.angle_to(&truth) < 1e-10);
        assert_eq!(sufficient_nondegeneracy(&f, 5, &t).unwrap().status, Status::Inconclusive);
    }

    #[test]
    fn graph_maps_are_certified() {
        let t = tol();
        for n in 3..=6 {
            let f = catalog::type_iv_graph(n, 4);
            let lin = linear_degeneracy(&f, 2, &t).unwrap();
            let suf = sufficient_nondegeneracy(&f, 2, &t).unwrap();
            assert_eq!(lin.status, Status::NonDegenerateCertified);
            assert_eq!(suf.status, Status::NonDegenerateCertified);
            assert_eq!(lin.witness, suf.witness);
            assert_eq!(linear_degeneracy(&f, 1, &t).unwrap().status, Status::Degenerate);
        }
        let id = catalog::identity(3);
        let c = sufficient_nondegeneracy(&id, 1, &t).unwrap();
        assert_eq!(c.witness, Some(Witness::MultiIndices { indices: vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]] }));
    }

    #[test]
    fn zero_padded_slice_witness() {
        let t = tol();
        let f = construct::slice(&catalog::type_iv_graph(5, 6), 2).unwrap();
        let c = linear_degeneracy(&f, 6, &t).unwrap();
        assert_eq!(c.status, Status::Degenerate);
        assert!(c.notes[0].contains("through order"));
        let w = degeneracy_subspace(&f, 6, &t).unwrap().unwrap();
        assert!(w.same_as(&LinearSubspace::coordinate(5, &[0, 1, 4]).unwrap(), 1e-10));
        assert!(c.get("annihilator_residual") < 1e-13);
    }

    #[test]
    fn rank_is_monotone_in_order() {
        let t = tol();
        let f = catalog::type_iv_graph(4, 6);
        let ranks: Vec<usize> = (1..=6).map(|k| JetMatrix::new(&f, k).unwrap().rank(t.tau_rank)).collect();
        assert!(ranks.windows(2).all(|w| w[0] <= w[1]));
        assert!(ranks.iter().all(|&r| r <= 4));
    }

    #[test]
    fn slicing_and_factorization() {
        let t = tol();
        let mut rng = Seeds::new(5).stream("slice");
        let f = catalog::type_iv_graph(3, 10);
        let (w, c) = degeneracy_from_slicing(&f, &LinearSubspace::coordinate(2, &[0]).unwrap(), 200, &mut rng, &t).unwrap();
        assert_eq!(w.dim(), 2);
        assert!(c.passed(), "{}", c.summary());
        let (w, c) = degeneracy_from_slicing(&f, &LinearSubspace::whole(2), 50, &mut rng, &t).unwrap();
        assert_eq!(w.dim(), 3);
        assert!(c.passed());

        // identity of the bidisc with A = (1, -1)^T recovers the diagonal
        let g = catalog::product(&[catalog::identity(1), catalog::identity(1)]).unwrap();
        let a = CMatrix::from_column_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]);
        let (w, _) = degeneracy_from_factorization(&g, &a, &t).unwrap();
        assert!(w.same_as(&degeneracy_subspace(&catalog::diagonal(), 2, &t).unwrap().unwrap(), 1e-10));
        let (w, _) = degeneracy_from_factorization(&g, &CMatrix::zeros(2, 0), &t).unwrap();
        assert_eq!(w.dim(), 2);

        // composite through a nonlinear outer map
        let g = catalog::product(&[catalog::type_iv_graph(2, 20), catalog::type_iv_graph(2, 20)]).unwrap();
        let (w, c) = degeneracy_from_factorization(&g, &a, &t).unwrap();
        assert_eq!(c.get("witness_dim"), 3.0);
        let h = catalog::compose(&g, &catalog::diagonal()).unwrap();
        let cert = image_containment(&h, &w, None, 300, &mut rng, &t).unwrap();
        assert!(cert.passed(), "{}", cert.summary());
    }

    #[test]
    fn avoidance() {
        let t = tol();
        let (pts, c) = avoidance_witnesses(&DomainSpec::type_iv(3), &t).unwrap();
        assert_eq!(pts.len(), 4);
        assert!(c.passed());
        assert!(matches!(avoidance_witnesses(&DomainSpec::ball(3), &t), Err(Error::Hypothesis(_))));
        assert!(matches!(avoidance_witnesses(&DomainSpec::type_i(2, 5), &t), Err(Error::Hypothesis(_))));
        let (pts, c) = avoidance_witnesses(&DomainSpec::type_i(2, 3), &t).unwrap();
        assert!(c.passed() && pts.len() == 6);

        let mut rng = Seeds::new(6).stream("miss");
        let disk = construct::slice(&catalog::type_iv_graph(3, 20), 1).unwrap();
        let c = witness_miss_check(&disk, 6, 200, &mut rng, &t).unwrap();
        assert!(c.passed(), "{}", c.summary());
        let c = witness_miss_check(&catalog::type_iv_graph(3, 6), 4, 10, &mut rng, &t).unwrap();
        assert_eq!(c.status, Status::Inconclusive);
    }

    #[test]
    fn example_fiber_examples() {
        assert_eq!(example_fiber(C64::zero()), vec![(C64::zero(), C64::zero())]);
        let w = C64::new(0.37, 0.0);
        assert_eq!(example_fiber(w), vec![(w, w)]);
        let mut rng = Seeds::new(7).stream("fiber");
        let c = example_fiber_probe(500, &mut rng, &tol());
        assert!(c.passed(), "{}", c.summary());
    }

    #[test]
    fn certificates_survive_disc_rotations() {
        let t = tol();
        for theta in [0.3, 1.0, 2.5] {
            let r = CMatrix::from_element(1, 1, C64::from_polar(1.0, theta));
            let f = catalog::diagonal().precompose_linear(&r).unwrap();
            assert_eq!(linear_degeneracy(&f, 3, &t).unwrap().status, Status::Degenerate);
            assert_eq!(sufficient_nondegeneracy(&f, 3, &t).unwrap().status, Status::Inconclusive);
            let w = degeneracy_subspace(&f, 3, &t).unwrap().unwrap();
            assert!(w.same_as(&degeneracy_subspace(&catalog::diagonal(), 3, &t).unwrap().unwrap(), 1e-10));
            let disk = construct::slice(&catalog::type_iv_graph(3, 6), 1).unwrap().precompose_linear(&r).unwrap();
            assert_eq!(linear_degeneracy(&disk, 2, &t).unwrap().status, Status::Degenerate);
        }
    }
}
