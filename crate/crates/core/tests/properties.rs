//! Property tests for the invariants of maps, constructions, fibrations,
//! subspace transfer and degeneracy certificates.

use bsd_iso::construct::{self, GraphConstructionProblem};
use bsd_iso::degeneracy::{self, JetMatrix};
use bsd_iso::fibration::Fibration;
use bsd_iso::isometry::{self, catalog};
use bsd_iso::sampling::{self, Seeds};
use bsd_iso::sections::{self, LinearSubspace};
use bsd_iso::{linalg, CMatrix, IsometryMap, MultiIndex, Status, Tolerances, C64};
use proptest::prelude::*;
use std::f64::consts::TAU;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn graph_map(n: usize, theta: f64, order: usize) -> IsometryMap {
    let u = CMatrix::from_element(1, 1, C64::from_polar(1.0, theta));
    let p = GraphConstructionProblem::new(format!("typeIV:{n}").parse().unwrap(), u, None, order, &tol()).unwrap();
    construct::solve_graph_isometry(&p, &tol()).unwrap().0
}

fn point(v: &[(f64, f64)], radius: f64) -> Vec<C64> {
    let p: Vec<C64> = v.iter().map(|&(a, b)| C64::new(a, b)).collect();
    let r = linalg::norm(&p);
    if r > radius {
        p.iter().map(|z| z * (radius / r)).collect()
    } else {
        p
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, .. ProptestConfig::default() })]

    #[test]
    fn constructed_maps_satisfy_the_functional_equation(n in 3usize..=5, theta in 0.0f64..TAU) {
        let f = graph_map(n, theta, 8);
        let c = isometry::verify_functional_equation(&f, 8, &tol()).unwrap();
        prop_assert!(c.get("residual") <= 1e-10);
        // the graph component has no linear part
        let phi = &f.jets()[n - 1];
        for i in 0..n - 1 {
            prop_assert_eq!(phi.coeff(&MultiIndex::unit(n - 1, i)), C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn construction_is_idempotent_in_order(n in 3usize..=4, theta in 0.0f64..TAU, lo in 2usize..6) {
        let hi = graph_map(n, theta, 8);
        let low = graph_map(n, theta, lo);
        for (a, b) in hi.jets().iter().zip(low.jets()) {
            prop_assert_eq!(a.truncate(lo), b.clone());
        }
    }

    #[test]
    fn unitary_source_change_preserves_the_equation(seed in 0u64..1000, n in 3usize..=5) {
        let f = catalog::type_iv_graph(n, 8);
        let u = sampling::unitary(&mut Seeds::new(seed).stream("u"), n - 1);
        let g = f.precompose_linear(&u).unwrap();
        prop_assert!(isometry::verify_functional_equation(&g, 8, &tol()).unwrap().get("residual") <= 1e-10);
        prop_assert!(isometry::jacobian_identity(&g, &tol()).unwrap().passed());
    }

    #[test]
    fn linear_functional_inverts_the_map(v in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3), n in 4usize..=6) {
        let f = catalog::type_iv_graph(n, 8);
        let mut w = point(&v, 0.85);
        w.resize(n - 1, C64::new(0.0, 0.0));
        let m = isometry::matrix_m(&f, &tol()).unwrap();
        let back = linalg::matvec(&m, &f.eval(&w).unwrap());
        prop_assert!(linalg::norm(&linalg::sub(&back, &w)) <= 1e-12);
    }

    #[test]
    fn df_is_balanced_along_rays(v in prop::collection::vec((-1.5f64..1.5, -1.5f64..1.5), 4), lam in (0.0f64..1.0, 0.0f64..TAU)) {
        let fib = Fibration::new(catalog::type_iv_graph(4, 8), &tol()).unwrap();
        let z: Vec<C64> = v.iter().map(|&(a, b)| C64::new(a, b)).collect();
        let m = fib.in_df(&z).unwrap();
        if m.inside {
            let l = C64::from_polar(lam.0, lam.1);
            let p: Vec<C64> = z.iter().map(|x| x * l).collect();
            prop_assert!(fib.in_df(&p).unwrap().inside);
            let r = fib.retract(&z).unwrap();
            prop_assert!(linalg::norm(&fib.project_unchecked(&linalg::sub(&z, &r))) <= 1e-12);
        }
    }

    #[test]
    fn transfer_dimension_and_monotonicity(seed in 0u64..1000, n in 3usize..=5) {
        let t = tol();
        let f = catalog::type_iv_graph(n + 1, 6);
        let mut rng = Seeds::new(seed).stream("v");
        let big = sections::random_subspace(n, n - 1, &mut rng);
        let small = LinearSubspace::from_span(big.basis().columns(0, 1).into_owned(), 1e-9).unwrap();
        let (tb, ts) = (sections::transfer(&f, &big, &t).unwrap(), sections::transfer(&f, &small, &t).unwrap());
        prop_assert_eq!(tb.subspace.dim(), (n + 1) - n + (n - 1));
        prop_assert_eq!(ts.subspace.dim(), 2);
        prop_assert!(tb.subspace.contains(&ts.subspace, 1e-8));
        prop_assert!(tb.angle <= 1e-10);
    }

    #[test]
    fn jet_rank_is_monotone_and_certificates_agree(n in 3usize..=5, theta in 0.0f64..TAU, k in 1usize..=4) {
        let t = tol();
        let f = graph_map(n, theta, 6);
        let r1 = JetMatrix::new(&f, k).unwrap().rank(t.tau_rank);
        let r2 = JetMatrix::new(&f, k + 1).unwrap().rank(t.tau_rank);
        prop_assert!(r1 <= r2 && r2 <= n);
        let lin = degeneracy::linear_degeneracy(&f, k, &t).unwrap();
        if lin.status == Status::NonDegenerateCertified {
            let suf = degeneracy::sufficient_nondegeneracy(&f, k, &t).unwrap();
            prop_assert_eq!(suf.status, Status::NonDegenerateCertified);
            prop_assert_eq!(suf.witness, lin.witness);
        } else {
            prop_assert!(lin.get("annihilator_residual") <= 1e-13);
        }
    }

    #[test]
    fn factorization_subspace_has_the_right_dimension(codim in 0usize..=1, seed in 0u64..1000) {
        let t = tol();
        let g = catalog::product(&[catalog::type_iv_graph(3, 6), catalog::identity(1)]).unwrap();
        let mut rng = Seeds::new(seed).stream("a");
        let a = CMatrix::from_fn(3, codim, |_, _| sampling::gaussian(&mut rng));
        let (w, _) = degeneracy::degeneracy_from_factorization(&g, &a, &t).unwrap();
        prop_assert_eq!(w.dim(), g.target_dim() - codim);
    }
}
