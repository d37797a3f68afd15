//! The submersion induced by an isometry `f: D -> Omega`.
//!
//! With `M = M(f)` the projection is `z -> M z` and
//! `D_f = { z in Omega : M z in D }`, which for a ball source is
//! `{ z in Omega : |conj(Jf(0))^T z| < k }`. The retraction is
//! `r_f = f o project`, and the fiber over `f(w)` is `f(w) + ker M`.

use rand::Rng;
use rayon::prelude::*;

use crate::certificate::{worst, Certificate};
use crate::domains::Membership;
use crate::error::{Error, Result};
use crate::isometry::{self, IsometryMap, JacobianAtZero};
use crate::tolerances::Tolerances;
use crate::{linalg, sampling, CMatrix, C64};

#[derive(Clone, Debug)]
pub struct Fibration {
    map: IsometryMap,
    jac: JacobianAtZero,
    m: CMatrix,
    kernel: CMatrix,
    tol: Tolerances,
}

/// `offset + span(direction)`, the fiber over the source point `base`.
#[derive(Clone, Debug)]
pub struct Fiber {
    pub base: Vec<C64>,
    pub offset: Vec<C64>,
    pub direction: CMatrix,
}

impl Fiber {
    pub fn point(&self, t: &[C64]) -> Vec<C64> {
        let d = linalg::matvec(&self.direction, t);
        self.offset.iter().zip(d).map(|(a, b)| a + b).collect()
    }

    pub fn dim(&self) -> usize {
        self.direction.ncols()
    }
}

impl Fibration {
    pub fn new(map: IsometryMap, tol: &Tolerances) -> Result<Self> {
        let jac = isometry::jacobian_at_zero(&map, tol)?;
        let m = isometry::matrix_m(&map, tol)?;
        let kernel = linalg::null_space(&m, tol.tau_rank);
        Ok(Fibration { map, jac, m, kernel, tol: *tol })
    }

    pub fn map(&self) -> &IsometryMap {
        &self.map
    }

    pub fn jacobian(&self) -> &JacobianAtZero {
        &self.jac
    }

    /// `M(f)`, n x N.
    pub fn m_matrix(&self) -> &CMatrix {
        &self.m
    }

    /// Orthonormal basis of `ker M(f)`, N x (N - n).
    pub fn kernel(&self) -> &CMatrix {
        &self.kernel
    }

    /// `|z|_f = k |M z|`.
    pub fn seminorm(&self, z: &[C64]) -> f64 {
        self.map.k() * linalg::norm(&linalg::matvec(&self.m, z))
    }

    pub fn in_df(&self, z: &[C64]) -> Result<Membership> {
        let omega = self.map.target().membership(z)?;
        let base = self.map.source().membership(&linalg::matvec(&self.m, z))?;
        let scaled = Membership { inside: base.inside, margin: self.map.k() * base.margin };
        Ok(Membership::both(omega, scaled))
    }

    pub fn project_unchecked(&self, z: &[C64]) -> Vec<C64> {
        linalg::matvec(&self.m, z)
    }

    pub fn project(&self, z: &[C64]) -> Result<Vec<C64>> {
        let m = self.in_df(z)?;
        if !m.inside {
            return Err(Error::Domain(format!("point outside D_f (margin {:e})", m.margin)));
        }
        Ok(self.project_unchecked(z))
    }

    pub fn retract(&self, z: &[C64]) -> Result<Vec<C64>> {
        self.map.eval(&self.project(z)?)
    }

    /// Fiber through an image point `x = f(w)`.
    pub fn fiber(&self, x: &[C64]) -> Result<Fiber> {
        let w = self.project(x)?;
        let fx = self.map.eval(&w)?;
        let residual = linalg::norm(&linalg::sub(&fx, x));
        if residual > self.tol.eps_point {
            return Err(Error::Domain(format!("not an image point (residual {residual:e})")));
        }
        Ok(Fiber { base: w, offset: fx, direction: self.kernel.clone() })
    }

    /// Smallest singular value of `[Jf(w) | ker M]`.
    pub fn splitting_margin(&self, w: &[C64]) -> Result<f64> {
        if !self.map.source().contains(w, 0.0) {
            return Err(Error::Domain("splitting point outside the source".into()));
        }
        let jw = self.map.jacobian_at(w, self.tol.fd_step)?;
        Ok(linalg::smallest_singular_value(&linalg::hcat(&jw, &self.kernel)))
    }

    pub fn splitting_check(&self, points: &[Vec<C64>]) -> Result<Certificate> {
        let sigma = points
            .par_iter()
            .map(|w| self.splitting_margin(w))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.min(b) });
        Ok(Certificate::new("splitting")
            .metric("min_singular_value", sigma)
            .metric("points", points.len() as f64)
            .tolerance("tau_split", self.tol.tau_split)
            .pass_if(sigma > self.tol.tau_split))
    }

    /// `f(B(w0, r)) = D_f(f(w0), r) cap f(B)` checked on samples inside and
    /// outside `B(w0, r)`.
    pub fn ball_image_identity(&self, w0: &[C64], r: f64, samples: usize, rng: &mut impl Rng) -> Result<Certificate> {
        let n = self.map.source_dim();
        let outer = 0.95;
        if w0.len() != n {
            return Err(Error::Dimension("center has the wrong length".into()));
        }
        if r.is_nan() || r <= 0.0 || linalg::norm(w0) + r >= outer {
            return Err(Error::Hypothesis(format!("ball of radius {r} around the center is not compactly inside the source")));
        }
        let k = self.map.k();
        let f0 = self.map.eval(w0)?;
        let inside: Vec<Vec<C64>> = (0..samples)
            .map(|_| sampling::ball(rng, n, r).iter().zip(w0).map(|(a, b)| a + b).collect())
            .collect();
        let mut outside = Vec::with_capacity(samples);
        for _ in 0..samples * 50 {
            if outside.len() == samples {
                break;
            }
            let w = sampling::ball(rng, n, outer);
            if linalg::norm(&linalg::sub(&w, w0)) >= r {
                outside.push(w);
            }
        }
        let distances = |pts: &[Vec<C64>]| -> Result<Vec<(f64, f64)>> {
            pts.par_iter()
                .map(|w| {
                    let d = self.seminorm(&linalg::sub(&self.map.eval(w)?, &f0));
                    Ok((d, k * linalg::norm(&linalg::sub(w, w0))))
                })
                .collect()
        };
        let din = distances(&inside)?;
        let dout = distances(&outside)?;
        let inner_margin = din.iter().map(|(d, _)| k * r - d).fold(f64::INFINITY, f64::min);
        let outer_margin = dout.iter().map(|(d, _)| d - k * r).fold(f64::INFINITY, f64::min);
        let equality = din.iter().chain(&dout).map(|(d, e)| (d - e).abs()).fold(0.0, worst);
        let eps = self.tol.eps_point;
        Ok(Certificate::new("ball_image_identity")
            .metric("inner_margin", inner_margin)
            .metric("outer_margin", outer_margin)
            .metric("equality_residual", equality)
            .metric("outside_samples", dout.len() as f64)
            .tolerance("eps_point", eps)
            .pass_if(inner_margin > 0.0 && outer_margin >= -eps && equality <= eps))
    }

    /// Source radius for sampling `f(w)`: wide for exact evaluators, the
    /// sample radius for jet-only maps.
    fn source_radius(&self) -> f64 {
        if self.map.has_exact_evaluator() {
            0.9
        } else {
            self.tol.r_sample
        }
    }

    /// Point of `D_f` drawn along a uniform direction, radially uniform in
    /// volume up to just inside the boundary of the ray.
    pub fn sample_df(&self, rng: &mut impl Rng) -> Vec<C64> {
        let big_n = self.map.target_dim();
        let u = sampling::unit_sphere(rng, big_n);
        let (mut lo, mut hi) = (0.0, (self.map.target().rank() as f64).sqrt() + 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let p: Vec<C64> = u.iter().map(|x| x * mid).collect();
            if self.in_df(&p).map(|m| m.inside).unwrap_or(false) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s: f64 = rng.random();
        let t = lo * s.powf(1.0 / (2 * big_n) as f64) * (1.0 - 1e-9);
        u.into_iter().map(|x| x * t).collect()
    }

    /// Projection, idempotence and kernel identities of the retraction.
    pub fn retraction_suite(&self, samples: usize, rng: &mut impl Rng) -> Result<Certificate> {
        let n = self.map.source_dim();
        let radius = self.source_radius();
        let ws: Vec<Vec<C64>> = (0..samples).map(|_| sampling::ball(rng, n, radius)).collect();
        let zs: Vec<Vec<C64>> = (0..samples).map(|_| self.sample_df(rng)).collect();
        let project_f = ws
            .par_iter()
            .map(|w| -> Result<f64> { Ok(linalg::norm(&linalg::sub(&self.project(&self.map.eval(w)?)?, w))) })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, worst);
        let per_z = zs
            .par_iter()
            .map(|z| -> Result<(f64, f64, f64, bool)> {
                let r = self.retract(z)?;
                let idem = linalg::norm(&linalg::sub(&self.retract(&r)?, &r));
                let d = linalg::sub(z, &r);
                let kernel = linalg::norm(&self.project_unchecked(&d));
                if self.in_df(&d)?.inside {
                    Ok((idem, kernel, linalg::norm(&self.retract(&d)?), true))
                } else {
                    Ok((idem, kernel, 0.0, false))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let idempotence = per_z.iter().map(|t| t.0).fold(0.0, worst);
        let kernel = per_z.iter().map(|t| t.1).fold(0.0, worst);
        let difference = per_z.iter().map(|t| t.2).fold(0.0, worst);
        let tested = per_z.iter().filter(|t| t.3).count();
        let t = &self.tol;
        Ok(Certificate::new("retraction")
            .metric("project_after_f", project_f)
            .metric("idempotence", idempotence)
            .metric("kernel", kernel)
            .metric("retract_of_difference", difference)
            .metric("differences_in_df", tested as f64)
            .tolerance("eps_fun", t.eps_fun)
            .tolerance("eps_lin", t.eps_lin)
            .pass_if(project_f <= t.eps_fun && idempotence <= t.eps_fun && kernel <= t.eps_lin && difference <= t.eps_fun))
    }

    /// `lambda z in D_f` for `|lambda| <= 1`.
    pub fn balanced_check(&self, samples: usize, rng: &mut impl Rng) -> Result<Certificate> {
        let cases: Vec<(Vec<C64>, C64)> = (0..samples)
            .map(|_| {
                let z = self.sample_df(rng);
                let ph = sampling::phase(rng);
                // half on the unit circle, half inside the disc
                let lam = if rng.random::<bool>() { ph } else { ph * rng.random::<f64>().sqrt() };
                (z, lam)
            })
            .collect();
        let failures = cases
            .par_iter()
            .map(|(z, lam)| -> Result<usize> {
                let p: Vec<C64> = z.iter().map(|x| x * lam).collect();
                Ok(usize::from(!self.in_df(&p)?.inside))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum::<usize>();
        Ok(Certificate::new("balanced")
            .metric("failures", failures as f64)
            .metric("samples", samples as f64)
            .pass_if(failures == 0))
    }

    /// `(1 - t) z + t xi in D_f` for `t` in `{1/4, 1/2, 3/4}`.
    pub fn convexity_check(&self, samples: usize, rng: &mut impl Rng) -> Result<Certificate> {
        let pairs: Vec<(Vec<C64>, Vec<C64>)> = (0..samples).map(|_| (self.sample_df(rng), self.sample_df(rng))).collect();
        let failures = pairs
            .par_iter()
            .map(|(z, xi)| -> Result<usize> {
                let mut bad = 0;
                for t in [0.25, 0.5, 0.75] {
                    let p: Vec<C64> = z.iter().zip(xi).map(|(a, b)| a * (1.0 - t) + b * t).collect();
                    bad += usize::from(!self.in_df(&p)?.inside);
                }
                Ok(bad)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum::<usize>();
        Ok(Certificate::new("convexity")
            .metric("failures", failures as f64)
            .metric("chords", samples as f64)
            .pass_if(failures == 0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isometry::catalog;
    use crate::sampling::Seeds;
    use num_traits::Zero;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn fib(f: IsometryMap) -> Fibration {
        Fibration::new(f, &Tolerances::default()).unwrap()
    }

    #[test]
    fn origin_and_image_points() {
        let f = fib(catalog::type_iv_graph(3, 8));
        assert!(f.in_df(&[C64::zero(); 3]).unwrap().inside);
        assert_eq!(f.project(&[C64::zero(); 3]).unwrap(), vec![C64::zero(); 2]);
        let w = [c(0.9, 0.0), c(0.0, 0.0)];
        let m = f.in_df(&f.map().eval(&w).unwrap()).unwrap();
        assert!(m.inside);
        assert!((m.margin - 0.1).abs() < 1e-12, "{}", m.margin);
        // projection deletes the last coordinate
        let z = [c(0.1, 0.2), c(-0.3, 0.0), c(0.4, 0.1)];
        assert_eq!(f.project(&z).unwrap(), vec![z[0], z[1]]);
        assert!(matches!(f.project(&[c(0.9, 0.0), c(0.5, 0.0), C64::zero()]), Err(Error::Domain(_))));
    }

    #[test]
    fn weighted_diagonal_projection() {
        let f = fib(catalog::diagonal());
        let w = c(0.3, -0.4);
        assert!((f.project(&[w, w]).unwrap()[0] - w).norm() < 1e-16);
        let m = f.in_df(&[c(0.9, 0.0), c(-0.5, 0.0)]).unwrap();
        assert!(m.inside);
        assert!((m.margin - 0.1).abs() < 1e-15);
    }

    #[test]
    fn fibers_are_affine_kernel_translates() {
        let f = fib(catalog::type_iv_graph(3, 8));
        let zero = f.fiber(&[C64::zero(); 3]).unwrap();
        assert_eq!(zero.dim(), 1);
        let w = [c(0.2, 0.1), c(0.1, -0.3)];
        let x = f.map().eval(&w).unwrap();
        let fb = f.fiber(&x).unwrap();
        for t in [c(0.05, 0.0), c(0.0, -0.1)] {
            let z = fb.point(&[t]);
            assert_eq!(z[0], w[0]);
            assert!((f.project(&z).unwrap()[1] - w[1]).norm() < 1e-15);
        }
        let off = [x[0], x[1], x[2] + 0.01];
        assert!(matches!(f.fiber(&off), Err(Error::Domain(_))));
    }

    #[test]
    fn splitting_examples() {
        let t = Tolerances::default();
        let id = fib(catalog::identity(3));
        assert!((id.splitting_margin(&[C64::zero(); 3]).unwrap() - 1.0).abs() < 1e-12);
        let f = fib(catalog::type_iv_graph(3, 8));
        assert!(f.splitting_check(&[vec![c(0.3, 0.0), c(0.2, 0.0)]]).unwrap().passed());
        let d = fib(catalog::diagonal());
        let s0 = d.splitting_margin(&[C64::zero()]).unwrap();
        // columns (1,1) and (1,-1)/sqrt 2 are orthogonal: singular values sqrt 2 and 1
        assert!((s0 - 1.0).abs() < 1e-9, "{s0}");
        let _ = t;
    }

    #[test]
    fn ball_image_identity_examples() {
        let mut rng = Seeds::new(3).stream("bii");
        let f = fib(catalog::type_iv_graph(3, 8));
        let cert = f.ball_image_identity(&[c(0.2, 0.0), C64::zero()], 0.3, 300, &mut rng).unwrap();
        assert!(cert.passed(), "{}", cert.summary());
        assert!(cert.get("equality_residual") < 1e-14);
        let id = fib(catalog::identity(2));
        assert!(id.ball_image_identity(&[C64::zero(); 2], 0.5, 100, &mut rng).unwrap().passed());
        assert!(matches!(id.ball_image_identity(&[c(0.5, 0.0), C64::zero()], 0.5, 10, &mut rng), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn retraction_and_shape_checks() {
        let mut rng = Seeds::new(4).stream("ret");
        for map in [catalog::type_iv_graph(4, 8), catalog::diagonal(), catalog::identity(2)] {
            let f = fib(map);
            for cert in [
                f.retraction_suite(200, &mut rng).unwrap(),
                f.balanced_check(200, &mut rng).unwrap(),
                f.convexity_check(200, &mut rng).unwrap(),
            ] {
                assert!(cert.passed(), "{}", cert.summary());
            }
        }
    }

    #[test]
    fn df_sampler_stays_inside() {
        let mut rng = Seeds::new(6).stream("df");
        let f = fib(catalog::type_iv_graph(3, 6));
        for _ in 0..200 {
            let z = f.sample_df(&mut rng);
            assert!(f.in_df(&z).unwrap().inside);
        }
    }
}
