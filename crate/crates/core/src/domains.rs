//! Bounded symmetric domains in Harish-Chandra coordinates.
//!
//! Each irreducible factor carries its generic norm
//! `h(z, xi) = 1 - <z, xi> + sum_l (-1)^deg(G_l) G_l(z) conj(G_l(xi))`
//! where the `G_l` are homogeneous polynomials of degree at least two:
//!
//! * `ball:n` has no `G_l`;
//! * `typeIV:n` has the single quadratic `G(z) = (z_1^2 + ... + z_n^2) / 2`;
//! * `typeI:pxq` (row-major `p x q` matrices) has every `k x k` minor,
//!   `2 <= k <= min(p, q)`, so that `h(Z, W) = det(I - Z W^*)`.
//!
//! Products are written `ball:2*typeIV:4`, and `@w` attaches a metric weight
//! to a factor (`ball:2@1.5`).

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::jet::JetSeries;
use crate::scalar::Scalar;
use crate::{linalg, CMatrix, Jet, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    Ball(usize),
    TypeI(usize, usize),
    TypeIV(usize),
}

impl FactorKind {
    pub fn dim(self) -> usize {
        match self {
            FactorKind::Ball(n) | FactorKind::TypeIV(n) => n,
            FactorKind::TypeI(p, q) => p * q,
        }
    }

    pub fn rank(self) -> usize {
        match self {
            FactorKind::Ball(_) => 1,
            FactorKind::TypeI(p, q) => p.min(q),
            FactorKind::TypeIV(_) => 2,
        }
    }

    pub fn genus(self) -> usize {
        match self {
            FactorKind::Ball(n) => n + 1,
            FactorKind::TypeIV(n) => n,
            FactorKind::TypeI(p, q) => p + q,
        }
    }

    fn validate(self) -> Result<Self> {
        let ok = match self {
            FactorKind::Ball(n) => n >= 1,
            FactorKind::TypeI(p, q) => p >= 1 && q >= 1,
            FactorKind::TypeIV(n) => n >= 2,
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::Parse(format!("unsupported domain dimensions {self}")))
        }
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorKind::Ball(n) => write!(f, "ball:{n}"),
            FactorKind::TypeI(p, q) => write!(f, "typeI:{p}x{q}"),
            FactorKind::TypeIV(n) => write!(f, "typeIV:{n}"),
        }
    }
}

/// The polynomial data of an irreducible generic norm.
#[derive(Clone, Debug, PartialEq)]
pub struct GenericNorm {
    dim: usize,
    terms: Vec<Jet>,
    degrees: Vec<usize>,
}

impl GenericNorm {
    pub fn new(dim: usize, terms: Vec<Jet>) -> Result<Self> {
        let mut degrees = Vec::with_capacity(terms.len());
        for g in &terms {
            if g.num_vars() != dim || !g.is_exact() {
                return Err(Error::Dimension("generic-norm term must be an exact polynomial in dim variables".into()));
            }
            let d = g.max_degree();
            if d < 2 || g.iter().any(|(i, _)| i.degree() != d) {
                return Err(Error::Dimension("generic-norm term must be homogeneous of degree >= 2".into()));
            }
            degrees.push(d);
        }
        Ok(GenericNorm { dim, terms, degrees })
    }

    pub fn for_kind(kind: FactorKind) -> Self {
        let dim = kind.dim();
        let terms = match kind {
            FactorKind::Ball(_) => Vec::new(),
            FactorKind::TypeIV(n) => {
                let half = C64::new(0.5, 0.0);
                vec![Jet::polynomial(n, (0..n).map(|j| {
                    let mut e = vec![0; n];
                    e[j] = 2;
                    (e, half)
                }))]
            }
            FactorKind::TypeI(p, q) => {
                let mut out = Vec::new();
                for k in 2..=p.min(q) {
                    for rows in subsets(p, k) {
                        for cols in subsets(q, k) {
                            out.push(minor(p, q, &rows, &cols));
                        }
                    }
                }
                out
            }
        };
        GenericNorm::new(dim, terms).expect("catalog norms are homogeneous")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Jet] {
        &self.terms
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// `G_l(z)` for every term.
    pub fn g_values<T: Scalar>(&self, z: &[Complex<T>]) -> Vec<Complex<T>> {
        self.terms.iter().map(|g| eval_poly(g, z)).collect()
    }

    pub fn eval<T: Scalar>(&self, z: &[Complex<T>], xi: &[Complex<T>]) -> Complex<T> {
        let mut h = Complex::<T>::one();
        for (a, b) in z.iter().zip(xi) {
            h -= a * b.conj();
        }
        for (g, &d) in self.terms.iter().zip(&self.degrees) {
            let term = eval_poly(g, z) * eval_poly(g, xi).conj();
            if d % 2 == 0 {
                h += term;
            } else {
                h -= term;
            }
        }
        h
    }

    /// `h(f, g)` as a jet in `2n` variables: the first `n` carry `w`, the
    /// last `n` carry `conj(zeta)`.
    pub fn jet<T: Scalar>(&self, f: &[JetSeries<T>], g: &[JetSeries<T>]) -> Result<JetSeries<T>> {
        if f.len() != self.dim || g.len() != self.dim {
            return Err(Error::Dimension(format!(
                "generic norm of dimension {} given {} and {} components",
                self.dim,
                f.len(),
                g.len()
            )));
        }
        let n = common_vars(f.iter().chain(g))?;
        let order = f.iter().chain(g).map(JetSeries::order).min().unwrap_or(crate::EXACT);
        let lift_w = |s: &JetSeries<T>| s.embed(2 * n, 0);
        let lift_z = |s: &JetSeries<T>| s.conj().embed(2 * n, n);
        let mut h = JetSeries::one(2 * n, order);
        for (a, b) in f.iter().zip(g) {
            h = h.sub(&lift_w(a).mul(&lift_z(b))?)?;
        }
        if !self.terms.is_empty() {
            let gf = self.compose_terms(f)?;
            let gg = self.compose_terms(g)?;
            for ((a, b), &d) in gf.iter().zip(&gg).zip(&self.degrees) {
                let term = lift_w(a).mul(&lift_z(b))?;
                h = if d % 2 == 0 { h.add(&term)? } else { h.sub(&term)? };
            }
        }
        Ok(h)
    }

    fn compose_terms<T: Scalar>(&self, f: &[JetSeries<T>]) -> Result<Vec<JetSeries<T>>> {
        self.terms.iter().map(|g| JetSeries::compose(&g.cast::<T>(), f)).collect()
    }
}

fn common_vars<'a, T: Scalar + 'a>(mut it: impl Iterator<Item = &'a JetSeries<T>>) -> Result<usize> {
    let first = it.next().map_or(0, JetSeries::num_vars);
    if it.any(|s| s.num_vars() != first) {
        return Err(Error::Dimension("component jets disagree on the number of variables".into()));
    }
    Ok(first)
}

/// Evaluates an `f64` polynomial at a point over any scalar type.
pub fn eval_poly<T: Scalar>(g: &Jet, z: &[Complex<T>]) -> Complex<T> {
    let mut acc = Complex::<T>::zero();
    for (idx, c) in g.iter() {
        let mut t = Complex::new(T::from_f64_lossy(c.re), T::from_f64_lossy(c.im));
        for (&e, &zi) in idx.exponents().iter().zip(z) {
            if e > 0 {
                t *= zi.powu(e);
            }
        }
        acc += t;
    }
    acc
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], sign: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        let k = used.len();
        if cur.len() == k {
            out.push((cur.clone(), sign));
            return;
        }
        for i in 0..k {
            if !used[i] {
                // each unused index smaller than i that comes later is an inversion
                let inversions = (0..i).filter(|&j| !used[j]).count();
                used[i] = true;
                cur.push(i);
                rec(cur, used, if inversions % 2 == 0 { sign } else { -sign }, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], 1.0, &mut out);
    out
}

fn minor(p: usize, q: usize, rows: &[usize], cols: &[usize]) -> Jet {
    let n = p * q;
    let terms = permutations(rows.len()).into_iter().map(|(perm, sign)| {
        let mut e = vec![0u32; n];
        for (i, &r) in rows.iter().enumerate() {
            e[r * q + cols[perm[i]]] += 1;
        }
        (e, C64::new(sign, 0.0))
    });
    Jet::polynomial(n, terms)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    pub kind: FactorKind,
    pub weight: f64,
    norm: GenericNorm,
}

impl Factor {
    pub fn new(kind: FactorKind, weight: f64) -> Result<Self> {
        let kind = kind.validate()?;
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::Parse(format!("weight must be positive, got {weight}")));
        }
        Ok(Factor { kind, weight, norm: GenericNorm::for_kind(kind) })
    }

    pub fn norm(&self) -> &GenericNorm {
        &self.norm
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Inside test with signed margin for a point of this factor.
    pub fn membership(&self, z: &[C64]) -> Membership {
        let sq: f64 = z.iter().map(|c| c.norm_sqr()).sum();
        let margin = match self.kind {
            FactorKind::Ball(_) => 1.0 - sq.sqrt(),
            FactorKind::TypeIV(_) => {
                // 1 + |G|^2 - |z|^2 in factored form, using
                // |z|^4 - |z.z|^2 = 4 sum_{i<j} Im(z_i conj(z_j))^2
                let mut d = 0.0;
                for i in 0..z.len() {
                    for j in i + 1..z.len() {
                        d += 4.0 * (z[i] * z[j].conj()).im.powi(2);
                    }
                }
                let (a, b) = (1.0 - sq / 2.0, d.sqrt() / 2.0);
                (2.0 - sq).min((a - b) * (a + b))
            }
            FactorKind::TypeI(p, q) => {
                let m = CMatrix::from_fn(p, q, |i, j| z[i * q + j]);
                1.0 - linalg::singular_values(&m).first().copied().unwrap_or(0.0)
            }
        };
        Membership { inside: margin > 0.0, margin }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Membership {
    pub inside: bool,
    pub margin: f64,
}

impl Membership {
    pub fn both(a: Membership, b: Membership) -> Membership {
        Membership { inside: a.inside && b.inside, margin: a.margin.min(b.margin) }
    }
}

/// A product of irreducible factors with per-factor metric weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    factors: Vec<Factor>,
}

impl DomainSpec {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Parse("empty domain".into()));
        }
        Ok(DomainSpec { factors })
    }

    pub fn single(kind: FactorKind) -> Result<Self> {
        DomainSpec::new(vec![Factor::new(kind, 1.0)?])
    }

    pub fn ball(n: usize) -> Self {
        DomainSpec::single(FactorKind::Ball(n)).expect("ball dimension must be positive")
    }

    pub fn type_iv(n: usize) -> Self {
        DomainSpec::single(FactorKind::TypeIV(n)).expect("typeIV dimension must be at least 2")
    }

    pub fn type_i(p: usize, q: usize) -> Self {
        DomainSpec::single(FactorKind::TypeI(p, q)).expect("typeI dimensions must be positive")
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(Factor::dim).sum()
    }

    /// `N'`: dimension plus the number of higher-degree generic-norm terms.
    pub fn n_prime(&self) -> usize {
        self.dim() + self.factors.iter().map(|f| f.norm.terms.len()).sum::<usize>()
    }

    pub fn rank(&self) -> usize {
        self.factors.iter().map(|f| f.kind.rank()).sum()
    }

    pub fn is_irreducible(&self) -> bool {
        self.factors.len() == 1
    }

    pub fn weights(&self) -> Vec<f64> {
        self.factors.iter().map(|f| f.weight).collect()
    }

    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.factors.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} factors",
                weights.len(),
                self.factors.len()
            )));
        }
        let factors = self.factors.iter().zip(weights).map(|(f, &w)| Factor::new(f.kind, w)).collect::<Result<_>>()?;
        DomainSpec::new(factors)
    }

    /// Start offset of every factor's coordinate block.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.factors
            .iter()
            .map(|f| {
                let o = acc;
                acc += f.dim();
                o
            })
            .collect()
    }

    /// Per-coordinate factor weight.
    pub fn coordinate_weights(&self) -> Vec<f64> {
        self.factors.iter().flat_map(|f| std::iter::repeat_n(f.weight, f.dim())).collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension(format!("point of length {len} in a domain of dimension {}", self.dim())));
        }
        Ok(())
    }

    fn blocks<'a, X>(&'a self, v: &'a [X]) -> impl Iterator<Item = (&'a Factor, &'a [X])> + 'a {
        self.factors.iter().zip(self.offsets()).map(move |(f, o)| (f, &v[o..o + f.dim()]))
    }

    /// Unweighted product of the factor generic norms.
    pub fn generic_norm_eval<T: Scalar>(&self, z: &[Complex<T>], xi: &[Complex<T>]) -> Result<Complex<T>> {
        self.check_len(z.len())?;
        self.check_len(xi.len())?;
        Ok(self.blocks(z).zip(self.blocks(xi)).fold(Complex::one(), |acc, ((f, a), (_, b))| acc * f.norm.eval(a, b)))
    }

    /// Per-factor generic norms `h_j(z^j, xi^j)`.
    pub fn factor_norms<T: Scalar>(&self, z: &[Complex<T>], xi: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.check_len(z.len())?;
        self.check_len(xi.len())?;
        Ok(self.blocks(z).zip(self.blocks(xi)).map(|((f, a), (_, b))| f.norm.eval(a, b)).collect())
    }

    /// `prod_j h_j(z, xi)^{weight_j * scale}` with principal complex powers.
    pub fn weighted_norm_eval(&self, z: &[C64], xi: &[C64], scale: f64) -> Result<C64> {
        let hs = self.factor_norms(z, xi)?;
        Ok(hs.iter().zip(&self.factors).fold(C64::one(), |acc, (h, f)| acc * pow_c(*h, f.weight * scale)))
    }

    /// `h(f(w), g(zeta))` as a jet in `(w, conj(zeta))` without weights.
    pub fn generic_norm_jet<T: Scalar>(&self, f: &[JetSeries<T>], g: &[JetSeries<T>]) -> Result<JetSeries<T>> {
        self.weighted_norm_jet_impl(f, g, None)
    }

    /// As [`generic_norm_jet`](Self::generic_norm_jet), with factor `j`
    /// raised to `weight_j * scale`.
    pub fn weighted_norm_jet<T: Scalar>(&self, f: &[JetSeries<T>], g: &[JetSeries<T>], scale: f64) -> Result<JetSeries<T>> {
        self.weighted_norm_jet_impl(f, g, Some(scale))
    }

    fn weighted_norm_jet_impl<T: Scalar>(
        &self,
        f: &[JetSeries<T>],
        g: &[JetSeries<T>],
        scale: Option<f64>,
    ) -> Result<JetSeries<T>> {
        if f.len() != self.dim() || g.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "domain of dimension {} given {} and {} components",
                self.dim(),
                f.len(),
                g.len()
            )));
        }
        let n = common_vars(f.iter().chain(g))?;
        let mut out: Option<JetSeries<T>> = None;
        for ((fac, a), (_, b)) in self.blocks(f).zip(self.blocks(g)) {
            let mut h = fac.norm.jet(a, b)?;
            if let Some(s) = scale {
                h = h.pow_real(T::from_f64_lossy(fac.weight * s))?;
            }
            out = Some(match out {
                None => h,
                Some(acc) => acc.mul(&h)?,
            });
        }
        Ok(out.unwrap_or_else(|| JetSeries::one(2 * n, crate::EXACT)))
    }

    /// Product of factor generic norms raised to their genera.
    pub fn bergman_q<T: Scalar>(&self, z: &[Complex<T>], xi: &[Complex<T>]) -> Result<Complex<T>> {
        let hs = self.factor_norms(z, xi)?;
        Ok(hs.iter().zip(&self.factors).fold(Complex::one(), |acc, (h, f)| acc * h.powu(f.kind.genus() as u32)))
    }

    pub fn membership(&self, z: &[C64]) -> Result<Membership> {
        self.check_len(z.len())?;
        Ok(self
            .blocks(z)
            .map(|(f, b)| f.membership(b))
            .reduce(Membership::both)
            .expect("at least one factor"))
    }

    /// Whether `z` lies inside with margin above `tol`.
    pub fn contains(&self, z: &[C64], tol: f64) -> bool {
        self.membership(z).map(|m| m.margin > tol).unwrap_or(false)
    }
}

/// Principal power `h^e`; integer exponents use repeated products.
pub fn pow_c(h: C64, e: f64) -> C64 {
    if e == e.round() && e.abs() <= 64.0 {
        h.powi(e as i32)
    } else {
        h.powf(e)
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, fac) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            write!(f, "{}", fac.kind)?;
            if fac.weight != 1.0 {
                write!(f, "@{}", fac.weight)?;
            }
        }
        Ok(())
    }
}

impl FromStr for DomainSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let factors = s.split('*').map(parse_factor).collect::<Result<Vec<_>>>()?;
        DomainSpec::new(factors)
    }
}

fn parse_factor(s: &str) -> Result<Factor> {
    let bad = || Error::Parse(format!("bad domain factor {s:?}"));
    let s = s.trim();
    let (body, weight) = match s.split_once('@') {
        Some((b, w)) => (b, w.trim().parse::<f64>().map_err(|_| bad())?),
        None => (s, 1.0),
    };
    let (tag, dims) = body.split_once(':').ok_or_else(bad)?;
    let int = |x: &str| x.trim().parse::<usize>().map_err(|_| bad());
    let kind = match tag.trim() {
        "ball" => FactorKind::Ball(int(dims)?),
        "typeIV" => FactorKind::TypeIV(int(dims)?),
        "typeI" => {
            let (p, q) = dims.split_once('x').ok_or_else(bad)?;
            FactorKind::TypeI(int(p)?, int(q)?)
        }
        _ => return Err(bad()),
    };
    Factor::new(kind, weight)
}

impl Serialize for DomainSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DomainSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{self, Seeds};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn parse_and_display() {
        for s in ["ball:3", "typeIV:4", "typeI:2x3", "ball:2*typeIV:4", "ball:2@1.5", "ball:1*ball:1"] {
            let d: DomainSpec = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        let d: DomainSpec = "ball:2*typeIV:4".parse().unwrap();
        assert_eq!(d.dim(), 6);
        assert_eq!(d.n_prime(), 7);
        assert_eq!(d.rank(), 3);
        for bad in ["", "ball", "ball:0", "typeIV:1", "typeI:2", "sphere:2", "ball:2@-1", "ball:2@x"] {
            assert!(bad.parse::<DomainSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn catalog_invariants() {
        assert_eq!(FactorKind::Ball(3).genus(), 4);
        assert_eq!(FactorKind::TypeIV(5).genus(), 5);
        assert_eq!(FactorKind::TypeI(2, 3).genus(), 5);
        assert_eq!(DomainSpec::type_i(2, 3).n_prime(), 6 + 3);
        assert_eq!(DomainSpec::type_i(3, 3).n_prime(), 9 + 9 + 1);
        let iv = GenericNorm::for_kind(FactorKind::TypeIV(3));
        assert_eq!(iv.degrees(), &[2]);
        assert!(GenericNorm::for_kind(FactorKind::Ball(2)).terms().is_empty());
    }

    #[test]
    fn ball_and_type_iv_examples() {
        let b = DomainSpec::ball(2);
        let h = b.generic_norm_eval(&[c(0.1, 0.2), c(0.3, 0.0)], &[c(0.5, 0.0), c(0.0, 1.0)]).unwrap();
        let expect = c(1.0, 0.0) - c(0.1, 0.2) * 0.5 - c(0.3, 0.0) * c(0.0, -1.0);
        assert!((h - expect).norm() < 1e-15);
        // graph map into typeIV(3) pulls h back to the ball norm
        let iv = DomainSpec::type_iv(3);
        let mut rng = Seeds::new(2).stream("iv");
        for _ in 0..100 {
            let w = sampling::ball(&mut rng, 2, 0.9);
            let s2 = w[0] * w[0] + w[1] * w[1];
            let f = vec![w[0], w[1], c(1.0, 0.0) - (c(1.0, 0.0) - s2).sqrt()];
            let lhs = iv.generic_norm_eval(&f, &f).unwrap();
            let rhs = 1.0 - w[0].norm_sqr() - w[1].norm_sqr();
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }

    #[test]
    fn bergman_examples() {
        let d = DomainSpec::ball(1);
        let (z, xi) = ([c(0.3, 0.1)], [c(-0.2, 0.4)]);
        let q = d.bergman_q(&z, &xi).unwrap();
        assert!((q - (c(1.0, 0.0) - z[0] * xi[0].conj()).powu(2)).norm() < 1e-15);
        let b3 = DomainSpec::ball(3);
        let z3 = [c(0.1, 0.0), c(0.2, -0.1), c(0.0, 0.3)];
        let q3 = b3.bergman_q(&z3, &z3).unwrap();
        let base = 1.0 - z3.iter().map(|x| x.norm_sqr()).sum::<f64>();
        assert!((q3 - c(base.powi(4), 0.0)).norm() < 1e-15);
        for d in ["typeIV:4", "typeI:2x3", "ball:2*typeIV:3"] {
            let d: DomainSpec = d.parse().unwrap();
            let xi: Vec<C64> = (0..d.dim()).map(|i| c(0.1 * i as f64, -0.05)).collect();
            let zero = vec![C64::zero(); d.dim()];
            assert_eq!(d.bergman_q(&zero, &xi).unwrap(), C64::one());
            assert_eq!(d.generic_norm_eval(&xi, &zero).unwrap(), C64::one());
        }
    }

    fn det(mut a: CMatrix) -> C64 {
        // Gaussian elimination with partial pivoting
        let n = a.nrows();
        let mut d = C64::one();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm())).unwrap();
            if p != k {
                a.swap_rows(p, k);
                d = -d;
            }
            let piv = a[(k, k)];
            d *= piv;
            for i in k + 1..n {
                let m = a[(i, k)] / piv;
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= m * v;
                }
            }
        }
        d
    }

    #[test]
    fn type_i_matches_determinant() {
        let mut rng = Seeds::new(11).stream("typeI");
        for (p, q) in [(2, 2), (2, 3), (3, 2), (3, 3), (2, 4), (1, 3)] {
            let d = DomainSpec::type_i(p, q);
            for _ in 0..30 {
                let z = sampling::gaussian_vec(&mut rng, p * q);
                let w = sampling::gaussian_vec(&mut rng, p * q);
                let zm = CMatrix::from_fn(p, q, |i, j| z[i * q + j]);
                let wm = CMatrix::from_fn(p, q, |i, j| w[i * q + j]);
                let oracle = det(linalg::identity(p) - zm * wm.adjoint());
                let h = d.generic_norm_eval(&z, &w).unwrap();
                assert!((h - oracle).norm() < 1e-12 * (1.0 + oracle.norm()), "{p}x{q}: {h} vs {oracle}");
            }
        }
    }

    #[test]
    fn type_iv_isotropic_and_real_boundaries() {
        let d = DomainSpec::type_iv(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let iso = |t: f64| vec![c(t * s, 0.0), c(0.0, t * s)];
        // oracle: h(tz, tz) = 1 - t^2 on the isotropic direction, first root at t = 1
        for i in 1..200 {
            let t = i as f64 * 0.01;
            let h = d.generic_norm_eval(&iso(t), &iso(t)).unwrap().re;
            assert!((h - (1.0 - t * t)).abs() < 1e-14);
            assert_eq!(d.membership(&iso(t)).unwrap().inside, t < 1.0, "t = {t}");
        }
        // real axis: boundary scan locates sqrt 2
        let inside = |t: f64| d.membership(&[c(t, 0.0), c(0.0, 0.0)]).unwrap().inside;
        let (mut lo, mut hi) = (0.0, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((hi - 2f64.sqrt()).abs() < 1e-9);
        assert!(d.membership(&[c(0.6, 0.0), c(0.0, 0.0)]).unwrap().inside);
    }

    #[test]
    fn ball_membership_margin() {
        let m = DomainSpec::ball(2).membership(&[c(0.6, 0.0), C64::zero()]).unwrap();
        assert!(m.inside);
        assert!((m.margin - 0.4).abs() < 1e-15);
        assert!(DomainSpec::ball(2).membership(&[C64::zero()]).is_err());
    }

    #[test]
    fn jet_examples() {
        let order = 6;
        let id = Jet::vars(2, order);
        let h = DomainSpec::ball(2).generic_norm_jet(&id, &id).unwrap();
        let expect = Jet::polynomial(
            4,
            [
                (vec![0, 0, 0, 0], c(1.0, 0.0)),
                (vec![1, 0, 1, 0], c(-1.0, 0.0)),
                (vec![0, 1, 0, 1], c(-1.0, 0.0)),
            ],
        );
        assert!(h.max_abs_diff(&expect) < 1e-15);
        // diagonal into the bidisc with unit weights: (1 - w conj(zeta))^2
        let d: DomainSpec = "ball:1*ball:1".parse().unwrap();
        let w = Jet::var(1, order, 0);
        let h = d.weighted_norm_jet(&[w.clone(), w.clone()], &[w.clone(), w], 1.0).unwrap();
        let base = DomainSpec::ball(1).generic_norm_jet(&[Jet::var(1, order, 0)], &[Jet::var(1, order, 0)]).unwrap();
        assert!(h.max_abs_diff(&base.powi(2).unwrap()) < 1e-15);
    }

    #[test]
    fn jet_agrees_with_pointwise() {
        let d: DomainSpec = "ball:1*typeIV:3".parse().unwrap();
        // a polynomial map C^2 -> C^4
        let x = Jet::vars(2, crate::EXACT);
        let f = vec![
            x[0].clone(),
            x[1].clone(),
            x[0].mul(&x[1]).unwrap(),
            x[0].mul(&x[0]).unwrap().scale(c(0.0, 0.5)),
        ];
        let h = d.generic_norm_jet(&f, &f).unwrap();
        let (w, z) = ([c(0.2, 0.1), c(-0.3, 0.2)], [c(0.1, -0.4), c(0.25, 0.0)]);
        let pt: Vec<C64> = w.iter().copied().chain(z.iter().map(|v| v.conj())).collect();
        let fw: Vec<C64> = f.iter().map(|s| s.evaluate(&w).unwrap()).collect();
        let fz: Vec<C64> = f.iter().map(|s| s.evaluate(&z).unwrap()).collect();
        let direct = d.generic_norm_eval(&fw, &fz).unwrap();
        assert!((h.evaluate(&pt).unwrap() - direct).norm() < 1e-14);
    }

    #[test]
    fn f32_evaluation_is_available() {
        let d = DomainSpec::type_iv(3);
        let z = [Complex::new(0.1f32, 0.0), Complex::new(0.2, 0.1), Complex::new(0.0, 0.3)];
        let h32 = d.generic_norm_eval(&z, &z).unwrap();
        let z64: Vec<C64> = z.iter().map(|v| c(v.re as f64, v.im as f64)).collect();
        let h64 = d.generic_norm_eval(&z64, &z64).unwrap();
        assert!((h32.re as f64 - h64.re).abs() < 1e-6);
    }

    fn lie_ball_oracle(u: &[C64]) -> bool {
        let sq: f64 = u.iter().map(|x| x.norm_sqr()).sum();
        let dot: C64 = u.iter().map(|x| x * x).sum();
        sq / 2.0 + 0.5 * (sq * sq - dot.norm_sqr()).max(0.0).sqrt() < 1.0
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn hermitian_symmetry(seed in any::<u64>(), which in 0usize..5) {
            let d: DomainSpec = ["ball:3", "typeIV:4", "typeI:2x3", "typeI:3x3", "ball:1*typeIV:3"][which].parse().unwrap();
            let mut rng = Seeds::new(seed).stream("herm");
            let z = sampling::gaussian_vec(&mut rng, d.dim());
            let xi = sampling::gaussian_vec(&mut rng, d.dim());
            let a = d.generic_norm_eval(&z, &xi).unwrap();
            let b = d.generic_norm_eval(&xi, &z).unwrap().conj();
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
        }

        #[test]
        fn type_iv_membership_matches_lie_norm(seed in any::<u64>(), n in 2usize..6) {
            let d = DomainSpec::type_iv(n);
            let mut rng = Seeds::new(seed).stream("lie");
            let z: Vec<C64> = sampling::gaussian_vec(&mut rng, n).into_iter().map(|x| x * 0.9).collect();
            let m = d.membership(&z).unwrap();
            if m.margin.abs() > 1e-9 {
                prop_assert_eq!(m.inside, lie_ball_oracle(&z));
            }
        }

        #[test]
        fn margin_grows_toward_origin(seed in any::<u64>(), which in 0usize..4) {
            let d: DomainSpec = ["ball:3", "typeIV:4", "typeI:2x3", "ball:2*typeIV:3"][which].parse().unwrap();
            let mut rng = Seeds::new(seed).stream("ray");
            let z = sampling::gaussian_vec(&mut rng, d.dim());
            let mut last = f64::NEG_INFINITY;
            for i in (0..=20).rev() {
                let t = i as f64 / 20.0;
                let m = d.membership(&z.iter().map(|x| x * t).collect::<Vec<_>>()).unwrap().margin;
                prop_assert!(m >= last - 1e-12);
                last = m;
            }
        }

        #[test]
        fn inside_points_have_positive_norm_on_segment(seed in any::<u64>(), n in 2usize..6) {
            let d = DomainSpec::type_iv(n);
            let mut rng = Seeds::new(seed).stream("seg");
            let z = sampling::ball(&mut rng, n, 1.4);
            if d.membership(&z).unwrap().inside {
                for i in 0..=100 {
                    let t = i as f64 / 100.0;
                    let tz: Vec<C64> = z.iter().map(|x| x * t).collect();
                    prop_assert!(d.generic_norm_eval(&tz, &tz).unwrap().re > 0.0);
                }
            }
        }
    }
}
