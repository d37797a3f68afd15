//! Truncated multivariate power series with complex coefficients.
//!
//! A [`JetSeries`] stores the Taylor coefficients of a germ at the origin up
//! to a total degree `order`. Coefficients live in a sparse map keyed by
//! [`MultiIndex`] in graded-lexicographic order; entries smaller than
//! [`Scalar::zero_tol`] are never stored. Polynomials that are known exactly
//! carry the order [`EXACT`], so that mixing them with truncated jets keeps the
//! truncation of the jet.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Truncation order of an exactly known polynomial.
pub const EXACT: usize = usize::MAX;

/// Exponent vector of a monomial; ordered by total degree, then
/// lexicographically with higher powers of earlier variables first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exps: Vec<u32>,
    degree: usize,
}

impl MultiIndex {
    pub fn new(exps: Vec<u32>) -> Self {
        let degree = exps.iter().map(|&e| e as usize).sum();
        MultiIndex { exps, degree }
    }

    pub fn zero(num_vars: usize) -> Self {
        MultiIndex { exps: vec![0; num_vars], degree: 0 }
    }

    /// The index of the single variable `var`.
    pub fn unit(num_vars: usize, var: usize) -> Self {
        let mut exps = vec![0; num_vars];
        exps[var] = 1;
        MultiIndex { exps, degree: 1 }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_vars(&self) -> usize {
        self.exps.len()
    }

    /// `prod_j exps[j]!` as a float.
    pub fn factorial(&self) -> f64 {
        self.exps
            .iter()
            .map(|&e| (1..=e).map(f64::from).product::<f64>())
            .product()
    }

    fn combine(&self, other: &MultiIndex) -> MultiIndex {
        let exps = self.exps.iter().zip(&other.exps).map(|(a, b)| a + b).collect();
        MultiIndex { exps, degree: self.degree + other.degree }
    }

    /// All indices in `num_vars` variables of total degree exactly `degree`,
    /// in graded-lex order.
    pub fn all_of_degree(num_vars: usize, degree: usize) -> Vec<MultiIndex> {
        fn rec(prefix: &mut Vec<u32>, left: usize, slots: usize, out: &mut Vec<MultiIndex>) {
            if slots == 1 {
                prefix.push(left as u32);
                out.push(MultiIndex::new(prefix.clone()));
                prefix.pop();
                return;
            }
            for e in (0..=left).rev() {
                prefix.push(e as u32);
                rec(prefix, left - e, slots - 1, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if num_vars == 0 {
            if degree == 0 {
                out.push(MultiIndex::new(Vec::new()));
            }
            return out;
        }
        rec(&mut Vec::with_capacity(num_vars), degree, num_vars, &mut out);
        out
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.exps)
    }
}

/// Truncated power series in `num_vars` complex variables.
#[derive(Clone)]
pub struct JetSeries<T: Scalar> {
    num_vars: usize,
    order: usize,
    coeffs: BTreeMap<MultiIndex, Complex<T>>,
}

type Part<T> = Vec<(MultiIndex, Complex<T>)>;

impl<T: Scalar> JetSeries<T> {
    pub fn zero(num_vars: usize, order: usize) -> Self {
        JetSeries { num_vars, order, coeffs: BTreeMap::new() }
    }

    pub fn constant(num_vars: usize, order: usize, c: Complex<T>) -> Self {
        Self::from_terms(num_vars, order, [(MultiIndex::zero(num_vars), c)])
    }

    pub fn one(num_vars: usize, order: usize) -> Self {
        Self::constant(num_vars, order, Complex::one())
    }

    /// The coordinate function `z_var`.
    pub fn var(num_vars: usize, order: usize, var: usize) -> Self {
        assert!(var < num_vars, "variable {var} out of range for {num_vars} variables");
        Self::from_terms(num_vars, order, [(MultiIndex::unit(num_vars, var), Complex::one())])
    }

    /// All coordinate functions `z_0, ..., z_{n-1}`.
    pub fn vars(num_vars: usize, order: usize) -> Vec<Self> {
        (0..num_vars).map(|i| Self::var(num_vars, order, i)).collect()
    }

    /// Builds a series from terms; repeated indices accumulate and terms above
    /// `order` are discarded.
    pub fn from_terms<I>(num_vars: usize, order: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (MultiIndex, Complex<T>)>,
    {
        let mut acc: HashMap<MultiIndex, Complex<T>> = HashMap::new();
        for (idx, c) in terms {
            assert_eq!(idx.num_vars(), num_vars, "multi-index length must equal num_vars");
            if idx.degree() <= order {
                *acc.entry(idx).or_insert_with(Complex::zero) += c;
            }
        }
        Self::from_map(num_vars, order, acc)
    }

    /// Exact polynomial from `(exponents, coefficient)` pairs.
    pub fn polynomial<I>(num_vars: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Vec<u32>, Complex<T>)>,
    {
        Self::from_terms(num_vars, EXACT, terms.into_iter().map(|(e, c)| (MultiIndex::new(e), c)))
    }

    fn from_map(num_vars: usize, order: usize, acc: HashMap<MultiIndex, Complex<T>>) -> Self {
        let tol = T::zero_tol();
        let coeffs = acc.into_iter().filter(|(_, c)| c.norm() >= tol).collect();
        JetSeries { num_vars, order, coeffs }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_exact(&self) -> bool {
        self.order == EXACT
    }

    /// Number of stored (non-negligible) coefficients.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &Complex<T>)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, idx: &MultiIndex) -> Complex<T> {
        self.coeffs.get(idx).copied().unwrap_or_else(Complex::zero)
    }

    pub fn coeff_of(&self, exps: &[u32]) -> Complex<T> {
        self.coeff(&MultiIndex::new(exps.to_vec()))
    }

    pub fn constant_term(&self) -> Complex<T> {
        self.coeff(&MultiIndex::zero(self.num_vars))
    }

    /// Largest degree among stored coefficients (0 for the zero series).
    pub fn max_degree(&self) -> usize {
        self.coeffs.keys().next_back().map_or(0, MultiIndex::degree)
    }

    /// Drops every term above `order` and lowers the recorded order.
    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        JetSeries {
            num_vars: self.num_vars,
            order,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(k, _)| k.degree() <= order)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    /// Relabels a truncated jet as having a larger order; only meaningful when
    /// the caller knows the omitted coefficients vanish.
    pub fn with_order(mut self, order: usize) -> Self {
        self.coeffs.retain(|k, _| k.degree() <= order);
        self.order = order;
        self
    }

    pub fn homogeneous_part(&self, degree: usize) -> Self {
        JetSeries {
            num_vars: self.num_vars,
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(k, _)| k.degree() == degree)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    fn check_vars(&self, other: &Self, op: &str) -> Result<()> {
        if self.num_vars != other.num_vars {
            return Err(Error::Dimension(format!(
                "{op}: series in {} and {} variables",
                self.num_vars, other.num_vars
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_vars(other, "add")?;
        Ok(self.linear_combination(Complex::one(), other, Complex::one()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_vars(other, "sub")?;
        Ok(self.linear_combination(Complex::one(), other, -Complex::<T>::one()))
    }

    fn linear_combination(&self, a: Complex<T>, other: &Self, b: Complex<T>) -> Self {
        let order = self.order.min(other.order);
        let mut acc: HashMap<MultiIndex, Complex<T>> = HashMap::new();
        for (k, v) in self.coeffs.iter().filter(|(k, _)| k.degree() <= order) {
            *acc.entry(k.clone()).or_insert_with(Complex::zero) += *v * a;
        }
        for (k, v) in other.coeffs.iter().filter(|(k, _)| k.degree() <= order) {
            *acc.entry(k.clone()).or_insert_with(Complex::zero) += *v * b;
        }
        Self::from_map(self.num_vars, order, acc)
    }

    pub fn neg(&self) -> Self {
        self.scale(-Complex::<T>::one())
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        let acc = self.coeffs.iter().map(|(k, v)| (k.clone(), *v * c)).collect();
        Self::from_map(self.num_vars, self.order, acc)
    }

    /// Series with every coefficient conjugated.
    pub fn conj(&self) -> Self {
        JetSeries {
            num_vars: self.num_vars,
            order: self.order,
            coeffs: self.coeffs.iter().map(|(k, v)| (k.clone(), v.conj())).collect(),
        }
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_vars(other, "mul")?;
        let order = self.order.min(other.order);
        let a: Part<T> = self.coeffs.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let b: Part<T> = other.coeffs.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let mut acc = HashMap::new();
        mul_into(&a, &b, order, Complex::one(), &mut acc);
        Ok(Self::from_map(self.num_vars, order, acc))
    }

    /// Non-negative integer power by repeated squaring.
    pub fn powi(&self, mut e: u32) -> Result<Self> {
        let mut result = Self::one(self.num_vars, self.order);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(result)
    }

    /// Substitutes `inners[i]` for variable `i` of `outer`.
    ///
    /// Inner series must have vanishing constant term unless `outer` is an
    /// exact polynomial.
    pub fn compose(outer: &Self, inners: &[Self]) -> Result<Self> {
        if inners.len() != outer.num_vars {
            return Err(Error::Dimension(format!(
                "compose: outer has {} variables but {} inner series were given",
                outer.num_vars,
                inners.len()
            )));
        }
        let Some(first) = inners.first() else {
            return Ok(outer.clone());
        };
        let n = first.num_vars;
        if inners.iter().any(|s| s.num_vars != n) {
            return Err(Error::Dimension("compose: inner series disagree on num_vars".into()));
        }
        let inner_order = inners.iter().map(|s| s.order).min().unwrap_or(EXACT);
        let tol = T::zero_tol();
        let graded = inners.iter().all(|s| s.constant_term().norm() < tol);
        if !outer.is_exact() && !graded {
            return Err(Error::Composition(
                "inner series with non-zero constant term inside a truncated outer series".into(),
            ));
        }
        let order = if outer.is_exact() { inner_order } else { outer.order.min(inner_order) };

        let mut max_exp = vec![0u32; outer.num_vars];
        for idx in outer.coeffs.keys() {
            if graded && idx.degree() > order {
                continue;
            }
            for (m, &e) in max_exp.iter_mut().zip(idx.exponents()) {
                *m = (*m).max(e);
            }
        }
        let mut powers: Vec<Vec<Self>> = Vec::with_capacity(outer.num_vars);
        for (i, inner) in inners.iter().enumerate() {
            let inner = inner.truncate(order);
            let mut row = vec![Self::one(n, order)];
            for e in 1..=max_exp[i] {
                let next = row[(e - 1) as usize].mul(&inner)?;
                row.push(next);
            }
            powers.push(row);
        }

        let mut acc: HashMap<MultiIndex, Complex<T>> = HashMap::new();
        for (idx, c) in &outer.coeffs {
            if graded && idx.degree() > order {
                continue;
            }
            let mut term = Self::constant(n, order, *c);
            for (i, &e) in idx.exponents().iter().enumerate() {
                if e > 0 {
                    term = term.mul(&powers[i][e as usize])?;
                }
            }
            for (k, v) in term.coeffs {
                *acc.entry(k).or_insert_with(Complex::zero) += v;
            }
        }
        Ok(Self::from_map(n, order, acc))
    }

    /// Formal partial derivative in `var`; the order drops by one.
    pub fn partial(&self, var: usize) -> Result<Self> {
        if var >= self.num_vars {
            return Err(Error::Dimension(format!(
                "partial: variable {var} out of range for {} variables",
                self.num_vars
            )));
        }
        let order = if self.is_exact() { EXACT } else { self.order.saturating_sub(1) };
        let mut acc = HashMap::new();
        for (k, v) in &self.coeffs {
            let e = k.exponents()[var];
            if e == 0 {
                continue;
            }
            let mut exps = k.exponents().to_vec();
            exps[var] -= 1;
            let idx = MultiIndex::new(exps);
            if idx.degree() <= order {
                acc.insert(idx, *v * T::from(e).unwrap());
            }
        }
        Ok(Self::from_map(self.num_vars, order, acc))
    }

    /// Evaluates the stored polynomial at `point`.
    pub fn evaluate(&self, point: &[Complex<T>]) -> Result<Complex<T>> {
        if point.len() != self.num_vars {
            return Err(Error::Dimension(format!(
                "evaluate: point of length {} for {} variables",
                point.len(),
                self.num_vars
            )));
        }
        let max_deg = self.max_degree();
        let powers: Vec<Vec<Complex<T>>> = point
            .iter()
            .map(|&z| {
                let mut row = Vec::with_capacity(max_deg + 1);
                let mut p = Complex::one();
                for _ in 0..=max_deg {
                    row.push(p);
                    p *= z;
                }
                row
            })
            .collect();
        // Sum highest degrees first to limit cancellation against the constant.
        let mut total = Complex::zero();
        for (k, c) in self.coeffs.iter().rev() {
            let mut m = *c;
            for (i, &e) in k.exponents().iter().enumerate() {
                if e > 0 {
                    m *= powers[i][e as usize];
                }
            }
            total += m;
        }
        Ok(total)
    }

    fn parts(&self, order: usize) -> Vec<Part<T>> {
        let mut parts = vec![Vec::new(); order + 1];
        for (k, v) in &self.coeffs {
            if k.degree() <= order {
                parts[k.degree()].push((k.clone(), *v));
            }
        }
        parts
    }

    fn from_parts(num_vars: usize, order: usize, parts: Vec<Part<T>>) -> Self {
        let acc = parts.into_iter().flatten().collect();
        Self::from_map(num_vars, order, acc)
    }

    fn require_unit_constant(&self, op: &str) -> Result<()> {
        let c0 = self.constant_term();
        if (c0 - Complex::one()).norm() >= T::zero_tol() {
            return Err(Error::Normalization(format!(
                "{op} needs constant term 1, found {:?}",
                c0
            )));
        }
        Ok(())
    }

    fn finite_order(&self, op: &str) -> Result<usize> {
        if self.is_exact() {
            return Err(Error::Normalization(format!(
                "{op} of an exact polynomial is an infinite series; truncate first"
            )));
        }
        Ok(self.order)
    }

    /// `a^e = exp(e log a)` for a series with constant term 1.
    ///
    /// Uses the graded form of the log-derivative identity
    /// `E(b) a = e b E(a)`, where `E` is the Euler operator, which yields each
    /// homogeneous part of `b` from the lower ones. Exact polynomials are only
    /// accepted with non-negative integer exponents.
    pub fn pow_real(&self, e: T) -> Result<Self> {
        self.require_unit_constant("pow_real")?;
        if e == T::zero() {
            return Ok(Self::one(self.num_vars, self.order));
        }
        if e == T::one() {
            return Ok(self.clone());
        }
        let is_nat = e > T::zero() && e.fract() == T::zero() && e <= T::from(64).unwrap();
        if self.is_exact() {
            if is_nat {
                return self.powi(e.to_u32().unwrap());
            }
            self.finite_order("pow_real")?;
        }
        let order = self.order;
        let a = self.parts(order);
        let mut b: Vec<Part<T>> = Vec::with_capacity(order + 1);
        b.push(vec![(MultiIndex::zero(self.num_vars), Complex::one())]);
        for d in 1..=order {
            let mut acc = HashMap::new();
            for k in 1..=d {
                let w = e * T::from(k).unwrap() - T::from(d - k).unwrap();
                if w == T::zero() || a[k].is_empty() || b[d - k].is_empty() {
                    continue;
                }
                mul_into(&a[k], &b[d - k], d, Complex::new(w, T::zero()), &mut acc);
            }
            let inv_d = T::one() / T::from(d).unwrap();
            b.push(acc.into_iter().map(|(k, v)| (k, v * inv_d)).collect());
        }
        Ok(Self::from_parts(self.num_vars, order, b))
    }

    /// Logarithm of a series with constant term 1.
    pub fn log(&self) -> Result<Self> {
        self.require_unit_constant("log")?;
        let order = self.finite_order("log")?;
        let a = self.parts(order);
        let mut l: Vec<Part<T>> = vec![Vec::new(); order + 1];
        for d in 1..=order {
            let mut acc: HashMap<MultiIndex, Complex<T>> = HashMap::new();
            let df = T::from(d).unwrap();
            for (k, v) in &a[d] {
                *acc.entry(k.clone()).or_insert_with(Complex::zero) += *v * df;
            }
            for k in 1..d {
                let w = -T::from(d - k).unwrap();
                mul_into(&a[k], &l[d - k], d, Complex::new(w, T::zero()), &mut acc);
            }
            l[d] = acc.into_iter().map(|(k, v)| (k, v / df)).collect();
        }
        Ok(Self::from_parts(self.num_vars, order, l))
    }

    /// Exponential; a non-zero constant term contributes the factor `exp(c0)`.
    pub fn exp(&self) -> Result<Self> {
        let order = self.finite_order("exp")?;
        let c = self.parts(order);
        let mut b: Vec<Part<T>> = Vec::with_capacity(order + 1);
        b.push(vec![(MultiIndex::zero(self.num_vars), Complex::one())]);
        for d in 1..=order {
            let mut acc = HashMap::new();
            for k in 1..=d {
                let w = T::from(k).unwrap();
                mul_into(&c[k], &b[d - k], d, Complex::new(w, T::zero()), &mut acc);
            }
            let inv_d = T::one() / T::from(d).unwrap();
            b.push(acc.into_iter().map(|(k, v)| (k, v * inv_d)).collect());
        }
        let scale = self.constant_term().exp();
        Ok(Self::from_parts(self.num_vars, order, b).scale(scale))
    }

    /// Places this series into a space of `total_vars` variables, its own
    /// variables occupying positions `offset..offset + num_vars`.
    pub fn embed(&self, total_vars: usize, offset: usize) -> Self {
        assert!(offset + self.num_vars <= total_vars, "embedding out of range");
        let coeffs = self
            .coeffs
            .iter()
            .map(|(k, v)| {
                let mut exps = vec![0; total_vars];
                exps[offset..offset + self.num_vars].copy_from_slice(k.exponents());
                (MultiIndex { exps, degree: k.degree() }, *v)
            })
            .collect();
        JetSeries { num_vars: total_vars, order: self.order, coeffs }
    }

    /// Sets the variables `keep..` to zero and drops them.
    pub fn restrict_to_leading(&self, keep: usize) -> Self {
        assert!(keep <= self.num_vars);
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(k, _)| k.exponents()[keep..].iter().all(|&e| e == 0))
            .map(|(k, v)| (MultiIndex::new(k.exponents()[..keep].to_vec()), *v))
            .collect();
        JetSeries { num_vars: keep, order: self.order, coeffs }
    }

    /// Largest coefficient modulus of `self - other` over both supports, up to
    /// the smaller order.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let order = self.order.min(other.order);
        let mut worst = T::zero();
        for (k, v) in &self.coeffs {
            if k.degree() <= order {
                worst = worst.max((*v - other.coeff(k)).norm());
            }
        }
        for (k, v) in &other.coeffs {
            if k.degree() <= order && !self.coeffs.contains_key(k) {
                worst = worst.max(v.norm());
            }
        }
        worst
    }

    pub fn cast<U: Scalar>(&self) -> JetSeries<U> {
        let tol = U::zero_tol();
        JetSeries {
            num_vars: self.num_vars,
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, v)| {
                    let c = Complex::new(
                        U::from(v.re).expect("cast"),
                        U::from(v.im).expect("cast"),
                    );
                    (k.clone(), c)
                })
                .filter(|(_, c)| c.norm() >= tol)
                .collect(),
        }
    }
}

/// Accumulates `scale * a * b` into `acc`, skipping products above `order`.
/// `b` must be sorted by degree.
fn mul_into<T: Scalar>(
    a: &Part<T>,
    b: &Part<T>,
    order: usize,
    scale: Complex<T>,
    acc: &mut HashMap<MultiIndex, Complex<T>>,
) {
    for (ka, va) in a {
        if ka.degree() > order {
            break;
        }
        let room = order - ka.degree();
        let sa = *va * scale;
        for (kb, vb) in b {
            if kb.degree() > room {
                break;
            }
            *acc.entry(ka.combine(kb)).or_insert_with(Complex::zero) += sa * *vb;
        }
    }
}

impl<T: Scalar> PartialEq for JetSeries<T> {
    fn eq(&self, other: &Self) -> bool {
        self.num_vars == other.num_vars && self.order == other.order && self.coeffs == other.coeffs
    }
}

impl<T: Scalar> fmt::Debug for JetSeries<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let order = if self.is_exact() { "exact".to_string() } else { self.order.to_string() };
        f.debug_struct("JetSeries")
            .field("num_vars", &self.num_vars)
            .field("order", &order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
struct CoeffRepr {
    index: Vec<u32>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct JetRepr {
    num_vars: usize,
    /// `null` marks an exact polynomial.
    order: Option<usize>,
    coeffs: Vec<CoeffRepr>,
}

impl<T: Scalar> Serialize for JetSeries<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        JetRepr {
            num_vars: self.num_vars,
            order: (!self.is_exact()).then_some(self.order),
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, v)| CoeffRepr {
                    index: k.exponents().to_vec(),
                    re: v.re.to_f64().unwrap_or(f64::NAN),
                    im: v.im.to_f64().unwrap_or(f64::NAN),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for JetSeries<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = JetRepr::deserialize(d)?;
        let order = repr.order.unwrap_or(EXACT);
        let mut terms = Vec::with_capacity(repr.coeffs.len());
        for c in repr.coeffs {
            if c.index.len() != repr.num_vars {
                return Err(D::Error::custom(format!(
                    "index {:?} does not have {} entries",
                    c.index, repr.num_vars
                )));
            }
            let idx = MultiIndex::new(c.index);
            if idx.degree() > order {
                return Err(D::Error::custom(format!("index {idx:?} exceeds order {order}")));
            }
            let (re, im) = (T::from(c.re), T::from(c.im));
            let (Some(re), Some(im)) = (re, im) else {
                return Err(D::Error::custom("coefficient not representable"));
            };
            terms.push((idx, Complex::new(re, im)));
        }
        Ok(JetSeries::from_terms(repr.num_vars, order, terms))
    }
}
