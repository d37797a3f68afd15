//! Holomorphic isometry germs and the identities they satisfy.
//!
//! A map `f` from a source domain `D` (weights `lambda_i`) into a target `Omega`
//! (weights `mu_j`) with `f(0) = 0` is an isometry with constant `k` when
//!
//! ```text
//! prod_j h_j(f_j(w), f_j(zeta))^{mu_j} = prod_i h_i(w^i, zeta^i)^{k lambda_i}
//! ```
//!
//! holds identically in `(w, conj(zeta))`. The effective source weights are
//! `k * lambda_i`; for a ball source with unit weights they are just `k`.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::certificate::{worst, Certificate};
use crate::domains::{DomainSpec, FactorKind, GenericNorm};
use crate::error::{Error, Result};
use crate::jet::{MultiIndex, EXACT};
use crate::tolerances::Tolerances;
use crate::{linalg, sampling, CMatrix, Jet, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosedFormKind {
    /// Linear map; evaluated through its (exact) jets.
    BallLinear,
    /// Diagonal embedding into a product; evaluated through its jets.
    DiagSquare,
    /// `(u, phi(u))` into `typeIV:N` with `phi = c G(u, phi)` solved in closed form.
    TypeIvGraph,
    /// `(u, phi(u))` with `phi = U G(u, phi)` solved pointwise by Newton's method.
    GraphFixedPoint,
}

impl ClosedFormKind {
    pub fn tag(self) -> &'static str {
        match self {
            ClosedFormKind::BallLinear => "ball_linear",
            ClosedFormKind::DiagSquare => "diag_square",
            ClosedFormKind::TypeIvGraph => "typeIV_graph",
            ClosedFormKind::GraphFixedPoint => "graph_fixed_point",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        Ok(match tag {
            "ball_linear" => ClosedFormKind::BallLinear,
            "diag_square" => ClosedFormKind::DiagSquare,
            "typeIV_graph" => ClosedFormKind::TypeIvGraph,
            "graph_fixed_point" => ClosedFormKind::GraphFixedPoint,
            _ => return Err(Error::Parse(format!("unknown closed form {tag:?}"))),
        })
    }

    /// Whether evaluation goes through the map's own jets.
    pub fn uses_jets(self) -> bool {
        matches!(self, ClosedFormKind::BallLinear | ClosedFormKind::DiagSquare)
    }
}

/// Exact pointwise evaluator attached to a map.
///
/// For the graph kinds the source point `w` is first mapped by `source_map`
/// (when present) to `u`; the standard arrangement `(u, phi)` is then placed
/// so that standard coordinate `i` lands in output slot `permutation[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedForm {
    pub kind: ClosedFormKind,
    pub source_map: Option<CMatrix>,
    pub permutation: Option<Vec<usize>>,
    /// `U = conj(U~)^T` of the fixed-point equation `phi = U G(x)`.
    pub unitary: Option<CMatrix>,
    // d G_l / d x_{slot of phi_j}, for the Newton solver
    partials: Vec<Vec<Jet>>,
}

impl ClosedForm {
    pub fn simple(kind: ClosedFormKind) -> Self {
        ClosedForm { kind, source_map: None, permutation: None, unitary: None, partials: Vec::new() }
    }

    pub fn type_iv_graph(phase: Option<C64>) -> Self {
        ClosedForm {
            unitary: phase.map(|c| CMatrix::from_element(1, 1, c)),
            ..ClosedForm::simple(ClosedFormKind::TypeIvGraph)
        }
    }

    /// Pointwise solver for `phi = U G(x)` on an irreducible target.
    pub fn graph_fixed_point(target: &DomainSpec, unitary: CMatrix, permutation: Option<Vec<usize>>) -> Result<Self> {
        let mut cf = ClosedForm {
            kind: ClosedFormKind::GraphFixedPoint,
            source_map: None,
            permutation,
            unitary: Some(unitary),
            partials: Vec::new(),
        };
        cf.prepare(target)?;
        Ok(cf)
    }

    fn prepare(&mut self, target: &DomainSpec) -> Result<()> {
        let big_n = target.dim();
        if let Some(p) = &self.permutation {
            let mut seen = vec![false; big_n];
            if p.len() != big_n || p.iter().any(|&i| i >= big_n || std::mem::replace(&mut seen[i], true)) {
                return Err(Error::Parse(format!("permutation {p:?} is not a permutation of 0..{big_n}")));
            }
        }
        if self.kind != ClosedFormKind::GraphFixedPoint && self.kind != ClosedFormKind::TypeIvGraph {
            return Ok(());
        }
        if !target.is_irreducible() {
            return Err(Error::Hypothesis("graph closed forms need an irreducible target".into()));
        }
        let norm = target.factors()[0].norm();
        let m = norm.terms().len();
        if let Some(u) = &self.unitary {
            if u.shape() != (m, m) {
                return Err(Error::Dimension(format!("unitary must be {m}x{m}")));
            }
        }
        if self.kind == ClosedFormKind::GraphFixedPoint {
            let n = big_n - m;
            self.partials = norm
                .terms()
                .iter()
                .map(|g| (0..m).map(|j| g.partial(self.slot(n + j)).expect("variable in range")).collect())
                .collect();
        }
        Ok(())
    }

    fn slot(&self, i: usize) -> usize {
        self.permutation.as_ref().map_or(i, |p| p[i])
    }

    fn assemble(&self, u: &[C64], phi: &[C64]) -> Vec<C64> {
        let mut x = vec![C64::zero(); u.len() + phi.len()];
        for (i, v) in u.iter().chain(phi).enumerate() {
            x[self.slot(i)] = *v;
        }
        x
    }

    /// Evaluates a graph kind; polynomial kinds are evaluated by the map.
    pub fn eval(&self, target: &DomainSpec, w: &[C64]) -> Result<Vec<C64>> {
        let u = match &self.source_map {
            Some(s) => linalg::matvec(s, w),
            None => w.to_vec(),
        };
        match self.kind {
            ClosedFormKind::TypeIvGraph => {
                let c = self.unitary.as_ref().map_or(C64::one(), |u| u[(0, 0)]);
                let s2: C64 = u.iter().map(|x| x * x).sum();
                let x = c * c * s2;
                let phi = x / (c * (C64::one() + (C64::one() - x).sqrt()));
                Ok(self.assemble(&u, &[phi]))
            }
            ClosedFormKind::GraphFixedPoint => {
                let norm = target.factors()[0].norm();
                let phi = self.solve(norm, &u)?;
                Ok(self.assemble(&u, &phi))
            }
            _ => Err(Error::Hypothesis(format!("{} is evaluated through jets", self.kind.tag()))),
        }
    }

    fn solve(&self, norm: &GenericNorm, z: &[C64]) -> Result<Vec<C64>> {
        let u = self.unitary.as_ref().expect("fixed-point closed form has a unitary");
        for steps in [8usize, 32, 128] {
            if let Some(phi) = self.continuation(norm, u, z, steps) {
                return Ok(phi);
            }
        }
        Err(Error::Domain(format!("fixed-point solve did not converge at {z:?}")))
    }

    fn continuation(&self, norm: &GenericNorm, u: &CMatrix, z: &[C64], steps: usize) -> Option<Vec<C64>> {
        let m = u.nrows();
        let mut phi = vec![C64::zero(); m];
        for s in 1..=steps {
            let t = s as f64 / steps as f64;
            let zt: Vec<C64> = z.iter().map(|v| v * t).collect();
            let mut converged = false;
            for _ in 0..60 {
                let x = self.assemble(&zt, &phi);
                let g = norm.g_values(&x);
                let ug = linalg::matvec(u, &g);
                let r: Vec<C64> = phi.iter().zip(&ug).map(|(a, b)| a - b).collect();
                let scale = 1.0 + linalg::norm(&phi);
                if linalg::norm(&r) <= 1e-15 * scale {
                    converged = true;
                    break;
                }
                let dg = CMatrix::from_fn(g.len(), m, |l, j| self.partials[l][j].evaluate(&x).expect("arity"));
                let jac = linalg::identity(m) - u * dg;
                let delta = jac.lu().solve(&linalg::column(&r))?;
                for (p, d) in phi.iter_mut().zip(delta.iter()) {
                    *p -= d;
                }
                if delta.iter().map(|d| d.norm_sqr()).sum::<f64>().sqrt() <= 4e-16 * scale {
                    converged = true;
                    break;
                }
            }
            if !converged {
                let x = self.assemble(&zt, &phi);
                let r = linalg::sub(&phi, &linalg::matvec(u, &norm.g_values(&x)));
                if linalg::norm(&r) > 1e-12 * (1.0 + linalg::norm(&phi)) {
                    return None;
                }
            }
        }
        Some(phi)
    }

    fn to_json(&self) -> Value {
        if self.source_map.is_none() && self.permutation.is_none() && self.unitary.is_none() {
            return Value::String(self.kind.tag().into());
        }
        let mut o = serde_json::Map::new();
        o.insert("tag".into(), Value::String(self.kind.tag().into()));
        if let Some(s) = &self.source_map {
            o.insert("source_map".into(), linalg::matrix_to_json(s));
        }
        if let Some(p) = &self.permutation {
            o.insert("permutation".into(), serde_json::json!(p));
        }
        if let Some(u) = &self.unitary {
            o.insert("unitary".into(), linalg::matrix_to_json(u));
        }
        Value::Object(o)
    }

    fn from_json(v: &Value, target: &DomainSpec) -> Result<Self> {
        let mut cf = match v {
            Value::String(tag) => ClosedForm::simple(ClosedFormKind::from_tag(tag)?),
            Value::Object(o) => {
                let tag = o.get("tag").and_then(Value::as_str).ok_or_else(|| Error::Parse("closed_form needs a tag".into()))?;
                let matrix = |key: &str| o.get(key).map(linalg::matrix_from_json).transpose();
                ClosedForm {
                    kind: ClosedFormKind::from_tag(tag)?,
                    source_map: matrix("source_map")?,
                    unitary: matrix("unitary")?,
                    permutation: o
                        .get("permutation")
                        .map(|p| serde_json::from_value::<Vec<usize>>(p.clone()))
                        .transpose()?,
                    partials: Vec::new(),
                }
            }
            _ => return Err(Error::Parse("closed_form must be a tag or an object".into())),
        };
        if cf.kind == ClosedFormKind::GraphFixedPoint && cf.unitary.is_none() {
            return Err(Error::Parse("graph_fixed_point needs a unitary".into()));
        }
        cf.prepare(target)?;
        Ok(cf)
    }
}

/// A germ `f: (D, 0) -> (Omega, 0)` given by jets, optionally with an exact
/// pointwise evaluator.
#[derive(Clone, Debug, PartialEq)]
pub struct IsometryMap {
    source: DomainSpec,
    target: DomainSpec,
    k: f64,
    jets: Vec<Jet>,
    closed_form: Option<ClosedForm>,
}

impl IsometryMap {
    pub fn new(source: DomainSpec, target: DomainSpec, k: f64, jets: Vec<Jet>, closed_form: Option<ClosedForm>) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Hypothesis(format!("isometry constant must be positive, got {k}")));
        }
        if jets.len() != target.dim() {
            return Err(Error::Dimension(format!("{} component jets for a target of dimension {}", jets.len(), target.dim())));
        }
        let n = source.dim();
        if let Some(bad) = jets.iter().find(|j| j.num_vars() != n) {
            return Err(Error::Dimension(format!("component jet in {} variables, source dimension {n}", bad.num_vars())));
        }
        let order = jets.iter().map(Jet::order).min().unwrap_or(EXACT);
        let jets: Vec<Jet> = jets.into_iter().map(|j| j.truncate(order)).collect();
        let c0 = jets.iter().map(|j| j.constant_term().norm()).fold(0.0, f64::max);
        if c0 > 0.0 {
            return Err(Error::Hypothesis(format!(
                "maps must satisfy f(0) = 0 (|f(0)| = {c0:e}); base-point normalization by automorphisms is not supported"
            )));
        }
        if let Some(cf) = &closed_form {
            if let Some(s) = &cf.source_map {
                if s.ncols() != n {
                    return Err(Error::Dimension("closed-form source map has the wrong width".into()));
                }
            }
        }
        Ok(IsometryMap { source, target, k, jets, closed_form })
    }

    pub fn source(&self) -> &DomainSpec {
        &self.source
    }

    pub fn target(&self) -> &DomainSpec {
        &self.target
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn jets(&self) -> &[Jet] {
        &self.jets
    }

    pub fn closed_form(&self) -> Option<&ClosedForm> {
        self.closed_form.as_ref()
    }

    pub fn order(&self) -> usize {
        self.jets.iter().map(Jet::order).min().unwrap_or(EXACT)
    }

    pub fn source_dim(&self) -> usize {
        self.source.dim()
    }

    pub fn target_dim(&self) -> usize {
        self.target.dim()
    }

    /// Replaces the jets (e.g. for fault injection), keeping everything else.
    pub fn with_jets(&self, jets: Vec<Jet>) -> Result<Self> {
        IsometryMap::new(self.source.clone(), self.target.clone(), self.k, jets, self.closed_form.clone())
    }

    pub fn without_closed_form(&self) -> Self {
        IsometryMap { closed_form: None, ..self.clone() }
    }

    /// Per-coordinate effective source weights `k * lambda`.
    pub fn source_weights(&self) -> Vec<f64> {
        self.source.coordinate_weights().into_iter().map(|l| l * self.k).collect()
    }

    pub fn target_weights(&self) -> Vec<f64> {
        self.target.coordinate_weights()
    }

    /// Whether pointwise values are exact (closed form or polynomial jets).
    pub fn has_exact_evaluator(&self) -> bool {
        match &self.closed_form {
            Some(cf) if !cf.kind.uses_jets() => true,
            _ => self.jets.iter().all(Jet::is_exact),
        }
    }

    /// `f(w)`, through the closed form when one is attached.
    pub fn eval(&self, w: &[C64]) -> Result<Vec<C64>> {
        if w.len() != self.source_dim() {
            return Err(Error::Dimension(format!("point of length {} for source dimension {}", w.len(), self.source_dim())));
        }
        match &self.closed_form {
            Some(cf) if !cf.kind.uses_jets() => cf.eval(&self.target, w),
            _ => self.eval_jets(w),
        }
    }

    pub fn eval_jets(&self, w: &[C64]) -> Result<Vec<C64>> {
        self.jets.iter().map(|j| j.evaluate(w)).collect()
    }

    /// `Jf(w)` (N x n): central differences on closed forms, jet partials
    /// otherwise.
    pub fn jacobian_at(&self, w: &[C64], step: f64) -> Result<CMatrix> {
        let (n, big_n) = (self.source_dim(), self.target_dim());
        let mut jac = CMatrix::zeros(big_n, n);
        if matches!(&self.closed_form, Some(cf) if !cf.kind.uses_jets()) {
            for i in 0..n {
                let mut wp = w.to_vec();
                let mut wm = w.to_vec();
                wp[i] += step;
                wm[i] -= step;
                let (fp, fm) = (self.eval(&wp)?, self.eval(&wm)?);
                for j in 0..big_n {
                    jac[(j, i)] = (fp[j] - fm[j]) / (2.0 * step);
                }
            }
        } else {
            for (j, jet) in self.jets.iter().enumerate() {
                for i in 0..n {
                    jac[(j, i)] = jet.partial(i)?.evaluate(w)?;
                }
            }
        }
        Ok(jac)
    }

    /// Precomposition with a linear change of source coordinates `w -> A w`.
    pub fn precompose_linear(&self, a: &CMatrix) -> Result<Self> {
        let n = self.source_dim();
        if a.shape() != (n, n) {
            return Err(Error::Dimension(format!("linear change of coordinates must be {n}x{n}")));
        }
        let inners: Vec<Jet> = (0..n)
            .map(|i| Jet::polynomial(n, (0..n).map(|j| (MultiIndex::unit(n, j).exponents().to_vec(), a[(i, j)]))))
            .collect();
        let jets = self.jets.iter().map(|f| Jet::compose(f, &inners)).collect::<Result<Vec<_>>>()?;
        let closed_form = self.closed_form.as_ref().map(|cf| {
            let mut cf = cf.clone();
            if !cf.kind.uses_jets() {
                cf.source_map = Some(match &cf.source_map {
                    Some(s) => s * a,
                    None => a.clone(),
                });
            }
            cf
        });
        IsometryMap::new(self.source.clone(), self.target.clone(), self.k, jets, closed_form)
    }

    pub fn to_json(&self) -> Value {
        let repr = MapRepr {
            source: self.source.clone(),
            target: self.target.clone(),
            k: self.k,
            weights: Some(WeightsRepr { source: self.source.weights(), target: self.target.weights() }),
            jets: self.jets.clone(),
            closed_form: self.closed_form.as_ref().map(ClosedForm::to_json),
        };
        serde_json::to_value(repr).expect("map serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("map serializes")
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let repr: MapRepr = serde_json::from_value(v.clone())?;
        let (mut source, mut target) = (repr.source, repr.target);
        if let Some(w) = repr.weights {
            source = source.with_weights(&w.source)?;
            target = target.with_weights(&w.target)?;
        }
        let closed_form = repr.closed_form.as_ref().map(|cf| ClosedForm::from_json(cf, &target)).transpose()?;
        IsometryMap::new(source, target, repr.k, repr.jets, closed_form)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        IsometryMap::from_json(&serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct WeightsRepr {
    source: Vec<f64>,
    target: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MapRepr {
    source: DomainSpec,
    target: DomainSpec,
    k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<WeightsRepr>,
    jets: Vec<Jet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    closed_form: Option<Value>,
}

/// Differential at the base point with its derived data.
#[derive(Clone, Debug)]
pub struct JacobianAtZero {
    /// `Jf(0)`, N x n.
    pub matrix: CMatrix,
    /// Orthonormal basis of `ker conj(Jf(0))^T`, N x (N - n).
    pub kernel: CMatrix,
    pub singular_values: Vec<f64>,
}

impl JacobianAtZero {
    /// `(1/k) conj(Jf(0))^T`.
    pub fn l_f(&self, k: f64) -> CMatrix {
        self.matrix.adjoint() / C64::new(k, 0.0)
    }
}

pub fn jacobian_at_zero(f: &IsometryMap, tol: &Tolerances) -> Result<JacobianAtZero> {
    if f.order() < 1 {
        return Err(Error::Hypothesis("jets of order at least 1 are required".into()));
    }
    let n = f.source_dim();
    let matrix = CMatrix::from_fn(f.target_dim(), n, |j, i| f.jets[j].coeff(&MultiIndex::unit(n, i)));
    let singular_values = linalg::singular_values(&matrix);
    let r = linalg::rank(&matrix, tol.tau_rank);
    if r < n {
        return Err(Error::Rank(format!("Jf(0) has rank {r} < {n}; rank defect {}", n - r)));
    }
    let kernel = linalg::null_space(&matrix.adjoint(), tol.tau_rank);
    Ok(JacobianAtZero { matrix, kernel, singular_values })
}

/// `M(f) = diag(1 / (k lambda)) conj(Jf(0))^T diag(mu)`, n x N, rank-certified.
pub fn matrix_m(f: &IsometryMap, tol: &Tolerances) -> Result<CMatrix> {
    let jac = jacobian_at_zero(f, tol)?;
    let lam: Vec<f64> = f.source_weights().iter().map(|l| 1.0 / l).collect();
    let m = linalg::diag_real(&lam) * jac.matrix.adjoint() * linalg::diag_real(&f.target_weights());
    let r = linalg::rank(&m, tol.tau_rank);
    if r < f.source_dim() {
        return Err(Error::Rank(format!("M(f) has rank {r} < {}", f.source_dim())));
    }
    Ok(m)
}

/// Residual of `conj(J)^T diag(mu) J = diag(k lambda)`.
pub fn jacobian_identity(f: &IsometryMap, tol: &Tolerances) -> Result<Certificate> {
    let jac = jacobian_at_zero(f, tol)?;
    let gram = jac.matrix.adjoint() * linalg::diag_real(&f.target_weights()) * &jac.matrix;
    let residual = linalg::max_abs(&(gram - linalg::diag_real(&f.source_weights())));
    let kernel_residual = linalg::max_abs(&(jac.matrix.adjoint() * &jac.kernel));
    let r = residual.max(kernel_residual);
    Ok(Certificate::new("jacobian_identity")
        .metric("residual", residual)
        .metric("kernel_residual", kernel_residual)
        .metric("kernel_dim", jac.kernel.ncols() as f64)
        .tolerance("eps_lin", tol.eps_lin)
        .pass_if(r <= tol.eps_lin))
}

/// Coefficientwise comparison of both sides of the polarized functional
/// equation through total degree `order` in `(w, conj(zeta))`.
pub fn verify_functional_equation(f: &IsometryMap, order: usize, tol: &Tolerances) -> Result<Certificate> {
    let order = order.min(f.order());
    let jets: Vec<Jet> = f.jets.iter().map(|j| j.truncate(order)).collect();
    let lhs = f.target.weighted_norm_jet(&jets, &jets, 1.0)?;
    let id = Jet::vars(f.source_dim(), order);
    let rhs = f.source.weighted_norm_jet(&id, &id, f.k)?;
    let residual = lhs.truncate(order).max_abs_diff(&rhs.truncate(order));
    let mut cert = Certificate::new("functional_equation")
        .metric("residual", residual)
        .metric("order", order as f64)
        .tolerance("eps_fun", tol.eps_fun)
        .pass_if(residual <= tol.eps_fun);
    if order < 2 {
        cert = cert.note("order below 2 only checks the linear part");
    }
    Ok(cert)
}

/// Samples `count` pairs in the source ball of radius `r_sample`.
pub fn sample_pairs(n: usize, count: usize, radius: f64, rng: &mut impl rand::Rng) -> Vec<(Vec<C64>, Vec<C64>)> {
    (0..count).map(|_| (sampling::ball(rng, n, radius), sampling::ball(rng, n, radius))).collect()
}

/// Both sides of the functional equation at sampled pairs.
pub fn verify_functional_equation_pointwise(
    f: &IsometryMap,
    pairs: &[(Vec<C64>, Vec<C64>)],
    tol: &Tolerances,
) -> Result<Certificate> {
    let residual = pairs
        .par_iter()
        .map(|(w, z)| -> Result<f64> {
            let (fw, fz) = (f.eval(w)?, f.eval(z)?);
            let lhs = f.target.weighted_norm_eval(&fw, &fz, 1.0)?;
            let rhs = f.source.weighted_norm_eval(w, z, f.k)?;
            Ok((lhs - rhs).norm())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, worst);
    let mut cert = Certificate::new("functional_equation_pointwise")
        .metric("residual", residual)
        .metric("pairs", pairs.len() as f64)
        .tolerance("eps_point", tol.eps_point)
        .pass_if(residual <= tol.eps_point);
    if !f.has_exact_evaluator() {
        cert = cert.note("evaluated through truncated jets");
    }
    Ok(cert)
}

/// `conj(Jf(0))^T diag(mu) f(w) = diag(k lambda) w` at sampled points inside
/// the source; points outside are rejected.
pub fn verify_linear_functional(f: &IsometryMap, samples: &[Vec<C64>], tol: &Tolerances) -> Result<Certificate> {
    let jac = jacobian_at_zero(f, tol)?;
    let a = jac.matrix.adjoint() * linalg::diag_real(&f.target_weights());
    let lam = f.source_weights();
    let inside: Vec<&Vec<C64>> = samples.iter().filter(|w| f.source.contains(w, 0.0)).collect();
    let residual = inside
        .par_iter()
        .map(|w| -> Result<f64> {
            let lf = linalg::matvec(&a, &f.eval(w)?);
            Ok(lf.iter().zip(w.iter()).zip(&lam).map(|((x, y), l)| (x - y * l).norm_sqr()).sum::<f64>().sqrt())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, worst);
    let scale = lam.iter().copied().fold(0.0, f64::max);
    Ok(Certificate::new("linear_functional")
        .metric("residual", residual)
        .metric("samples", inside.len() as f64)
        .metric("rejected", (samples.len() - inside.len()) as f64)
        .tolerance("eps_fun_scaled", tol.eps_fun * scale)
        .pass_if(residual <= tol.eps_fun * scale))
}

/// `M(f) f(w) = w` at sampled points.
pub fn verify_m_identity(f: &IsometryMap, samples: &[Vec<C64>], tol: &Tolerances) -> Result<Certificate> {
    let m = matrix_m(f, tol)?;
    let residual = samples
        .par_iter()
        .map(|w| -> Result<f64> { Ok(linalg::norm(&linalg::sub(&linalg::matvec(&m, &f.eval(w)?), w))) })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, worst);
    Ok(Certificate::new("m_identity")
        .metric("residual", residual)
        .tolerance("eps_lin", tol.eps_lin)
        .pass_if(residual <= tol.eps_lin))
}

/// Maps with known closed forms.
pub mod catalog {
    use super::*;

    fn linear(n: usize, big_n: usize, a: impl Fn(usize, usize) -> C64) -> Vec<Jet> {
        (0..big_n)
            .map(|j| Jet::polynomial(n, (0..n).map(|i| (MultiIndex::unit(n, i).exponents().to_vec(), a(j, i)))))
            .collect()
    }

    pub fn identity(n: usize) -> IsometryMap {
        IsometryMap::new(
            DomainSpec::ball(n),
            DomainSpec::ball(n),
            1.0,
            linear(n, n, |j, i| if i == j { C64::one() } else { C64::zero() }),
            Some(ClosedForm::simple(ClosedFormKind::BallLinear)),
        )
        .expect("identity is well formed")
    }

    /// `z -> (z, 0)` from `ball:n` into `ball:big_n`.
    pub fn totally_geodesic(n: usize, big_n: usize) -> IsometryMap {
        assert!(big_n >= n);
        IsometryMap::new(
            DomainSpec::ball(n),
            DomainSpec::ball(big_n),
            1.0,
            linear(n, big_n, |j, i| if i == j { C64::one() } else { C64::zero() }),
            Some(ClosedForm::simple(ClosedFormKind::BallLinear)),
        )
        .expect("embedding is well formed")
    }

    /// `w -> (w, 1 - sqrt(1 - sum w_j^2))` from `ball:n-1` into `typeIV:n`.
    pub fn type_iv_graph(n: usize, order: usize) -> IsometryMap {
        let src = n - 1;
        let w = Jet::vars(src, order);
        let s2 = w.iter().fold(Jet::zero(src, order), |acc, x| acc.add(&x.mul(x).unwrap()).unwrap());
        let root = Jet::one(src, order).sub(&s2).unwrap().pow_real(0.5).unwrap();
        let phi = Jet::one(src, order).sub(&root).unwrap();
        let mut jets = w;
        jets.push(phi);
        IsometryMap::new(
            DomainSpec::ball(src),
            DomainSpec::type_iv(n),
            1.0,
            jets,
            Some(ClosedForm::type_iv_graph(None)),
        )
        .expect("typeIV graph map is well formed")
    }

    /// `w -> (w, w)` from the disc with weight 2 into the bidisc.
    pub fn diagonal() -> IsometryMap {
        IsometryMap::new(
            DomainSpec::ball(1),
            "ball:1*ball:1".parse().expect("valid spec"),
            2.0,
            linear(1, 2, |_, _| C64::one()),
            Some(ClosedForm::simple(ClosedFormKind::DiagSquare)),
        )
        .expect("diagonal is well formed")
    }

    /// Componentwise product `(f_1, ..., f_r)` of maps with unit-weight
    /// sources; the factor constants become source weights.
    pub fn product(maps: &[IsometryMap]) -> Result<IsometryMap> {
        let total: usize = maps.iter().map(IsometryMap::source_dim).sum();
        let mut src = Vec::new();
        let mut tgt = Vec::new();
        let mut jets = Vec::new();
        let mut offset = 0;
        for f in maps {
            for fac in f.source().factors() {
                src.push(crate::Factor::new(fac.kind, fac.weight * f.k())?);
            }
            tgt.extend(f.target().factors().iter().cloned());
            jets.extend(f.jets().iter().map(|j| j.embed(total, offset)));
            offset += f.source_dim();
        }
        IsometryMap::new(DomainSpec::new(src)?, DomainSpec::new(tgt)?, 1.0, jets, None)
    }

    /// `outer o inner`, through jets. The isometry constants multiply.
    pub fn compose(outer: &IsometryMap, inner: &IsometryMap) -> Result<IsometryMap> {
        if outer.source_dim() != inner.target_dim() {
            return Err(Error::Dimension("composition dimension mismatch".into()));
        }
        let jets = outer.jets().iter().map(|g| Jet::compose(g, inner.jets())).collect::<Result<Vec<_>>>()?;
        IsometryMap::new(inner.source().clone(), outer.target().clone(), inner.k() * outer.k(), jets, None)
    }

    pub fn is_ball(d: &DomainSpec) -> bool {
        d.is_irreducible() && matches!(d.factors()[0].kind, FactorKind::Ball(_))
    }
}

#[cfg(test)]
mod tests {
    use super::catalog::*;
    use super::*;
    use crate::sampling::Seeds;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn functional_equation_examples() {
        let t = tol();
        for f in [identity(3), type_iv_graph(3, 10), type_iv_graph(5, 10), diagonal(), totally_geodesic(1, 2)] {
            let cert = verify_functional_equation(&f, 10, &t).unwrap();
            assert!(cert.passed(), "{}", cert.summary());
        }
        assert_eq!(verify_functional_equation(&identity(2), 8, &t).unwrap().get("residual"), 0.0);
    }

    #[test]
    fn corrupted_jet_fails_with_residual_of_the_corruption() {
        let f = type_iv_graph(3, 8);
        let mut jets = f.jets().to_vec();
        let bump = Jet::from_terms(2, 8, [(MultiIndex::new(vec![2, 0]), c(1e-3, 0.0))]);
        jets[2] = jets[2].add(&bump).unwrap();
        let bad = f.with_jets(jets).unwrap();
        let cert = verify_functional_equation(&bad, 8, &tol()).unwrap();
        assert!(!cert.passed());
        assert!((cert.get("residual") - 1e-3).abs() < 1e-4, "{}", cert.summary());
    }

    #[test]
    fn jacobian_examples() {
        let t = tol();
        let j = jacobian_at_zero(&type_iv_graph(3, 6), &t).unwrap();
        assert_eq!(j.matrix.shape(), (3, 2));
        assert_eq!(j.matrix[(0, 0)], C64::one());
        assert_eq!(j.matrix[(1, 1)], C64::one());
        assert_eq!(j.matrix[(2, 0)], C64::zero());
        assert_eq!(j.kernel.ncols(), 1);
        assert!((j.kernel[(2, 0)].norm() - 1.0).abs() < 1e-15);
        let g = jacobian_at_zero(&totally_geodesic(1, 2), &t).unwrap();
        assert_eq!(g.matrix[(0, 0)], C64::one());
        assert_eq!(g.matrix[(1, 0)], C64::zero());
        for f in [identity(2), type_iv_graph(4, 4), diagonal()] {
            assert!(jacobian_identity(&f, &t).unwrap().passed());
        }
    }

    #[test]
    fn rank_defect_is_an_error() {
        let f = IsometryMap::new(
            DomainSpec::ball(1),
            DomainSpec::ball(2),
            1.0,
            vec![Jet::polynomial(1, [(vec![2], C64::one())]), Jet::zero(1, EXACT)],
            None,
        )
        .unwrap();
        assert!(matches!(jacobian_at_zero(&f, &tol()), Err(Error::Rank(_))));
    }

    #[test]
    fn base_point_is_enforced() {
        let r = IsometryMap::new(DomainSpec::ball(1), DomainSpec::ball(1), 1.0, vec![Jet::constant(1, 3, c(0.1, 0.0))], None);
        assert!(matches!(r, Err(Error::Hypothesis(_))));
    }

    #[test]
    fn matrix_m_examples() {
        let t = tol();
        let m = matrix_m(&diagonal(), &t).unwrap();
        assert_eq!(m.shape(), (1, 2));
        assert!((m[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15 && (m[(0, 1)] - c(0.5, 0.0)).norm() < 1e-15);
        let f = type_iv_graph(4, 5);
        let m = matrix_m(&f, &t).unwrap();
        let j = jacobian_at_zero(&f, &t).unwrap();
        assert!(linalg::max_abs(&(m - j.l_f(1.0))) < 1e-15);
        // product identity with matching weights
        let d: DomainSpec = "ball:1@2*ball:1@3".parse().unwrap();
        let id = IsometryMap::new(d.clone(), d, 1.0, Jet::vars(2, EXACT), None).unwrap();
        assert!(linalg::max_abs(&(matrix_m(&id, &t).unwrap() - linalg::identity(2))) < 1e-15);
        assert!(verify_functional_equation(&id, 6, &t).unwrap().passed());
    }

    #[test]
    fn linear_functional_and_pointwise() {
        let t = tol();
        let mut rng = Seeds::new(5).stream("lf");
        for f in [identity(2), type_iv_graph(4, 10), diagonal()] {
            let pts: Vec<Vec<C64>> = (0..200).map(|_| sampling::ball(&mut rng, f.source_dim(), 0.5)).collect();
            let cert = verify_linear_functional(&f, &pts, &t).unwrap();
            assert!(cert.passed(), "{}", cert.summary());
            let pairs = sample_pairs(f.source_dim(), 200, 0.5, &mut rng);
            let cert = verify_functional_equation_pointwise(&f, &pairs, &t).unwrap();
            assert!(cert.passed(), "{}", cert.summary());
            assert!(verify_m_identity(&f, &pts, &t).unwrap().passed());
        }
        // the typeIV graph functional deletes the last coordinate
        let f = type_iv_graph(3, 4);
        let lf = jacobian_at_zero(&f, &t).unwrap().l_f(1.0);
        let w = [c(0.3, 0.1), c(-0.2, 0.25)];
        let out = linalg::matvec(&lf, &f.eval(&w).unwrap());
        assert_eq!(out, w.to_vec());
    }

    #[test]
    fn closed_form_matches_jets_near_origin() {
        let f = type_iv_graph(4, 14);
        let w = [c(0.05, 0.02), c(-0.03, 0.01), c(0.02, -0.04)];
        let a = f.eval(&w).unwrap();
        let b = f.eval_jets(&w).unwrap();
        assert!(linalg::norm(&linalg::sub(&a, &b)) < 1e-15);
    }

    #[test]
    fn unitary_change_of_source_coordinates() {
        let t = tol();
        let mut rng = Seeds::new(9).stream("u");
        let f = type_iv_graph(4, 8);
        let u = sampling::unitary(&mut rng, 3);
        let g = f.precompose_linear(&u).unwrap();
        assert!(verify_functional_equation(&g, 8, &t).unwrap().passed());
        let w = sampling::ball(&mut rng, 3, 0.5);
        let direct = f.eval(&linalg::matvec(&u, &w)).unwrap();
        assert!(linalg::norm(&linalg::sub(&direct, &g.eval(&w).unwrap())) < 1e-14);
        let pairs = sample_pairs(3, 100, 0.5, &mut rng);
        assert!(verify_functional_equation_pointwise(&g, &pairs, &t).unwrap().passed());
    }

    #[test]
    fn json_roundtrip() {
        let mut rng = Seeds::new(1).stream("json");
        let f = type_iv_graph(3, 6).precompose_linear(&sampling::unitary(&mut rng, 2)).unwrap();
        for m in [f, diagonal(), identity(2)] {
            let back = IsometryMap::from_json_str(&m.to_json_string()).unwrap();
            assert_eq!(back, m);
        }
        let v = serde_json::json!({
            "source": "ball:1", "target": "ball:1*ball:1", "k": 2.0,
            "jets": [
                {"num_vars": 1, "order": null, "coeffs": [{"index": [1], "re": 1.0, "im": 0.0}]},
                {"num_vars": 1, "order": null, "coeffs": [{"index": [1], "re": 1.0, "im": 0.0}]}
            ],
            "closed_form": "diag_square"
        });
        assert_eq!(IsometryMap::from_json(&v).unwrap(), diagonal());
        let bad = serde_json::json!({"source": "ball:1", "target": "ball:2", "k": 1.0, "jets": []});
        assert!(matches!(IsometryMap::from_json(&bad), Err(Error::Dimension(_))));
    }

    #[test]
    fn composite_constant_multiplies() {
        let t = tol();
        let g = product(&[type_iv_graph(3, 6), type_iv_graph(3, 6)]).unwrap();
        assert!(verify_functional_equation(&g, 6, &t).unwrap().passed());
        let sliced = IsometryMap::new(
            DomainSpec::ball(1),
            DomainSpec::type_iv(3),
            1.0,
            type_iv_graph(3, 6).jets().iter().map(|j| j.restrict_to_leading(1)).collect(),
            None,
        )
        .unwrap();
        let gg = product(&[sliced.clone(), sliced]).unwrap();
        let f = compose(&gg, &diagonal()).unwrap();
        assert_eq!(f.k(), 2.0);
        assert!(verify_functional_equation(&f, 6, &t).unwrap().passed());
    }
}
