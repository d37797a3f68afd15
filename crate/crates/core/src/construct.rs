//! Graph-form isometries from the unit ball into rank-two domains.
//!
//! For an irreducible rank-two target with `N' - N` generic-norm terms `G_l`
//! and a unitary `U~`, the germ `phi` solving `phi = U G(z, phi)` with
//! `U = conj(U~)^T` gives an isometry `z -> (z, phi(z))` from
//! `ball:(2N - N')`. Since every `G_l` is quadratic, the fixed-point
//! iteration `phi_{m+1} = U G(z, phi_m)` from `phi_0 = 0` gains at least one
//! correct degree per step.

use num_traits::{One, Zero};

use crate::certificate::Certificate;
use crate::domains::{DomainSpec, Factor, FactorKind};
use crate::error::{Error, Result};
use crate::isometry::{self, ClosedForm, ClosedFormKind, IsometryMap};
use crate::tolerances::Tolerances;
use crate::{linalg, CMatrix, Jet, C64};

#[derive(Clone, Debug)]
pub struct GraphConstructionProblem {
    target: DomainSpec,
    unitary: CMatrix,
    permutation: Option<Vec<usize>>,
    order: usize,
}

impl GraphConstructionProblem {
    /// `permutation[i]` is the output slot of standard coordinate `i`, where
    /// the standard arrangement is `(z, phi)`.
    pub fn new(
        target: DomainSpec,
        unitary: CMatrix,
        permutation: Option<Vec<usize>>,
        order: usize,
        tol: &Tolerances,
    ) -> Result<Self> {
        if !target.is_irreducible() || target.rank() != 2 {
            return Err(Error::Hypothesis(format!("target {target} must be irreducible of rank 2")));
        }
        let (big_n, np) = (target.dim(), target.n_prime());
        if 2 * big_n <= np + 1 {
            return Err(Error::Hypothesis(format!(
                "target {target} has 2N - N' = {} <= 1; no graph isometry from a ball of dimension >= 2",
                2 * big_n as i64 - np as i64
            )));
        }
        let m = np - big_n;
        if unitary.shape() != (m, m) {
            return Err(Error::Dimension(format!("unitary must be {m}x{m} for {target}")));
        }
        let defect = linalg::max_abs(&(&unitary * unitary.adjoint() - linalg::identity(m)));
        if defect > tol.eps_lin {
            return Err(Error::Hypothesis(format!("matrix is not unitary (defect {defect:e})")));
        }
        if order < 1 {
            return Err(Error::Hypothesis("truncation order must be at least 1".into()));
        }
        if let Some(p) = &permutation {
            let mut sorted = p.clone();
            sorted.sort_unstable();
            if sorted != (0..big_n).collect::<Vec<_>>() {
                return Err(Error::Parse(format!("{p:?} is not a permutation of 0..{big_n}")));
            }
        }
        Ok(GraphConstructionProblem { target, unitary, permutation, order })
    }

    pub fn target(&self) -> &DomainSpec {
        &self.target
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn source_dim(&self) -> usize {
        2 * self.target.dim() - self.target.n_prime()
    }

    pub fn codim(&self) -> usize {
        self.target.n_prime() - self.target.dim()
    }

    /// `U = conj(U~)^T`.
    pub fn u(&self) -> CMatrix {
        self.unitary.adjoint()
    }

    fn slot(&self, i: usize) -> usize {
        self.permutation.as_ref().map_or(i, |p| p[i])
    }

    /// `U'` with `U' x = G(x)` cutting out the image: `U~` placed in the
    /// columns of the `phi` slots.
    pub fn u_prime(&self) -> CMatrix {
        let (n, m) = (self.source_dim(), self.codim());
        let mut up = CMatrix::zeros(m, self.target.dim());
        for j in 0..m {
            up.set_column(self.slot(n + j), &self.unitary.column(j));
        }
        up
    }

    fn assemble(&self, z: &[Jet], phi: &[Jet]) -> Vec<Jet> {
        let mut x = vec![Jet::zero(0, 0); self.target.dim()];
        for (i, s) in z.iter().chain(phi).enumerate() {
            x[self.slot(i)] = s.clone();
        }
        x
    }

    /// The `N` output jets of `z -> (z, phi(z))` in the chosen arrangement.
    pub fn graph_jets(&self) -> Result<Vec<Jet>> {
        let (n, m, k) = (self.source_dim(), self.codim(), self.order);
        let z = Jet::vars(n, k);
        let u = self.u();
        let terms = self.target.factors()[0].norm().terms();
        let mut phi = vec![Jet::zero(n, k); m];
        for _ in 0..k {
            let x = self.assemble(&z, &phi);
            let g = terms.iter().map(|t| Jet::compose(t, &x)).collect::<Result<Vec<_>>>()?;
            phi = (0..m)
                .map(|i| g.iter().enumerate().try_fold(Jet::zero(n, k), |acc, (l, gl)| acc.add(&gl.scale(u[(i, l)]))))
                .collect::<Result<_>>()?;
        }
        Ok(self.assemble(&z, &phi))
    }

    fn closed_form(&self) -> Result<ClosedForm> {
        if matches!(self.target.factors()[0].kind, FactorKind::TypeIV(_)) {
            let mut cf = ClosedForm::type_iv_graph(Some(self.u()[(0, 0)]).filter(|c| *c != C64::one()));
            cf.permutation = self.permutation.clone();
            Ok(cf)
        } else {
            ClosedForm::graph_fixed_point(&self.target, self.u(), self.permutation.clone())
        }
    }
}

/// Builds the graph isometry and certifies the functional equation at the
/// truncation order.
pub fn solve_graph_isometry(p: &GraphConstructionProblem, tol: &Tolerances) -> Result<(IsometryMap, Certificate)> {
    let jets = p.graph_jets()?;
    let f = IsometryMap::new(DomainSpec::ball(p.source_dim()), p.target.clone(), 1.0, jets, Some(p.closed_form()?))?;
    let cert = isometry::verify_functional_equation(&f, p.order, tol)?
        .note("germ certified through the truncation order; global extension is not checked");
    Ok((f, cert))
}

/// Restricts a map from `ball:n` to the first `m` coordinates.
pub fn slice(f: &IsometryMap, m: usize) -> Result<IsometryMap> {
    if !isometry::catalog::is_ball(f.source()) {
        return Err(Error::Hypothesis("slicing needs a ball source".into()));
    }
    let n = f.source_dim();
    if m < 1 || m > n {
        return Err(Error::Dimension(format!("slice dimension {m} outside 1..={n}")));
    }
    let jets = f.jets().iter().map(|j| j.restrict_to_leading(m)).collect();
    let closed_form = f.closed_form().cloned().map(|mut cf| {
        if !cf.kind.uses_jets() {
            let pad = CMatrix::from_fn(n, m, |i, j| if i == j { C64::one() } else { C64::zero() });
            cf.source_map = Some(match &cf.source_map {
                Some(s) => s * pad,
                None => pad,
            });
        }
        cf
    });
    let weight = f.source().factors()[0].weight;
    let source = DomainSpec::new(vec![Factor::new(FactorKind::Ball(m), weight)?])?;
    IsometryMap::new(source, f.target().clone(), f.k(), jets, closed_form)
}

/// `|U' z - G(z)|` and whether it is within `eps_fun`.
pub fn variety_membership(target: &DomainSpec, u_prime: &CMatrix, z: &[C64], tol: &Tolerances) -> Result<(bool, f64)> {
    let m = target.membership(z)?;
    if !m.inside {
        return Err(Error::Domain(format!("point outside {target} (margin {:e})", m.margin)));
    }
    let g: Vec<C64> = target
        .factors()
        .iter()
        .zip(target.offsets())
        .flat_map(|(f, o)| f.norm().g_values(&z[o..o + f.dim()]))
        .collect();
    if u_prime.shape() != (g.len(), z.len()) {
        return Err(Error::Dimension(format!("U' must be {}x{}", g.len(), z.len())));
    }
    let residual = linalg::norm(&linalg::sub(&linalg::matvec(u_prime, z), &g));
    Ok((residual <= tol.eps_fun, residual))
}

/// Parses `identity`, `phase:THETA` (scalar `e^{i THETA}`) or a JSON matrix.
pub fn parse_unitary(s: &str, m: usize) -> Result<CMatrix> {
    let s = s.trim();
    if s == "identity" {
        return Ok(linalg::identity(m));
    }
    if let Some(theta) = s.strip_prefix("phase:") {
        let theta: f64 = theta.trim().parse().map_err(|_| Error::Parse(format!("bad phase in {s:?}")))?;
        return Ok(linalg::identity(m) * C64::from_polar(1.0, theta));
    }
    let text = if s.starts_with('[') { s.to_string() } else { std::fs::read_to_string(s)? };
    linalg::matrix_from_json(&serde_json::from_str(&text)?)
}

/// Whether the closed form of a constructed map is the exact typeIV formula.
pub fn is_closed_type_iv(f: &IsometryMap) -> bool {
    f.closed_form().is_some_and(|cf| cf.kind == ClosedFormKind::TypeIvGraph)
}
