//! Numeric thresholds used by every check, defaulted in one place.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Functional identities (coefficient and pointwise residuals).
    pub eps_fun: f64,
    /// Pointwise identities evaluated at sampled points.
    pub eps_point: f64,
    /// Back-solve residual for sampled reverse inclusions.
    pub eps_reverse: f64,
    /// Linear-algebra identities such as `conj(J)^T J = k I`.
    pub eps_lin: f64,
    /// Relative singular-value threshold for every rank decision.
    pub tau_rank: f64,
    /// Absolute floor on the smallest singular value in the splitting check.
    pub tau_split: f64,
    /// Principal-angle threshold for subspace equality and containment.
    pub angle: f64,
    /// Agreement between two presentations of the same subspace.
    pub angle_agree: f64,
    /// Radius of the source ball used for pointwise sampling.
    pub r_sample: f64,
    /// Step for central differences on closed forms.
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_fun: 1e-10,
            eps_point: 1e-9,
            eps_reverse: 1e-8,
            eps_lin: 1e-11,
            tau_rank: 1e-9,
            tau_split: 1e-6,
            angle: 1e-8,
            angle_agree: 1e-10,
            r_sample: 0.5,
            fd_step: 1e-5,
        }
    }
}

impl Tolerances {
    /// Applies a `KEY=VAL` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, val) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected KEY=VAL, got {assignment:?}")))?;
        let val: f64 = val
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad tolerance value in {assignment:?}")))?;
        if !(val.is_finite() && val > 0.0) {
            return Err(Error::Parse(format!("tolerance must be positive: {assignment:?}")));
        }
        let slot = match key.trim() {
            "eps_fun" => &mut self.eps_fun,
            "eps_point" => &mut self.eps_point,
            "eps_reverse" => &mut self.eps_reverse,
            "eps_lin" => &mut self.eps_lin,
            "tau_rank" => &mut self.tau_rank,
            "tau_split" => &mut self.tau_split,
            "angle" => &mut self.angle,
            "angle_agree" => &mut self.angle_agree,
            "r_sample" => &mut self.r_sample,
            "fd_step" => &mut self.fd_step,
            other => return Err(Error::Parse(format!("unknown tolerance key {other:?}"))),
        };
        *slot = val;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_and_reject() {
        let mut t = Tolerances::default();
        t.set("eps_fun=1e-8").unwrap();
        assert_eq!(t.eps_fun, 1e-8);
        assert!(t.set("nope=1").is_err());
        assert!(t.set("eps_lin").is_err());
        assert!(t.set("eps_lin=-1").is_err());
    }
}
