//! Verification toolkit for holomorphic isometries between bounded symmetric
//! domains.
//!
//! * [`jet`]: truncated multivariate power series over `Complex<T>`.
//! * [`domains`]: generic norms, Bergman data and membership for balls,
//!   type I and type IV domains and their weighted products.
//! * [`isometry`]: isometry maps and the identities they must satisfy.
//! * [`construct`]: graph-form isometries into rank-two domains.
//! * [`fibration`]: the induced submersion, retraction and fibers.
//! * [`sections`]: transfer of linear subspaces and affine sections.
//! * [`degeneracy`]: linear degeneracy and non-degeneracy certificates.
//! * [`report`]: composite deterministic reports.

pub mod certificate;
pub mod construct;
pub mod degeneracy;
pub mod domains;
pub mod error;
pub mod fibration;
pub mod isometry;
pub mod jet;
pub mod linalg;
pub mod report;
pub mod sampling;
pub mod scalar;
pub mod sections;
pub mod tolerances;

pub use certificate::{Certificate, Status, Witness};
pub use domains::{DomainSpec, Factor, FactorKind};
pub use error::{Error, Result};
pub use isometry::{ClosedForm, IsometryMap, JacobianAtZero};
pub use jet::{JetSeries, MultiIndex, EXACT};
pub use scalar::Scalar;
pub use sections::LinearSubspace;
pub use tolerances::Tolerances;

pub type C64 = num_complex::Complex<f64>;
pub type CMatrix = nalgebra::DMatrix<C64>;
pub type CVector = nalgebra::DVector<C64>;
pub type Jet = JetSeries<f64>;
pub type Jet32 = JetSeries<f32>;
