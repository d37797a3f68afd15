use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, NumAssign, NumCast};

/// Real scalar backing the complex coefficients of jets and generic norms.
pub trait Scalar: Float + FromPrimitive + NumAssign + NumCast + Debug + Send + Sync + 'static {
    /// Coefficients of smaller magnitude are dropped from sparse storage.
    fn zero_tol() -> Self;

    fn from_f64_lossy(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("finite f64 converts")
    }
}

impl Scalar for f64 {
    fn zero_tol() -> f64 {
        1e-13
    }
}

impl Scalar for f32 {
    fn zero_tol() -> f32 {
        1e-6
    }
}
