//! Seeded random sampling. Every sub-check draws from its own ChaCha stream
//! keyed by the check name, so results do not depend on execution order or
//! thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, C64};

#[derive(Clone, Copy, Debug)]
pub struct Seeds {
    pub seed: u64,
}

impl Seeds {
    pub fn new(seed: u64) -> Self {
        Seeds { seed }
    }

    /// Independent generator for the named sub-check.
    pub fn stream(&self, name: &str) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(fnv1a(name.as_bytes()));
        rng
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| gaussian(rng)).collect()
}

pub fn unit_sphere<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    loop {
        let v = gaussian_vec(rng, n);
        let r = crate::linalg::norm(&v);
        if r > 1e-12 {
            return v.into_iter().map(|z| z / r).collect();
        }
    }
}

/// Uniform point in the Euclidean ball of the given radius in `C^n`.
pub fn ball<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> Vec<C64> {
    let dir = unit_sphere(rng, n);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / (2 * n) as f64);
    dir.into_iter().map(|z| z * r).collect()
}

pub fn phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Haar-distributed unitary matrix via QR of a complex Gaussian matrix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, m: usize) -> CMatrix {
    let g = CMatrix::from_fn(m, m, |_, _| gaussian(rng));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..m {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= ph;
    }
    q
}
