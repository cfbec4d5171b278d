//! Test-only helpers: seeded RNGs and Haar-random unitaries.
//!
//! The Haar sampler is deliberately independent of the production linear
//! algebra (its own Gaussian draws and Gram-Schmidt), so tests that use it as
//! an oracle do not depend on the code paths under test.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::linalg::{U3Params, UnitaryMatrix};

/// A deterministic RNG for tests.
pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Standard normal via Box-Muller.
fn gauss<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Haar-random unitary via Gram-Schmidt QR of a complex Gaussian matrix from
/// first principles (with the R-diagonal phase correction).
pub fn haar_unitary<R: Rng>(dim: usize, rng: &mut R) -> UnitaryMatrix {
    // columns of a complex Gaussian matrix
    let mut cols: Vec<Vec<C64>> = (0..dim)
        .map(|_| (0..dim).map(|_| C64::new(gauss(rng), gauss(rng))).collect())
        .collect();
    for j in 0..dim {
        for k in 0..j {
            let proj: C64 = (0..dim).map(|i| cols[k][i].conj() * cols[j][i]).sum();
            for i in 0..dim {
                let t = proj * cols[k][i];
                cols[j][i] -= t;
            }
        }
        // second orthogonalization pass for numerical robustness
        for k in 0..j {
            let proj: C64 = (0..dim).map(|i| cols[k][i].conj() * cols[j][i]).sum();
            for i in 0..dim {
                let t = proj * cols[k][i];
                cols[j][i] -= t;
            }
        }
        let norm = (0..dim).map(|i| cols[j][i].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..dim {
            cols[j][i] /= norm;
        }
        // fix the phase so the distribution is Haar rather than QR-biased
        let phase = C64::from_polar(1.0, gauss(rng).atan2(gauss(rng)));
        for i in 0..dim {
            cols[j][i] *= phase;
        }
    }
    let mut data = vec![C64::new(0.0, 0.0); dim * dim];
    for j in 0..dim {
        for i in 0..dim {
            data[i * dim + j] = cols[j][i];
        }
    }
    UnitaryMatrix::from_raw(dim, data)
}

/// Uniform random U3 angles over (−π, π].
pub fn random_u3<R: Rng>(rng: &mut R) -> U3Params {
    use std::f64::consts::PI;
    U3Params::new(
        -rng.gen_range(-PI..PI),
        -rng.gen_range(-PI..PI),
        -rng.gen_range(-PI..PI),
    )
}
