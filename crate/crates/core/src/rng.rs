//! Deterministic per-stage random streams.
//!
//! Every stage of the pipeline draws from its own ChaCha stream, seeded by a
//! SHA-256 digest of the master seed, a stage label and a list of indices. A
//! stream therefore depends only on its own label and coordinates, so adding a
//! stage or an estimator never shifts the draws seen by another one.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

/// Derives an independent stream for `(master, label, indices)`.
pub fn stream(master: u64, label: &str, indices: &[u64]) -> SimRng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    for i in indices {
        hasher.update(i.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

/// One draw of a circularly-symmetric complex Gaussian with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
