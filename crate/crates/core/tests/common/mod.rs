//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type M = DMatrix<Complex64>;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Box-Muller complex Gaussian with `E|z|^2 = 1`.
pub fn cn<R: Rng>(r: &mut R) -> Complex64 {
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random::<f64>();
    Complex64::from_polar((-u1.ln()).sqrt(), 2.0 * PI * u2)
}

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, r: &mut R) -> M {
    M::from_fn(rows, cols, |_, _| cn(r))
}

/// `exp(-j 2 pi m n / size) / sqrt(size)` for `m = 0..size`.
pub fn dft_col(size: usize, n: usize) -> M {
    M::from_fn(size, 1, |m, _| Complex64::from_polar(1.0 / (size as f64).sqrt(), -2.0 * PI * (m * n) as f64 / size as f64))
}

pub fn dft_cols(size: usize, idx: &[usize]) -> M {
    let mut out = M::zeros(size, idx.len());
    for (c, &n) in idx.iter().enumerate() {
        out.set_column(c, &dft_col(size, n).column(0));
    }
    out
}

/// Orthonormal basis of the column span via Gram-Schmidt.
pub fn orthonormalize(a: &M) -> M {
    let mut q = M::zeros(a.nrows(), 0);
    for c in 0..a.ncols() {
        let mut v = a.column(c).into_owned();
        for k in 0..q.ncols() {
            let proj = q.column(k).dotc(&v);
            v -= q.column(k) * proj;
        }
        let n = v.norm();
        if n > 1e-10 {
            let last = q.ncols();
            q = q.insert_column(last, Complex64::new(0.0, 0.0));
            q.set_column(last, &(v / Complex64::new(n, 0.0)));
        }
    }
    q
}

/// `sin` of the largest principal angle, via the projector distance.
pub fn subspace_distance(a: &M, b: &M) -> f64 {
    let (qa, qb) = (orthonormalize(a), orthonormalize(b));
    let pa = &qa * qa.adjoint();
    let pb = &qb * qb.adjoint();
    (pa - pb).norm() / 2f64.sqrt()
}

pub fn rel_frob(a: &M, b: &M) -> f64 {
    (a - b).norm() / b.norm()
}
