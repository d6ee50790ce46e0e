//! Small complex linear-algebra helpers on top of nalgebra; decompositions go through faer.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Thin SVD with singular values sorted in descending order.
pub struct SortedSvd {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v_t: CMatrix,
}

pub fn sorted_svd(m: &CMatrix) -> SortedSvd {
    let svd = to_faer(m).thin_svd().expect("SVD of a finite matrix");
    let (u, sv, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let mut order: Vec<usize> = (0..sv.nrows()).collect();
    order.sort_by(|&a, &b| sv[b].re.total_cmp(&sv[a].re));
    SortedSvd {
        u: CMatrix::from_fn(u.nrows(), order.len(), |r, c| from_c64(u[(r, order[c])])),
        singular_values: order.iter().map(|&i| sv[i].re).collect(),
        v_t: CMatrix::from_fn(order.len(), v.nrows(), |r, c| from_c64(v[(c, order[r])]).conj()),
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut sv = to_faer(m).singular_values().expect("SVD of a finite matrix");
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

// nalgebra's complex SVD returns wrong factors for some rank-deficient inputs
fn to_faer(m: &CMatrix) -> faer::Mat<faer::c64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |r, c| faer::c64::new(m[(r, c)].re, m[(r, c)].im))
}

fn from_c64(z: faer::c64) -> Complex64 {
    Complex64::new(z.re, z.im)
}

/// `B B^H` for a tall basis `B`.
pub fn projector(basis: &CMatrix) -> CMatrix {
    basis * basis.adjoint()
}

/// Selects columns of `m` by index, in the given order.
pub fn select_columns(m: &CMatrix, cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

/// Frobenius distance of `B^H B` from the identity.
pub fn orthonormality_error(basis: &CMatrix) -> f64 {
    let gram = basis.adjoint() * basis;
    (gram - CMatrix::identity(basis.ncols(), basis.ncols())).norm()
}

/// Largest principal angle (radians) between the column spans of two
/// orthonormal bases of equal dimension.
pub fn max_principal_angle(a: &CMatrix, b: &CMatrix) -> f64 {
    let cross = a.adjoint() * b;
    let smallest = singular_values(&cross).last().copied().unwrap_or(1.0);
    smallest.clamp(0.0, 1.0).acos()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev = to_faer(m).self_adjoint_eigenvalues(faer::Side::Lower).expect("eigenvalues of a finite matrix");
    ev.sort_by(f64::total_cmp);
    ev
}

/// Solves the Hermitian positive-definite system `a x = b`.
pub fn solve_hpd(a: CMatrix, b: &CVector) -> Option<CVector> {
    match a.clone().cholesky() {
        Some(chol) => Some(chol.solve(b)),
        None => a.lu().solve(b),
    }
}

/// Count of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(singular_values: &[f64], rel_tol: f64) -> usize {
    let top = singular_values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > rel_tol * top).count()
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
