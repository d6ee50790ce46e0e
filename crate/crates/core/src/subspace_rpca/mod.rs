//! Channel subspace estimation from hopped SRS observations via outlier pursuit.

pub mod solver;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel_model::{sample_channel, true_covariance, AngularSupport, DftBasis, SupportMap};
use crate::error::{invalid, Result};
use crate::geometry::Layout;
use crate::linalg::{numerical_rank, projector, sorted_svd, CMatrix};
use crate::pilot_hopping::SrsSchedule;
use crate::rng::complex_normal;

pub use solver::{outlier_pursuit, RpcaResult, Scheme, SolverParams};

/// Stacked SRS measurements of one RU for one of its UEs.
#[derive(Debug, Clone)]
pub struct SrsObservation {
    pub ru: usize,
    pub ue: usize,
    /// `M x S`, one column per slot.
    pub y: CMatrix,
    /// The desired-user part of `y`.
    pub desired: CMatrix,
    pub colliders: Vec<Vec<usize>>,
    pub strong: Vec<Vec<usize>>,
    pub weak: Vec<Vec<usize>>,
}

impl SrsObservation {
    pub fn slots(&self) -> usize {
        self.y.ncols()
    }

    pub fn strong_slots(&self) -> Vec<usize> {
        (0..self.slots()).filter(|&s| !self.strong[s].is_empty()).collect()
    }
}

/// Simulated SRS collection at RU `ru` along UE `ue`'s hopping sequence.
///
/// Each slot carries a fresh draw of the desired channel, fresh draws of every
/// colliding UE's channel and `CN(0, 1/SNR)` noise. `strong_threshold` splits
/// colliders by `beta M SNR` for diagnostics only.
#[allow(clippy::too_many_arguments)]
pub fn collect_srs<R: Rng + ?Sized>(
    schedule: &SrsSchedule,
    layout: &Layout,
    supports: &SupportMap,
    basis: &DftBasis,
    (ru, ue): (usize, usize),
    snr: f64,
    strong_threshold: f64,
    rng: &mut R,
) -> SrsObservation {
    let m = basis.size();
    let slots = schedule.slots();
    let noise_std = (1.0 / snr).sqrt();
    let mut y = CMatrix::zeros(m, slots);
    let mut desired = CMatrix::zeros(m, slots);
    let mut colliders = Vec::with_capacity(slots);
    let mut strong = Vec::with_capacity(slots);
    let mut weak = Vec::with_capacity(slots);
    for s in 0..slots {
        let h = sample_channel(basis, supports.get(ru, ue), layout.lsfc[(ru, ue)], rng);
        let mut col = h.clone();
        let slot_colliders: Vec<usize> = schedule.colliders(ue, s).collect();
        let (mut st, mut wk) = (Vec::new(), Vec::new());
        for &j in &slot_colliders {
            let beta = layout.lsfc[(ru, j)];
            col += sample_channel(basis, supports.get(ru, j), beta, rng);
            if beta * m as f64 * snr >= strong_threshold {
                st.push(j);
            } else {
                wk.push(j);
            }
        }
        for i in 0..m {
            col[i] += complex_normal(rng) * noise_std;
        }
        y.set_column(s, &col);
        desired.set_column(s, &h);
        colliders.push(slot_colliders);
        strong.push(st);
        weak.push(wk);
    }
    SrsObservation { ru, ue, y, desired, colliders, strong, weak }
}

/// 1-based index of the largest gap `sigma_i - sigma_{i+1}` for
/// `i in 1..=min(r_max, len - 1)`; ties go to the smallest index.
pub fn select_rank(singular_values: &[f64], r_max: usize) -> Result<usize> {
    if singular_values.is_empty() {
        return Err(invalid("no singular values"));
    }
    if singular_values.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(invalid("singular values must be finite and non-negative"));
    }
    if singular_values.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid("singular values must be sorted descending"));
    }
    let upper = r_max.min(singular_values.len() - 1);
    let mut best = 1;
    let mut best_gap = f64::NEG_INFINITY;
    for i in 1..=upper {
        let gap = singular_values[i - 1] - singular_values[i];
        if gap > best_gap {
            best = i;
            best_gap = gap;
        }
    }
    Ok(best)
}

/// Upper end of the gap search for an `M x S` observation.
pub fn rank_search_limit(m: usize, s: usize) -> usize {
    let d = m.min(s);
    (d / 2).min(d.saturating_sub(1)).max(1)
}

/// Per-column score `F_i^H B B^H F_i = ||B^H F_i||^2`.
pub fn dft_scores(basis: &CMatrix, dft: &DftBasis) -> Vec<f64> {
    let proj = basis.adjoint() * dft.matrix();
    proj.column_iter().map(|c| c.norm_squared()).collect()
}

/// Greedy choice of `rank(basis)` DFT columns maximising the quadratic form,
/// one at a time without replacement; returned sorted.
pub fn dft_project(basis: &CMatrix, dft: &DftBasis) -> Result<Vec<usize>> {
    let r = basis.ncols();
    if r > dft.size() {
        return Err(invalid("basis has more columns than the DFT size"));
    }
    let scores = dft_scores(basis, dft);
    let mut chosen = vec![false; scores.len()];
    let mut picked = Vec::with_capacity(r);
    for _ in 0..r {
        let mut best: Option<usize> = None;
        for (i, &sc) in scores.iter().enumerate() {
            if chosen[i] {
                continue;
            }
            // scores within rounding of each other count as ties
            match best {
                Some(b) if sc <= scores[b] + 1e-12 => {}
                _ => best = Some(i),
            }
        }
        let b = best.expect("r <= M leaves a candidate");
        chosen[b] = true;
        picked.push(b);
    }
    picked.sort_unstable();
    Ok(picked)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubspaceKind {
    Pca,
    Pp,
}

#[derive(Debug, Clone)]
pub struct SubspaceEstimate {
    /// `M x r`, orthonormal columns.
    pub basis: CMatrix,
    pub rank: usize,
    pub dft_indices: Option<Vec<usize>>,
    pub kind: SubspaceKind,
}

impl SubspaceEstimate {
    pub fn pca(u: &CMatrix, rank: usize) -> Self {
        Self { basis: u.columns(0, rank).into_owned(), rank, dft_indices: None, kind: SubspaceKind::Pca }
    }

    pub fn from_dft(dft: &DftBasis, indices: Vec<usize>) -> Self {
        Self { basis: dft.columns(&indices), rank: indices.len(), dft_indices: Some(indices), kind: SubspaceKind::Pp }
    }

    /// The projected (DFT-column) version of a PCA estimate.
    pub fn project(&self, dft: &DftBasis) -> Result<Self> {
        Ok(Self::from_dft(dft, dft_project(&self.basis, dft)?))
    }
}

/// `(beta M / r) B B^H`.
pub fn estimated_covariance(basis: &CMatrix, beta: f64, rank: usize) -> CMatrix {
    let m = basis.nrows() as f64;
    projector(basis) * Complex64::new(beta * m / rank as f64, 0.0)
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    // tr(A B) = sum_ij A_ij B_ji
    a.iter().zip(b.transpose().iter()).map(|(x, y)| (x * y).re).sum()
}

/// `tr(Sigma Sigma_hat) / tr(Sigma Sigma)` for the true single-ring covariance.
pub fn power_efficiency(dft: &DftBasis, true_support: &AngularSupport, beta: f64, estimate: &SubspaceEstimate) -> f64 {
    let sigma = true_covariance(dft, true_support, beta);
    let sigma_hat = estimated_covariance(&estimate.basis, beta, estimate.rank);
    (trace_product(&sigma, &sigma_hat) / trace_product(&sigma, &sigma)).clamp(0.0, 1.0)
}

/// `||F_hat^H F_S||_F^2 / r`, equal to [`power_efficiency`] for projector covariances.
pub fn power_efficiency_overlap(dft: &DftBasis, true_support: &AngularSupport, estimate: &SubspaceEstimate) -> f64 {
    let f = dft.columns(&true_support.indices);
    (estimate.basis.adjoint() * f).norm_squared() / estimate.rank as f64
}

/// Optional outer loop adjusting `lambda` until the numerical rank of `H_hat`
/// lies in `[min_rank, max_rank]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaTuning {
    pub enabled: bool,
    pub min_rank: usize,
    /// `0` means `M / 2`.
    pub max_rank: usize,
    pub factor: f64,
    pub retries: usize,
    pub rank_tol: f64,
}

impl Default for LambdaTuning {
    fn default() -> Self {
        Self { enabled: true, min_rank: 1, max_rank: 0, factor: 1.5, retries: 5, rank_tol: 1e-3 }
    }
}

/// R-PCA outcome for one RU-UE edge.
#[derive(Debug, Clone)]
pub struct EdgeSubspace {
    pub pca: SubspaceEstimate,
    pub pp: SubspaceEstimate,
    pub singular_values: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

/// Solve, pick the rank by the singular-value gap, then project onto DFT columns.
pub fn estimate_subspace(
    y: &CMatrix,
    lambda: f64,
    params: &SolverParams,
    tuning: &LambdaTuning,
    dft: &DftBasis,
) -> Result<EdgeSubspace> {
    let (m, s) = y.shape();
    let mut lambda = lambda;
    let mut result = outlier_pursuit(y, lambda, params)?;
    let mut svd = sorted_svd(&result.h);
    let mut iterations = result.iterations;
    if tuning.enabled {
        let max_rank = if tuning.max_rank == 0 { (m / 2).max(1) } else { tuning.max_rank };
        for _ in 0..tuning.retries {
            let rank = numerical_rank(&svd.singular_values, tuning.rank_tol);
            let next = if rank > max_rank {
                lambda / tuning.factor
            } else if rank < tuning.min_rank {
                lambda * tuning.factor
            } else {
                break;
            };
            lambda = next;
            result = outlier_pursuit(y, lambda, params)?;
            iterations += result.iterations;
            svd = sorted_svd(&result.h);
        }
    }
    let rank = select_rank(&svd.singular_values, rank_search_limit(m, s))?;
    let pca = SubspaceEstimate::pca(&svd.u, rank);
    let pp = pca.project(dft)?;
    Ok(EdgeSubspace {
        pca,
        pp,
        singular_values: svd.singular_values,
        lambda,
        iterations,
        converged: result.converged,
        residual: result.residual,
    })
}
