//! DMRS pilot field, pilot-matching and subspace-projected channel estimates.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel_model::DftBasis;
use crate::error::{invalid, Result};
use crate::linalg::{projector, CMatrix, CVector};
use crate::rng::complex_normal;

/// `tau_p` orthogonal pilots, each of energy `tau_p * SNR`: the columns of the
/// `tau_p`-point unitary DFT scaled by `sqrt(tau_p * SNR)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    tau_p: usize,
    snr: f64,
    vectors: CMatrix,
}

impl PilotBook {
    pub fn new(tau_p: usize, snr: f64) -> Result<Self> {
        if tau_p == 0 || !(snr > 0.0) {
            return Err(invalid("pilot book needs tau_p >= 1 and SNR > 0"));
        }
        let scale = Complex64::new((tau_p as f64 * snr).sqrt(), 0.0);
        Ok(Self { tau_p, snr, vectors: DftBasis::new(tau_p).matrix() * scale })
    }

    pub fn len(&self) -> usize {
        self.tau_p
    }

    pub fn is_empty(&self) -> bool {
        self.tau_p == 0
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn pilot(&self, t: usize) -> CVector {
        self.vectors.column(t).into_owned()
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }
}

/// `Y = sum_i h_i phi_{t_i}^H + Z` received at one RU.
#[derive(Debug, Clone)]
pub struct DmrsField {
    pub y: CMatrix,
}

/// `channels[i]` is UE `i`'s channel at this RU, `pilots[i]` its DMRS index.
/// `noise = false` gives the noiseless field.
pub fn dmrs_field<R: Rng + ?Sized>(
    channels: &[&CVector],
    pilots: &[usize],
    book: &PilotBook,
    noise: bool,
    rng: &mut R,
) -> Result<DmrsField> {
    if channels.len() != pilots.len() || channels.is_empty() {
        return Err(invalid("one pilot index per channel is required"));
    }
    if let Some(&bad) = pilots.iter().find(|&&t| t >= book.len()) {
        return Err(invalid(format!("pilot index {bad} outside 0..{}", book.len())));
    }
    let m = channels[0].len();
    // accumulate per pilot first: sum_i h_i phi_t^H = sum_t (sum_{t_i = t} h_i) phi_t^H
    let mut stacked = CMatrix::zeros(m, book.len());
    for (h, &t) in channels.iter().zip(pilots) {
        let mut col = stacked.column_mut(t);
        col += *h;
    }
    let mut y = stacked * book.vectors().adjoint();
    if noise {
        y.iter_mut().for_each(|z| *z += complex_normal(rng));
    }
    Ok(DmrsField { y })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimateKind {
    Pm,
    Sp,
    Ideal,
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub vector: CVector,
    pub kind: EstimateKind,
    pub ru: usize,
    pub ue: usize,
}

/// `Y phi_{t_k} / (tau_p SNR)`.
pub fn pm_estimate(field: &DmrsField, book: &PilotBook, t: usize, (ru, ue): (usize, usize)) -> Result<ChannelEstimate> {
    if t >= book.len() {
        return Err(invalid("pilot index out of range"));
    }
    let scale = Complex64::new(1.0 / (book.len() as f64 * book.snr()), 0.0);
    Ok(ChannelEstimate { vector: &field.y * book.pilot(t) * scale, kind: EstimateKind::Pm, ru, ue })
}

/// Orthogonal projection of a PM estimate onto `span(basis)`.
pub fn sp_estimate(pm: &ChannelEstimate, basis: &CMatrix) -> ChannelEstimate {
    let coeffs = basis.adjoint() * &pm.vector;
    ChannelEstimate { vector: basis * coeffs, kind: EstimateKind::Sp, ru: pm.ru, ue: pm.ue }
}

/// `sum_i (beta_i M / |S_i|) P F_i F_i^H P`, `P = F_k F_k^H`, over the co-pilot users.
pub fn contamination_covariance(own_basis: &CMatrix, copilots: &[(&CMatrix, f64)]) -> CMatrix {
    let m = own_basis.nrows();
    let p = projector(own_basis);
    let mut sigma = CMatrix::zeros(m, m);
    for &(basis, beta) in copilots {
        let scale = Complex64::new(beta * m as f64 / basis.ncols() as f64, 0.0);
        let pf = &p * basis;
        sigma += &pf * pf.adjoint() * scale;
    }
    sigma
}
