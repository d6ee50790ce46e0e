//! Single-ring DFT channel model.
//!
//! Each RU-UE channel is `h = sqrt(beta M / |S|) F(:, S) nu` with `nu` i.i.d.
//! `CN(0, 1)` and `S` the DFT indices whose grid angle `2 pi m / M` falls in a
//! closed window of width `delta` centred on the RU-to-UE direction.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::geometry::{torus_displacement, Layout, Point};
use crate::linalg::{projector, select_columns, CMatrix, CVector};
use crate::rng::complex_normal;

const ANGLE_EPS: f64 = 1e-12;

/// Unitary `M x M` DFT matrix with entries `exp(-j 2 pi m n / M) / sqrt(M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DftBasis {
    matrix: CMatrix,
}

impl DftBasis {
    pub fn new(m: usize) -> Self {
        let scale = 1.0 / (m as f64).sqrt();
        let matrix = CMatrix::from_fn(m, m, |r, c| {
            // reduce the exponent mod M first so large products stay exact
            let phase = -TAU * ((r * c) % m) as f64 / m as f64;
            Complex64::from_polar(scale, phase)
        });
        Self { matrix }
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn column(&self, i: usize) -> CVector {
        self.matrix.column(i).into_owned()
    }

    pub fn columns(&self, indices: &[usize]) -> CMatrix {
        select_columns(&self.matrix, indices)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngularSupport {
    /// Sorted, non-empty subset of `0..M`.
    pub indices: Vec<usize>,
    pub center_angle: f64,
    pub width: f64,
    /// The window held no grid angle and was replaced by the nearest one.
    pub padded: bool,
}

impl AngularSupport {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Support from an explicit index set (used for tests and planted instances).
    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices, center_angle: 0.0, width: 0.0, padded: false }
    }
}

fn angular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Grid indices within `width / 2` (inclusive) of `center`.
pub fn support_around(center: f64, width: f64, m: usize) -> Result<AngularSupport> {
    if !(width > 0.0 && width <= TAU + ANGLE_EPS) {
        return Err(invalid("angular width must lie in (0, 2 pi]"));
    }
    if m == 0 {
        return Err(invalid("antenna count must be positive"));
    }
    let center = center.rem_euclid(TAU);
    let grid = |i: usize| TAU * i as f64 / m as f64;
    let mut indices: Vec<usize> = (0..m)
        .filter(|&i| angular_gap(grid(i), center) <= width / 2.0 + ANGLE_EPS)
        .collect();
    let padded = indices.is_empty();
    if padded {
        let nearest = (0..m)
            .min_by(|&a, &b| angular_gap(grid(a), center).total_cmp(&angular_gap(grid(b), center)))
            .expect("m >= 1");
        indices.push(nearest);
    }
    Ok(AngularSupport { indices, center_angle: center, width, padded })
}

/// Support for the RU-UE pair, centred on the shortest torus direction from RU to UE.
pub fn angular_support(ru: Point, ue: Point, area_side: f64, width: f64, m: usize) -> Result<AngularSupport> {
    let (dx, dy) = torus_displacement(ru, ue, area_side);
    let theta = if dx == 0.0 && dy == 0.0 { 0.0 } else { dy.atan2(dx) };
    support_around(theta.rem_euclid(TAU), width, m)
}

/// `L x K` supports for every RU-UE pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportMap {
    num_ues: usize,
    supports: Vec<AngularSupport>,
}

impl SupportMap {
    pub fn compute(layout: &Layout, width: f64, m: usize) -> Result<Self> {
        let mut supports = Vec::with_capacity(layout.num_rus() * layout.num_ues());
        for &ru in &layout.ru_positions {
            for &ue in &layout.ue_positions {
                supports.push(angular_support(ru, ue, layout.area_side, width, m)?);
            }
        }
        Ok(Self { num_ues: layout.num_ues(), supports })
    }

    pub fn get(&self, ru: usize, ue: usize) -> &AngularSupport {
        &self.supports[ru * self.num_ues + ue]
    }

    pub fn padded_count(&self) -> usize {
        self.supports.iter().filter(|s| s.padded).count()
    }
}

/// One draw of the channel vector for a support and gain.
pub fn sample_channel<R: Rng + ?Sized>(basis: &DftBasis, support: &AngularSupport, beta: f64, rng: &mut R) -> CVector {
    debug_assert!(!support.is_empty());
    let m = basis.size();
    let amp = (beta * m as f64 / support.len() as f64).sqrt();
    let mut h = CVector::zeros(m);
    for &col in &support.indices {
        let nu = complex_normal(rng) * amp;
        h.axpy(nu, &basis.matrix.column(col), Complex64::new(1.0, 0.0));
    }
    h
}

/// `(beta M / |S|) F_S F_S^H`.
pub fn true_covariance(basis: &DftBasis, support: &AngularSupport, beta: f64) -> CMatrix {
    let f = basis.columns(&support.indices);
    projector(&f) * Complex64::new(beta * basis.size() as f64 / support.len() as f64, 0.0)
}

/// Block-fading realization of all `L x K` channels on one resource block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    num_rus: usize,
    num_ues: usize,
    antennas: usize,
    blocks: Vec<CVector>,
    pub rb_index: u64,
}

impl ChannelRealization {
    pub fn block(&self, ru: usize, ue: usize) -> &CVector {
        &self.blocks[ru * self.num_ues + ue]
    }

    pub fn num_rus(&self) -> usize {
        self.num_rus
    }

    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// The stacked `LM x K` matrix.
    pub fn to_matrix(&self) -> CMatrix {
        let m = self.antennas;
        CMatrix::from_fn(self.num_rus * m, self.num_ues, |r, c| self.block(r / m, c)[r % m])
    }
}

pub fn sample_network_channel<R: Rng + ?Sized>(
    layout: &Layout,
    supports: &SupportMap,
    basis: &DftBasis,
    rb_index: u64,
    rng: &mut R,
) -> ChannelRealization {
    let (l, k) = (layout.num_rus(), layout.num_ues());
    let mut blocks = Vec::with_capacity(l * k);
    for ru in 0..l {
        for ue in 0..k {
            blocks.push(sample_channel(basis, supports.get(ru, ue), layout.lsfc[(ru, ue)], rng));
        }
    }
    ChannelRealization { num_rus: l, num_ues: k, antennas: basis.size(), blocks, rb_index }
}
