//! Local LMMSE combining, cluster-level weights, uplink SINR and ergodic rates.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel_model::{sample_network_channel, ChannelRealization, DftBasis, SupportMap};
use crate::dmrs_estimation::{dmrs_field, pm_estimate, sp_estimate, PilotBook};
use crate::error::{invalid, Error, Result};
use crate::geometry::{AssociationGraph, Layout};
use crate::linalg::{solve_hpd, CMatrix, CVector};
use crate::rng;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which channel knowledge drives the combiners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Ideal partial CSI: true channels on every edge.
    Ideal,
    /// Pilot matching projected onto the true subspace.
    Sp,
    /// Pilot matching projected onto the R-PCA estimate after DFT projection.
    Pp,
    /// Plain pilot matching.
    Pm,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [Self::Ideal, Self::Sp, Self::Pp, Self::Pm];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ideal => "ideal",
            Self::Sp => "sp",
            Self::Pp => "pp",
            Self::Pm => "pm",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ideal" => Ok(Self::Ideal),
            "sp" => Ok(Self::Sp),
            "pp" | "rpca-sp" => Ok(Self::Pp),
            "pm" => Ok(Self::Pm),
            other => Err(invalid(format!("unknown estimator kind '{other}' (expected ideal, sp, pp or pm)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateBase {
    #[default]
    Log2,
    Ln,
}

impl RateBase {
    pub fn rate(self, sinr: f64) -> f64 {
        match self {
            Self::Log2 => (1.0 + sinr).log2(),
            Self::Ln => (1.0 + sinr).ln(),
        }
    }
}

/// `(I/SNR + sum_j h_j h_j^H)^{-1} h_k`, normalised; zero when `h_k = 0`.
pub fn local_lmmse(estimates: &[&CVector], target: usize, snr: f64) -> CVector {
    let hk = estimates[target];
    let m = hk.len();
    if hk.norm() == 0.0 {
        return CVector::zeros(m);
    }
    // scaled by SNR: (I + SNR sum h h^H) has the same solution direction
    let mut a = CMatrix::identity(m, m);
    let s = Complex64::new(snr, 0.0);
    for h in estimates {
        a += *h * h.adjoint() * s;
    }
    let v = solve_hpd(a, hk).unwrap_or_else(|| hk.clone());
    let n = v.norm();
    if n == 0.0 || !n.is_finite() {
        CVector::zeros(m)
    } else {
        v / Complex64::new(n, 0.0)
    }
}

/// Per-RU SINR of combiner `v` judged on the estimates themselves.
pub fn nominal_local_sinr(v: &CVector, estimates: &[&CVector], target: usize, snr: f64) -> f64 {
    let signal = v.dotc(estimates[target]).norm_sqr();
    let interference: f64 = estimates
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != target)
        .map(|(_, h)| v.dotc(h).norm_sqr())
        .sum();
    snr * signal / (v.norm_squared() + snr * interference)
}

/// Weights over a cluster maximising `|w^H a|^2 / w^H (D + SNR B) w`, with `a`
/// the desired effective gains, `B = sum_j g_j g_j^H` over known interferers and
/// `D` the post-combining noise powers. Returns a unit vector `w`.
pub fn cluster_weights(desired: &[Complex64], interferers: &[Vec<Complex64>], noise: &[f64], snr: f64) -> Result<Vec<Complex64>> {
    let n = desired.len();
    if n == 0 {
        return Err(invalid("cluster must contain at least one RU"));
    }
    let mut a = CMatrix::zeros(n, n);
    for (i, &d) in noise.iter().enumerate() {
        a[(i, i)] = Complex64::new(d + 1e-12, 0.0);
    }
    for g in interferers {
        let g = CVector::from_column_slice(g);
        a += &g * g.adjoint() * Complex64::new(snr, 0.0);
    }
    let target = CVector::from_column_slice(desired);
    let w = solve_hpd(a, &target).unwrap_or(target);
    let norm = w.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Ok(vec![ZERO; n]);
    }
    Ok(w.iter().map(|z| z / norm).collect())
}

/// Nominal cluster SINR for weights `w` (same model as [`cluster_weights`]).
pub fn nominal_cluster_sinr(w: &[Complex64], desired: &[Complex64], interferers: &[Vec<Complex64>], noise: &[f64], snr: f64) -> f64 {
    let inner = |g: &[Complex64]| w.iter().zip(g).map(|(wi, gi)| wi.conj() * gi).sum::<Complex64>().norm_sqr();
    let noise_power: f64 = w.iter().zip(noise).map(|(wi, d)| wi.norm_sqr() * d).sum();
    let interference: f64 = interferers.iter().map(|g| inner(g)).sum();
    snr * inner(desired) / (noise_power + snr * interference)
}

/// Sparse unit-norm receiver for one UE: blocks `w_l v_l` on the cluster RUs.
#[derive(Debug, Clone)]
pub struct Combiner {
    pub ue: usize,
    pub blocks: Vec<(usize, CVector)>,
}

impl Combiner {
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(|(_, b)| b.norm_squared()).sum::<f64>().sqrt()
    }

    /// Dense `LM` vector with zero blocks off the cluster.
    pub fn assemble(&self, num_rus: usize, antennas: usize) -> CVector {
        let mut out = CVector::zeros(num_rus * antennas);
        for (ru, b) in &self.blocks {
            out.rows_mut(ru * antennas, antennas).copy_from(b);
        }
        out
    }

    /// `v^H h_j` against the true channel of UE `j`.
    pub fn response(&self, channels: &ChannelRealization, ue: usize) -> Complex64 {
        self.blocks.iter().map(|(ru, b)| b.dotc(channels.block(*ru, ue))).sum()
    }
}

/// Channel estimates for every edge, indexed `[ru][position in U_l]`.
pub type EdgeEstimates = Vec<Vec<CVector>>;

/// Builds the receiver of UE `ue` from per-RU LMMSE vectors and cluster weights.
pub fn cluster_combiner(graph: &AssociationGraph, estimates: &EdgeEstimates, ue: usize, snr: f64) -> Result<Combiner> {
    let cluster = &graph.clusters[ue];
    if cluster.is_empty() {
        return Err(invalid(format!("UE {ue} has an empty cluster")));
    }
    let mut locals = Vec::with_capacity(cluster.len());
    for &ru in cluster {
        let users = &graph.user_sets[ru];
        let pos = users.binary_search(&ue).map_err(|_| invalid("cluster and user sets disagree"))?;
        let refs: Vec<&CVector> = estimates[ru].iter().collect();
        locals.push(local_lmmse(&refs, pos, snr));
    }

    // UEs known at any cluster RU, other than `ue`
    let mut known: Vec<usize> = cluster.iter().flat_map(|&ru| graph.user_sets[ru].iter().copied()).filter(|&j| j != ue).collect();
    known.sort_unstable();
    known.dedup();

    let gain = |idx: usize, j: usize| -> Complex64 {
        let ru = cluster[idx];
        match graph.user_sets[ru].binary_search(&j) {
            Ok(pos) => locals[idx].dotc(&estimates[ru][pos]),
            Err(_) => ZERO,
        }
    };
    let desired: Vec<Complex64> = (0..cluster.len()).map(|i| gain(i, ue)).collect();
    let interferers: Vec<Vec<Complex64>> = known.iter().map(|&j| (0..cluster.len()).map(|i| gain(i, j)).collect()).collect();
    let noise: Vec<f64> = locals.iter().map(|v| v.norm_squared()).collect();
    let w = cluster_weights(&desired, &interferers, &noise, snr)?;

    let mut blocks: Vec<(usize, CVector)> = cluster.iter().zip(&locals).zip(&w).map(|((&ru, v), wi)| (ru, v * *wi)).collect();
    let norm = blocks.iter().map(|(_, b)| b.norm_squared()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, b) in &mut blocks {
            *b /= Complex64::new(norm, 0.0);
        }
    }
    Ok(Combiner { ue, blocks })
}

/// `|v^H h_k|^2 / (1/SNR + sum_{j != k} |v^H h_j|^2)` on the true channels.
pub fn uplink_sinr(combiner: &Combiner, channels: &ChannelRealization, snr: f64) -> f64 {
    let k = combiner.ue;
    let signal = combiner.response(channels, k).norm_sqr();
    let interference: f64 = (0..channels.num_ues()).filter(|&j| j != k).map(|j| combiner.response(channels, j).norm_sqr()).sum();
    snr * signal / (1.0 + snr * interference)
}

/// Same as [`uplink_sinr`] for a dense receiver and stacked `LM x K` channel matrix.
pub fn uplink_sinr_dense(v: &CVector, h: &CMatrix, k: usize, snr: f64) -> f64 {
    let resp = h.adjoint() * v;
    let signal = resp[k].norm_sqr();
    let interference: f64 = resp.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, z)| z.norm_sqr()).sum();
    signal / (1.0 / snr + interference)
}

/// Everything fixed for a layout that the fading loop needs.
pub struct NetworkContext<'a> {
    pub layout: &'a Layout,
    pub graph: &'a AssociationGraph,
    pub supports: &'a SupportMap,
    pub dft: &'a DftBasis,
    pub book: &'a PilotBook,
    pub snr: f64,
    /// Projected R-PCA bases per edge, `[ru][position in U_l]`; needed for [`EstimatorKind::Pp`].
    pub estimated_bases: Option<&'a [Vec<CMatrix>]>,
}

impl NetworkContext<'_> {
    /// Channel estimates of all edges for one fading draw.
    pub fn estimates<R: rand::Rng + ?Sized>(&self, kind: EstimatorKind, channels: &ChannelRealization, noise_rng: &mut R) -> Result<EdgeEstimates> {
        let k = self.layout.num_ues();
        let mut out = Vec::with_capacity(self.layout.num_rus());
        for ru in 0..self.layout.num_rus() {
            let users = &self.graph.user_sets[ru];
            if kind == EstimatorKind::Ideal {
                out.push(users.iter().map(|&j| channels.block(ru, j).clone()).collect());
                continue;
            }
            // draw the field even for RUs without users so noise streams line up across kinds
            let locals: Vec<&CVector> = (0..k).map(|j| channels.block(ru, j)).collect();
            let field = dmrs_field(&locals, &self.graph.dmrs_pilot, self.book, true, noise_rng)?;
            let mut per_ru = Vec::with_capacity(users.len());
            for (pos, &j) in users.iter().enumerate() {
                let pm = pm_estimate(&field, self.book, self.graph.dmrs_pilot[j], (ru, j))?;
                let est = match kind {
                    EstimatorKind::Pm => pm.vector,
                    EstimatorKind::Sp => sp_estimate(&pm, &self.dft.columns(&self.supports.get(ru, j).indices)).vector,
                    EstimatorKind::Pp => {
                        let bases = self.estimated_bases.ok_or_else(|| invalid("R-PCA subspaces are required for the pp estimator"))?;
                        sp_estimate(&pm, &bases[ru][pos]).vector
                    }
                    EstimatorKind::Ideal => unreachable!(),
                };
                per_ru.push(est);
            }
            out.push(per_ru);
        }
        Ok(out)
    }

    /// SINR of every UE for one draw; `None` for UEs without a cluster.
    pub fn draw_sinrs(&self, kind: EstimatorKind, channels: &ChannelRealization, noise_rng: &mut rng::SimRng) -> Result<Vec<Option<f64>>> {
        let estimates = self.estimates(kind, channels, noise_rng)?;
        (0..self.layout.num_ues())
            .map(|ue| {
                if !self.graph.is_served(ue) {
                    return Ok(None);
                }
                let c = cluster_combiner(self.graph, &estimates, ue, self.snr)?;
                Ok(Some(uplink_sinr(&c, channels, self.snr)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub kind: EstimatorKind,
    /// `sinr[ue][draw]`; empty for unserved UEs.
    pub sinr: Vec<Vec<f64>>,
    pub rate: Vec<Option<f64>>,
    pub se: Vec<Option<f64>>,
    pub unserved: Vec<usize>,
    pub se_factor: f64,
}

/// `1 - tau_p / T`.
pub fn se_factor(tau_p: usize, coherence: usize) -> Result<f64> {
    if coherence == 0 || tau_p > coherence {
        return Err(invalid("coherence block must hold the DMRS pilots (tau_p <= T)"));
    }
    Ok(1.0 - tau_p as f64 / coherence as f64)
}

/// Stream coordinates for the fading loop of one layout.
#[derive(Debug, Clone, Copy)]
pub struct FadingStreams {
    pub master_seed: u64,
    pub layout: u64,
}

impl FadingStreams {
    pub fn channel(&self, draw: u64) -> rng::SimRng {
        rng::stream(self.master_seed, "fading-channel", &[self.layout, draw])
    }

    pub fn dmrs_noise(&self, draw: u64) -> rng::SimRng {
        rng::stream(self.master_seed, "fading-dmrs-noise", &[self.layout, draw])
    }
}

/// Monte-Carlo optimistic ergodic rates over `n_fading` independent draws.
pub fn ergodic_rates(
    ctx: &NetworkContext<'_>,
    kind: EstimatorKind,
    n_fading: usize,
    tau_p: usize,
    coherence: usize,
    base: RateBase,
    streams: FadingStreams,
) -> Result<RateReport> {
    if n_fading == 0 {
        return Err(invalid("n_fading must be at least 1"));
    }
    let factor = se_factor(tau_p, coherence)?;
    let draws: Vec<Vec<Option<f64>>> = (0..n_fading as u64)
        .into_par_iter()
        .map(|d| {
            let channels = sample_network_channel(ctx.layout, ctx.supports, ctx.dft, d, &mut streams.channel(d));
            ctx.draw_sinrs(kind, &channels, &mut streams.dmrs_noise(d))
        })
        .collect::<Result<_>>()?;

    let k = ctx.layout.num_ues();
    let mut sinr = vec![Vec::new(); k];
    for draw in &draws {
        for (ue, s) in draw.iter().enumerate() {
            if let Some(s) = s {
                sinr[ue].push(*s);
            }
        }
    }
    let rate: Vec<Option<f64>> = sinr
        .iter()
        .map(|s| (!s.is_empty()).then(|| s.iter().map(|&x| base.rate(x)).sum::<f64>() / s.len() as f64))
        .collect();
    let se = rate.iter().map(|r| r.map(|r| factor * r)).collect();
    Ok(RateReport { kind, sinr, rate, se, unserved: ctx.graph.unserved(), se_factor: factor })
}

/// Dense matrix view of all SINR samples, UEs by draws (unserved rows are zero).
pub fn sinr_matrix(report: &RateReport, n_fading: usize) -> DMatrix<f64> {
    DMatrix::from_fn(report.sinr.len(), n_fading, |u, d| report.sinr[u].get(d).copied().unwrap_or(0.0))
}
