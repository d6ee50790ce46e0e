use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel_model::{DftBasis, SupportMap};
use crate::dmrs_estimation::PilotBook;
use crate::error::Result;
use crate::geometry::{assign_dmrs, calibrate_snr, form_clusters, generate_layout, AssociationGraph, Layout};
use crate::linalg::CMatrix;
use crate::pilot_hopping::{allocate_squares, build_schedule, default_cell_radius, mols_family, SrsSchedule};
use crate::rng;
use crate::subspace_rpca::{collect_srs, estimate_subspace, power_efficiency};
use crate::uplink_receiver::{ergodic_rates, EstimatorKind, FadingStreams, NetworkContext, RateReport};

use super::config::ExperimentConfig;

/// Per-edge subspace outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeRecord {
    pub layout: usize,
    pub ru: usize,
    pub ue: usize,
    pub pe_raw: f64,
    pub pe_pp: f64,
    pub rank: usize,
    pub converged: bool,
    pub iterations: usize,
}

/// Per-UE rate outcome for one estimator kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRecord {
    pub layout: usize,
    pub ue: usize,
    pub kind: EstimatorKind,
    pub rate: f64,
    pub se: f64,
}

#[derive(Debug, Clone)]
pub struct LayoutResult {
    pub layout: usize,
    pub snr: f64,
    pub graph: AssociationGraph,
    pub edges: Vec<EdgeRecord>,
    pub reports: Vec<RateReport>,
}

impl LayoutResult {
    pub fn rate_records(&self) -> Vec<RateRecord> {
        let mut out = Vec::new();
        for report in &self.reports {
            for (ue, (rate, se)) in report.rate.iter().zip(&report.se).enumerate() {
                if let (Some(rate), Some(se)) = (rate, se) {
                    out.push(RateRecord { layout: self.layout, ue, kind: report.kind, rate: *rate, se: *se });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub layouts: Vec<LayoutResult>,
}

impl ExperimentResults {
    /// Served UEs only, ordered by layout, kind (config order) and UE.
    pub fn rate_records(&self) -> Vec<RateRecord> {
        self.layouts.iter().flat_map(LayoutResult::rate_records).collect()
    }

    pub fn edge_records(&self) -> Vec<EdgeRecord> {
        self.layouts.iter().flat_map(|l| l.edges.iter().cloned()).collect()
    }

    pub fn unserved_count(&self) -> usize {
        self.layouts.iter().map(|l| l.graph.unserved().len()).sum()
    }
}

/// Seed of layout `index`, derived from the master seed alone.
pub fn layout_seed(master: u64, index: usize) -> u64 {
    rng::stream(master, "layout", &[index as u64]).next_u64()
}

/// Hopping schedule for the UEs of a layout.
pub fn layout_schedule(config: &ExperimentConfig, layout: &Layout) -> Result<SrsSchedule> {
    let family = mols_family(config.hopping_order)?;
    let radius = config
        .cell_radius
        .or_else(|| default_cell_radius(config.area_side, config.ues, config.hopping_order));
    let assignments = allocate_squares(&layout.ue_positions, layout.area_side, &family, radius)?;
    build_schedule(&assignments, &family, config.slots())
}

/// Geometry, clusters and DMRS pilots of layout `index`.
pub fn build_layout(config: &ExperimentConfig, index: usize) -> Result<(Layout, AssociationGraph, f64)> {
    let snr = match config.snr {
        Some(s) => s,
        None => calibrate_snr(config.rus, config.antennas, config.area_side, &config.pathloss)?,
    };
    let layout = generate_layout(config.rus, config.ues, config.area_side, &config.pathloss, layout_seed(config.seed, index))?;
    let mut graph = form_clusters(&layout.lsfc, snr, config.antennas, config.max_cluster, config.eta)?;
    graph.dmrs_pilot = assign_dmrs(&graph, &layout.lsfc, config.tau_p)?;
    Ok((layout, graph, snr))
}

/// Runs SRS collection and R-PCA on every edge; bases are `[ru][position in U_l]`.
fn estimate_edges(
    config: &ExperimentConfig,
    index: usize,
    layout: &Layout,
    graph: &AssociationGraph,
    supports: &SupportMap,
    dft: &DftBasis,
    snr: f64,
) -> Result<(Vec<EdgeRecord>, Vec<Vec<CMatrix>>)> {
    let schedule = layout_schedule(config, layout)?;
    let edges = graph.edges();
    let solved: Vec<_> = edges
        .par_iter()
        .map(|&(ru, ue)| {
            let mut srs_rng = rng::stream(config.seed, "srs", &[index as u64, ru as u64, ue as u64]);
            let obs = collect_srs(&schedule, layout, supports, dft, (ru, ue), snr, 1.0, &mut srs_rng);
            let est = estimate_subspace(&obs.y, config.lambda, &config.solver, &config.tuning, dft)?;
            if !est.converged {
                log::warn!("layout {index}: R-PCA on edge ({ru}, {ue}) stopped after {} iterations (residual {:.3e})", est.iterations, est.residual);
            }
            let support = supports.get(ru, ue);
            let beta = layout.lsfc[(ru, ue)];
            let record = EdgeRecord {
                layout: index,
                ru,
                ue,
                pe_raw: power_efficiency(dft, support, beta, &est.pca),
                pe_pp: power_efficiency(dft, support, beta, &est.pp),
                rank: est.pca.rank,
                converged: est.converged,
                iterations: est.iterations,
            };
            Ok((record, est.pp.basis))
        })
        .collect::<Result<_>>()?;

    let mut bases: Vec<Vec<CMatrix>> = graph.user_sets.iter().map(|u| Vec::with_capacity(u.len())).collect();
    let mut records = Vec::with_capacity(solved.len());
    // edges are sorted by (ru, ue), matching the ascending user sets
    for ((ru, _), (record, basis)) in edges.iter().zip(solved) {
        bases[*ru].push(basis);
        records.push(record);
    }
    Ok((records, bases))
}

pub fn run_layout(config: &ExperimentConfig, index: usize) -> Result<LayoutResult> {
    let (layout, graph, snr) = build_layout(config, index)?;
    let dft = DftBasis::new(config.antennas);
    let supports = SupportMap::compute(&layout, config.angular_spread, config.antennas)?;
    let (edges, bases) = if config.needs_subspaces() {
        let (e, b) = estimate_edges(config, index, &layout, &graph, &supports, &dft, snr)?;
        (e, Some(b))
    } else {
        (Vec::new(), None)
    };
    let book = PilotBook::new(config.tau_p, snr)?;
    let ctx = NetworkContext {
        layout: &layout,
        graph: &graph,
        supports: &supports,
        dft: &dft,
        book: &book,
        snr,
        estimated_bases: bases.as_deref(),
    };
    let streams = FadingStreams { master_seed: config.seed, layout: index as u64 };
    let reports = config
        .kinds
        .iter()
        .map(|&kind| ergodic_rates(&ctx, kind, config.fading, config.tau_p, config.coherence, config.rate_base, streams))
        .collect::<Result<Vec<_>>>()?;
    let unserved = graph.unserved().len();
    log::info!("layout {index}: {} edges, {unserved} unserved UEs, SNR {:.3e}", graph.edges().len(), snr);
    Ok(LayoutResult { layout: index, snr, graph, edges, reports })
}

/// All layouts, in parallel; results are ordered by layout index and depend only on the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let layouts = (0..config.layouts)
        .into_par_iter()
        .map(|i| run_layout(config, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResults { config: config.clone(), layouts })
}
