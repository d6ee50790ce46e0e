//! Torus layouts, UMi pathloss, SNR calibration and user-centric clustering.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Shortest displacement from `from` to `to` on a square torus of side `side`.
pub fn torus_displacement(from: Point, to: Point, side: f64) -> (f64, f64) {
    let wrap = |d: f64| {
        let mut d = d.rem_euclid(side);
        if d > side / 2.0 {
            d -= side;
        }
        d
    };
    (wrap(to.x - from.x), wrap(to.y - from.y))
}

pub fn torus_distance(p: Point, q: Point, side: f64) -> f64 {
    let axis = |a: f64, b: f64| {
        let d = (a - b).abs();
        d.min(side - d)
    };
    axis(p.x, q.x).hypot(axis(p.y, q.y))
}

/// `PL = intercept + distance_slope * log10(d_3d) + freq_slope * log10(fc)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathlossCoefficients {
    pub intercept: f64,
    pub distance_slope: f64,
    pub freq_slope: f64,
}

impl PathlossCoefficients {
    pub fn pathloss_db(&self, d3d: f64, carrier_ghz: f64) -> f64 {
        self.intercept + self.distance_slope * d3d.log10() + self.freq_slope * carrier_ghz.log10()
    }
}

/// Log-normal shadowing standard deviations in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shadowing {
    pub los_sigma_db: f64,
    pub nlos_sigma_db: f64,
}

/// 3GPP urban-microcell street-canyon pathloss with a LOS probability curve
/// `p = min(d1/d, 1) (1 - exp(-d/d2)) + exp(-d/d2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathlossParams {
    pub carrier_ghz: f64,
    pub ru_height: f64,
    pub ue_height: f64,
    pub los: PathlossCoefficients,
    pub nlos: PathlossCoefficients,
    pub los_prob_d1: f64,
    pub los_prob_d2: f64,
    pub min_distance: f64,
    pub shadowing: Option<Shadowing>,
}

impl Default for PathlossParams {
    fn default() -> Self {
        Self {
            carrier_ghz: 3.7,
            ru_height: 10.0,
            ue_height: 1.5,
            los: PathlossCoefficients { intercept: 32.4, distance_slope: 21.0, freq_slope: 20.0 },
            nlos: PathlossCoefficients { intercept: 22.4, distance_slope: 35.3, freq_slope: 21.3 },
            los_prob_d1: 18.0,
            los_prob_d2: 36.0,
            min_distance: 1.0,
            shadowing: None,
        }
    }
}

impl PathlossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_ghz > 0.0) {
            return Err(invalid("carrier frequency must be positive"));
        }
        if !(self.ru_height > 0.0 && self.ue_height > 0.0) {
            return Err(invalid("antenna heights must be positive"));
        }
        if !(self.min_distance > 0.0 && self.los_prob_d1 > 0.0 && self.los_prob_d2 > 0.0) {
            return Err(invalid("distance parameters must be positive"));
        }
        Ok(())
    }

    pub fn distance_3d(&self, d2d: f64) -> f64 {
        let dh = self.ru_height - self.ue_height;
        d2d.hypot(dh).max(self.min_distance)
    }

    pub fn los_probability(&self, d2d: f64) -> f64 {
        let d = d2d.max(self.min_distance);
        let tail = (-d / self.los_prob_d2).exp();
        (self.los_prob_d1 / d).min(1.0) * (1.0 - tail) + tail
    }

    pub fn los_pathloss_db(&self, d2d: f64) -> f64 {
        self.los.pathloss_db(self.distance_3d(d2d), self.carrier_ghz)
    }

    pub fn nlos_pathloss_db(&self, d2d: f64) -> f64 {
        let nlos = self.nlos.pathloss_db(self.distance_3d(d2d), self.carrier_ghz);
        nlos.max(self.los_pathloss_db(d2d))
    }

    pub fn pathloss_db(&self, d2d: f64, los: bool) -> f64 {
        if los {
            self.los_pathloss_db(d2d)
        } else {
            self.nlos_pathloss_db(d2d)
        }
    }
}

pub fn db_to_linear(gain_db: f64) -> f64 {
    10f64.powf(gain_db / 10.0)
}

/// RU/UE placement on the torus plus large-scale fading coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub area_side: f64,
    pub ru_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    /// `lsfc[(l, k)]`: linear power gain between RU `l` and UE `k`.
    pub lsfc: DMatrix<f64>,
    pub los: DMatrix<bool>,
}

impl Layout {
    pub fn num_rus(&self) -> usize {
        self.ru_positions.len()
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }
}

fn uniform_points<R: Rng>(n: usize, side: f64, rng: &mut R) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side))
        .collect()
}

pub fn generate_layout(
    num_rus: usize,
    num_ues: usize,
    area_side: f64,
    params: &PathlossParams,
    seed: u64,
) -> Result<Layout> {
    if num_rus == 0 || num_ues == 0 {
        return Err(invalid("layout needs at least one RU and one UE"));
    }
    if !(area_side > 0.0 && area_side.is_finite()) {
        return Err(invalid("area side must be positive"));
    }
    params.validate()?;
    let mut pos_rng = rng::stream(seed, "layout-positions", &[]);
    let ru_positions = uniform_points(num_rus, area_side, &mut pos_rng);
    let ue_positions = uniform_points(num_ues, area_side, &mut pos_rng);
    let (lsfc, los) = lsfc_matrix(&ru_positions, &ue_positions, area_side, params, seed);
    Ok(Layout { area_side, ru_positions, ue_positions, lsfc, los })
}

/// Per-pair gains `beta = 10^(-PL/10)` and LOS flags drawn once per layout.
pub fn lsfc_matrix(
    ru: &[Point],
    ue: &[Point],
    area_side: f64,
    params: &PathlossParams,
    seed: u64,
) -> (DMatrix<f64>, DMatrix<bool>) {
    let mut los_rng = rng::stream(seed, "layout-los", &[]);
    let mut shadow_rng = rng::stream(seed, "layout-shadowing", &[]);
    let (l, k) = (ru.len(), ue.len());
    let mut gains = DMatrix::zeros(l, k);
    let mut flags = DMatrix::from_element(l, k, false);
    for li in 0..l {
        for ki in 0..k {
            let d2d = torus_distance(ru[li], ue[ki], area_side);
            let los = los_rng.random::<f64>() < params.los_probability(d2d);
            let mut pl = params.pathloss_db(d2d, los);
            if let Some(sh) = params.shadowing {
                let sigma = if los { sh.los_sigma_db } else { sh.nlos_sigma_db };
                let z: f64 = shadow_rng.sample(StandardNormal);
                pl += sigma * z;
            }
            gains[(li, ki)] = db_to_linear(-pl);
            flags[(li, ki)] = los;
        }
    }
    (gains, flags)
}

/// Radius of a disk with area `A / L`.
pub fn ru_disk_radius(num_rus: usize, area_side: f64) -> f64 {
    (area_side * area_side / (std::f64::consts::PI * num_rus as f64)).sqrt()
}

/// Average gain at `3 d_L`, weighting LOS and NLOS by the LOS probability.
pub fn expected_gain_at_reference(num_rus: usize, area_side: f64, params: &PathlossParams) -> f64 {
    let d = 3.0 * ru_disk_radius(num_rus, area_side);
    let p = params.los_probability(d);
    p * db_to_linear(-params.los_pathloss_db(d)) + (1.0 - p) * db_to_linear(-params.nlos_pathloss_db(d))
}

/// Transmit SNR such that `beta_bar * M * SNR = 1`.
pub fn calibrate_snr(num_rus: usize, antennas: usize, area_side: f64, params: &PathlossParams) -> Result<f64> {
    if num_rus == 0 || antennas == 0 {
        return Err(invalid("calibration needs L >= 1 and M >= 1"));
    }
    let beta_bar = expected_gain_at_reference(num_rus, area_side, params);
    Ok(1.0 / (beta_bar * antennas as f64))
}

/// Bipartite RU-UE association with per-UE DMRS pilots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationGraph {
    pub num_rus: usize,
    pub num_ues: usize,
    /// Serving RUs per UE, strongest first.
    pub clusters: Vec<Vec<usize>>,
    /// Served UEs per RU, ascending.
    pub user_sets: Vec<Vec<usize>>,
    pub dmrs_pilot: Vec<usize>,
}

impl AssociationGraph {
    /// All `(ru, ue)` edges, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .user_sets
            .iter()
            .enumerate()
            .flat_map(|(l, ues)| ues.iter().map(move |&k| (l, k)))
            .collect();
        e.sort_unstable();
        e
    }

    pub fn is_edge(&self, ru: usize, ue: usize) -> bool {
        self.user_sets[ru].binary_search(&ue).is_ok()
    }

    pub fn unserved(&self) -> Vec<usize> {
        (0..self.num_ues).filter(|&k| self.clusters[k].is_empty()).collect()
    }

    pub fn is_served(&self, ue: usize) -> bool {
        !self.clusters[ue].is_empty()
    }
}

/// Association threshold `eta / (M * SNR)`.
pub fn association_threshold(snr: f64, antennas: usize, eta: f64) -> f64 {
    eta / (antennas as f64 * snr)
}

pub fn form_clusters(lsfc: &DMatrix<f64>, snr: f64, antennas: usize, max_cluster: usize, eta: f64) -> Result<AssociationGraph> {
    if max_cluster == 0 {
        return Err(invalid("maximum cluster size must be at least 1"));
    }
    let (l, k) = lsfc.shape();
    let threshold = association_threshold(snr, antennas, eta);
    let mut clusters = Vec::with_capacity(k);
    let mut user_sets = vec![Vec::new(); l];
    for ue in 0..k {
        let mut order: Vec<usize> = (0..l).collect();
        // stable sort keeps the lower RU index first on equal gains
        order.sort_by(|&a, &b| lsfc[(b, ue)].total_cmp(&lsfc[(a, ue)]));
        let cluster: Vec<usize> = order
            .into_iter()
            .take_while(|&ru| lsfc[(ru, ue)] >= threshold)
            .take(max_cluster)
            .collect();
        for &ru in &cluster {
            user_sets[ru].push(ue);
        }
        clusters.push(cluster);
    }
    Ok(AssociationGraph { num_rus: l, num_ues: k, clusters, user_sets, dmrs_pilot: vec![0; k] })
}

/// Greedy DMRS assignment.
///
/// UEs are visited by decreasing strongest gain. A UE takes the pilot whose
/// worst co-pilot gain at one of its serving RUs (counting only co-pilot UEs
/// that RU also serves) is smallest; remaining ties go to the least-used pilot,
/// then to the lowest index.
pub fn assign_dmrs(graph: &AssociationGraph, lsfc: &DMatrix<f64>, tau_p: usize) -> Result<Vec<usize>> {
    if tau_p == 0 {
        return Err(invalid("tau_p must be at least 1"));
    }
    let k = graph.num_ues;
    let strongest = |ue: usize| (0..graph.num_rus).map(|l| lsfc[(l, ue)]).fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| strongest(b).total_cmp(&strongest(a)));

    let mut pilot: Vec<Option<usize>> = vec![None; k];
    let mut usage = vec![0usize; tau_p];
    for &ue in &order {
        let mut penalty = vec![0.0f64; tau_p];
        for &ru in &graph.clusters[ue] {
            for &other in &graph.user_sets[ru] {
                if let Some(p) = pilot[other] {
                    penalty[p] = penalty[p].max(lsfc[(ru, other)]);
                }
            }
        }
        let best = (0..tau_p)
            .min_by(|&a, &b| penalty[a].total_cmp(&penalty[b]).then(usage[a].cmp(&usage[b])).then(a.cmp(&b)))
            .expect("tau_p >= 1");
        pilot[ue] = Some(best);
        usage[best] += 1;
    }
    Ok(pilot.into_iter().map(|p| p.expect("every UE visited")).collect())
}

/// Worst co-pilot gain a UE sees at its serving RUs under a given assignment.
pub fn copilot_penalty(graph: &AssociationGraph, lsfc: &DMatrix<f64>, pilots: &[usize], ue: usize) -> f64 {
    let mut worst = 0.0f64;
    for &ru in &graph.clusters[ue] {
        for &other in &graph.user_sets[ru] {
            if other != ue && pilots[other] == pilots[ue] {
                worst = worst.max(lsfc[(ru, other)]);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn torus_distance_examples() {
        let o = Point::new(0.0, 0.0);
        assert_eq!(torus_distance(o, o, 2000.0), 0.0);
        assert!((torus_distance(o, Point::new(1999.0, 0.0), 2000.0) - 1.0).abs() < 1e-12);
        // sqrt(1000^2 + 1000^2)
        assert!((torus_distance(o, Point::new(1000.0, 1000.0), 2000.0) - 1_414.213_562_373_095).abs() < 1e-9);
    }

    #[test]
    fn displacement_matches_distance() {
        let p = Point::new(10.0, 1990.0);
        let q = Point::new(1995.0, 5.0);
        let (dx, dy) = torus_displacement(p, q, 2000.0);
        assert!((dx + 15.0).abs() < 1e-9 && (dy - 15.0).abs() < 1e-9);
        assert!((dx.hypot(dy) - torus_distance(p, q, 2000.0)).abs() < 1e-9);
    }

    #[test]
    fn los_pathloss_hand_value() {
        let params = PathlossParams::default();
        let d3 = (100.0f64.powi(2) + 8.5f64.powi(2)).sqrt();
        let expected = 32.4 + 21.0 * d3.log10() + 20.0 * 3.7f64.log10();
        let pl = params.los_pathloss_db(100.0);
        assert!((pl - expected).abs() < 1e-12);
        assert!((pl - 85.80).abs() < 0.01, "{pl}");
        let beta = db_to_linear(-pl);
        assert!((beta - 2.63e-9).abs() < 0.01e-9, "{beta}");
    }

    #[test]
    fn gain_decreases_with_distance() {
        let params = PathlossParams::default();
        for los in [true, false] {
            let near = db_to_linear(-params.pathloss_db(100.0, los));
            let far = db_to_linear(-params.pathloss_db(200.0, los));
            assert!(far < near);
        }
    }

    #[test]
    fn nlos_never_beats_los() {
        let params = PathlossParams::default();
        for d in [1.0, 5.0, 20.0, 100.0, 900.0] {
            assert!(params.nlos_pathloss_db(d) >= params.los_pathloss_db(d));
        }
    }

    #[test]
    fn los_probability_is_one_up_close() {
        let params = PathlossParams::default();
        assert_eq!(params.los_probability(10.0), 1.0);
        assert!(params.los_probability(500.0) < 0.1);
    }

    #[test]
    fn layout_shapes_and_determinism() {
        let params = PathlossParams::default();
        let a = generate_layout(40, 100, 2000.0, &params, 7).unwrap();
        assert_eq!(a.lsfc.shape(), (40, 100));
        assert_eq!(a.los.shape(), (40, 100));
        assert!(a.lsfc.iter().all(|&b| b > 0.0 && b.is_finite()));
        assert!(a.ru_positions.iter().chain(&a.ue_positions).all(|p| (0.0..2000.0).contains(&p.x) && (0.0..2000.0).contains(&p.y)));
        let b = generate_layout(40, 100, 2000.0, &params, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_layout(40, 100, 2000.0, &params, 8).unwrap();
        assert_ne!(a.ue_positions, c.ue_positions);
    }

    #[test]
    fn minimal_layout() {
        let layout = generate_layout(1, 1, 1.0, &PathlossParams::default(), 0).unwrap();
        assert!(layout.lsfc[(0, 0)] > 0.0);
    }

    #[test]
    fn layout_rejects_empty_dimensions() {
        let p = PathlossParams::default();
        assert!(generate_layout(0, 3, 100.0, &p, 0).is_err());
        assert!(generate_layout(3, 0, 100.0, &p, 0).is_err());
        assert!(generate_layout(3, 3, 0.0, &p, 0).is_err());
    }

    #[test]
    fn shadowing_changes_gains_but_not_los() {
        let mut p = PathlossParams::default();
        let plain = generate_layout(4, 6, 500.0, &p, 3).unwrap();
        p.shadowing = Some(Shadowing { los_sigma_db: 4.0, nlos_sigma_db: 7.82 });
        let shadowed = generate_layout(4, 6, 500.0, &p, 3).unwrap();
        assert_eq!(plain.los, shadowed.los);
        assert_ne!(plain.lsfc, shadowed.lsfc);
    }

    #[test]
    fn calibration_reference_distance() {
        let r = ru_disk_radius(40, 2000.0);
        assert!((r - 178.41).abs() < 0.01, "{r}");
        assert!((3.0 * r - 535.24).abs() < 0.01);
    }

    #[test]
    fn calibration_identity_and_scaling() {
        let params = PathlossParams::default();
        let snr16 = calibrate_snr(40, 16, 2000.0, &params).unwrap();
        let snr32 = calibrate_snr(40, 32, 2000.0, &params).unwrap();
        assert!((snr32 / snr16 - 0.5).abs() < 1e-12);
        let bbar = expected_gain_at_reference(40, 2000.0, &params);
        assert!((bbar * 16.0 * snr16 - 1.0).abs() < 1e-12);
    }

    fn threshold_row(values: &[f64], snr: f64, m: usize) -> DMatrix<f64> {
        let t = association_threshold(snr, m, 1.0);
        DMatrix::from_fn(values.len(), 1, |r, _| values[r] * t)
    }

    #[test]
    fn clusters_keep_strongest_within_q() {
        let lsfc = threshold_row(&[2.0, 4.0, 1.0, 3.0], 10.0, 4);
        let g = form_clusters(&lsfc, 10.0, 4, 2, 1.0).unwrap();
        assert_eq!(g.clusters[0], vec![1, 3]);
        assert!(g.is_edge(1, 0) && g.is_edge(3, 0) && !g.is_edge(0, 0));
    }

    #[test]
    fn unserved_ue_is_flagged() {
        let lsfc = threshold_row(&[0.5, 0.2, 0.9], 10.0, 4);
        let g = form_clusters(&lsfc, 10.0, 4, 10, 1.0).unwrap();
        assert!(g.clusters[0].is_empty());
        assert_eq!(g.unserved(), vec![0]);
    }

    #[test]
    fn q_is_only_an_upper_bound() {
        let lsfc = threshold_row(&[1.5, 2.0, 3.0, 4.0, 5.0, 0.1, 0.2], 10.0, 4);
        let g = form_clusters(&lsfc, 10.0, 4, 10, 1.0).unwrap();
        assert_eq!(g.clusters[0].len(), 5);
    }

    #[test]
    fn zero_q_rejected() {
        assert!(form_clusters(&DMatrix::from_element(1, 1, 1.0), 1.0, 1, 0, 1.0).is_err());
    }

    #[test]
    fn enough_pilots_are_all_distinct() {
        let layout = generate_layout(6, 10, 600.0, &PathlossParams::default(), 2).unwrap();
        let snr = calibrate_snr(6, 8, 600.0, &PathlossParams::default()).unwrap();
        let g = form_clusters(&layout.lsfc, snr, 8, 10, 1.0).unwrap();
        let mut p = assign_dmrs(&g, &layout.lsfc, 12).unwrap();
        p.sort_unstable();
        p.dedup();
        assert_eq!(p.len(), 10);
    }

    #[test]
    fn disjoint_clusters_share_pilot_without_penalty() {
        // UE0 served only by RU0, UE1 served only by RU1
        let lsfc = DMatrix::from_row_slice(2, 2, &[1.0, 1e-6, 1e-6, 1.0]);
        let g = form_clusters(&lsfc, 1.0, 1, 10, 0.5).unwrap();
        assert_eq!(g.clusters, vec![vec![0], vec![1]]);
        let pilots = assign_dmrs(&g, &lsfc, 1).unwrap();
        assert_eq!(pilots, vec![0, 0]);
        assert_eq!(copilot_penalty(&g, &lsfc, &pilots, 0), 0.0);
        assert_eq!(copilot_penalty(&g, &lsfc, &pilots, 1), 0.0);
    }

    #[test]
    fn all_pilots_used_at_scale() {
        let params = PathlossParams::default();
        let layout = generate_layout(40, 100, 2000.0, &params, 7).unwrap();
        let snr = calibrate_snr(40, 16, 2000.0, &params).unwrap();
        let g = form_clusters(&layout.lsfc, snr, 16, 10, 1.0).unwrap();
        let pilots = assign_dmrs(&g, &layout.lsfc, 15).unwrap();
        let mut used = [false; 15];
        pilots.iter().for_each(|&p| used[p] = true);
        assert!(used.iter().all(|&u| u));
        assert!(pilots.iter().all(|&p| p < 15));
    }

    #[test]
    fn zero_tau_rejected() {
        let g = form_clusters(&DMatrix::from_element(1, 1, 1.0), 1.0, 1, 1, 1.0).unwrap();
        assert!(assign_dmrs(&g, &DMatrix::from_element(1, 1, 1.0), 0).is_err());
    }

    fn check_graph_consistency(g: &AssociationGraph, lsfc: &DMatrix<f64>, snr: f64, m: usize, q: usize) {
        let threshold = association_threshold(snr, m, 1.0);
        for l in 0..g.num_rus {
            for k in 0..g.num_ues {
                let in_cluster = g.clusters[k].contains(&l);
                let in_users = g.user_sets[l].contains(&k);
                assert_eq!(in_cluster, in_users);
                assert_eq!(in_cluster, g.edges().contains(&(l, k)));
                if in_cluster {
                    assert!(lsfc[(l, k)] >= threshold);
                }
            }
        }
        assert!(g.clusters.iter().all(|c| c.len() <= q));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn graph_invariants_hold(seed in 0u64..1000, l in 1usize..12, k in 1usize..20, q in 1usize..6) {
            let params = PathlossParams::default();
            let layout = generate_layout(l, k, 800.0, &params, seed).unwrap();
            let snr = calibrate_snr(l, 8, 800.0, &params).unwrap();
            let g = form_clusters(&layout.lsfc, snr, 8, q, 1.0).unwrap();
            check_graph_consistency(&g, &layout.lsfc, snr, 8, q);
        }

        #[test]
        fn torus_metric_axioms(ax in 0.0f64..1000.0, ay in 0.0f64..1000.0, bx in 0.0f64..1000.0,
                               by in 0.0f64..1000.0, cx in 0.0f64..1000.0, cy in 0.0f64..1000.0) {
            let (a, b, c) = (Point::new(ax, ay), Point::new(bx, by), Point::new(cx, cy));
            let side = 1000.0;
            prop_assert!((torus_distance(a, b, side) - torus_distance(b, a, side)).abs() < 1e-9);
            prop_assert_eq!(torus_distance(a, a, side), 0.0);
            prop_assert!(torus_distance(a, c, side) <= torus_distance(a, b, side) + torus_distance(b, c, side) + 1e-9);
            prop_assert!(torus_distance(a, b, side) <= side * 2f64.sqrt() / 2.0 + 1e-9);
        }
    }
}
