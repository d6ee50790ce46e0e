use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PathlossParams;
use crate::pilot_hopping::is_prime;
use crate::subspace_rpca::{LambdaTuning, SolverParams};
use crate::uplink_receiver::{EstimatorKind, RateBase};

/// Fully resolved experiment parameters.
///
/// Short aliases (`L`, `M`, `K`, `N`, `S`) are accepted in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(alias = "L")]
    pub rus: usize,
    #[serde(alias = "M")]
    pub antennas: usize,
    #[serde(alias = "K")]
    pub ues: usize,
    pub tau_p: usize,
    /// Latin square order `N`, the number of SRS subcarriers.
    #[serde(alias = "N")]
    pub hopping_order: usize,
    /// SRS slots `S` per subspace estimate; `None` means one hopping period.
    #[serde(alias = "S", skip_serializing_if = "Option::is_none")]
    pub srs_slots: Option<usize>,
    /// Angular spread `Delta` in radians.
    pub angular_spread: f64,
    #[serde(alias = "Q")]
    pub max_cluster: usize,
    pub eta: f64,
    pub lambda: f64,
    /// Coherence block length `T`.
    #[serde(alias = "T")]
    pub coherence: usize,
    pub area_side: f64,
    pub layouts: usize,
    pub fading: usize,
    pub seed: u64,
    pub kinds: Vec<EstimatorKind>,
    /// Fixed SNR (linear); calibrated from the RU density when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr: Option<f64>,
    /// Hexagonal cell radius for square reuse; sized from `K / N` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_radius: Option<f64>,
    /// Run SRS/R-PCA even when `pp` is not among the kinds.
    pub force_subspaces: bool,
    pub rate_base: RateBase,
    pub output_dir: PathBuf,
    pub pathloss: PathlossParams,
    pub solver: SolverParams,
    pub tuning: LambdaTuning,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rus: 40,
            antennas: 16,
            ues: 100,
            tau_p: 15,
            hopping_order: 19,
            srs_slots: None,
            angular_spread: PI / 8.0,
            max_cluster: 10,
            eta: 1.0,
            lambda: 0.25,
            coherence: 200,
            area_side: 2000.0,
            layouts: 100,
            fading: 100,
            seed: 1,
            kinds: EstimatorKind::ALL.to_vec(),
            snr: None,
            cell_radius: None,
            force_subspaces: false,
            rate_base: RateBase::Log2,
            output_dir: PathBuf::from("results"),
            pathloss: PathlossParams::default(),
            solver: SolverParams::default(),
            tuning: LambdaTuning::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the file ends in `.json`, then validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let cfg: Self = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })?
        } else {
            Self::from_toml(&text).map_err(|e| match e {
                Error::Config(message) => Error::Parse { path: path.to_path_buf(), message },
                other => other,
            })?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn slots(&self) -> usize {
        self.srs_slots.unwrap_or(self.hopping_order)
    }

    pub fn needs_subspaces(&self) -> bool {
        self.force_subspaces || self.kinds.contains(&EstimatorKind::Pp)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("L", self.rus),
            ("M", self.antennas),
            ("K", self.ues),
            ("tau_p", self.tau_p),
            ("Q", self.max_cluster),
            ("T", self.coherence),
            ("layouts", self.layouts),
            ("fading", self.fading),
            ("S", self.slots()),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !is_prime(self.hopping_order) {
            return Err(Error::Config(format!(
                "N must be prime (got {}); the Latin square family needs a prime order, e.g. 5, 19, 29 or 61",
                self.hopping_order
            )));
        }
        if !(self.angular_spread > 0.0 && self.angular_spread <= 2.0 * PI) {
            return Err(Error::Config(format!("angular_spread must lie in (0, 2*pi] (got {})", self.angular_spread)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive (got {})", self.lambda)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config("eta must be positive".into()));
        }
        if !(self.area_side > 0.0 && self.area_side.is_finite()) {
            return Err(Error::Config("area_side must be positive".into()));
        }
        if self.tau_p > self.coherence {
            return Err(Error::Config(format!("tau_p = {} exceeds the coherence block T = {}", self.tau_p, self.coherence)));
        }
        if self.kinds.is_empty() {
            return Err(Error::Config("at least one estimator kind is required".into()));
        }
        if let Some(snr) = self.snr {
            if !(snr > 0.0 && snr.is_finite()) {
                return Err(Error::Config("snr must be positive".into()));
            }
        }
        if let Some(r) = self.cell_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config("cell_radius must be positive".into()));
            }
        }
        self.pathloss.validate()?;
        self.solver.validate()?;
        Ok(())
    }
}
