//! Cell-free massive MIMO uplink with R-PCA subspace estimation from hopped SRS.
//!
//! The pipeline: a torus [`geometry`] layout with user-centric clusters, a
//! one-ring [`channel_model`], MOLS-based SRS [`pilot_hopping`], outlier
//! pursuit in [`subspace_rpca`], DFT-pilot [`dmrs_estimation`] and the
//! [`uplink_receiver`] that turns estimates into SINRs and ergodic rates.
//! [`sim`] ties them into a reproducible experiment.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel_model;
pub mod dmrs_estimation;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod pilot_hopping;
pub mod rng;
pub mod sim;
pub mod subspace_rpca;
pub mod uplink_receiver;

pub use error::{Error, Result};
