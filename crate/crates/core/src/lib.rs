#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Fluid-antenna near-field integrated sensing, computing and semantic
//! communication (NF-ISCSC).
//!
//! The crate covers channel synthesis for near-field spherical wavefronts,
//! the sensing/communication/computing metrics, and the alternating
//! optimisation of beamformers, antenna positions and semantic extraction
//! ratios.
//!
//! Units: powers in mW, frequencies in Hz, lengths in m, rates in bit/s/Hz.

pub mod ao;
pub mod beamforming;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod positioning;
pub mod ratio;
pub mod scenario;
pub mod semantics;
pub mod sensing;
pub mod solver;

pub use ao::{convergence_check, run_ao, AoEpoch, AoOptions, AoOutcome, AoTrace, FaMethod};
pub use beamforming::{BeamformingSolution, LinearizedTerms};
pub use channel::ChannelSet;
pub use error::{Error, InfeasibilityReport, Result};
pub use experiments::{emit_csv, run_experiment, ExperimentId, ExperimentSpec, ResultRow};
pub use linalg::{CMat, CVec, C64};
pub use positioning::{LineSearchParams, PositionState};
pub use ratio::RatioSolution;
pub use scenario::{
    build_arrays, dbm_to_linear, generate_placements, load_config, rayleigh_distance, Entity,
    Placement, RxArray, Scenario, SystemConfig, Target, TxArray,
};
pub use semantics::{MetricsReport, SemanticState};
pub use sensing::SensingReport;
