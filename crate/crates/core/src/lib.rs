//! Mean-field model of financial fragility in a population of firms.
//!
//! Firms are either robust or fragile. The number of fragile firms follows a
//! birth-death jump process whose rates come out of a firm-level calibration.
//! The crate provides the calibration ([`model`]), exact simulation
//! ([`jump`]), the master equation ([`master`]), drift and Gaussian
//! approximations ([`asymptotics`]), maximum-entropy equilibrium quantities
//! ([`equilibrium`]) and a file-driven scenario pipeline ([`scenario`]).

// `!(x > 0.0)` is used throughout so that NaN is rejected along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod equilibrium;
pub mod error;
pub mod jump;
pub mod master;
pub mod model;
pub mod numfmt;
pub mod scenario;

pub use asymptotics::{MacroPath, SteadyState};
pub use equilibrium::{EquilibriumReport, Flag};
pub use error::{Error, Result};
pub use jump::{BirthDeath, EnsembleStats, JumpModel, Trajectory};
pub use master::{MasterPath, ProbabilityVector};
pub use model::{calibrate, CalibratedRates, ModelParams, ShockSupport};
pub use numfmt::format_sig;
pub use scenario::{
    parse_config, parse_config_str, render_scenario, run_scenario, ScenarioConfig, ScenarioError,
};
