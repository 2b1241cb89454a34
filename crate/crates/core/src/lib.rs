//! Pole placement and eigenstructure assignment for linear systems directly
//! from input/state data.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases. File formats in [`io`] are `f64`.

pub mod baselines;
pub mod bench;
mod error;
pub mod io;
pub mod numerics;
pub mod plant;
pub mod signals;
pub mod synthesis;

pub use baselines::{
    ackermann_gain, identify_least_squares, kautsky_gain, model_based_place, projector_gain,
    sylvester_gain, IdentifiedModel,
};
pub use error::{Error, Result};
pub use numerics::{Real, Tolerance};
pub use plant::{simulate, InputKind, LtiSystem, SimulationConfig};
pub use signals::{extract_data_matrices, is_persistently_exciting, DataMatrices, Trajectory};
pub use synthesis::{
    assign_eigenstructure, feasibility_report, place_poles, place_poles_with, pole_error,
    GainResult, PlaceOptions, PoleError, PoleSpec,
};

pub type Trajectory64 = Trajectory<f64>;
pub type Trajectory32 = Trajectory<f32>;
pub type DataMatrices64 = DataMatrices<f64>;
pub type DataMatrices32 = DataMatrices<f32>;
pub type LtiSystem64 = LtiSystem<f64>;
pub type LtiSystem32 = LtiSystem<f32>;
pub type PoleSpec64 = PoleSpec<f64>;
pub type PoleSpec32 = PoleSpec<f32>;
pub type GainResult64 = GainResult<f64>;
pub type GainResult32 = GainResult<f32>;
pub type IdentifiedModel64 = IdentifiedModel<f64>;
pub type IdentifiedModel32 = IdentifiedModel<f32>;
