//! Numerical ground states of aggregation–diffusion free energies on
//! rotationally symmetric Cartan–Hadamard manifolds.

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod curvature;
pub mod densities;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod interp;
pub(crate) mod ode;
pub mod output;
pub mod quadrature;
pub mod verdict;
pub mod warp;

pub use analysis::{
    check_existence, check_nonexistence, check_relaxed_existence, find_ground_state, spreading_experiment,
    GroundStateOptions, GroundStateReport, SpreadRow,
};
pub use curvature::{check_c32, CurvatureProfile, Tabulated};
pub use densities::RadialDensity;
pub use energy::{EnergyBreakdown, EnergyEvaluator, InteractionPotential, PotentialKind};
pub use error::{Error, Result};
pub use geometry::{BallVolume, DistanceField, DistanceMethod, GridSpec, ModelManifold, PairTable};
pub use verdict::{CriterionVerdict, Verdict};
pub use warp::WarpSolution;

/// Library version recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
