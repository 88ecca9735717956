//! Schelling segregation dynamics with spontaneous flips and accelerated
//! nearest-neighbor exchanges, together with the deterministic equations that
//! describe its large-scale behavior.
//!
//! * [`lattice`]: torus geometry, neighborhoods, configurations, site classes.
//! * [`dynamics`]: exact event-driven simulation of the particle system.
//! * [`reaction`]: thresholds, Poisson-binomial reaction terms, phase diagram.
//! * [`discrete_pde`]: the lattice reaction-diffusion system.
//! * [`limit_pde`]: heat semigroups and mild solutions on the continuum torus.
//! * [`hydro`]: empirical measures and convergence experiments.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discrete_pde;
pub mod dynamics;
pub mod hydro;
pub mod lattice;
pub mod limit_pde;
pub mod reaction;
pub mod rng;
pub mod spectral;

pub use lattice::{
    Configuration, LatticeError, NeighborTable, Neighborhood, SiteClass, Threshold, TorusGeometry,
};
pub use reaction::{Phase, PhaseReport, ReactionError, ReactionOrder, ReactionSpec};

pub use discrete_pde::DiscretePdeError;
pub use dynamics::DynamicsError;
pub use hydro::HydroError;
pub use limit_pde::LimitPdeError;

/// Any error raised by this crate.
#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Reaction(#[from] ReactionError),
    #[error(transparent)]
    DiscretePde(#[from] DiscretePdeError),
    #[error(transparent)]
    LimitPde(#[from] LimitPdeError),
    #[error(transparent)]
    Hydro(#[from] HydroError),
}
