//! Discrete and relaxed (differentiable) forms of the shipped objective
//! functions, plus the coupled-map-lattice dynamics used for network
//! reconstruction.
//!
//! Each objective comes in three flavors that must agree: a plain reference
//! function, a `Problem` adapter with an analytic gradient for the engine,
//! and a discrete form. Evaluating a relaxed form on one-hot probability
//! vectors equals the discrete form.

pub mod cml;
pub mod mis;
pub mod modularity;
pub mod sk;

pub use cml::{
    cml_step, logistic, random_initial_state, recon_objective, simulate_cml, CmlConfig,
    ReconProblem,
};
pub use mis::{mis_objective, MisConfig, MisProblem};
pub use modularity::{modularity_hard, modularity_soft, ModularityProblem};
pub use sk::{
    mean_field_energy, mean_field_energy_grad, sk_energy, spins_from_probs, SkProblem,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("expected {expected} variables, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("graph has no edges")]
    EdgelessGraph,
    #[error("invalid objective config: {reason}")]
    BadConfig { reason: String },
    #[error("expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
}
