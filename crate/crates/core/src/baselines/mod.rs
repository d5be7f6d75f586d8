//! Baselines: simulated annealing with incremental move deltas, and
//! deterministic mean-field gradient descent on the SK expected energy.

mod gd;
mod sa;

pub use gd::mean_field_gd;
pub use sa::{
    simulated_annealing, MisSaProblem, ModularitySaProblem, ReconSaProblem, SaConfig, SaProblem,
    SaState, SkSaProblem,
};
