//! Gumbel-softmax optimization (GSO) for combinatorial problems on graphs.
//!
//! The solver places an independent categorical distribution on every
//! discrete variable, draws differentiable samples through the
//! Gumbel-softmax relaxation, and minimizes the relaxed objective with
//! batched Adam. A batch of replicas is optimized in parallel and the best
//! hardened configuration wins. Shipped objectives: Sherrington-Kirkpatrick
//! ground states, maximum independent set, modularity, and network
//! reconstruction from coupled-map-lattice time series. Simulated annealing
//! and a deterministic mean-field gradient descent are included as
//! baselines.

pub mod baselines;
pub mod engine;
pub mod graph;
pub mod objectives;
pub mod relaxation;
pub mod rng;

pub use engine::{gso_solve, OptimConfig, SolveResult};
pub use graph::{Graph, Partition, SkInstance, TimeSeries};
pub use relaxation::AnnealSchedule;
