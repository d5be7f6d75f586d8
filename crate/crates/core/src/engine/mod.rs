//! Batched gradient-descent solve loop with differentiable sampling.
//!
//! Every replica owns an independent logits matrix, Adam state, and RNG
//! stream. Each step draws fresh Gumbel noise, evaluates the relaxed
//! objective on the softmax sample, and updates the logits against the
//! analytic gradient. A replica freezes once its running best has not
//! improved for `patience` steps; after the loop each replica is hardened
//! (final stochastic sample and marginal argmax, whichever scores better
//! discretely) and the best replica wins.

mod adam;
mod finite_diff;
mod problem;

pub use adam::{AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON};
pub use finite_diff::{finite_diff_check, finite_diff_check_coords};
pub use problem::{
    chain_through_softmax, chain_through_softmax_inplace, gradient, DifferentiableObjective,
    Problem, RelaxedObjective,
};

use ndarray::{Array2, Ix2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relaxation::{fill_gumbel, gumbel_softmax_into, harden, AnnealSchedule, RelaxError};
use crate::rng::{replica_stream_seed, rng_from_seed, ProjectRng};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid optimizer config: {reason}")]
    BadConfig { reason: String },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("non-finite value in primitive `{primitive}`")]
    NonFinite { primitive: &'static str },
    #[error("objective diverged (non-finite loss) at step {step}")]
    Diverged { step: usize },
    #[error(transparent)]
    Relax(#[from] RelaxError),
}

/// Hyperparameters of one batched solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimConfig {
    /// Number of replicas optimized in parallel.
    pub batch_size: usize,
    /// Step budget; the loop may end earlier once every replica has frozen.
    pub steps: usize,
    pub learning_rate: f64,
    pub schedule: AnnealSchedule,
    pub seed: u64,
    /// A replica freezes after this many steps without improving its best
    /// relaxed value.
    pub patience: usize,
    /// Standard deviation of the Gaussian logit initialization.
    pub init_stddev: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            steps: 2000,
            learning_rate: 0.01,
            schedule: AnnealSchedule::default(),
            seed: 0,
            patience: 500,
            init_stddev: 0.01,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.batch_size == 0 {
            return Err(EngineError::BadConfig {
                reason: "batch_size must be at least 1".into(),
            });
        }
        if self.steps == 0 {
            return Err(EngineError::BadConfig {
                reason: "steps must be at least 1".into(),
            });
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(EngineError::BadConfig {
                reason: format!("learning_rate must be positive, got {}", self.learning_rate),
            });
        }
        if self.patience == 0 {
            return Err(EngineError::BadConfig {
                reason: "patience must be at least 1".into(),
            });
        }
        if !(self.init_stddev >= 0.0 && self.init_stddev.is_finite()) {
            return Err(EngineError::BadConfig {
                reason: "init_stddev must be non-negative".into(),
            });
        }
        self.schedule.validate()?;
        Ok(())
    }

    /// Seeds of the independent per-replica RNG streams.
    pub fn replica_seeds(&self) -> Vec<u64> {
        (0..self.batch_size)
            .map(|b| replica_stream_seed(self.seed, b))
            .collect()
    }
}

/// Outcome of a solve: the best hardened configuration plus bookkeeping.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Category index per variable of the winning replica.
    pub best_config: Vec<usize>,
    /// Discrete objective of `best_config`.
    pub best_value: f64,
    /// Best discrete objective of every replica.
    pub per_replica_values: Vec<f64>,
    /// Running best objective per executed step; non-increasing.
    pub history: Vec<f64>,
    pub wall_time: f64,
    /// Final logits of the winning replica.
    pub best_logits: Array2<f64>,
}

/// Runs the batched solve with replica streams derived from `cfg.seed`.
pub fn gso_solve<P: Problem + ?Sized>(
    problem: &P,
    cfg: &OptimConfig,
) -> Result<SolveResult, EngineError> {
    solve_inner(problem, cfg, &cfg.replica_seeds(), None)
}

/// Like [`gso_solve`] but with explicit per-replica stream seeds; the batch
/// size is the number of seeds. A batched solve is exactly equivalent to
/// independent single-replica solves with the same stream seeds.
pub fn gso_solve_seeded<P: Problem + ?Sized>(
    problem: &P,
    cfg: &OptimConfig,
    replica_seeds: &[u64],
) -> Result<SolveResult, EngineError> {
    solve_inner(problem, cfg, replica_seeds, None)
}

/// Like [`gso_solve`] but starting every replica from the given logits
/// instead of the Gaussian initialization.
pub fn gso_solve_with_init<P: Problem + ?Sized>(
    problem: &P,
    cfg: &OptimConfig,
    init_logits: &Array2<f64>,
) -> Result<SolveResult, EngineError> {
    solve_inner(problem, cfg, &cfg.replica_seeds(), Some(init_logits))
}

fn solve_inner<P: Problem + ?Sized>(
    problem: &P,
    cfg: &OptimConfig,
    replica_seeds: &[u64],
    init_logits: Option<&Array2<f64>>,
) -> Result<SolveResult, EngineError> {
    cfg.validate()?;
    if replica_seeds.is_empty() {
        return Err(EngineError::BadConfig {
            reason: "need at least one replica seed".into(),
        });
    }
    let started = std::time::Instant::now();
    let n = problem.num_vars();
    let k = problem.num_categories();
    if let Some(init) = init_logits {
        if init.dim() != (n, k) {
            return Err(EngineError::ShapeMismatch {
                expected: vec![n, k],
                found: init.shape().to_vec(),
            });
        }
    }
    let bs = replica_seeds.len();

    let mut rngs: Vec<ProjectRng> = replica_seeds.iter().map(|&s| rng_from_seed(s)).collect();
    let mut logits: Vec<Array2<f64>> = rngs
        .iter_mut()
        .map(|rng| match init_logits {
            Some(init) => init.clone(),
            None => {
                Array2::from_shape_fn((n, k), |_| {
                    let z: f64 = rng.sample(StandardNormal);
                    cfg.init_stddev * z
                })
            }
        })
        .collect();
    let mut adam: Vec<AdamState<Ix2>> = (0..bs)
        .map(|_| AdamState::with_hyperparams(Ix2(n, k), cfg.beta1, cfg.beta2, cfg.epsilon))
        .collect();
    let mut noise: Vec<Array2<f64>> = vec![Array2::zeros((n, k)); bs];
    let mut probs: Vec<Array2<f64>> = vec![Array2::zeros((n, k)); bs];
    let mut grads: Vec<Array2<f64>> = vec![Array2::zeros((n, k)); bs];
    let mut values = vec![f64::INFINITY; bs];
    let mut best_relaxed = vec![f64::INFINITY; bs];
    // hardened snapshot of the sample that set each replica's running best
    let mut best_seen: Vec<Vec<usize>> = vec![Vec::new(); bs];
    let mut stall = vec![0usize; bs];
    let mut active = vec![true; bs];
    let mut history = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let tau = cfg.schedule.tau_at(step);

        // sample: fresh noise, softmax of (logits + noise)/tau per replica
        (
            &mut noise[..],
            &mut probs[..],
            &mut rngs[..],
            &logits[..],
            &active[..],
        )
            .into_par_iter()
            .for_each(|(noise, probs, rng, logits, &is_active)| {
                if !is_active {
                    return;
                }
                fill_gumbel(noise.as_slice_mut().expect("contiguous"), rng);
                for ((l_row, g_row), mut p_row) in logits
                    .rows()
                    .into_iter()
                    .zip(noise.rows())
                    .zip(probs.rows_mut())
                {
                    gumbel_softmax_into(
                        l_row.as_slice().expect("contiguous"),
                        g_row.as_slice().expect("contiguous"),
                        tau,
                        p_row.as_slice_mut().expect("contiguous"),
                    );
                }
            });

        // evaluate relaxed objective and its gradient w.r.t. probabilities
        problem.relaxed_batch_value_grad(&probs, &mut grads, &mut values, &active);
        for (b, v) in values.iter().enumerate() {
            if active[b] && !v.is_finite() {
                return Err(EngineError::Diverged { step });
            }
        }

        // backpropagate through the softmax and take an Adam step
        let lr = cfg.learning_rate;
        let patience = cfg.patience;
        // replicas may only freeze once annealing has bottomed out;
        // stalls of the noisy running best at high temperature are not
        // convergence
        let annealing_done = tau <= cfg.schedule.tau_min * (1.0 + 1e-12);
        (
            &mut logits[..],
            &mut adam[..],
            &mut grads[..],
            &probs[..],
            &values[..],
            &mut best_relaxed[..],
            &mut best_seen[..],
            &mut stall[..],
            &mut active[..],
        )
            .into_par_iter()
            .for_each(
                |(logits, adam, grads, probs, &value, best, seen, stall, active)| {
                    if !*active {
                        return;
                    }
                    chain_through_softmax_inplace(&probs.view(), &mut grads.view_mut(), tau);
                    adam.update(logits, &*grads, lr)
                        .expect("shapes fixed over the solve");
                    if value < *best {
                        *best = value;
                        *seen = harden(probs.view());
                        *stall = 0;
                    } else if annealing_done {
                        *stall += 1;
                        if *stall >= patience {
                            *active = false;
                        }
                    }
                },
            );

        let step_best = best_relaxed.iter().cloned().fold(f64::INFINITY, f64::min);
        history.push(step_best);
        if !active.iter().any(|&a| a) {
            break;
        }
    }

    // Harden each replica three ways: its final stochastic sample, the
    // argmax of its marginals, and the snapshot of the sample that set its
    // running best; keep the best discrete value.
    let finals: Vec<(f64, Vec<usize>)> = (&probs[..], &logits[..], &best_seen[..])
        .into_par_iter()
        .map(|(probs, logits, seen)| {
            let mut candidates = vec![harden(probs.view()), harden(logits.view())];
            if !seen.is_empty() {
                candidates.push(seen.clone());
            }
            candidates
                .into_iter()
                .map(|config| (problem.discrete_value(&config), config))
                .min_by(|a, b| a.0.partial_cmp(&b.0).expect("finite objective"))
                .expect("at least one candidate")
        })
        .collect();

    let per_replica_values: Vec<f64> = finals.iter().map(|(v, _)| *v).collect();
    let mut best_idx = 0;
    for (b, &v) in per_replica_values.iter().enumerate() {
        if v < per_replica_values[best_idx] {
            best_idx = b;
        }
    }
    Ok(SolveResult {
        best_config: finals[best_idx].1.clone(),
        best_value: per_replica_values[best_idx],
        per_replica_values,
        history,
        wall_time: started.elapsed().as_secs_f64(),
        best_logits: logits[best_idx].clone(),
    })
}
