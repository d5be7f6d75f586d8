//! Contracts between the solve loop and the objectives it optimizes.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use rayon::prelude::*;

use super::EngineError;
use crate::relaxation::gumbel_softmax_into;

/// An optimization problem in relaxed (differentiable) and discrete form.
///
/// `probs` arguments are `num_vars x num_categories` matrices whose rows are
/// the per-variable probability vectors of one replica. `relaxed_value_grad`
/// must overwrite every entry of `grad` with the derivative of the relaxed
/// objective with respect to the corresponding probability.
pub trait Problem: Sync {
    fn num_vars(&self) -> usize;

    fn num_categories(&self) -> usize;

    fn relaxed_value(&self, probs: &ArrayView2<f64>) -> f64;

    fn relaxed_value_grad(&self, probs: &ArrayView2<f64>, grad: &mut ArrayViewMut2<f64>) -> f64;

    /// Discrete objective on a hardened configuration of category indices.
    fn discrete_value(&self, config: &[usize]) -> f64;

    /// Evaluates a batch of replicas, skipping inactive ones. The default
    /// loops in parallel; problems with a cheaper batched form (dense matrix
    /// products) may override it.
    fn relaxed_batch_value_grad(
        &self,
        probs: &[Array2<f64>],
        grads: &mut [Array2<f64>],
        values: &mut [f64],
        active: &[bool],
    ) {
        (probs, grads, values, active)
            .into_par_iter()
            .for_each(|(p, g, v, &a)| {
                if a {
                    *v = self.relaxed_value_grad(&p.view(), &mut g.view_mut());
                }
            });
    }
}

/// A scalar objective that is a differentiable function of a logits matrix.
///
/// This is the surface the gradient contract is checked against: analytic
/// gradients from `value_grad` must match central finite differences of
/// `value`.
pub trait DifferentiableObjective {
    /// `(num_vars, num_categories)` of the expected logits matrix.
    fn dims(&self) -> (usize, usize);

    fn value(&self, logits: ArrayView2<f64>) -> Result<f64, EngineError>;

    /// Writes the gradient and returns the value.
    fn value_grad(
        &self,
        logits: ArrayView2<f64>,
        grad: ArrayViewMut2<f64>,
    ) -> Result<f64, EngineError>;
}

/// Gradient of a differentiable objective with respect to the logits.
pub fn gradient<O: DifferentiableObjective + ?Sized>(
    objective: &O,
    logits: ArrayView2<f64>,
) -> Result<(f64, Array2<f64>), EngineError> {
    let mut grad = Array2::zeros(logits.raw_dim());
    let value = objective.value_grad(logits, grad.view_mut())?;
    Ok((value, grad))
}

/// A relaxed problem objective seen as a function of the logits, with the
/// Gumbel noise frozen: `logits -> softmax((logits + noise)/tau) -> E`.
pub struct RelaxedObjective<'a, P: Problem + ?Sized> {
    problem: &'a P,
    noise: Array2<f64>,
    tau: f64,
}

impl<'a, P: Problem + ?Sized> RelaxedObjective<'a, P> {
    pub fn new(problem: &'a P, noise: Array2<f64>, tau: f64) -> Result<Self, EngineError> {
        if tau <= 0.0 || !tau.is_finite() {
            return Err(EngineError::BadConfig {
                reason: format!("temperature must be positive, got {tau}"),
            });
        }
        let expected = (problem.num_vars(), problem.num_categories());
        if noise.dim() != expected {
            return Err(EngineError::ShapeMismatch {
                expected: vec![expected.0, expected.1],
                found: noise.shape().to_vec(),
            });
        }
        Ok(Self {
            problem,
            noise,
            tau,
        })
    }

    fn forward(&self, logits: ArrayView2<f64>) -> Result<Array2<f64>, EngineError> {
        if logits.dim() != self.noise.dim() {
            return Err(EngineError::ShapeMismatch {
                expected: vec![self.noise.dim().0, self.noise.dim().1],
                found: logits.shape().to_vec(),
            });
        }
        let mut probs = Array2::zeros(logits.raw_dim());
        for ((mut p_row, l_row), g_row) in probs
            .rows_mut()
            .into_iter()
            .zip(logits.rows())
            .zip(self.noise.rows())
        {
            let l = l_row.to_vec();
            let g = g_row.as_slice().expect("contiguous noise row");
            gumbel_softmax_into(
                &l,
                g,
                self.tau,
                p_row.as_slice_mut().expect("contiguous probs row"),
            );
        }
        if probs.iter().any(|x| !x.is_finite()) {
            return Err(EngineError::NonFinite {
                primitive: "gumbel_softmax",
            });
        }
        Ok(probs)
    }
}

impl<P: Problem + ?Sized> DifferentiableObjective for RelaxedObjective<'_, P> {
    fn dims(&self) -> (usize, usize) {
        (self.problem.num_vars(), self.problem.num_categories())
    }

    fn value(&self, logits: ArrayView2<f64>) -> Result<f64, EngineError> {
        let probs = self.forward(logits)?;
        let value = self.problem.relaxed_value(&probs.view());
        if !value.is_finite() {
            return Err(EngineError::NonFinite {
                primitive: "objective",
            });
        }
        Ok(value)
    }

    fn value_grad(
        &self,
        logits: ArrayView2<f64>,
        mut grad: ArrayViewMut2<f64>,
    ) -> Result<f64, EngineError> {
        let probs = self.forward(logits)?;
        let mut grad_probs = Array2::zeros(probs.raw_dim());
        let value = self
            .problem
            .relaxed_value_grad(&probs.view(), &mut grad_probs.view_mut());
        if !value.is_finite() || grad_probs.iter().any(|x| !x.is_finite()) {
            return Err(EngineError::NonFinite {
                primitive: "objective_gradient",
            });
        }
        chain_through_softmax(&probs.view(), &grad_probs.view(), self.tau, &mut grad);
        if grad.iter().any(|x| !x.is_finite()) {
            return Err(EngineError::NonFinite {
                primitive: "softmax_chain",
            });
        }
        Ok(value)
    }
}

/// Pulls a gradient with respect to probabilities back through the softmax:
/// `dE/dlogit_k = (p_k / tau) * (dE/dp_k - sum_l p_l dE/dp_l)` per variable.
pub fn chain_through_softmax(
    probs: &ArrayView2<f64>,
    grad_probs: &ArrayView2<f64>,
    tau: f64,
    grad_logits: &mut ArrayViewMut2<f64>,
) {
    let inv_tau = 1.0 / tau;
    for ((p_row, gp_row), mut out_row) in probs
        .rows()
        .into_iter()
        .zip(grad_probs.rows())
        .zip(grad_logits.rows_mut())
    {
        let dot: f64 = p_row.iter().zip(gp_row.iter()).map(|(&p, &g)| p * g).sum();
        for ((&p, &g), out) in p_row.iter().zip(gp_row.iter()).zip(out_row.iter_mut()) {
            *out = p * (g - dot) * inv_tau;
        }
    }
}

/// [`chain_through_softmax`] overwriting the probability gradient in place.
pub fn chain_through_softmax_inplace(
    probs: &ArrayView2<f64>,
    grad: &mut ArrayViewMut2<f64>,
    tau: f64,
) {
    let inv_tau = 1.0 / tau;
    for (p_row, mut g_row) in probs.rows().into_iter().zip(grad.rows_mut()) {
        let dot: f64 = p_row.iter().zip(g_row.iter()).map(|(&p, &g)| p * g).sum();
        for (&p, g) in p_row.iter().zip(g_row.iter_mut()) {
            *g = p * (*g - dot) * inv_tau;
        }
    }
}
