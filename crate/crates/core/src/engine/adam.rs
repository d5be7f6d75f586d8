//! Bias-corrected Adam, the update rule used by both the GSO loop and the
//! mean-field gradient-descent baseline.

use ndarray::{Array, Dimension};

use super::EngineError;

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// First/second moment estimates plus the step counter. Shapes follow the
/// parameter tensor they were created for.
#[derive(Debug, Clone)]
pub struct AdamState<D: Dimension> {
    m: Array<f64, D>,
    v: Array<f64, D>,
    step: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl<D: Dimension> AdamState<D> {
    pub fn new(dim: D) -> Self {
        Self::with_hyperparams(dim, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON)
    }

    pub fn with_hyperparams(dim: D, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            m: Array::zeros(dim.clone()),
            v: Array::zeros(dim),
            step: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam step: update the moments from `grads`, bias-correct, and move
    /// `params` against the gradient with learning rate `lr`.
    pub fn update(
        &mut self,
        params: &mut Array<f64, D>,
        grads: &Array<f64, D>,
        lr: f64,
    ) -> Result<(), EngineError> {
        if params.shape() != grads.shape() || params.shape() != self.m.shape() {
            return Err(EngineError::ShapeMismatch {
                expected: params.shape().to_vec(),
                found: grads.shape().to_vec(),
            });
        }
        self.step += 1;
        let b1 = self.beta1;
        let b2 = self.beta2;
        let bias1 = 1.0 - b1.powi(self.step.min(i32::MAX as u64) as i32);
        let bias2 = 1.0 - b2.powi(self.step.min(i32::MAX as u64) as i32);
        let eps = self.epsilon;
        ndarray::Zip::from(params)
            .and(grads)
            .and(&mut self.m)
            .and(&mut self.v)
            .for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, Ix1};

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = arr1(&[0.5, -1.25, 3.0]);
        let before = params.clone();
        let mut state = AdamState::new(Ix1(3));
        state.update(&mut params, &Array::zeros(Ix1(3)), 0.1).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_on_quadratic_moves_by_lr() {
        // f(x) = x^2 at x = 1: bias-corrected first step is lr * sign(grad)
        let mut x = arr1(&[1.0]);
        let mut state = AdamState::new(Ix1(1));
        let grad = arr1(&[2.0 * x[0]]);
        state.update(&mut x, &grad, 0.1).unwrap();
        assert!((x[0] - 0.9).abs() < 1e-7, "x after one step: {}", x[0]);
    }

    #[test]
    fn quadratic_converges_in_1000_steps() {
        let mut x = arr1(&[1.0]);
        let mut state = AdamState::new(Ix1(1));
        for _ in 0..1000 {
            let grad = arr1(&[2.0 * x[0]]);
            state.update(&mut x, &grad, 0.1).unwrap();
        }
        assert!(x[0].abs() < 1e-3, "x after 1000 steps: {}", x[0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut params = arr1(&[1.0, 2.0]);
        let grads = arr1(&[1.0]);
        let mut state = AdamState::new(Ix1(2));
        assert!(matches!(
            state.update(&mut params, &grads, 0.1),
            Err(EngineError::ShapeMismatch { .. })
        ));
    }
}
