//! Mean-field parameterization and the Gumbel-softmax sampling path.
//!
//! Every discrete variable gets a row of `K` unnormalized logits. A relaxed
//! sample perturbs the logits with standard Gumbel noise, divides by the
//! temperature, and takes a softmax; as the temperature anneals toward zero
//! the sample approaches a one-hot draw from `softmax(logits)`.

use ndarray::{Array3, ArrayView2};
use rand::Rng;
use thiserror::Error;

/// Logits tensor of shape `batch x variables x categories`.
pub type MeanFieldParams = Array3<f64>;

#[derive(Debug, Error)]
pub enum RelaxError {
    #[error("temperature must be positive, got {tau}")]
    NonPositiveTau { tau: f64 },
    #[error("logits and noise lengths differ: {logits} vs {noise}")]
    LengthMismatch { logits: usize, noise: usize },
    #[error("non-finite input at index {index}")]
    NonFinite { index: usize },
    #[error("invalid annealing schedule: {reason}")]
    BadSchedule { reason: &'static str },
}

/// Uniform draws clamped this far away from {0, 1} before the double log.
const GUMBEL_CLAMP: f64 = 1e-12;

/// One standard Gumbel(0,1) draw: `-ln(-ln(u))`.
pub fn gumbel_draw(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen::<f64>().clamp(GUMBEL_CLAMP, 1.0 - GUMBEL_CLAMP);
    -(-u.ln()).ln()
}

/// Fills a buffer with standard Gumbel noise.
pub fn fill_gumbel(buf: &mut [f64], rng: &mut impl Rng) {
    for g in buf {
        *g = gumbel_draw(rng);
    }
}

/// Fresh Gumbel noise tensor of the given shape.
pub fn sample_gumbel(shape: (usize, usize, usize), rng: &mut impl Rng) -> Array3<f64> {
    let mut out = Array3::zeros(shape);
    fill_gumbel(out.as_slice_mut().expect("freshly allocated"), rng);
    out
}

/// Softmax of `(logits + noise) / tau` over one variable's `K` categories,
/// max-subtracted so large logits cannot overflow. The output sums to one.
pub fn gumbel_softmax(logits: &[f64], noise: &[f64], tau: f64) -> Result<Vec<f64>, RelaxError> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(RelaxError::NonPositiveTau { tau });
    }
    if logits.len() != noise.len() {
        return Err(RelaxError::LengthMismatch {
            logits: logits.len(),
            noise: noise.len(),
        });
    }
    for (index, &x) in logits.iter().chain(noise.iter()).enumerate() {
        if !x.is_finite() {
            return Err(RelaxError::NonFinite {
                index: index % logits.len(),
            });
        }
    }
    let mut out = vec![0.0; logits.len()];
    gumbel_softmax_into(logits, noise, tau, &mut out);
    Ok(out)
}

/// Unchecked hot-path version of [`gumbel_softmax`]; caller guarantees
/// matching lengths and `tau > 0`.
#[inline]
pub fn gumbel_softmax_into(logits: &[f64], noise: &[f64], tau: f64, out: &mut [f64]) {
    let inv_tau = 1.0 / tau;
    let mut max = f64::NEG_INFINITY;
    for ((&l, &g), z) in logits.iter().zip(noise).zip(out.iter_mut()) {
        *z = (l + g) * inv_tau;
        if *z > max {
            max = *z;
        }
    }
    let mut sum = 0.0;
    for z in out.iter_mut() {
        *z = (*z - max).exp();
        sum += *z;
    }
    let inv_sum = 1.0 / sum;
    for z in out.iter_mut() {
        *z *= inv_sum;
    }
}

/// Argmax per variable, ties broken toward the lowest index.
pub fn harden(probs: ArrayView2<f64>) -> Vec<usize> {
    probs
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_p = row[0];
            for (k, &p) in row.iter().enumerate().skip(1) {
                if p > best_p {
                    best = k;
                    best_p = p;
                }
            }
            best
        })
        .collect()
}

/// A batch of relaxed samples: per-variable probability vectors plus the
/// temperature they were drawn at.
#[derive(Debug, Clone)]
pub struct RelaxedSample {
    pub probs: Array3<f64>,
    pub temperature: f64,
}

impl RelaxedSample {
    /// Draws fresh noise for every entry of `params` and applies
    /// [`gumbel_softmax`] row by row.
    pub fn draw(
        params: &MeanFieldParams,
        tau: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, RelaxError> {
        if tau <= 0.0 || !tau.is_finite() {
            return Err(RelaxError::NonPositiveTau { tau });
        }
        let k = params.shape()[2];
        let mut probs = Array3::zeros(params.raw_dim());
        let mut noise = vec![0.0; k];
        for (mut out_row, in_row) in probs
            .rows_mut()
            .into_iter()
            .zip(params.rows())
        {
            fill_gumbel(&mut noise, rng);
            let logits = in_row.as_slice().expect("contiguous logits row");
            gumbel_softmax_into(
                logits,
                &noise,
                tau,
                out_row.as_slice_mut().expect("contiguous probs row"),
            );
        }
        Ok(Self {
            probs,
            temperature: tau,
        })
    }

    /// Argmax configuration per replica.
    pub fn harden(&self) -> Vec<Vec<usize>> {
        self.probs
            .outer_iter()
            .map(|replica| harden(replica))
            .collect()
    }
}

/// Geometric temperature decay with a floor:
/// `tau(step) = max(tau_min, tau0 * rate^step)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AnnealSchedule {
    pub tau0: f64,
    pub rate: f64,
    pub tau_min: f64,
}

impl AnnealSchedule {
    pub fn new(tau0: f64, rate: f64, tau_min: f64) -> Result<Self, RelaxError> {
        let s = Self {
            tau0,
            rate,
            tau_min,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), RelaxError> {
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(RelaxError::BadSchedule {
                reason: "tau0 must be positive and finite",
            });
        }
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(RelaxError::BadSchedule {
                reason: "rate must lie in (0, 1]",
            });
        }
        if !(self.tau_min > 0.0 && self.tau_min <= self.tau0) {
            return Err(RelaxError::BadSchedule {
                reason: "tau_min must lie in (0, tau0]",
            });
        }
        Ok(())
    }

    pub fn tau_at(&self, step: usize) -> f64 {
        let decayed = self.tau0 * self.rate.powi(step.min(i32::MAX as usize) as i32);
        decayed.max(self.tau_min)
    }
}

impl Default for AnnealSchedule {
    /// `tau0 = 1.0`, `rate = 0.999`, `tau_min = 0.1`.
    fn default() -> Self {
        Self {
            tau0: 1.0,
            rate: 0.999,
            tau_min: 0.1,
        }
    }
}
