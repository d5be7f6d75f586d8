//! Sherrington-Kirkpatrick ground-state energy, per spin.

use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2};

use super::ObjectiveError;
use crate::engine::Problem;
use crate::graph::SkInstance;

/// Energy per spin `-(1/N) * sum_{i<j} J_ij s_i s_j`. Spins may be relaxed
/// values in `[-1, 1]` or hard `+-1`.
pub fn sk_energy(inst: &SkInstance, spins: &[f64]) -> Result<f64, ObjectiveError> {
    let n = inst.n();
    if spins.len() != n {
        return Err(ObjectiveError::LengthMismatch {
            expected: n,
            found: spins.len(),
        });
    }
    let mut e = 0.0;
    for i in 0..n {
        let si = spins[i];
        for j in (i + 1)..n {
            e -= inst.coupling(i, j) * si * spins[j];
        }
    }
    Ok(e / n as f64)
}

/// Expected energy under the product distribution with magnetizations `m`:
/// `-sum_{i<j} J_ij m_i m_j` (total, not per spin).
pub fn mean_field_energy(inst: &SkInstance, m: &[f64]) -> Result<f64, ObjectiveError> {
    let n = inst.n();
    if m.len() != n {
        return Err(ObjectiveError::LengthMismatch {
            expected: n,
            found: m.len(),
        });
    }
    let mut e = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            e -= inst.coupling(i, j) * m[i] * m[j];
        }
    }
    Ok(e)
}

/// Value of [`mean_field_energy`] plus its gradient
/// `dE/dm_i = -sum_{j != i} J_ij m_j`.
pub fn mean_field_energy_grad(
    inst: &SkInstance,
    m: &ArrayView2<f64>,
    grad: &mut ArrayViewMut2<f64>,
) -> f64 {
    // rows of `m` are replicas; J m^T computed as m . J (J symmetric)
    let field = m.dot(inst.couplings());
    let mut value = 0.0;
    ndarray::Zip::from(grad)
        .and(&field)
        .for_each(|g, &f| *g = -f);
    for (m_row, f_row) in m.rows().into_iter().zip(field.rows()) {
        value += -0.5 * m_row.dot(&f_row);
    }
    value
}

/// Spin decode of a `n x 2` probability matrix: `s_i = p(i,+) - p(i,-)`
/// (category 0 is spin -1, category 1 is spin +1).
pub fn spins_from_probs(probs: &ArrayView2<f64>) -> Array1<f64> {
    let mut s = Array1::zeros(probs.nrows());
    for (out, row) in s.iter_mut().zip(probs.rows()) {
        *out = row[1] - row[0];
    }
    s
}

/// SK ground-state search as an engine problem (`K = 2`).
pub struct SkProblem {
    inst: SkInstance,
}

impl SkProblem {
    pub fn new(inst: SkInstance) -> Self {
        Self { inst }
    }

    pub fn instance(&self) -> &SkInstance {
        &self.inst
    }

    /// Multiply-add count of one batched relaxed evaluation, dominated by
    /// the dense `batch x n x n` product.
    pub fn flops_per_step(&self, batch_size: usize) -> usize {
        2 * batch_size * self.inst.n() * self.inst.n()
    }

    fn value_from_field(&self, spins: &Array1<f64>, field: &Array1<f64>) -> f64 {
        -0.5 * spins.dot(field) / self.inst.n() as f64
    }
}

impl Problem for SkProblem {
    fn num_vars(&self) -> usize {
        self.inst.n()
    }

    fn num_categories(&self) -> usize {
        2
    }

    fn relaxed_value(&self, probs: &ArrayView2<f64>) -> f64 {
        let s = spins_from_probs(probs);
        let field = self.inst.couplings().dot(&s);
        self.value_from_field(&s, &field)
    }

    fn relaxed_value_grad(&self, probs: &ArrayView2<f64>, grad: &mut ArrayViewMut2<f64>) -> f64 {
        let s = spins_from_probs(probs);
        let field = self.inst.couplings().dot(&s);
        let inv_n = 1.0 / self.inst.n() as f64;
        for (mut g_row, &f) in grad.rows_mut().into_iter().zip(field.iter()) {
            // dE/ds = -field/n, ds/dp+ = 1, ds/dp- = -1
            g_row[0] = f * inv_n;
            g_row[1] = -f * inv_n;
        }
        self.value_from_field(&s, &field)
    }

    fn discrete_value(&self, config: &[usize]) -> f64 {
        let spins: Vec<f64> = config.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect();
        sk_energy(&self.inst, &spins).expect("config length matches instance")
    }

    fn relaxed_batch_value_grad(
        &self,
        probs: &[Array2<f64>],
        grads: &mut [Array2<f64>],
        values: &mut [f64],
        active: &[bool],
    ) {
        let n = self.inst.n();
        let rows: Vec<usize> = (0..probs.len()).filter(|&b| active[b]).collect();
        if rows.is_empty() {
            return;
        }
        // gather active replicas into one spin matrix and use a single
        // matrix product for all local fields
        let mut spins = Array2::zeros((rows.len(), n));
        for (r, &b) in rows.iter().enumerate() {
            for (out, p_row) in spins.row_mut(r).iter_mut().zip(probs[b].rows()) {
                *out = p_row[1] - p_row[0];
            }
        }
        let fields = spins.dot(self.inst.couplings());
        let inv_n = 1.0 / n as f64;
        for (r, &b) in rows.iter().enumerate() {
            let s_row = spins.row(r);
            let f_row = fields.row(r);
            values[b] = -0.5 * s_row.dot(&f_row) * inv_n;
            for (mut g_row, &f) in grads[b].rows_mut().into_iter().zip(f_row.iter()) {
                g_row[0] = f * inv_n;
                g_row[1] = -f * inv_n;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SkInstance;
    use crate::rng::rng_from_seed;
    use ndarray::Array2;
    use rand::Rng;

    /// Test-side oracle: exhaustive enumeration of all 2^n configurations
    /// with an independently coded energy sum.
    pub(crate) fn brute_force_ground_state(inst: &SkInstance) -> (f64, Vec<f64>) {
        let n = inst.n();
        assert!(n <= 20);
        let mut best = f64::INFINITY;
        let mut best_spins = vec![0.0; n];
        for mask in 0u32..(1 << n) {
            let spins: Vec<f64> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            let mut e = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    e -= inst.coupling(i, j) * spins[i] * spins[j];
                }
            }
            let e = e / n as f64;
            if e < best {
                best = e;
                best_spins = spins;
            }
        }
        (best, best_spins)
    }

    #[test]
    fn two_spin_hand_value() {
        // J_01 = 1, aligned spins: E = -1, per spin -0.5
        let mut inst = SkInstance::generate(2, 0).unwrap();
        let n = inst.n();
        // overwrite couplings deterministically through a rebuilt instance
        let mut c = inst.couplings().clone();
        c[(0, 1)] = 1.0;
        c[(1, 0)] = 1.0;
        inst = SkInstance::from_couplings(c).unwrap();
        assert_eq!(n, 2);
        assert_eq!(sk_energy(&inst, &[1.0, 1.0]).unwrap(), -0.5);
        assert_eq!(sk_energy(&inst, &[1.0, -1.0]).unwrap(), 0.5);
    }

    #[test]
    fn zero_spins_give_zero_energy() {
        let inst = SkInstance::generate(16, 4).unwrap();
        assert_eq!(sk_energy(&inst, &vec![0.0; 16]).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        let inst = SkInstance::generate(8, 1).unwrap();
        assert!(matches!(
            sk_energy(&inst, &[1.0; 5]),
            Err(ObjectiveError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn ground_state_energy_matches_enumeration() {
        let inst = SkInstance::generate(10, 7).unwrap();
        let (best, spins) = brute_force_ground_state(&inst);
        let via_fn = sk_energy(&inst, &spins).unwrap();
        assert!((via_fn - best).abs() < 1e-12);
        // the problem's discrete form agrees on the same configuration
        let config: Vec<usize> = spins.iter().map(|&s| usize::from(s > 0.0)).collect();
        let p = SkProblem::new(inst);
        assert!((p.discrete_value(&config) - best).abs() < 1e-12);
    }

    #[test]
    fn relaxed_equals_discrete_on_one_hot() {
        let inst = SkInstance::generate(12, 9).unwrap();
        let p = SkProblem::new(inst);
        let mut rng = rng_from_seed(5);
        let config: Vec<usize> = (0..12).map(|_| rng.gen_range(0..2)).collect();
        let mut probs = Array2::zeros((12, 2));
        for (i, &c) in config.iter().enumerate() {
            probs[(i, c)] = 1.0;
        }
        let relaxed = p.relaxed_value(&probs.view());
        let discrete = p.discrete_value(&config);
        assert!((relaxed - discrete).abs() < 1e-12);
    }

    #[test]
    fn batched_evaluation_matches_single() {
        let inst = SkInstance::generate(24, 3).unwrap();
        let p = SkProblem::new(inst);
        let mut rng = rng_from_seed(8);
        let bs = 5;
        let probs: Vec<Array2<f64>> = (0..bs)
            .map(|_| Array2::from_shape_fn((24, 2), |_| rng.gen::<f64>()))
            .collect();
        let mut grads_batch = vec![Array2::zeros((24, 2)); bs];
        let mut values_batch = vec![0.0; bs];
        let active = vec![true; bs];
        p.relaxed_batch_value_grad(&probs, &mut grads_batch, &mut values_batch, &active);
        for b in 0..bs {
            let mut g = Array2::zeros((24, 2));
            let v = p.relaxed_value_grad(&probs[b].view(), &mut g.view_mut());
            assert!((v - values_batch[b]).abs() < 1e-12);
            for (x, y) in g.iter().zip(grads_batch[b].iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_field_consistency() {
        let inst = SkInstance::generate(10, 2).unwrap();
        let n = inst.n();
        assert_eq!(mean_field_energy(&inst, &vec![0.0; n]).unwrap(), 0.0);
        let mut rng = rng_from_seed(3);
        let spins: Vec<f64> = (0..n)
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let total = mean_field_energy(&inst, &spins).unwrap();
        let per_spin = sk_energy(&inst, &spins).unwrap();
        assert!((total - per_spin * n as f64).abs() < 1e-12);
    }

    #[test]
    fn mean_field_gradient_matches_finite_differences() {
        let inst = SkInstance::generate(8, 6).unwrap();
        let mut rng = rng_from_seed(9);
        let m = Array2::from_shape_fn((1, 8), |_| rng.gen::<f64>() * 1.6 - 0.8);
        let mut grad = Array2::zeros((1, 8));
        let value = mean_field_energy_grad(&inst, &m.view(), &mut grad.view_mut());
        let direct = mean_field_energy(&inst, m.row(0).as_slice().unwrap()).unwrap();
        assert!((value - direct).abs() < 1e-12);
        let h = 1e-6;
        for i in 0..8 {
            let mut mp = m.clone();
            mp[(0, i)] += h;
            let fp = mean_field_energy(&inst, mp.row(0).as_slice().unwrap()).unwrap();
            mp[(0, i)] -= 2.0 * h;
            let fm = mean_field_energy(&inst, mp.row(0).as_slice().unwrap()).unwrap();
            let numeric = (fp - fm) / (2.0 * h);
            assert!(
                (grad[(0, i)] - numeric).abs() < 1e-6,
                "coord {i}: analytic {} numeric {numeric}",
                grad[(0, i)]
            );
        }
    }
}
