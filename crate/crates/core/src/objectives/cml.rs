//! Coupled map lattice dynamics and the structure-reconstruction objective.
//!
//! Dynamics on a graph: `x'(i) = (1-s) f(x(i)) + (s/deg(i)) * sum_{j in N(i)}
//! f(x(j))` with the logistic map `f(x) = lambda x (1 - x)`. Reconstruction
//! treats the upper-triangular adjacency entries as binary variables and
//! minimizes the squared one-step prediction error against an observed
//! series.

use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2};
use rand::Rng;

use super::ObjectiveError;
use crate::engine::Problem;
use crate::graph::{Graph, TimeSeries};

/// Degree floor that keeps the relaxed coupling term defined when a row of
/// the soft adjacency sums to (near) zero.
const DEGREE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CmlConfig {
    /// Coupling constant `s` in `[0, 1]`.
    pub coupling: f64,
    /// Logistic parameter `lambda` in `(0, 4]`; up to 4 the map stays in
    /// `[0, 1]`.
    pub lambda: f64,
}

impl CmlConfig {
    pub fn new(coupling: f64, lambda: f64) -> Result<Self, ObjectiveError> {
        if !(0.0..=1.0).contains(&coupling) {
            return Err(ObjectiveError::BadConfig {
                reason: format!("coupling must lie in [0, 1], got {coupling}"),
            });
        }
        if !(lambda > 0.0 && lambda <= 4.0) {
            return Err(ObjectiveError::BadConfig {
                reason: format!("lambda must lie in (0, 4], got {lambda}"),
            });
        }
        Ok(Self { coupling, lambda })
    }
}

/// The logistic map `f(x) = lambda x (1 - x)`.
pub fn logistic(lambda: f64, x: f64) -> f64 {
    lambda * x * (1.0 - x)
}

/// One dynamics step on an adjacency matrix, which may be relaxed (entries
/// in `[0, 1]`) or exact 0/1. Row sums act as degrees, floored at `1e-8`;
/// an isolated vertex keeps only its own-map term.
pub fn cml_step(adj: &ArrayView2<f64>, x: &[f64], cfg: &CmlConfig) -> Vec<f64> {
    let n = x.len();
    debug_assert_eq!(adj.nrows(), n);
    let y: Vec<f64> = x.iter().map(|&v| logistic(cfg.lambda, v)).collect();
    let s = cfg.coupling;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let row = adj.row(i);
        let mut mass = 0.0;
        let mut weighted = 0.0;
        for (a, &yj) in row.iter().zip(&y) {
            mass += a;
            weighted += a * yj;
        }
        let degree = mass.max(DEGREE_FLOOR);
        out[i] = (1.0 - s) * y[i] + s * weighted / degree;
    }
    out
}

/// Simulates the exact dynamics on a graph from `x0`, discarding `transient`
/// steps and recording the next `t_len` states (the first recorded row is
/// the state right after the transient).
pub fn simulate_cml(
    g: &Graph,
    cfg: &CmlConfig,
    x0: &[f64],
    t_len: usize,
    transient: usize,
) -> Result<TimeSeries, ObjectiveError> {
    if x0.len() != g.n_vertices() {
        return Err(ObjectiveError::LengthMismatch {
            expected: g.n_vertices(),
            found: x0.len(),
        });
    }
    let n = x0.len();
    let s = cfg.coupling;
    let mut state = x0.to_vec();
    let mut y = vec![0.0; n];
    let mut states = Array2::zeros((t_len, n));
    let mut recorded = 0usize;
    let total = transient + t_len;
    for step in 0..total {
        if step >= transient {
            states.row_mut(recorded).assign(&Array1::from_vec(state.clone()));
            recorded += 1;
            if recorded == t_len {
                break;
            }
        }
        for (yi, &xi) in y.iter_mut().zip(&state) {
            *yi = logistic(cfg.lambda, xi);
        }
        let mut next = vec![0.0; n];
        for i in 0..n {
            let deg = g.degree(i);
            let coupling_term = if deg > 0 {
                let sum: f64 = g.neighbors(i).iter().map(|&j| y[j as usize]).sum();
                s * sum / deg as f64
            } else {
                0.0
            };
            next[i] = (1.0 - s) * y[i] + coupling_term;
        }
        state = next;
    }
    TimeSeries::new(states).map_err(|_| ObjectiveError::BadConfig {
        reason: "series too short; need t_len >= 2".into(),
    })
}

/// Uniform random initial state in `[0, 1]`.
pub fn random_initial_state(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

/// Squared one-step prediction error of a (relaxed) adjacency against the
/// observed series: `sum_{t>=1} || x_t - step(x_{t-1}, A) ||^2`.
pub fn recon_objective(
    soft_adj: &ArrayView2<f64>,
    series: &TimeSeries,
    cfg: &CmlConfig,
) -> Result<f64, ObjectiveError> {
    let n = series.n_nodes();
    if soft_adj.dim() != (n, n) {
        return Err(ObjectiveError::ShapeMismatch {
            expected: (n, n),
            found: soft_adj.dim(),
        });
    }
    let states = series.states();
    let mut total = 0.0;
    for t in 1..series.len_t() {
        let prev = states.row(t - 1);
        let pred = cml_step(soft_adj, prev.as_slice().expect("contiguous row"), cfg);
        for (i, &p) in pred.iter().enumerate() {
            let r = states[(t, i)] - p;
            total += r * r;
        }
    }
    Ok(total)
}

/// Network reconstruction as an engine problem. Variables are the
/// `n(n-1)/2` upper-triangular adjacency entries (`K = 2`, category 1 means
/// "edge present"); the matrix is mirrored and the diagonal stays zero.
pub struct ReconProblem {
    series: TimeSeries,
    cfg: CmlConfig,
    n: usize,
    pairs: Vec<(usize, usize)>,
    /// `f(x_t)` for every step that feeds a prediction, precomputed.
    mapped: Array2<f64>,
    /// Observed rows `x_t` for `t >= 1`.
    targets: Array2<f64>,
}

impl ReconProblem {
    pub fn new(series: TimeSeries, cfg: CmlConfig) -> Self {
        let n = series.n_nodes();
        let t_pred = series.len_t() - 1;
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        let mut mapped = Array2::zeros((t_pred, n));
        let mut targets = Array2::zeros((t_pred, n));
        for t in 0..t_pred {
            for i in 0..n {
                mapped[(t, i)] = logistic(cfg.lambda, series.states()[(t, i)]);
                targets[(t, i)] = series.states()[(t + 1, i)];
            }
        }
        Self {
            series,
            cfg,
            n,
            pairs,
            mapped,
            targets,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn series(&self) -> &TimeSeries {
        &self.series
    }

    pub fn config(&self) -> &CmlConfig {
        &self.cfg
    }

    pub fn pair_of_var(&self, var: usize) -> (usize, usize) {
        self.pairs[var]
    }

    /// `f(x_t)` rows feeding each prediction step.
    pub(crate) fn mapped_matrix(&self) -> &Array2<f64> {
        &self.mapped
    }

    pub(crate) fn mapped_at(&self, t: usize, i: usize) -> f64 {
        self.mapped[(t, i)]
    }

    /// `(f(x_t)[i], x_{t+1}[i])` for prediction step `t`.
    pub(crate) fn step_data(&self, t: usize, i: usize) -> (f64, f64) {
        (self.mapped[(t, i)], self.targets[(t, i)])
    }

    /// Symmetric zero-diagonal matrix from per-variable edge probabilities.
    pub fn soft_adjacency(&self, probs: &ArrayView2<f64>) -> Array2<f64> {
        let mut w = Array2::zeros((self.n, self.n));
        for (var, &(i, j)) in self.pairs.iter().enumerate() {
            let p = probs[(var, 1)];
            w[(i, j)] = p;
            w[(j, i)] = p;
        }
        w
    }

    /// Hard adjacency from a configuration of category indices.
    pub fn adjacency_from_config(&self, config: &[usize]) -> Array2<f64> {
        let mut w = Array2::zeros((self.n, self.n));
        for (var, &(i, j)) in self.pairs.iter().enumerate() {
            if config[var] == 1 {
                w[(i, j)] = 1.0;
                w[(j, i)] = 1.0;
            }
        }
        w
    }

    /// Forward pass shared by value and gradient evaluation. Returns
    /// `(value, residuals, coupled_mass, degrees)` where `coupled_mass[t] =
    /// W f(x_t)` rows and `degrees[i]` is the floored row sum of `W`.
    fn forward(&self, w: &Array2<f64>) -> (f64, Array2<f64>, Array2<f64>, Vec<f64>) {
        let s = self.cfg.coupling;
        let degrees: Vec<f64> = w
            .rows()
            .into_iter()
            .map(|row| row.sum().max(DEGREE_FLOOR))
            .collect();
        // u(t) = W f(x_t) for all prediction steps in one product
        let coupled = self.mapped.dot(w); // (t_pred, n); W symmetric
        let mut residuals = Array2::zeros(coupled.raw_dim());
        let mut value = 0.0;
        for t in 0..coupled.nrows() {
            for i in 0..self.n {
                let pred =
                    (1.0 - s) * self.mapped[(t, i)] + s * coupled[(t, i)] / degrees[i];
                let r = pred - self.targets[(t, i)];
                residuals[(t, i)] = r;
                value += r * r;
            }
        }
        (value, residuals, coupled, degrees)
    }
}

impl Problem for ReconProblem {
    fn num_vars(&self) -> usize {
        self.pairs.len()
    }

    fn num_categories(&self) -> usize {
        2
    }

    fn relaxed_value(&self, probs: &ArrayView2<f64>) -> f64 {
        let w = self.soft_adjacency(probs);
        self.forward(&w).0
    }

    fn relaxed_value_grad(&self, probs: &ArrayView2<f64>, grad: &mut ArrayViewMut2<f64>) -> f64 {
        let w = self.soft_adjacency(probs);
        let (value, residuals, coupled, degrees) = self.forward(&w);
        let s = self.cfg.coupling;

        // dE/dW[i][v] = sum_t a[t][i] * f(x_t)[v] + rowconst[i], where
        // a[t][i] = 2 s r[t][i] / deg_i and the row constant collects the
        // derivative of the degree normalization (zero when the row sits on
        // the floor).
        let t_pred = residuals.nrows();
        let mut coeff = Array2::zeros((t_pred, self.n));
        let mut row_const = vec![0.0; self.n];
        for i in 0..self.n {
            let d = degrees[i];
            let on_floor = w.row(i).sum() < DEGREE_FLOOR;
            for t in 0..t_pred {
                let a = 2.0 * s * residuals[(t, i)] / d;
                coeff[(t, i)] = a;
                if !on_floor {
                    row_const[i] -= a * coupled[(t, i)] / d;
                }
            }
        }
        let grad_w = coeff.t().dot(&self.mapped); // (n, n)
        for (var, &(i, j)) in self.pairs.iter().enumerate() {
            let g = grad_w[(i, j)] + row_const[i] + grad_w[(j, i)] + row_const[j];
            grad[(var, 0)] = 0.0;
            grad[(var, 1)] = g;
        }
        value
    }

    fn discrete_value(&self, config: &[usize]) -> f64 {
        let w = self.adjacency_from_config(config);
        recon_objective(&w.view(), &self.series, &self.cfg)
            .expect("shapes fixed by construction")
    }
}
