//! Modularity of a partition, in hard and relaxed form.
//!
//! `Q = (1/2M) * sum_ij [A_ij - k_i k_j / 2M] delta(s_i, s_j)`, the sum
//! running over all ordered vertex pairs including `i = j`. The relaxed form
//! replaces `delta(s_i, s_j)` by the inner product of the endpoint
//! probability vectors. The engine minimizes `-Q`.

use ndarray::{ArrayView2, ArrayViewMut2};

use super::ObjectiveError;
use crate::engine::Problem;
use crate::graph::{Graph, Partition};

/// Modularity of a hard partition via community degree sums.
pub fn modularity_hard(g: &Graph, partition: &Partition) -> Result<f64, ObjectiveError> {
    if g.n_edges() == 0 {
        return Err(ObjectiveError::EdgelessGraph);
    }
    if partition.labels().len() != g.n_vertices() {
        return Err(ObjectiveError::LengthMismatch {
            expected: g.n_vertices(),
            found: partition.labels().len(),
        });
    }
    let two_m = 2.0 * g.n_edges() as f64;
    let labels = partition.labels();
    let mut intra = 0usize;
    for &(u, v) in g.edges() {
        if labels[u as usize] == labels[v as usize] {
            intra += 1;
        }
    }
    let mut degree_mass = vec![0.0; partition.k()];
    for (v, &label) in labels.iter().enumerate() {
        degree_mass[label] += g.degree(v) as f64;
    }
    let degree_term: f64 = degree_mass.iter().map(|&d| (d / two_m).powi(2)).sum();
    Ok(2.0 * intra as f64 / two_m - degree_term)
}

/// Relaxed modularity of per-vertex probability vectors (`n x K`).
pub fn modularity_soft(g: &Graph, probs: &ArrayView2<f64>) -> Result<f64, ObjectiveError> {
    if g.n_edges() == 0 {
        return Err(ObjectiveError::EdgelessGraph);
    }
    if probs.nrows() != g.n_vertices() {
        return Err(ObjectiveError::LengthMismatch {
            expected: g.n_vertices(),
            found: probs.nrows(),
        });
    }
    let two_m = 2.0 * g.n_edges() as f64;
    let k = probs.ncols();
    let mut edge_term = 0.0;
    for &(u, v) in g.edges() {
        let pu = probs.row(u as usize);
        let pv = probs.row(v as usize);
        edge_term += pu.dot(&pv);
    }
    let mut degree_mass = vec![0.0; k];
    for (v, row) in probs.rows().into_iter().enumerate() {
        let deg = g.degree(v) as f64;
        for (w, &p) in degree_mass.iter_mut().zip(row.iter()) {
            *w += deg * p;
        }
    }
    let degree_term: f64 = degree_mass.iter().map(|&w| (w / two_m).powi(2)).sum();
    Ok(2.0 * edge_term / two_m - degree_term)
}

/// Modularity maximization as an engine problem; `K` communities, objective
/// is `-Q`.
pub struct ModularityProblem {
    graph: Graph,
    k: usize,
}

impl ModularityProblem {
    pub fn new(graph: Graph, k: usize) -> Result<Self, ObjectiveError> {
        if graph.n_edges() == 0 {
            return Err(ObjectiveError::EdgelessGraph);
        }
        if k < 2 {
            return Err(ObjectiveError::BadConfig {
                reason: format!("need at least 2 communities, got {k}"),
            });
        }
        Ok(Self { graph, k })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn communities(&self) -> usize {
        self.k
    }
}

impl Problem for ModularityProblem {
    fn num_vars(&self) -> usize {
        self.graph.n_vertices()
    }

    fn num_categories(&self) -> usize {
        self.k
    }

    fn relaxed_value(&self, probs: &ArrayView2<f64>) -> f64 {
        -modularity_soft(&self.graph, probs).expect("shape fixed by construction")
    }

    fn relaxed_value_grad(&self, probs: &ArrayView2<f64>, grad: &mut ArrayViewMut2<f64>) -> f64 {
        let g = &self.graph;
        let two_m = 2.0 * g.n_edges() as f64;
        let k = self.k;

        let mut edge_term = 0.0;
        grad.fill(0.0);
        // d(edge part)/dp_ik = (2/2M) * sum_{j in N(i)} p_jk
        for &(u, v) in g.edges() {
            let (u, v) = (u as usize, v as usize);
            for c in 0..k {
                let pu = probs[(u, c)];
                let pv = probs[(v, c)];
                edge_term += pu * pv;
                grad[(u, c)] += pv;
                grad[(v, c)] += pu;
            }
        }
        let mut degree_mass = vec![0.0; k];
        for (v, row) in probs.rows().into_iter().enumerate() {
            let deg = g.degree(v) as f64;
            for (w, &p) in degree_mass.iter_mut().zip(row.iter()) {
                *w += deg * p;
            }
        }
        let degree_term: f64 = degree_mass.iter().map(|&w| (w / two_m).powi(2)).sum();
        let q = 2.0 * edge_term / two_m - degree_term;

        // combine into -dQ/dp
        for (v, mut row) in grad.rows_mut().into_iter().enumerate() {
            let deg = g.degree(v) as f64;
            for (c, entry) in row.iter_mut().enumerate() {
                let dq = 2.0 * *entry / two_m - 2.0 * degree_mass[c] * deg / (two_m * two_m);
                *entry = -dq;
            }
        }
        -q
    }

    fn discrete_value(&self, config: &[usize]) -> f64 {
        let partition =
            Partition::new(self.k, config.to_vec()).expect("categories bounded by K");
        -modularity_hard(&self.graph, &partition).expect("shape fixed by construction")
    }
}
