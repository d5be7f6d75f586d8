//! Maximum independent set as a penalized minimization:
//! `E(x) = -sum_i x_i + alpha * sum_{(i,j) in E} x_i x_j`.
//!
//! With `alpha > 1`, removing an endpoint of any violated edge strictly
//! decreases `E`, so every global minimizer is an independent set and the
//! minimum equals minus the maximum independent set size.

use ndarray::{ArrayView2, ArrayViewMut2};

use super::ObjectiveError;
use crate::engine::Problem;
use crate::graph::Graph;

/// Penalty weight for selecting both endpoints of an edge.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MisConfig {
    pub alpha: f64,
}

impl MisConfig {
    pub fn new(alpha: f64) -> Result<Self, ObjectiveError> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(ObjectiveError::BadConfig {
                reason: format!("alpha must exceed 1 for a sound penalty, got {alpha}"),
            });
        }
        Ok(Self { alpha })
    }
}

impl Default for MisConfig {
    fn default() -> Self {
        Self { alpha: 2.0 }
    }
}

/// The penalized objective on memberships `x` in `[0, 1]`; lower is better.
/// On a discrete independent set this is minus the set size.
pub fn mis_objective(g: &Graph, x: &[f64], cfg: &MisConfig) -> Result<f64, ObjectiveError> {
    if x.len() != g.n_vertices() {
        return Err(ObjectiveError::LengthMismatch {
            expected: g.n_vertices(),
            found: x.len(),
        });
    }
    let chosen: f64 = x.iter().sum();
    let mut conflict = 0.0;
    for &(u, v) in g.edges() {
        conflict += x[u as usize] * x[v as usize];
    }
    Ok(-chosen + cfg.alpha * conflict)
}

/// MIS search as an engine problem (`K = 2`; category 1 means "in the set").
pub struct MisProblem {
    graph: Graph,
    cfg: MisConfig,
}

impl MisProblem {
    pub fn new(graph: Graph, cfg: MisConfig) -> Self {
        Self { graph, cfg }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn config(&self) -> &MisConfig {
        &self.cfg
    }
}

impl Problem for MisProblem {
    fn num_vars(&self) -> usize {
        self.graph.n_vertices()
    }

    fn num_categories(&self) -> usize {
        2
    }

    fn relaxed_value(&self, probs: &ArrayView2<f64>) -> f64 {
        let x: Vec<f64> = probs.rows().into_iter().map(|r| r[1]).collect();
        mis_objective(&self.graph, &x, &self.cfg).expect("length fixed by construction")
    }

    fn relaxed_value_grad(&self, probs: &ArrayView2<f64>, grad: &mut ArrayViewMut2<f64>) -> f64 {
        let n = self.graph.n_vertices();
        let x: Vec<f64> = probs.rows().into_iter().map(|r| r[1]).collect();
        let mut neighbor_mass = vec![0.0; n];
        let mut conflict = 0.0;
        for &(u, v) in self.graph.edges() {
            let (u, v) = (u as usize, v as usize);
            conflict += x[u] * x[v];
            neighbor_mass[u] += x[v];
            neighbor_mass[v] += x[u];
        }
        let alpha = self.cfg.alpha;
        for (i, mut g_row) in grad.rows_mut().into_iter().enumerate() {
            g_row[0] = 0.0;
            g_row[1] = -1.0 + alpha * neighbor_mass[i];
        }
        -x.iter().sum::<f64>() + alpha * conflict
    }

    fn discrete_value(&self, config: &[usize]) -> f64 {
        let mut size = 0usize;
        for &c in config {
            size += usize::from(c == 1);
        }
        let mut violated = 0usize;
        for &(u, v) in self.graph.edges() {
            if config[u as usize] == 1 && config[v as usize] == 1 {
                violated += 1;
            }
        }
        -(size as f64) + self.cfg.alpha * violated as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_random_regular, Graph};
    use ndarray::Array2;

    fn triangle() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    /// Test-side oracle: largest independent set by scanning all subsets.
    pub(crate) fn brute_force_mis(g: &Graph) -> usize {
        let n = g.n_vertices();
        assert!(n <= 20);
        let masks: Vec<u32> = (0..n)
            .map(|v| {
                g.neighbors(v)
                    .iter()
                    .fold(0u32, |acc, &u| acc | 1 << u)
            })
            .collect();
        let mut best = 0;
        for set in 0u32..(1 << n) {
            let mut ok = true;
            for v in 0..n {
                if set >> v & 1 == 1 && set & masks[v] != 0 {
                    ok = false;
                    break;
                }
            }
            if ok {
                best = best.max(set.count_ones() as usize);
            }
        }
        best
    }

    #[test]
    fn triangle_hand_values() {
        let g = triangle();
        let cfg = MisConfig::new(2.0).unwrap();
        assert_eq!(mis_objective(&g, &[1.0, 0.0, 0.0], &cfg).unwrap(), -1.0);
        assert_eq!(mis_objective(&g, &[1.0, 1.0, 0.0], &cfg).unwrap(), 0.0);
    }

    #[test]
    fn alpha_must_exceed_one() {
        assert!(MisConfig::new(1.0).is_err());
        assert!(MisConfig::new(0.5).is_err());
        assert!(MisConfig::new(1.5).is_ok());
    }

    #[test]
    fn length_mismatch_rejected() {
        let g = triangle();
        assert!(matches!(
            mis_objective(&g, &[1.0, 0.0], &MisConfig::default()),
            Err(ObjectiveError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn penalized_minimum_is_negated_mis_size() {
        // 10-vertex random graph: the minimum of the penalized objective over
        // all subsets equals minus the maximum independent set size
        let g = gen_random_regular(10, 3, 42).unwrap();
        let cfg = MisConfig::new(2.0).unwrap();
        let mut min_obj = f64::INFINITY;
        for set in 0u32..(1 << 10) {
            let x: Vec<f64> = (0..10).map(|v| f64::from(set >> v & 1)).collect();
            min_obj = min_obj.min(mis_objective(&g, &x, &cfg).unwrap());
        }
        let mis = brute_force_mis(&g);
        assert_eq!(min_obj, -(mis as f64));
    }

    #[test]
    fn penalty_soundness_on_all_small_graphs() {
        // for every graph with up to 6 vertices, every global minimizer of
        // the penalized objective is an independent set
        let cfg = MisConfig::new(2.0).unwrap();
        for n in 1..=6usize {
            let pair_count = n * (n - 1) / 2;
            let pairs: Vec<(u32, u32)> = (0..n as u32)
                .flat_map(|i| ((i + 1)..n as u32).map(move |j| (i, j)))
                .collect();
            for edge_mask in 0u32..(1 << pair_count) {
                let edges: Vec<(u32, u32)> = pairs
                    .iter()
                    .enumerate()
                    .filter(|(idx, _)| edge_mask >> idx & 1 == 1)
                    .map(|(_, &e)| e)
                    .collect();
                let g = Graph::from_edges(n, edges).unwrap();
                let mut min_obj = f64::INFINITY;
                let mut minimizers: Vec<u32> = Vec::new();
                for set in 0u32..(1 << n) {
                    let x: Vec<f64> = (0..n).map(|v| f64::from(set >> v as u32 & 1)).collect();
                    let obj = mis_objective(&g, &x, &cfg).unwrap();
                    if obj < min_obj - 1e-12 {
                        min_obj = obj;
                        minimizers.clear();
                        minimizers.push(set);
                    } else if (obj - min_obj).abs() <= 1e-12 {
                        minimizers.push(set);
                    }
                }
                for set in minimizers {
                    let independent = g
                        .edges()
                        .iter()
                        .all(|&(u, v)| !(set >> u & 1 == 1 && set >> v & 1 == 1));
                    assert!(independent, "n={n} mask={edge_mask} set={set:b}");
                }
            }
        }
    }

    #[test]
    fn relaxed_equals_discrete_on_one_hot() {
        let g = gen_random_regular(8, 3, 5).unwrap();
        let p = MisProblem::new(g, MisConfig::default());
        let config = vec![1, 0, 0, 1, 1, 0, 1, 0];
        let mut probs = Array2::zeros((8, 2));
        for (i, &c) in config.iter().enumerate() {
            probs[(i, c)] = 1.0;
        }
        assert!((p.relaxed_value(&probs.view()) - p.discrete_value(&config)).abs() < 1e-12);
    }
}
