//! Graph and instance representations, random generators, and file I/O.
//!
//! All types here are immutable after construction and safe to share
//! read-only across parallel replicas.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::rng::rng_from_seed;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected two integer vertex ids, found {found:?}")]
    Parse {
        path: String,
        line: usize,
        found: String,
    },
    #[error("{path}:{line}: self-loop on vertex {vertex}")]
    SelfLoop {
        path: String,
        line: usize,
        vertex: u32,
    },
    #[error("{path}: edge list contains no edges")]
    EmptyEdgeList { path: String },
    #[error("self-loop on vertex {vertex}")]
    SelfLoopEdge { vertex: u32 },
    #[error("vertex {vertex} out of range for graph on {n} vertices")]
    VertexOutOfRange { vertex: u32, n: usize },
    #[error("cannot build a {degree}-regular graph on {n} vertices: n*d is odd")]
    OddDegreeSum { n: usize, degree: usize },
    #[error("cannot build a {degree}-regular graph on {n} vertices: need degree < n")]
    DegreeTooLarge { n: usize, degree: usize },
    #[error("no simple {degree}-regular graph found within {attempts} pairing attempts")]
    RetryBudgetExhausted { degree: usize, attempts: usize },
    #[error("instance needs at least 2 spins, got {n}")]
    TooFewSpins { n: usize },
    #[error("invalid coupling matrix: {reason}")]
    BadCouplings { reason: &'static str },
    #[error("{path}: row {row}: expected {expected} columns, found {found}")]
    SeriesArity {
        path: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}: row {row}: non-numeric cell {token:?}")]
    SeriesNumeric {
        path: String,
        row: usize,
        token: String,
    },
    #[error("time series needs at least 2 rows, got {rows}")]
    SeriesTooShort { rows: usize },
    #[error("time series contains a non-finite value at (t={t}, node={node})")]
    SeriesNonFinite { t: usize, node: usize },
    #[error("partition label {label} out of range for {k} communities")]
    LabelOutOfRange { label: usize, k: usize },
}

/// Undirected simple graph. Edges are stored once as `(u, v)` with `u < v`;
/// adjacency lists and degrees are derived at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(u32, u32)>,
    neighbors: Vec<Vec<u32>>,
    degrees: Vec<u32>,
}

impl Graph {
    /// Builds a graph on `n` vertices from an edge iterator. Reversed and
    /// duplicate edges collapse to one; self-loops are rejected.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self, GraphError> {
        let mut norm: Vec<(u32, u32)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoopEdge { vertex: a });
            }
            for v in [a, b] {
                if v as usize >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: v, n });
                }
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();

        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in &norm {
            neighbors[u as usize].push(v);
            neighbors[v as usize].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let degrees = neighbors.iter().map(|l| l.len() as u32).collect();
        Ok(Self {
            n,
            edges: norm,
            neighbors,
            degrees,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degrees[v] as usize
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].binary_search(&(v as u32)).is_ok()
    }

    /// Dense symmetric 0/1 adjacency matrix with zero diagonal. Intended for
    /// small graphs; large instances should stay on the edge list.
    pub fn adjacency_matrix(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for &(u, v) in &self.edges {
            a[(u as usize, v as usize)] = 1.0;
            a[(v as usize, u as usize)] = 1.0;
        }
        a
    }

    /// Reads a whitespace-separated edge list. `#` starts a comment, ids are
    /// 0-based, reversed/duplicate edges collapse. With `one_based`, every id
    /// is shifted down by one. The vertex count is `max id + 1`.
    pub fn load_edge_list_with(path: impl AsRef<Path>, one_based: bool) -> Result<Self, GraphError> {
        let path = path.as_ref();
        let pstr = path.display().to_string();
        let file = fs::File::open(path).map_err(|source| GraphError::Io {
            path: pstr.clone(),
            source,
        })?;
        let mut edges: Vec<(u32, u32)> = Vec::new();
        let mut max_id = 0u32;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|source| GraphError::Io {
                path: pstr.clone(),
                source,
            })?;
            let body = line.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = body.split_whitespace().collect();
            if tokens.is_empty() {
                continue;
            }
            let parse_err = || GraphError::Parse {
                path: pstr.clone(),
                line: line_no,
                found: body.trim().to_string(),
            };
            if tokens.len() != 2 {
                return Err(parse_err());
            }
            let mut ids = [0u32; 2];
            for (slot, tok) in ids.iter_mut().zip(&tokens) {
                let raw: i64 = tok.parse().map_err(|_| parse_err())?;
                let shifted = raw - i64::from(one_based);
                if !(0..=i64::from(u32::MAX)).contains(&shifted) {
                    return Err(parse_err());
                }
                *slot = shifted as u32;
            }
            let [u, v] = ids;
            if u == v {
                return Err(GraphError::SelfLoop {
                    path: pstr.clone(),
                    line: line_no,
                    vertex: u,
                });
            }
            max_id = max_id.max(u).max(v);
            edges.push((u, v));
        }
        if edges.is_empty() {
            return Err(GraphError::EmptyEdgeList { path: pstr });
        }
        Self::from_edges(max_id as usize + 1, edges)
    }

    pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        Self::load_edge_list_with(path, false)
    }

    /// Writes the edge list in the same format `load_edge_list` reads.
    pub fn save_edge_list(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        let mut out = format!("# vertices: {}, edges: {}\n", self.n, self.edges.len());
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        fs::write(path.as_ref(), out).map_err(|source| GraphError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }
}

/// Random `d`-regular simple graph via the pairing (configuration) model:
/// shuffle `n*d` stubs, pair them up, and reject any pairing that produces a
/// self-loop or duplicate edge, up to 1000 attempts.
pub fn gen_random_regular(n: usize, d: usize, seed: u64) -> Result<Graph, GraphError> {
    if d >= n {
        return Err(GraphError::DegreeTooLarge { n, degree: d });
    }
    if (n * d) % 2 != 0 {
        return Err(GraphError::OddDegreeSum { n, degree: d });
    }
    let mut rng = rng_from_seed(seed);
    let mut stubs: Vec<u32> = (0..n as u32).flat_map(|v| std::iter::repeat(v).take(d)).collect();
    const ATTEMPTS: usize = 1000;
    'attempt: for _ in 0..ATTEMPTS {
        stubs.shuffle(&mut rng);
        let mut seen = std::collections::HashSet::with_capacity(n * d / 2);
        let mut edges = Vec::with_capacity(n * d / 2);
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u == v || !seen.insert((u, v)) {
                continue 'attempt;
            }
            edges.push((u, v));
        }
        return Graph::from_edges(n, edges);
    }
    Err(GraphError::RetryBudgetExhausted {
        degree: d,
        attempts: ATTEMPTS,
    })
}

/// Sherrington-Kirkpatrick instance: a symmetric Gaussian coupling matrix
/// with zero diagonal and off-diagonal variance `1/n`.
#[derive(Debug, Clone)]
pub struct SkInstance {
    couplings: Array2<f64>,
}

impl SkInstance {
    /// Draws couplings `J[i][j] ~ N(0, 1/n)` for `i < j` and mirrors them.
    /// Deterministic for a fixed seed.
    pub fn generate(n: usize, seed: u64) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewSpins { n });
        }
        let mut rng = rng_from_seed(seed);
        let scale = (1.0 / n as f64).sqrt();
        let mut couplings = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                let z: f64 = rng.sample(StandardNormal);
                let j_ij = scale * z;
                couplings[(i, j)] = j_ij;
                couplings[(j, i)] = j_ij;
            }
        }
        Ok(Self { couplings })
    }

    /// Wraps an explicit coupling matrix; must be square, symmetric, with a
    /// zero diagonal and at least 2 spins.
    pub fn from_couplings(couplings: Array2<f64>) -> Result<Self, GraphError> {
        let n = couplings.nrows();
        if n < 2 {
            return Err(GraphError::TooFewSpins { n });
        }
        if couplings.ncols() != n {
            return Err(GraphError::BadCouplings {
                reason: "matrix must be square",
            });
        }
        for i in 0..n {
            if couplings[(i, i)] != 0.0 {
                return Err(GraphError::BadCouplings {
                    reason: "diagonal must be zero",
                });
            }
            for j in (i + 1)..n {
                if couplings[(i, j)] != couplings[(j, i)] {
                    return Err(GraphError::BadCouplings {
                        reason: "matrix must be symmetric",
                    });
                }
            }
        }
        Ok(Self { couplings })
    }

    pub fn n(&self) -> usize {
        self.couplings.nrows()
    }

    pub fn couplings(&self) -> &Array2<f64> {
        &self.couplings
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[(i, j)]
    }
}

/// Observed node states over time: row `t` holds the state of every node at
/// step `t`. At least two rows, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    states: Array2<f64>,
}

impl TimeSeries {
    pub fn new(states: Array2<f64>) -> Result<Self, GraphError> {
        if states.nrows() < 2 {
            return Err(GraphError::SeriesTooShort {
                rows: states.nrows(),
            });
        }
        for ((t, node), &x) in states.indexed_iter() {
            if !x.is_finite() {
                return Err(GraphError::SeriesNonFinite { t, node });
            }
        }
        Ok(Self { states })
    }

    /// Number of observed steps.
    pub fn len_t(&self) -> usize {
        self.states.nrows()
    }

    pub fn n_nodes(&self) -> usize {
        self.states.ncols()
    }

    pub fn states(&self) -> &Array2<f64> {
        &self.states
    }

    /// Writes CSV with a `t,x_0,...,x_{n-1}` header and one row per step,
    /// 17 significant digits so a reload is bit-exact.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        let n = self.n_nodes();
        let mut out = String::from("t");
        for i in 0..n {
            let _ = write!(out, ",x_{i}");
        }
        out.push('\n');
        for (t, row) in self.states.rows().into_iter().enumerate() {
            let _ = write!(out, "{t}");
            for x in row {
                let _ = write!(out, ",{x:.16e}");
            }
            out.push('\n');
        }
        fs::write(path.as_ref(), out).map_err(|source| GraphError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    /// Reads the CSV format written by [`TimeSeries::save`]. Row indices in
    /// errors are 1-based data rows (the header is not counted).
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let path = path.as_ref();
        let pstr = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
            path: pstr.clone(),
            source,
        })?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let n_cols = header.split(',').count();
        if n_cols < 2 {
            return Err(GraphError::SeriesArity {
                path: pstr.clone(),
                row: 0,
                expected: 2,
                found: n_cols,
            });
        }
        let n = n_cols - 1;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row_no = idx + 1;
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != n_cols {
                return Err(GraphError::SeriesArity {
                    path: pstr.clone(),
                    row: row_no,
                    expected: n_cols,
                    found: cells.len(),
                });
            }
            let mut row = Vec::with_capacity(n);
            for cell in &cells[1..] {
                let x: f64 = cell.trim().parse().map_err(|_| GraphError::SeriesNumeric {
                    path: pstr.clone(),
                    row: row_no,
                    token: cell.to_string(),
                })?;
                row.push(x);
            }
            rows.push(row);
        }
        let t_len = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let states = Array2::from_shape_vec((t_len, n), flat).expect("row arity already checked");
        Self::new(states)
    }
}

/// Assignment of every vertex to one of `k` communities, labels in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    k: usize,
    labels: Vec<usize>,
}

impl Partition {
    pub fn new(k: usize, labels: Vec<usize>) -> Result<Self, GraphError> {
        if let Some(&label) = labels.iter().find(|&&l| l >= k) {
            return Err(GraphError::LabelOutOfRange { label, k });
        }
        Ok(Self { k, labels })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of labels that actually occur.
    pub fn non_empty_communities(&self) -> usize {
        let mut used = vec![false; self.k];
        for &l in &self.labels {
            used[l] = true;
        }
        used.iter().filter(|&&u| u).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmp_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_two_edge_path() {
        let f = tmp_file("0 1\n1 2\n");
        let g = Graph::load_edge_list(f.path()).unwrap();
        assert_eq!(g.n_vertices(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn reversed_duplicate_collapses() {
        let f = tmp_file("1 2\n2 1\n");
        let g = Graph::load_edge_list(f.path()).unwrap();
        assert_eq!(g.n_edges(), 1);
        assert_eq!(g.edges(), &[(1, 2)]);
    }

    #[test]
    fn zachary_has_78_edges() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/zachary.edges");
        let g = Graph::load_edge_list(path).unwrap();
        assert_eq!(g.n_vertices(), 34);
        assert_eq!(g.n_edges(), 78);
        assert_eq!(g.degrees().iter().sum::<u32>(), 156);
    }

    #[test]
    fn parse_error_reports_line() {
        let f = tmp_file("0 1\nnot numbers\n");
        match Graph::load_edge_list(f.path()) {
            Err(GraphError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn three_tokens_is_parse_error() {
        let f = tmp_file("0 1 7\n");
        assert!(matches!(
            Graph::load_edge_list(f.path()),
            Err(GraphError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn self_loop_rejected() {
        let f = tmp_file("0 1\n3 3\n");
        match Graph::load_edge_list(f.path()) {
            Err(GraphError::SelfLoop { line, vertex, .. }) => {
                assert_eq!((line, vertex), (2, 3));
            }
            other => panic!("expected self-loop error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_rejected() {
        let f = tmp_file("# only a comment\n");
        assert!(matches!(
            Graph::load_edge_list(f.path()),
            Err(GraphError::EmptyEdgeList { .. })
        ));
    }

    #[test]
    fn one_based_shift() {
        let f = tmp_file("1 2\n2 3\n");
        let g = Graph::load_edge_list_with(f.path(), true).unwrap();
        assert_eq!(g.n_vertices(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn graph_round_trip() {
        let g = gen_random_regular(16, 3, 9).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        g.save_edge_list(f.path()).unwrap();
        let g2 = Graph::load_edge_list(f.path()).unwrap();
        assert_eq!(g.edges(), g2.edges());
        assert_eq!(g.n_vertices(), g2.n_vertices());
    }

    #[test]
    fn adjacency_symmetric_zero_trace() {
        for seed in 0..5 {
            let g = gen_random_regular(12, 3, seed).unwrap();
            let a = g.adjacency_matrix();
            assert_eq!(a, a.t().to_owned());
            assert_eq!(a.diag().sum(), 0.0);
            let row_sums: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
            for (v, &s) in row_sums.iter().enumerate() {
                assert_eq!(s as usize, g.degree(v));
            }
        }
    }

    #[test]
    fn regular_degrees_exact() {
        let g = gen_random_regular(10, 4, 1).unwrap();
        assert!(g.degrees().iter().all(|&d| d == 4));
        // 100 seeds at (n=20, d=4): degree sequence constant 4
        for seed in 0..100 {
            let g = gen_random_regular(20, 4, seed).unwrap();
            assert!(g.degrees().iter().all(|&d| d == 4), "seed {seed}");
        }
    }

    #[test]
    fn regular_parity_error() {
        assert!(matches!(
            gen_random_regular(5, 3, 0),
            Err(GraphError::OddDegreeSum { .. })
        ));
        assert!(matches!(
            gen_random_regular(4, 4, 0),
            Err(GraphError::DegreeTooLarge { .. })
        ));
    }

    #[test]
    fn regular_30_4_degrees_only() {
        let g = gen_random_regular(30, 4, 2).unwrap();
        assert!(g.degrees().iter().all(|&d| d == 4));
    }

    #[test]
    fn sk_symmetric_and_deterministic() {
        let a = SkInstance::generate(2, 5).unwrap();
        assert_eq!(a.coupling(0, 1), a.coupling(1, 0));
        assert_eq!(a.coupling(0, 0), 0.0);
        let b = SkInstance::generate(64, 7).unwrap();
        let c = SkInstance::generate(64, 7).unwrap();
        assert_eq!(b.couplings(), c.couplings());
        assert!(matches!(
            SkInstance::generate(1, 0),
            Err(GraphError::TooFewSpins { n: 1 })
        ));
    }

    #[test]
    fn sk_mean_near_zero() {
        let inst = SkInstance::generate(1024, 7).unwrap();
        let n = inst.n();
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                sum += inst.coupling(i, j);
                count += 1;
            }
        }
        let mean = sum / count as f64;
        // standard error of the mean of `count` draws with variance 1/n
        let se = (1.0 / n as f64).sqrt() / (count as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} vs 3*se {}", 3.0 * se);
    }

    #[test]
    fn sk_variance_within_band() {
        let inst = SkInstance::generate(4096, 3).unwrap();
        let n = inst.n();
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                let x = inst.coupling(i, j);
                sum += x;
                sq += x * x;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let var = sq / count as f64 - mean * mean;
        let lo = 0.8 / n as f64;
        let hi = 1.2 / n as f64;
        assert!(var > lo && var < hi, "variance {var} outside [{lo}, {hi}]");
    }

    #[test]
    fn series_round_trip_bitwise() {
        let states =
            Array2::from_shape_vec((3, 4), (0..12).map(|i| (i as f64) / 7.0 + 0.001).collect())
                .unwrap();
        let ts = TimeSeries::new(states).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        ts.save(f.path()).unwrap();
        let ts2 = TimeSeries::load(f.path()).unwrap();
        assert_eq!(ts.states(), ts2.states());
    }

    #[test]
    fn series_bad_arity_reports_row() {
        let f = tmp_file("t,x_0,x_1\n0,0.1,0.2\n1,0.3\n");
        match TimeSeries::load(f.path()) {
            Err(GraphError::SeriesArity { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected arity error, got {other:?}"),
        }
    }

    #[test]
    fn series_non_numeric_reports_row() {
        let f = tmp_file("t,x_0\n0,0.5\n1,banana\n");
        match TimeSeries::load(f.path()) {
            Err(GraphError::SeriesNumeric { row, token, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(token, "banana");
            }
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn series_needs_two_rows() {
        let f = tmp_file("t,x_0\n0,0.5\n");
        assert!(matches!(
            TimeSeries::load(f.path()),
            Err(GraphError::SeriesTooShort { rows: 1 })
        ));
    }

    #[test]
    fn partition_validates_labels() {
        assert!(Partition::new(2, vec![0, 1, 0]).is_ok());
        assert!(matches!(
            Partition::new(2, vec![0, 2]),
            Err(GraphError::LabelOutOfRange { label: 2, k: 2 })
        ));
        let p = Partition::new(4, vec![0, 0, 2, 2]).unwrap();
        assert_eq!(p.non_empty_communities(), 2);
    }
}
