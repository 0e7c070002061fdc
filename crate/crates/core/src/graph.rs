//! Support graphs and stable interaction matrices.
//!
//! An edge `(i, j)` sets `G_ij = 1`, which the Laplacian rule turns into a
//! non-zero weight `A_ij`. In the dynamics `y_i(t+1) = sum_j A_ij y_j(t)`
//! that means node `j` feeds node `i`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// A graph without self-loops on nodes `0..node_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    directed: bool,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from ordered edges. Undirected graphs are symmetrized.
    pub fn new(
        node_count: usize,
        directed: bool,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if node_count == 0 {
            return Err(invalid("graph needs at least one node"));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= node_count || j >= node_count {
                return Err(invalid(format!(
                    "edge ({i}, {j}) out of range for {node_count} nodes"
                )));
            }
            if i == j {
                return Err(invalid(format!("self-loop at node {i}")));
            }
            set.insert((i, j));
            if !directed {
                set.insert((j, i));
            }
        }
        Ok(Self {
            node_count,
            directed,
            edges: set,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Ordered edges in lexicographic order. Undirected edges appear in both
    /// orientations.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Number of ordered edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of unordered edges for undirected graphs, ordered edges otherwise.
    pub fn unique_edge_count(&self) -> usize {
        if self.directed {
            self.edges.len()
        } else {
            self.edges.len() / 2
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i, j))
    }

    /// Number of nodes feeding node `i`, i.e. the support size of row `i`.
    pub fn in_flow_degree(&self, i: usize) -> usize {
        self.edges.range((i, 0)..(i + 1, 0)).count()
    }

    pub fn max_in_flow_degree(&self) -> usize {
        let mut counts = vec![0usize; self.node_count];
        for &(i, _) in &self.edges {
            counts[i] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }

    /// Ground truth over the observed nodes `s`.
    pub fn support_on(&self, s: &[usize]) -> Result<Support> {
        for &m in s {
            if m >= self.node_count {
                return Err(invalid(format!(
                    "observed node {m} out of range for {} nodes",
                    self.node_count
                )));
            }
        }
        let k = s.len();
        let mut connected = vec![false; k * k];
        for (a, &mi) in s.iter().enumerate() {
            for (b, &mj) in s.iter().enumerate() {
                if a != b {
                    connected[a * k + b] = self.has_edge(mi, mj);
                }
            }
        }
        Ok(Support { size: k, connected })
    }
}

/// Connectivity of the ordered pairs of an observed node set, indexed by
/// position in `S`. The diagonal is always `false`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    size: usize,
    connected: Vec<bool>,
}

impl Support {
    pub fn from_fn(size: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut connected = vec![false; size * size];
        for i in 0..size {
            for j in 0..size {
                if i != j {
                    connected[i * size + j] = f(i, j);
                }
            }
        }
        Self { size, connected }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_connected(&self, i: usize, j: usize) -> bool {
        self.connected[i * self.size + j]
    }

    /// Labels in [`ordered_pairs`] order.
    pub fn labels(&self) -> Vec<bool> {
        ordered_pairs(self.size)
            .map(|(i, j)| self.is_connected(i, j))
            .collect()
    }
}

/// Ordered pairs `(i, j)`, `i != j`, in row-major order.
pub fn ordered_pairs(size: usize) -> impl Iterator<Item = (usize, usize)> + Clone {
    (0..size).flat_map(move |i| (0..size).filter(move |&j| j != i).map(move |j| (i, j)))
}

fn check_generator_args(n: usize, p: f64) -> Result<()> {
    if n < 2 {
        return Err(invalid(format!("need at least 2 nodes, got {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("edge probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// Erdős–Rényi graph: each unordered pair is present with probability `p`.
pub fn gen_er_undirected(n: usize, p: f64, seed: u64) -> Result<Graph> {
    check_generator_args(n, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, false, edges)
}

/// Binomial random digraph: each ordered pair `i != j` is present with
/// probability `p`.
pub fn gen_binomial_directed(n: usize, p: f64, seed: u64) -> Result<Graph> {
    check_generator_args(n, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, true, edges)
}

/// Parameters of the Laplacian rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacianParams {
    pub alpha: f64,
    pub alpha1: f64,
}

impl Default for LaplacianParams {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            alpha1: 0.9,
        }
    }
}

/// Square non-negative interaction matrix `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    weights: DMatrix<f64>,
    params: Option<LaplacianParams>,
}

impl InteractionMatrix {
    /// Wraps an arbitrary square matrix. Stability is checked when simulating.
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        if !weights.is_square() || weights.nrows() == 0 {
            return Err(invalid(format!(
                "interaction matrix must be square and non-empty, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("interaction matrix has non-finite entries"));
        }
        Ok(Self {
            weights,
            params: None,
        })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn node_count(&self) -> usize {
        self.weights.nrows()
    }

    /// The `(alpha, alpha1)` used to build the matrix, if it came from
    /// [`laplacian_rule`].
    pub fn params(&self) -> Option<LaplacianParams> {
        self.params
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius(&self.weights)
    }
}

/// Laplacian rule: `A_ij = alpha1 * G_ij / d_max` off the diagonal and the
/// diagonal completes every row sum to `alpha`.
pub fn laplacian_rule(g: &Graph, alpha: f64, alpha1: f64) -> Result<InteractionMatrix> {
    if !(alpha1 > 0.0 && alpha1 <= alpha && alpha < 1.0) {
        return Err(invalid(format!(
            "need 0 < alpha1 <= alpha < 1, got alpha={alpha}, alpha1={alpha1}"
        )));
    }
    let d_max = g.max_in_flow_degree();
    if d_max == 0 {
        return Err(Error::Degenerate("graph has no edges (d_max = 0)".into()));
    }
    let n = g.node_count();
    let w = alpha1 / d_max as f64;
    let mut a = DMatrix::zeros(n, n);
    for (i, j) in g.edges() {
        a[(i, j)] = w;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&k| k != i).map(|k| a[(i, k)]).sum();
        let diag = alpha - off;
        // Rounding can leave a tiny negative residue when row i attains d_max
        // and alpha1 == alpha.
        if diag < -1e-12 {
            return Err(Error::Invariant(format!(
                "negative diagonal {diag} in row {i}"
            )));
        }
        a[(i, i)] = diag.max(0.0);
    }
    Ok(InteractionMatrix {
        weights: a,
        params: Some(LaplacianParams { alpha, alpha1 }),
    })
}

const POWER_MAX_ITERATIONS: usize = 10_000;
const POWER_TOLERANCE: f64 = 1e-10;

/// Spectral radius of `|A|` by power iteration.
///
/// Iterates on `|A| + I` so that periodic non-negative matrices (bipartite
/// supports with zero diagonal) still converge; the Perron root shifts by
/// exactly one.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(invalid("spectral radius needs a square matrix"));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let m = a.map(|v| v.abs()) + DMatrix::identity(n, n);
    let mut x = nalgebra::DVector::from_element(n, 1.0);
    let mut next = nalgebra::DVector::zeros(n);
    let mut estimate = 0.0;
    for it in 0..POWER_MAX_ITERATIONS {
        m.mul_to(&x, &mut next);
        let norm = next.amax();
        if !norm.is_finite() {
            return Err(Error::Numeric("power iteration overflowed".into()));
        }
        next /= norm;
        core::mem::swap(&mut x, &mut next);
        if it > 0 && (norm - estimate).abs() <= POWER_TOLERANCE * norm {
            return Ok(norm - 1.0);
        }
        estimate = norm;
    }
    Err(Error::NoConvergence {
        iterations: POWER_MAX_ITERATIONS,
        estimate: estimate - 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::new(3, false, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn er_extremes() {
        assert_eq!(gen_er_undirected(5, 0.0, 1).unwrap().edge_count(), 0);
        let g = gen_er_undirected(4, 1.0, 7).unwrap();
        assert_eq!(g.edge_count(), 12);
        assert!(!g.is_directed());
    }

    #[test]
    fn binomial_extremes() {
        assert_eq!(gen_binomial_directed(3, 1.0, 0).unwrap().edge_count(), 6);
        assert_eq!(gen_binomial_directed(3, 0.0, 0).unwrap().edge_count(), 0);
    }

    #[test]
    fn generator_argument_errors() {
        assert!(matches!(
            gen_er_undirected(1, 0.5, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            gen_er_undirected(10, 1.5, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            gen_binomial_directed(10, -0.1, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn er_mean_edge_count() {
        let total: usize = (0..50)
            .map(|s| gen_er_undirected(100, 0.5, s).unwrap().unique_edge_count())
            .sum();
        let mean = total as f64 / 50.0;
        assert!((mean - 2475.0).abs() <= 150.0, "mean {mean}");
    }

    #[test]
    fn binomial_mean_edge_count() {
        let total: usize = (0..50)
            .map(|s| gen_binomial_directed(50, 0.2, s).unwrap().edge_count())
            .sum();
        let mean = total as f64 / 50.0;
        assert!((mean - 490.0).abs() <= 40.0, "mean {mean}");
    }

    #[test]
    fn generators_are_pure_in_seed() {
        assert_eq!(
            gen_er_undirected(30, 0.3, 9).unwrap(),
            gen_er_undirected(30, 0.3, 9).unwrap()
        );
        assert_ne!(
            gen_binomial_directed(30, 0.3, 9).unwrap(),
            gen_binomial_directed(30, 0.3, 10).unwrap()
        );
    }

    #[test]
    fn graph_rejects_self_loops_and_out_of_range() {
        assert!(Graph::new(3, false, [(1, 1)]).is_err());
        assert!(Graph::new(3, true, [(0, 3)]).is_err());
    }

    #[test]
    fn laplacian_single_edge() {
        let g = Graph::new(2, false, [(0, 1)]).unwrap();
        let a = laplacian_rule(&g, 0.5, 0.5).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        assert_eq!(a.weights(), &expected);
        assert!((a.spectral_radius().unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn laplacian_path() {
        let a = laplacian_rule(&path3(), 0.8, 0.4).unwrap();
        let w = a.weights();
        for &(i, j) in &[(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert!((w[(i, j)] - 0.2).abs() < 1e-15);
        }
        assert_eq!(w[(0, 2)], 0.0);
        let diag = [0.6, 0.4, 0.6];
        for i in 0..3 {
            assert!((w[(i, i)] - diag[i]).abs() < 1e-12);
            assert!((w.row(i).sum() - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_rejects_bad_input() {
        let empty = Graph::new(3, false, []).unwrap();
        assert!(matches!(
            laplacian_rule(&empty, 0.9, 0.9),
            Err(Error::Degenerate(_))
        ));
        assert!(laplacian_rule(&path3(), 0.5, 0.6).is_err());
        assert!(laplacian_rule(&path3(), 1.0, 0.5).is_err());
        assert!(laplacian_rule(&path3(), 0.5, 0.0).is_err());
    }

    #[test]
    fn laplacian_directed_rows_stay_non_negative() {
        for seed in 0..10 {
            let g = gen_binomial_directed(40, 0.3, seed).unwrap();
            let a = laplacian_rule(&g, 0.9, 0.9).unwrap();
            assert!(a.weights().iter().all(|&v| v >= 0.0));
            for i in 0..40 {
                assert!((a.weights().row(i).sum() - 0.9).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_radius_diagonal_and_symmetric() {
        let d = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.7]);
        assert!((spectral_radius(&d).unwrap() - 0.7).abs() < 1e-9);
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        assert!((spectral_radius(&s).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn spectral_radius_matches_dense_eigensolver() {
        for seed in 0..5 {
            let g = gen_er_undirected(20, 0.5, seed).unwrap();
            let a = laplacian_rule(&g, 0.9, 0.9).unwrap();
            let rho = a.spectral_radius().unwrap();
            let eig = a.weights().clone().symmetric_eigenvalues();
            let oracle = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(rho > 0.0 && rho <= 0.9 + 1e-9);
            assert!((rho - oracle).abs() < 1e-8, "{rho} vs {oracle}");
        }
    }

    #[test]
    fn support_on_subset() {
        let g = path3();
        let s = g.support_on(&[0, 2]).unwrap();
        assert!(!s.is_connected(0, 1));
        let s = g.support_on(&[1, 2]).unwrap();
        assert!(s.is_connected(0, 1) && s.is_connected(1, 0));
        assert!(g.support_on(&[3]).is_err());
    }

    #[test]
    fn ordered_pairs_row_major() {
        let p: Vec<_> = ordered_pairs(3).collect();
        assert_eq!(p, vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]);
    }
}
