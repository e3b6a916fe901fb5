//! Graph representation, dataset container I/O, splits, noise injection and
//! synthetic planted-partition graphs.

mod io;
mod noise;
mod sbm;
mod splits;

pub use io::{load_graph, save_graph, EDGES_FILE, FEATURES_FILE, LABELS_FILE, META_FILE};
pub use noise::{augment_with_noise, pseudo_degree};
pub use sbm::{synth_sbm, SbmRecipe};
pub use splits::{make_splits, SplitMasks, DEFAULT_RATIOS};

use crate::error::{Error, Result};
use crate::kernels::DenseMatrix;

/// Immutable undirected graph in CSR form with dense node features.
///
/// Each undirected edge is stored in both rows; self-loops are never stored,
/// so `neighbors(i)` is N(i) without `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    features: DenseMatrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Either orientation is
    /// accepted, duplicates collapse, and self-loops are dropped with a
    /// warning.
    pub fn from_edges(
        num_nodes: usize,
        edges: &[(usize, usize)],
        features: DenseMatrix,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.rows() != num_nodes {
            return Err(Error::Dataset(format!(
                "{} feature rows for {num_nodes} nodes",
                features.rows()
            )));
        }
        if labels.len() != num_nodes {
            return Err(Error::Dataset(format!(
                "{} labels for {num_nodes} nodes",
                labels.len()
            )));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::Dataset(format!(
                "node {i} has label {l}, but num_classes = {num_classes}"
            )));
        }
        if !features.is_finite() {
            return Err(Error::Dataset("non-finite feature value".into()));
        }

        let mut directed = Vec::with_capacity(edges.len() * 2);
        let mut self_loops = 0usize;
        for &(s, d) in edges {
            if s >= num_nodes || d >= num_nodes {
                return Err(Error::Dataset(format!(
                    "edge ({s},{d}) references a node id >= {num_nodes}"
                )));
            }
            if s == d {
                self_loops += 1;
                continue;
            }
            directed.push((s, d));
            directed.push((d, s));
        }
        if self_loops > 0 {
            log::warn!("dropped {self_loops} self-loop(s)");
        }
        directed.sort_unstable();
        directed.dedup();

        let mut row_offsets = vec![0usize; num_nodes + 1];
        for &(s, _) in &directed {
            row_offsets[s + 1] += 1;
        }
        for i in 0..num_nodes {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = directed.into_iter().map(|(_, d)| d).collect();

        Ok(Self {
            row_offsets,
            col_indices,
            features,
            labels,
            num_classes,
        })
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn feat_dim(&self) -> usize {
        self.features.cols()
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Number of stored (directed) adjacency entries, i.e. twice the number
    /// of undirected edges.
    #[inline]
    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.nnz() / 2
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes()).map(|i| self.degree(i)).collect()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.num_nodes() == 0 {
            0.0
        } else {
            self.nnz() as f64 / self.num_nodes() as f64
        }
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Undirected edges with `src < dst`, in CSR order.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        (0..self.num_nodes())
            .flat_map(|i| {
                self.neighbors(i)
                    .iter()
                    .filter(move |&&j| i < j)
                    .map(move |&j| (i, j))
            })
            .collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    /// True when the stored adjacency equals its transpose.
    pub fn is_symmetric(&self) -> bool {
        (0..self.num_nodes()).all(|i| self.neighbors(i).iter().all(|&j| self.has_edge(j, i)))
    }

    /// Same topology and labels with a different feature matrix.
    pub fn with_features(&self, features: DenseMatrix) -> Result<Self> {
        if features.rows() != self.num_nodes() {
            return Err(Error::shape(
                "with_features",
                format!("{} rows for {} nodes", features.rows(), self.num_nodes()),
            ));
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }

    /// Dense 0/1 adjacency; intended for small graphs and test oracles.
    pub fn dense_adjacency(&self) -> DenseMatrix {
        let n = self.num_nodes();
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for &j in self.neighbors(i) {
                a[(i, j)] = 1.0;
            }
        }
        a
    }
}
