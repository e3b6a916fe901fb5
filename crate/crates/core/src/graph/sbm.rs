use rand::Rng;
use rand_distr::StandardNormal;

use super::Graph;
use crate::error::{Error, Result};
use crate::kernels::DenseMatrix;
use crate::rng::{self, Purpose};

/// Planted-partition graph with Gaussian class-mean features.
///
/// Nodes `[b·n/C, (b+1)·n/C)` form block `b` and carry label `b`. Each pair is
/// joined with probability `p_in` inside a block and `p_out` across blocks.
/// Node features are `feat_sep·e_{b mod F}` plus standard-normal noise.
pub fn synth_sbm(
    n: usize,
    classes: usize,
    p_in: f64,
    p_out: f64,
    feat_dim: usize,
    feat_sep: f64,
    seed: u64,
) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_out > p_in {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    if classes == 0 || !n.is_multiple_of(classes) {
        return Err(Error::InvalidArgument(format!(
            "n={n} must be a positive multiple of classes={classes}"
        )));
    }
    if feat_dim == 0 {
        return Err(Error::InvalidArgument("feat_dim must be positive".into()));
    }
    let block = n / classes;
    let labels: Vec<usize> = (0..n).map(|i| i / block).collect();

    let mut rng = rng::stream(seed, Purpose::Synth, 0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    let mut frng = rng::stream(seed, Purpose::Synth, 1);
    let features = DenseMatrix::from_fn(n, feat_dim, |i, c| {
        let mean = if c == labels[i] % feat_dim {
            feat_sep
        } else {
            0.0
        };
        mean + frng.sample::<f64, _>(StandardNormal)
    });
    Graph::from_edges(n, &edges, features, labels, classes)
}

/// Named parameter set for [`synth_sbm`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SbmRecipe {
    pub n: usize,
    pub classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feat_dim: usize,
    pub feat_sep: f64,
    pub seed: u64,
}

impl Default for SbmRecipe {
    /// The desk-scale benchmark graph: 400 nodes in 4 blocks.
    fn default() -> Self {
        Self {
            n: 400,
            classes: 4,
            p_in: 0.05,
            p_out: 0.005,
            feat_dim: 16,
            feat_sep: 1.0,
            seed: 0,
        }
    }
}

impl SbmRecipe {
    pub fn build(&self) -> Result<Graph> {
        synth_sbm(
            self.n,
            self.classes,
            self.p_in,
            self.p_out,
            self.feat_dim,
            self.feat_sep,
            self.seed,
        )
    }

    /// Same recipe at `n` nodes with expected within/between-block degrees
    /// held fixed.
    pub fn rescaled(&self, n: usize) -> Self {
        let n = (n / self.classes).max(1) * self.classes;
        let old_block = (self.n / self.classes) as f64;
        let new_block = (n / self.classes) as f64;
        let d_in = self.p_in * (old_block - 1.0);
        let d_out = self.p_out * (self.n as f64 - old_block);
        let p_in = (d_in / (new_block - 1.0).max(1.0)).min(1.0);
        let p_out = (d_out / (n as f64 - new_block).max(1.0)).min(p_in);
        Self {
            n,
            p_in,
            p_out,
            ..*self
        }
    }
}
