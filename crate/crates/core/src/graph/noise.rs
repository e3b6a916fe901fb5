use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use super::splits::{split_nodes, SplitMasks, DEFAULT_RATIOS};
use super::Graph;
use crate::error::{Error, Result};
use crate::kernels::DenseMatrix;
use crate::rng::{self, Purpose};

/// Neighbor count given to each pseudo vertex: the rounded mean degree of
/// the original graph, at least 1 and at most N.
pub fn pseudo_degree(g: &Graph) -> usize {
    (g.mean_degree().round() as usize).max(1).min(g.num_nodes())
}

/// Appends `round(fraction·N)` pseudo vertices to `g` and re-splits.
///
/// Each pseudo vertex has i.i.d. standard-normal features, a uniform random
/// label and [`pseudo_degree`] distinct neighbors drawn uniformly from the
/// original vertices. The enlarged node set is split 20-20-60 and pseudo
/// vertices are then evicted from the test mask. Pseudo vertices occupy ids
/// `N..N+k`.
pub fn augment_with_noise(g: &Graph, fraction: f64, seed: u64) -> Result<(Graph, SplitMasks)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "noise fraction must be in (0, 1], got {fraction}"
        )));
    }
    let n = g.num_nodes();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "cannot augment an empty graph".into(),
        ));
    }
    let k = (fraction * n as f64).round() as usize;
    let d = pseudo_degree(g);
    let f = g.feat_dim();
    let total = n + k;

    let mut rng = rng::stream(seed, Purpose::Noise, 0);
    let mut data = Vec::with_capacity(total * f);
    data.extend_from_slice(g.features().data());
    let mut labels = g.labels().to_vec();
    let mut edges = g.edge_list();
    for p in n..total {
        for _ in 0..f {
            data.push(rng.sample::<f64, _>(StandardNormal));
        }
        labels.push(rng.random_range(0..g.num_classes()));
        for j in index::sample(&mut rng, n, d) {
            edges.push((p, j));
        }
    }

    let features = DenseMatrix::from_vec(total, f, data)?;
    let noisy = Graph::from_edges(total, &edges, features, labels, g.num_classes())?;

    let mut masks = split_nodes(total, DEFAULT_RATIOS, seed)?;
    for p in n..total {
        masks.pseudo[p] = true;
        masks.test[p] = false;
    }
    Ok((noisy, masks))
}
