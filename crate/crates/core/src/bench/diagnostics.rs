use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::report::num;
use crate::error::Result;
use crate::graph::Graph;
use crate::kernels::dot;
use crate::layers::is_selected;
use crate::model::{accuracy, Model, PhatSample};

pub const PHAT_BINS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSummary {
    pub layer: usize,
    /// Accuracy of this layer's output used alone as logits.
    pub standalone_acc: f64,
    pub selection_frac: f64,
    /// Counts of p̂ over `PHAT_BINS` equal bins of `[0, 1]`.
    pub phat_hist: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerDiagnostics {
    pub layers: Vec<LayerSummary>,
    /// Mean cosine similarity of each layer pair's embeddings, per node,
    /// averaged over nodes: `(a, b, similarity)` for `a < b`.
    pub pair_similarity: Vec<(usize, usize, f64)>,
    /// Mean of `pair_similarity` per node, averaged over nodes; NaN with a
    /// single layer.
    pub mean_similarity: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (aa, bb) = (dot(a, a), dot(b, b));
    if aa == 0.0 || bb == 0.0 {
        return None;
    }
    Some(dot(a, b) / (aa * bb).sqrt())
}

/// Per-layer accuracy, selection and p̂ histogram on `mask`, plus the
/// embedding similarity between layers.
pub fn layer_diagnostics(m: &Model, g: &Graph, mask: &[bool]) -> Result<LayerDiagnostics> {
    let pass = m.forward(g, false, 0)?;
    let n = g.num_nodes();
    let layers = pass
        .layers
        .iter()
        .zip(&pass.outputs)
        .enumerate()
        .map(|(l, (fwd, out))| {
            let phat = fwd.phat();
            let t = m.layers[l].threshold();
            let mut hist = vec![0; PHAT_BINS];
            for &p in phat {
                hist[((p * PHAT_BINS as f64) as usize).min(PHAT_BINS - 1)] += 1;
            }
            Ok(LayerSummary {
                layer: l,
                standalone_acc: accuracy(out, g.labels(), mask)?,
                selection_frac: phat.iter().filter(|&&p| is_selected(p, t)).count() as f64
                    / n as f64,
                phat_hist: hist,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let l = pass.outputs.len();
    let mut pair_similarity = Vec::new();
    for a in 0..l {
        for b in a + 1..l {
            let sims: Vec<f64> = (0..n)
                .filter_map(|i| cosine(pass.outputs[a].row(i), pass.outputs[b].row(i)))
                .collect();
            let mean = if sims.is_empty() {
                f64::NAN
            } else {
                sims.iter().sum::<f64>() / sims.len() as f64
            };
            pair_similarity.push((a, b, mean));
        }
    }
    let per_node: Vec<f64> = (0..n)
        .filter_map(|i| {
            let sims: Vec<f64> = pair_similarity
                .iter()
                .filter_map(|&(a, b, _)| cosine(pass.outputs[a].row(i), pass.outputs[b].row(i)))
                .collect();
            (!sims.is_empty()).then(|| sims.iter().sum::<f64>() / sims.len() as f64)
        })
        .collect();
    let mean_similarity = if per_node.is_empty() {
        f64::NAN
    } else {
        per_node.iter().sum::<f64>() / per_node.len() as f64
    };
    Ok(LayerDiagnostics {
        layers,
        pair_similarity,
        mean_similarity,
    })
}

impl LayerDiagnostics {
    /// CSV series: per-layer summary, p̂ histogram and pairwise similarity.
    pub fn series(&self, prefix: &str) -> BTreeMap<String, String> {
        let mut layers = String::from("layer,standalone_acc,selection_frac\n");
        let mut hist = String::from("layer,bin_lo,bin_hi,count\n");
        for s in &self.layers {
            writeln!(
                layers,
                "{},{},{}",
                s.layer,
                num(s.standalone_acc),
                num(s.selection_frac)
            )
            .unwrap();
            for (b, c) in s.phat_hist.iter().enumerate() {
                let lo = b as f64 / PHAT_BINS as f64;
                let hi = (b + 1) as f64 / PHAT_BINS as f64;
                writeln!(hist, "{},{lo},{hi},{c}", s.layer).unwrap();
            }
        }
        let mut sim = String::from("layer_a,layer_b,cosine_similarity\n");
        for (a, b, v) in &self.pair_similarity {
            writeln!(sim, "{a},{b},{}", num(*v)).unwrap();
        }
        writeln!(sim, "all,all,{}", num(self.mean_similarity)).unwrap();
        BTreeMap::from([
            (format!("{prefix}layers.csv"), layers),
            (format!("{prefix}phat_hist.csv"), hist),
            (format!("{prefix}similarity.csv"), sim),
        ])
    }
}

pub(crate) fn trace_csv(trace: &[PhatSample]) -> String {
    let mut s = String::from("epoch,layer,node,phat\n");
    for t in trace {
        writeln!(s, "{},{},{},{}", t.epoch, t.layer, t.node, t.phat).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SbmRecipe;
    use crate::model::{init_model, Model, ModelConfig};

    #[test]
    fn identical_layers_are_perfectly_similar() {
        let g = SbmRecipe {
            n: 40,
            ..SbmRecipe::default()
        }
        .build()
        .unwrap();
        let base = init_model(&ModelConfig::default(), g.feat_dim(), 4).unwrap();
        let layer = base.layers[0].clone();
        let m = Model::from_layers(base.config.clone(), vec![layer; 3], 4).unwrap();
        let d = layer_diagnostics(&m, &g, &[true; 40]).unwrap();
        assert_eq!(d.mean_similarity, 1.0);
        assert!(d.pair_similarity.iter().all(|p| p.2 == 1.0));
        assert_eq!(d.pair_similarity.len(), 3);
    }

    #[test]
    fn fractions_match_a_recount() {
        let g = SbmRecipe {
            n: 40,
            ..SbmRecipe::default()
        }
        .build()
        .unwrap();
        let m = init_model(&ModelConfig::default(), g.feat_dim(), 4).unwrap();
        let d = layer_diagnostics(&m, &g, &[true; 40]).unwrap();
        let pass = m.forward(&g, false, 0).unwrap();
        for (s, diag) in d.layers.iter().zip(pass.diags()) {
            assert!((0.0..=1.0).contains(&s.selection_frac));
            let recount = diag.gate.iter().filter(|&&v| v == 1.0).count() as f64 / 40.0;
            assert_eq!(s.selection_frac, recount);
            assert_eq!(s.phat_hist.iter().sum::<usize>(), 40);
        }
        let series = d.series("diag_");
        assert!(series.contains_key("diag_layers.csv"));
    }
}
