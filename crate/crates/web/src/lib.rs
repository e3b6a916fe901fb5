//! Browser bindings: train on a synthetic block-model graph, move the
//! selection threshold of the trained model, and compare accuracy under
//! injected noise nodes.
//!
//! Every export returns JSON text so the page needs no generated types.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use nodeselect::bench::{noise_bench, BenchSpec, Experiment, SBM_WEIGHT_DECAY};
use nodeselect::graph::{make_splits, SbmRecipe, DEFAULT_RATIOS};
use nodeselect::layers::{is_selected, selection_fraction};
use nodeselect::model::{accuracy, argmax, train};
use nodeselect::{init_model, Graph, Model, ModelConfig, SplitMasks};

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(js_err)
}

fn demo_recipe(nodes: usize, seed: u64) -> SbmRecipe {
    SbmRecipe {
        seed,
        ..SbmRecipe::default().rescaled(nodes)
    }
}

#[derive(Serialize)]
struct GraphView {
    labels: Vec<usize>,
    edges: Vec<(usize, usize)>,
    classes: usize,
}

#[derive(Serialize)]
struct ThresholdView {
    threshold: f64,
    /// Selection fraction per layer.
    selection: Vec<f64>,
    test_acc: f64,
    /// Per node: selected by the first layer.
    selected: Vec<bool>,
    predictions: Vec<usize>,
}

#[derive(Serialize)]
struct TrainView {
    epochs: usize,
    best_epoch: usize,
    val_acc: f64,
    test_acc: f64,
    params: usize,
}

/// A trained model on one synthetic graph.
#[wasm_bindgen]
pub struct DemoSession {
    graph: Graph,
    masks: SplitMasks,
    model: Model,
    summary: TrainView,
}

impl DemoSession {
    pub fn create(nodes: usize, layers: usize, seed: u64) -> nodeselect::Result<Self> {
        let graph = demo_recipe(nodes, seed).build()?;
        let masks = make_splits(&graph, DEFAULT_RATIOS, seed)?;
        let cfg = ModelConfig {
            num_layers: layers,
            weight_decay: SBM_WEIGHT_DECAY,
            seed,
            ..ModelConfig::default()
        };
        let mut model = init_model(&cfg, graph.feat_dim(), graph.num_classes())?;
        let report = train(&mut model, &graph, &masks)?;
        let summary = TrainView {
            epochs: report.epochs.len(),
            best_epoch: report.best_epoch,
            val_acc: report.best_val_acc,
            test_acc: report.test_acc,
            params: model.num_parameters(),
        };
        Ok(Self {
            graph,
            masks,
            model,
            summary,
        })
    }

    fn view(&self, threshold: f64) -> nodeselect::Result<ThresholdView> {
        let mut model = self.model.clone();
        model.set_threshold(threshold);
        let pass = model.forward(&self.graph, false, 0)?;
        let selection = pass
            .layers
            .iter()
            .map(|l| selection_fraction(l.phat(), threshold))
            .collect();
        let selected = pass.layers[0]
            .phat()
            .iter()
            .map(|&p| is_selected(p, threshold))
            .collect();
        let predictions = (0..pass.logits.rows())
            .map(|i| argmax(pass.logits.row(i)))
            .collect();
        Ok(ThresholdView {
            threshold,
            selection,
            test_acc: accuracy(&pass.logits, self.graph.labels(), &self.masks.test)?,
            selected,
            predictions,
        })
    }
}

#[wasm_bindgen]
impl DemoSession {
    /// Builds a graph of `nodes` nodes and trains a parallel model on it.
    #[wasm_bindgen(constructor)]
    pub fn new(nodes: usize, layers: usize, seed: u32) -> Result<DemoSession, JsError> {
        Self::create(nodes, layers, seed as u64).map_err(js_err)
    }

    /// `{epochs, best_epoch, val_acc, test_acc, params}`.
    pub fn summary(&self) -> Result<String, JsError> {
        to_json(&self.summary)
    }

    /// `{labels, edges, classes}` for drawing.
    pub fn graph(&self) -> Result<String, JsError> {
        to_json(&GraphView {
            labels: self.graph.labels().to_vec(),
            edges: self.graph.edge_list(),
            classes: self.graph.num_classes(),
        })
    }

    /// Re-runs inference with every layer's threshold set to `t`.
    pub fn at_threshold(&self, t: f64) -> Result<String, JsError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(JsError::new("threshold must lie in [0, 1]"));
        }
        let v = self.view(t).map_err(js_err)?;
        to_json(&v)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NoiseRow {
    pub model: String,
    pub clean_acc: f64,
    pub noisy_acc: f64,
}

pub fn noise_rows(fraction: f64, seed: u64) -> nodeselect::Result<Vec<NoiseRow>> {
    let mut spec = BenchSpec::new(Experiment::Noise);
    spec.fractions = vec![fraction];
    spec.seeds = vec![seed];
    spec.validate()?;
    let report = noise_bench(&spec)?;
    let condition = format!("noise={fraction}");
    Ok(["nodeselect", "gcn"]
        .into_iter()
        .map(|m| {
            let clean = report.find("clean", m);
            let noisy = report.find(&condition, m);
            NoiseRow {
                model: m.to_string(),
                clean_acc: clean.first().map_or(f64::NAN, |r| r.clean_acc),
                noisy_acc: noisy.first().map_or(f64::NAN, |r| r.noisy_acc),
            }
        })
        .collect())
}

/// Trains both models on the clean graph and on the graph with
/// `fraction × n` noise nodes added. Returns `[{model, clean_acc, noisy_acc}]`.
#[wasm_bindgen]
pub fn noise_compare(fraction: f64, seed: u32) -> Result<String, JsError> {
    noise_rows(fraction, seed as u64)
        .map_err(js_err)
        .and_then(|r| to_json(&r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_endpoints() {
        let s = DemoSession::create(120, 2, 1).unwrap();
        let all = s.view(0.0).unwrap();
        assert!(all.selection.iter().all(|&f| f == 1.0));
        assert!(all.selected.iter().all(|&b| b));
        let none = s.view(1.0).unwrap();
        assert!(none.selection.iter().all(|&f| f == 0.0));
        assert_eq!(all.predictions.len(), 120);
    }

    #[test]
    fn selection_does_not_grow_with_threshold() {
        let s = DemoSession::create(120, 3, 2).unwrap();
        let mut prev = vec![1.0; 3];
        for k in 0..=10 {
            let v = s.view(k as f64 / 10.0).unwrap();
            for (a, b) in v.selection.iter().zip(&prev) {
                assert!(a <= b);
            }
            prev = v.selection;
        }
    }

    #[test]
    fn threshold_view_is_json() {
        let s = DemoSession::create(80, 1, 0).unwrap();
        let json = s.at_threshold(0.4).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["selection"].as_array().unwrap().len(), 1);
        assert!(v["test_acc"].as_f64().unwrap() <= 1.0);
    }

    #[test]
    fn noise_rows_cover_both_models() {
        let rows = noise_rows(0.1, 0).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows
            .iter()
            .all(|r| r.clean_acc.is_finite() && r.noisy_acc.is_finite()));
    }
}
