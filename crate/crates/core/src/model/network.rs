use rand::Rng;

use super::config::{ModelConfig, Stacking};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernels::{dropout, Activation, DenseMatrix, Param};
use crate::layers::{
    complex_layer_backward, complex_layer_forward, simple_layer_backward, simple_layer_forward,
    ComplexForward, ComplexLayerParams, GateGradient, GateMode, LayerDiag, SimpleForward,
    SimpleLayerParams,
};
use crate::rng::{self, Purpose};

/// Trainable entries of a parallel one-hop model: `L·F′·(F+3)`.
pub fn param_count(num_layers: usize, in_dim: usize, out_dim: usize) -> usize {
    num_layers * out_dim * (in_dim + 3)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Simple(SimpleLayerParams),
    Complex(ComplexLayerParams),
}

#[derive(Clone, Debug)]
pub enum LayerForward {
    Simple(SimpleForward),
    Complex(ComplexForward),
}

impl LayerForward {
    pub fn diag(&self) -> LayerDiag {
        match self {
            LayerForward::Simple(f) => f.diag(),
            LayerForward::Complex(f) => f.diag(),
        }
    }

    pub fn phat(&self) -> &[f64] {
        match self {
            LayerForward::Simple(f) => &f.phat,
            LayerForward::Complex(f) => &f.phat,
        }
    }

    pub fn nbytes(&self) -> usize {
        match self {
            LayerForward::Simple(f) => f.nbytes(),
            LayerForward::Complex(f) => f.nbytes(),
        }
    }
}

impl Layer {
    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Simple(p) => p.params().to_vec(),
            Layer::Complex(p) => p.params().to_vec(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Simple(p) => p.params_mut().into_iter().collect(),
            Layer::Complex(p) => p.params_mut().into_iter().collect(),
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            Layer::Simple(p) => p.threshold,
            Layer::Complex(p) => p.threshold,
        }
    }

    pub fn set_threshold(&mut self, t: f64) {
        match self {
            Layer::Simple(p) => p.threshold = t,
            Layer::Complex(p) => p.threshold = t,
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            Layer::Simple(p) => p.in_dim(),
            Layer::Complex(p) => p.in_dim(),
        }
    }

    pub fn forward(
        &self,
        g: &Graph,
        x: &DenseMatrix,
        mode: GateMode,
        act: Activation,
    ) -> Result<(DenseMatrix, LayerForward)> {
        match self {
            Layer::Simple(p) => {
                simple_layer_forward(g, x, p, mode, act).map(|(h, f)| (h, LayerForward::Simple(f)))
            }
            Layer::Complex(p) => {
                complex_layer_forward(g, x, p, mode).map(|(h, f)| (h, LayerForward::Complex(f)))
            }
        }
    }

    pub fn backward(
        &mut self,
        g: &Graph,
        x: &DenseMatrix,
        fwd: &LayerForward,
        grad_h: &DenseMatrix,
        rule: GateGradient,
        input_grad: bool,
    ) -> Result<Option<DenseMatrix>> {
        match (self, fwd) {
            (Layer::Simple(p), LayerForward::Simple(f)) => {
                simple_layer_backward(g, x, p, f, grad_h, rule, input_grad)
            }
            (Layer::Complex(p), LayerForward::Complex(f)) => {
                complex_layer_backward(g, x, p, f, grad_h, rule, input_grad)
            }
            _ => Err(Error::InvalidArgument(
                "layer and forward cache kinds differ".into(),
            )),
        }
    }
}

/// Cached state of one model forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub logits: DenseMatrix,
    /// Raw layer outputs, before dropout.
    pub outputs: Vec<DenseMatrix>,
    pub layers: Vec<LayerForward>,
    masks: Vec<Option<DenseMatrix>>,
    /// Inputs of layers 1.. in sequential mode (layer 0 reads the features).
    inputs: Vec<DenseMatrix>,
}

impl ForwardPass {
    pub fn nbytes(&self) -> usize {
        self.logits.nbytes()
            + self.outputs.iter().map(DenseMatrix::nbytes).sum::<usize>()
            + self.layers.iter().map(LayerForward::nbytes).sum::<usize>()
            + self
                .masks
                .iter()
                .flatten()
                .map(DenseMatrix::nbytes)
                .sum::<usize>()
            + self.inputs.iter().map(DenseMatrix::nbytes).sum::<usize>()
    }

    pub fn diags(&self) -> Vec<LayerDiag> {
        self.layers.iter().map(LayerForward::diag).collect()
    }
}

/// `L` selective-propagation layers and their configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub layers: Vec<Layer>,
    in_dim: usize,
    out_dim: usize,
    num_classes: usize,
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Param {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Param::new(DenseMatrix::from_fn(rows, cols, |_, _| {
        rng.random_range(-a..=a)
    }))
}

/// Entrywise sum of equally shaped matrices that does not depend on their
/// order: each entry's terms are sorted, then added pairwise.
fn ensemble_sum(terms: &[DenseMatrix]) -> DenseMatrix {
    fn pairwise(v: &[f64]) -> f64 {
        match v.len() {
            0 => 0.0,
            1 => v[0],
            k => pairwise(&v[..k / 2]) + pairwise(&v[k / 2..]),
        }
    }
    let (rows, cols) = terms[0].shape();
    let mut buf = Vec::with_capacity(terms.len());
    DenseMatrix::from_fn(rows, cols, |i, j| {
        buf.clear();
        buf.extend(terms.iter().map(|t| t.row(i)[j]));
        buf.sort_by(f64::total_cmp);
        pairwise(&buf)
    })
}

/// Builds a model for `in_dim` input features and `num_classes` classes.
/// Layer `ℓ` is initialised (Glorot-uniform) from its own seeded stream.
pub fn init_model(cfg: &ModelConfig, in_dim: usize, num_classes: usize) -> Result<Model> {
    cfg.validate()?;
    if in_dim == 0 || num_classes == 0 {
        return Err(Error::InvalidArgument(
            "input dimension and class count must be positive".into(),
        ));
    }
    let out_dim = cfg.out_dim.unwrap_or(num_classes);
    let layers = (0..cfg.num_layers)
        .map(|l| {
            let fin = match cfg.stacking {
                Stacking::Sequential if l > 0 => out_dim,
                _ => in_dim,
            };
            let mut rng = rng::stream(cfg.seed, Purpose::Init, l as u64);
            if cfg.depth == 1 {
                Layer::Simple(SimpleLayerParams {
                    transform: glorot(out_dim, fin, &mut rng),
                    sensitivity: glorot(1, out_dim, &mut rng),
                    propagation: glorot(1, 2 * out_dim, &mut rng),
                    threshold: cfg.threshold,
                })
            } else {
                Layer::Complex(ComplexLayerParams {
                    transform: glorot(out_dim, fin, &mut rng),
                    sensitivity: glorot(1, out_dim, &mut rng),
                    depth_weight: glorot(1, out_dim + cfg.depth, &mut rng),
                    blend: glorot(1, 2 * out_dim, &mut rng),
                    threshold: cfg.threshold,
                    depth: cfg.depth,
                })
            }
        })
        .collect();
    Ok(Model {
        config: cfg.clone(),
        layers,
        in_dim,
        out_dim,
        num_classes,
    })
}

impl Model {
    /// Assembles a model from explicit layers; all must share dimensions.
    pub fn from_layers(
        config: ModelConfig,
        layers: Vec<Layer>,
        num_classes: usize,
    ) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidArgument("a model needs at least one layer".into()))?;
        let in_dim = first.in_dim();
        let out_dim = first.params()[0].value.rows();
        for (l, layer) in layers.iter().enumerate() {
            let expect_in = match config.stacking {
                Stacking::Sequential if l > 0 => out_dim,
                _ => in_dim,
            };
            if layer.in_dim() != expect_in || layer.params()[0].value.rows() != out_dim {
                return Err(Error::shape(
                    "Model::from_layers",
                    format!("layer {l} does not match {in_dim}->{out_dim}"),
                ));
            }
        }
        let mut config = config;
        config.num_layers = layers.len();
        Ok(Self {
            config,
            layers,
            in_dim,
            out_dim,
            num_classes,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// Parameter values, gradients and optimiser moments.
    pub fn param_bytes(&self) -> usize {
        self.params().iter().map(|p| 4 * p.value.nbytes()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Sets the threshold of every layer.
    pub fn set_threshold(&mut self, t: f64) {
        self.config.threshold = t;
        for l in &mut self.layers {
            l.set_threshold(t);
        }
    }

    /// Forward pass. `counter` keys the dropout masks and must differ
    /// between training steps.
    pub fn forward(&self, g: &Graph, training: bool, counter: u64) -> Result<ForwardPass> {
        if g.feat_dim() != self.in_dim {
            return Err(Error::shape(
                "model_forward",
                format!(
                    "graph has {} features, model expects {}",
                    g.feat_dim(),
                    self.in_dim
                ),
            ));
        }
        let cfg = &self.config;
        let x = g.features();
        let n = g.num_nodes();
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut inputs = Vec::new();
        let mut logits = DenseMatrix::zeros(n, self.out_dim);
        let mut summands = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let input = match (cfg.stacking, inputs.last()) {
                (Stacking::Sequential, Some(prev)) => prev,
                _ => x,
            };
            let (h, cache) = layer.forward(g, input, cfg.gate_mode, cfg.activation)?;
            let (dropped, mask) = dropout(
                &h,
                cfg.dropout,
                cfg.seed,
                (counter << 16) | l as u64,
                training,
            )?;
            match cfg.stacking {
                Stacking::Parallel => summands.push(dropped),
                Stacking::Sequential => {
                    if l + 1 == self.layers.len() {
                        logits = dropped;
                    } else {
                        inputs.push(dropped);
                    }
                }
            }
            outputs.push(h);
            caches.push(cache);
            masks.push(mask);
        }
        if cfg.stacking == Stacking::Parallel {
            logits = ensemble_sum(&summands);
        }
        Ok(ForwardPass {
            logits,
            outputs,
            layers: caches,
            masks,
            inputs,
        })
    }

    /// Accumulates parameter gradients for `grad_logits`.
    pub fn backward(
        &mut self,
        g: &Graph,
        pass: &ForwardPass,
        grad_logits: &DenseMatrix,
        rule: GateGradient,
    ) -> Result<()> {
        let apply_mask = |grad: &DenseMatrix, mask: &Option<DenseMatrix>| match mask {
            Some(m) => grad.hadamard(m),
            None => Ok(grad.clone()),
        };
        match self.config.stacking {
            Stacking::Parallel => {
                for (l, layer) in self.layers.iter_mut().enumerate() {
                    let grad_h = apply_mask(grad_logits, &pass.masks[l])?;
                    layer.backward(g, g.features(), &pass.layers[l], &grad_h, rule, false)?;
                }
            }
            Stacking::Sequential => {
                let mut grad = grad_logits.clone();
                for l in (0..self.layers.len()).rev() {
                    let grad_h = apply_mask(&grad, &pass.masks[l])?;
                    let input = if l == 0 {
                        g.features()
                    } else {
                        &pass.inputs[l - 1]
                    };
                    let upstream =
                        self.layers[l].backward(g, input, &pass.layers[l], &grad_h, rule, l > 0)?;
                    if let Some(up) = upstream {
                        grad = up;
                    }
                }
            }
        }
        Ok(())
    }
}
