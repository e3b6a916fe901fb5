use web_time::Instant;

use super::network::{ForwardPass, Model};
use crate::error::{Error, Result};
use crate::graph::{Graph, SplitMasks};
use crate::kernels::{log_softmax_nll, AdamState, DenseMatrix, Param};
use crate::layers::GateGradient;

/// Most p̂ traces recorded per run.
pub const MAX_TRACED_NODES: usize = 8;

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Fraction of masked rows whose argmax equals the label.
pub fn accuracy(logits: &DenseMatrix, labels: &[usize], mask: &[bool]) -> Result<f64> {
    let total = mask.iter().filter(|&&m| m).count();
    if total == 0 {
        return Err(Error::InvalidArgument("accuracy over an empty mask".into()));
    }
    let hits = (0..logits.rows())
        .filter(|&i| mask[i] && argmax(logits.row(i)) == labels[i])
        .count();
    Ok(hits as f64 / total as f64)
}

/// A full-batch node classifier with hand-written gradients.
pub trait Classifier: Clone {
    type Pass;

    fn forward_pass(
        &self,
        g: &Graph,
        training: bool,
        counter: u64,
    ) -> Result<(DenseMatrix, Self::Pass)>;

    fn backward_pass(
        &mut self,
        g: &Graph,
        pass: &Self::Pass,
        grad_logits: &DenseMatrix,
    ) -> Result<()>;

    fn parameters_mut(&mut self) -> Vec<&mut Param>;

    fn parameter_bytes(&self) -> usize;

    fn pass_bytes(pass: &Self::Pass) -> usize;

    /// `(layer, node, p̂)` samples for the traced nodes.
    fn trace(_pass: &Self::Pass, _nodes: &[usize]) -> Vec<(usize, usize, f64)> {
        Vec::new()
    }
}

impl Classifier for Model {
    type Pass = ForwardPass;

    fn forward_pass(
        &self,
        g: &Graph,
        training: bool,
        counter: u64,
    ) -> Result<(DenseMatrix, ForwardPass)> {
        let pass = self.forward(g, training, counter)?;
        Ok((pass.logits.clone(), pass))
    }

    fn backward_pass(&mut self, g: &Graph, pass: &ForwardPass, grad: &DenseMatrix) -> Result<()> {
        self.backward(g, pass, grad, GateGradient::StraightThrough)
    }

    fn parameters_mut(&mut self) -> Vec<&mut Param> {
        self.params_mut()
    }

    fn parameter_bytes(&self) -> usize {
        self.param_bytes()
    }

    fn pass_bytes(pass: &ForwardPass) -> usize {
        pass.nbytes()
    }

    fn trace(pass: &ForwardPass, nodes: &[usize]) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (l, layer) in pass.layers.iter().enumerate() {
            for &v in nodes {
                out.push((l, v, layer.phat()[v]));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub patience: usize,
    /// Node ids whose p̂ is recorded after every epoch (at most
    /// [`MAX_TRACED_NODES`]).
    pub trace_nodes: Vec<usize>,
}

impl FitOptions {
    pub fn from_config(cfg: &super::ModelConfig) -> Self {
        Self {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            epochs: cfg.epochs,
            patience: cfg.patience,
            trace_nodes: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhatSample {
    pub epoch: usize,
    pub layer: usize,
    pub node: usize,
    pub phat: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// Accuracy of the best-validation weights on the test mask.
    pub test_acc: f64,
    /// Per-layer fraction of nodes with `p̂ ≥ T` (best weights).
    pub layer_selection: Vec<f64>,
    /// Per-layer test accuracy of each layer's own output used as logits
    /// (parallel stacking only).
    pub layer_accuracy: Vec<f64>,
    pub wall_ms: f64,
    /// Bytes of parameters, gradients, optimiser state and the largest
    /// forward cache.
    pub peak_bytes: usize,
    pub phat_trace: Vec<PhatSample>,
}

impl TrainReport {
    pub fn mean_epoch_ms(&self) -> f64 {
        if self.epochs.is_empty() {
            0.0
        } else {
            self.wall_ms / self.epochs.len() as f64
        }
    }

    /// `epoch,train_loss,train_acc,val_acc` rows with a header.
    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_acc,val_acc\n");
        for r in &self.epochs {
            s.push_str(&format!(
                "{},{:?},{:?},{:?}\n",
                r.epoch, r.train_loss, r.train_acc, r.val_acc
            ));
        }
        s
    }
}

/// Full-batch training with Adam and early stopping on validation accuracy.
///
/// Training stops once `patience` consecutive epochs fail to beat the best
/// validation accuracy; the best weights are restored before the test
/// evaluation. Returns the report with the diagnostic fields empty.
pub fn fit<C: Classifier>(
    model: &mut C,
    g: &Graph,
    masks: &SplitMasks,
    opts: &FitOptions,
) -> Result<TrainReport> {
    masks.validate(g.num_nodes())?;
    if SplitMasks::count(&masks.train) == 0 || SplitMasks::count(&masks.val) == 0 {
        return Err(Error::InvalidArgument(
            "empty train or validation mask".into(),
        ));
    }
    if opts.trace_nodes.len() > MAX_TRACED_NODES {
        return Err(Error::InvalidArgument(format!(
            "at most {MAX_TRACED_NODES} traced nodes"
        )));
    }
    if let Some(&v) = opts.trace_nodes.iter().find(|&&v| v >= g.num_nodes()) {
        return Err(Error::InvalidArgument(format!(
            "traced node {v} out of range"
        )));
    }

    let start = Instant::now();
    let labels = g.labels();
    let mut adam = AdamState::new(opts.lr, opts.weight_decay);
    let mut best = model.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut epochs = Vec::new();
    let mut trace = Vec::new();
    let mut peak_pass = 0usize;

    for epoch in 0..opts.epochs {
        for p in model.parameters_mut() {
            p.zero_grad();
        }
        let (logits, pass) = model.forward_pass(g, true, epoch as u64)?;
        peak_pass = peak_pass.max(C::pass_bytes(&pass));
        let (train_loss, grad) = log_softmax_nll(&logits, labels, &masks.train)?;
        model.backward_pass(g, &pass, &grad)?;
        drop(pass);
        adam.step(&mut model.parameters_mut());

        let (eval_logits, eval_pass) = model.forward_pass(g, false, 0)?;
        let train_acc = accuracy(&eval_logits, labels, &masks.train)?;
        let val_acc = accuracy(&eval_logits, labels, &masks.val)?;
        for (layer, node, phat) in C::trace(&eval_pass, &opts.trace_nodes) {
            trace.push(PhatSample {
                epoch,
                layer,
                node,
                phat,
            });
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            train_acc,
            val_acc,
        });

        if val_acc > best_val {
            best_val = val_acc;
            best_epoch = epoch;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > opts.patience {
                break;
            }
        }
    }
    if !epochs.is_empty() {
        *model = best;
    }
    let (logits, _) = model.forward_pass(g, false, 0)?;
    let test_acc = if SplitMasks::count(&masks.test) > 0 {
        accuracy(&logits, labels, &masks.test)?
    } else {
        f64::NAN
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;

    Ok(TrainReport {
        epochs,
        best_epoch,
        best_val_acc: best_val,
        test_acc,
        layer_selection: Vec::new(),
        layer_accuracy: Vec::new(),
        wall_ms,
        peak_bytes: model.parameter_bytes() + peak_pass,
        phat_trace: trace,
    })
}

/// Per-layer selection fractions and standalone accuracies on `mask`.
pub fn layer_report(model: &Model, g: &Graph, mask: &[bool]) -> Result<(Vec<f64>, Vec<f64>)> {
    let pass = model.forward(g, false, 0)?;
    let selection = pass.diags().iter().map(|d| d.selection_fraction).collect();
    let standalone = match model.config.stacking {
        super::Stacking::Parallel if mask.iter().any(|&m| m) => pass
            .outputs
            .iter()
            .map(|h| accuracy(h, g.labels(), mask))
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    Ok((selection, standalone))
}

/// Trains `model` with the optimiser settings from its config.
pub fn train(model: &mut Model, g: &Graph, masks: &SplitMasks) -> Result<TrainReport> {
    train_traced(model, g, masks, &[])
}

/// [`train`] that also records p̂ for up to [`MAX_TRACED_NODES`] nodes.
pub fn train_traced(
    model: &mut Model,
    g: &Graph,
    masks: &SplitMasks,
    trace_nodes: &[usize],
) -> Result<TrainReport> {
    let mut opts = FitOptions::from_config(&model.config);
    opts.trace_nodes = trace_nodes.to_vec();
    let mut report = fit(model, g, masks, &opts)?;
    let (selection, standalone) = layer_report(model, g, &masks.test)?;
    report.layer_selection = selection;
    report.layer_accuracy = standalone;
    Ok(report)
}

/// Evaluation-mode accuracy of `model` on `mask`.
pub fn evaluate(model: &Model, g: &Graph, mask: &[bool]) -> Result<f64> {
    let pass = model.forward(g, false, 0)?;
    accuracy(&pass.logits, g.labels(), mask)
}
