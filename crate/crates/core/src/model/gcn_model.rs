use super::train::Classifier;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernels::{dropout, Activation, DenseMatrix, Param};
use crate::layers::{gcn_baseline_backward, gcn_baseline_forward, GcnForward};
use crate::rng::{self, Purpose};

/// Hyperparameters of the two-layer convolutional baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for GcnConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            dropout: 0.5,
            lr: 0.01,
            weight_decay: 5e-4,
            epochs: 500,
            patience: 50,
            seed: 0,
        }
    }
}

/// `Â·relu(Â·X·W1ᵀ)·W2ᵀ`, with dropout on the hidden layer.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnModel {
    pub config: GcnConfig,
    pub hidden: Param,
    pub output: Param,
}

#[derive(Clone, Debug)]
pub struct GcnPass {
    first: GcnForward,
    second: GcnForward,
    hidden_dropped: DenseMatrix,
    mask: Option<DenseMatrix>,
}

impl GcnModel {
    pub fn new(cfg: &GcnConfig, in_dim: usize, num_classes: usize) -> Result<Self> {
        if cfg.hidden == 0 || in_dim == 0 || num_classes == 0 {
            return Err(Error::InvalidArgument(
                "GCN dimensions must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&cfg.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0, 1), got {}",
                cfg.dropout
            )));
        }
        let mut rng = rng::stream(cfg.seed, Purpose::Init, 1 << 32);
        let mut glorot = |rows: usize, cols: usize| {
            let a = (6.0 / (rows + cols) as f64).sqrt();
            Param::new(DenseMatrix::from_fn(rows, cols, |_, _| {
                rand::Rng::random_range(&mut rng, -a..=a)
            }))
        };
        let hidden = glorot(cfg.hidden, in_dim);
        let output = glorot(num_classes, cfg.hidden);
        Ok(Self {
            config: cfg.clone(),
            hidden,
            output,
        })
    }

    pub fn num_parameters(&self) -> usize {
        self.hidden.len() + self.output.len()
    }

    pub fn forward(
        &self,
        g: &Graph,
        training: bool,
        counter: u64,
    ) -> Result<(DenseMatrix, GcnPass)> {
        let (h, first) = gcn_baseline_forward(g, g.features(), &self.hidden, Activation::Relu)?;
        let (hidden_dropped, mask) = dropout(
            &h,
            self.config.dropout,
            self.config.seed ^ 0x6763_6e00,
            counter,
            training,
        )?;
        let (logits, second) =
            gcn_baseline_forward(g, &hidden_dropped, &self.output, Activation::Identity)?;
        Ok((
            logits,
            GcnPass {
                first,
                second,
                hidden_dropped,
                mask,
            },
        ))
    }
}

impl Classifier for GcnModel {
    type Pass = GcnPass;

    fn forward_pass(
        &self,
        g: &Graph,
        training: bool,
        counter: u64,
    ) -> Result<(DenseMatrix, GcnPass)> {
        self.forward(g, training, counter)
    }

    fn backward_pass(&mut self, g: &Graph, pass: &GcnPass, grad: &DenseMatrix) -> Result<()> {
        let d_hidden = gcn_baseline_backward(
            g,
            &pass.hidden_dropped,
            &mut self.output,
            &pass.second,
            grad,
            true,
        )?
        .expect("input gradient requested");
        let d_hidden = match &pass.mask {
            Some(m) => d_hidden.hadamard(m)?,
            None => d_hidden,
        };
        gcn_baseline_backward(
            g,
            g.features(),
            &mut self.hidden,
            &pass.first,
            &d_hidden,
            false,
        )?;
        Ok(())
    }

    fn parameters_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.hidden, &mut self.output]
    }

    fn parameter_bytes(&self) -> usize {
        4 * (self.hidden.value.nbytes() + self.output.value.nbytes())
    }

    fn pass_bytes(pass: &GcnPass) -> usize {
        pass.first.pre.nbytes()
            + pass.second.pre.nbytes()
            + pass.hidden_dropped.nbytes()
            + pass.mask.as_ref().map_or(0, DenseMatrix::nbytes)
    }
}
