//! Finite-difference verification of the model gradients.
//!
//! Each trial draws a small random graph, a random model and random labels,
//! and compares every analytic parameter gradient of the full-batch loss
//! with a central difference. Trials cycle through one-hop and two-hop
//! layers and both stacking modes.

use std::fmt;
use std::str::FromStr;
use web_time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernels::{log_softmax_nll, DenseMatrix};
use crate::layers::{GateGradient, GateMode};
use crate::model::{init_model, LayerForward, Model, ModelConfig, Stacking};
use crate::rng::{self, Purpose};

/// Denominator floor of the relative error.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMode {
    /// Gate = p̂; every parameter is checked.
    Soft,
    /// Hard gate with the gate pattern held fixed; coordinates whose
    /// perturbation flips a gate are skipped.
    HardFrozen,
}

impl fmt::Display for CheckMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckMode::Soft => "soft",
            CheckMode::HardFrozen => "hard-frozen",
        })
    }
}

impl FromStr for CheckMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(CheckMode::Soft),
            "hard-frozen" => Ok(CheckMode::HardFrozen),
            _ => Err(Error::Config(format!(
                "mode must be soft|hard-frozen, got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckOptions {
    pub mode: CheckMode,
    pub nodes: usize,
    pub trials: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    pub layers: usize,
    pub step: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Scales the analytic gradient of the first transform matrix; a
    /// negative control for the checker itself.
    pub corrupt: Option<f64>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            mode: CheckMode::Soft,
            nodes: 6,
            trials: 20,
            in_dim: 4,
            out_dim: 3,
            layers: 2,
            step: 1e-5,
            tolerance: 1e-4,
            seed: 0,
            corrupt: None,
        }
    }
}

/// Location of one checked gradient entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Coordinate {
    pub trial: usize,
    pub depth: usize,
    pub stacking: Stacking,
    pub layer: usize,
    pub param: &'static str,
    pub index: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "trial {} (depth {}, {}) layer {} {}[{},{}]: analytic {:e}, numeric {:e}",
            self.trial,
            self.depth,
            self.stacking,
            self.layer,
            self.param,
            self.index.0,
            self.index.1,
            self.analytic,
            self.numeric
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub max_rel_err: f64,
    pub worst: Option<Coordinate>,
    pub checked: usize,
    /// Coordinates skipped because a kink or gate flip lies within `±h`.
    pub skipped: usize,
    pub elapsed_ms: f64,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tolerance
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERR_FLOOR)
}

/// Erdős–Rényi graph with standard-normal features and uniform labels.
pub fn random_graph(
    n: usize,
    p: f64,
    feat_dim: usize,
    classes: usize,
    rng: &mut impl Rng,
) -> Result<Graph> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let x = DenseMatrix::from_fn(n, feat_dim, |_, _| rng.sample(StandardNormal));
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    Graph::from_edges(n, &edges, x, labels, classes)
}

const PARAM_NAMES: [[&str; 4]; 2] = [["W", "W0", "W1", ""], ["W", "W0", "W2", "W3"]];

/// Everything that must not change between `θ ± h` for the central
/// difference to see a smooth function: gate pattern and relu signs.
fn pattern(m: &Model, g: &Graph) -> Result<Vec<bool>> {
    let pass = m.forward(g, false, 0)?;
    let mut bits = Vec::new();
    for layer in &pass.layers {
        let d = layer.diag();
        bits.extend(d.gate.iter().map(|&s| s > 0.0));
        if let LayerForward::Simple(f) = layer {
            bits.extend(f.wx.data().iter().map(|&v| v > 0.0));
            bits.extend(f.aggregate.data().iter().map(|&v| v > 0.0));
        }
    }
    Ok(bits)
}

fn loss(m: &Model, g: &Graph, mask: &[bool]) -> Result<f64> {
    let pass = m.forward(g, false, 0)?;
    Ok(log_softmax_nll(&pass.logits, g.labels(), mask)?.0)
}

pub fn run_gradcheck(opts: &GradcheckOptions) -> Result<GradcheckReport> {
    if opts.nodes == 0 || opts.nodes > 16 {
        return Err(Error::InvalidArgument(
            "gradcheck needs 1..=16 nodes".into(),
        ));
    }
    if opts.trials == 0 {
        return Err(Error::InvalidArgument(
            "gradcheck needs at least one trial".into(),
        ));
    }
    let start = Instant::now();
    let (gate_mode, rule, threshold) = match opts.mode {
        CheckMode::Soft => (GateMode::Soft, GateGradient::StraightThrough, 0.4),
        CheckMode::HardFrozen => (GateMode::Hard, GateGradient::Frozen, 0.5),
    };
    let h = opts.step;
    let mut report = GradcheckReport {
        max_rel_err: 0.0,
        worst: None,
        checked: 0,
        skipped: 0,
        elapsed_ms: 0.0,
        tolerance: opts.tolerance,
    };
    for trial in 0..opts.trials {
        let mut rng = rng::stream(opts.seed, Purpose::Check, trial as u64);
        let depth = if trial % 2 == 0 { 1 } else { 2 };
        let stacking = if trial % 4 < 2 {
            Stacking::Parallel
        } else {
            Stacking::Sequential
        };
        let g = random_graph(opts.nodes, 0.4, opts.in_dim, opts.out_dim, &mut rng)?;
        let mask = vec![true; opts.nodes];
        let cfg = ModelConfig {
            num_layers: opts.layers,
            out_dim: Some(opts.out_dim),
            threshold,
            gate_mode,
            depth,
            stacking,
            dropout: 0.0,
            seed: rng.random(),
            ..ModelConfig::default()
        };
        let mut model = init_model(&cfg, opts.in_dim, opts.out_dim)?;
        // Larger sensitivity weights spread p̂ away from 0.5 so that hard
        // gates take both values.
        for layer in &mut model.layers {
            let w0 = &mut layer.params_mut()[1].value;
            for v in w0.data_mut() {
                *v *= 4.0;
            }
        }

        let pass = model.forward(&g, false, 0)?;
        let (_, grad) = log_softmax_nll(&pass.logits, g.labels(), &mask)?;
        model.zero_grad();
        model.backward(&g, &pass, &grad, rule)?;
        if let Some(k) = opts.corrupt {
            let w = &mut model.layers[0].params_mut()[0].grad;
            *w = w.scale(k);
        }
        let analytic: Vec<Vec<DenseMatrix>> = model
            .layers
            .iter()
            .map(|l| l.params().iter().map(|p| p.grad.clone()).collect())
            .collect();

        let mut probe = model.clone();
        for (l, grads) in analytic.iter().enumerate() {
            for (k, ga) in grads.iter().enumerate() {
                for r in 0..ga.rows() {
                    for c in 0..ga.cols() {
                        let orig = probe.layers[l].params()[k].value[(r, c)];
                        probe.layers[l].params_mut()[k].value[(r, c)] = orig + h;
                        let (up, up_pat) = (loss(&probe, &g, &mask)?, pattern(&probe, &g)?);
                        probe.layers[l].params_mut()[k].value[(r, c)] = orig - h;
                        let (down, down_pat) = (loss(&probe, &g, &mask)?, pattern(&probe, &g)?);
                        probe.layers[l].params_mut()[k].value[(r, c)] = orig;
                        if up_pat != down_pat {
                            report.skipped += 1;
                            continue;
                        }
                        let numeric = (up - down) / (2.0 * h);
                        let a = ga[(r, c)];
                        let e = rel_err(a, numeric);
                        report.checked += 1;
                        if e > report.max_rel_err || report.worst.is_none() {
                            report.max_rel_err = report.max_rel_err.max(e);
                            report.worst = Some(Coordinate {
                                trial,
                                depth,
                                stacking,
                                layer: l,
                                param: PARAM_NAMES[(depth > 1) as usize][k],
                                index: (r, c),
                                analytic: a,
                                numeric,
                            });
                        }
                    }
                }
            }
        }
    }
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}
