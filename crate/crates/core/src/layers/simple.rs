use super::gate::{apply_gate, apply_gate_backward, selection_fraction, sensitivity_with_sum};
use super::{GateGradient, GateMode, LayerDiag};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernels::{
    concat_dot, logistic, logistic_grad, matmul, matmul_nt, matmul_tn, neighbor_sum,
    neighbor_sum_backward, Activation, DenseMatrix, Param,
};

/// Parameters of one selective-propagation layer.
///
/// `transform` is F′×F, `sensitivity` is 1×F′ and `propagation` is 1×2F′.
/// There are no bias terms.
#[derive(Clone, Debug, PartialEq)]
pub struct SimpleLayerParams {
    pub transform: Param,
    pub sensitivity: Param,
    pub propagation: Param,
    pub threshold: f64,
}

impl SimpleLayerParams {
    pub fn zeros(in_dim: usize, out_dim: usize, threshold: f64) -> Self {
        Self {
            transform: Param::new(DenseMatrix::zeros(out_dim, in_dim)),
            sensitivity: Param::new(DenseMatrix::zeros(1, out_dim)),
            propagation: Param::new(DenseMatrix::zeros(1, 2 * out_dim)),
            threshold,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.transform.value.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.transform.value.rows()
    }

    pub fn params(&self) -> [&Param; 3] {
        [&self.transform, &self.sensitivity, &self.propagation]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 3] {
        [
            &mut self.transform,
            &mut self.sensitivity,
            &mut self.propagation,
        ]
    }

    fn check(&self) -> Result<()> {
        let f = self.out_dim();
        if self.sensitivity.shape() != (1, f) || self.propagation.shape() != (1, 2 * f) {
            return Err(Error::shape(
                "simple_layer",
                format!(
                    "W {:?}, W0 {:?}, W1 {:?}",
                    self.transform.shape(),
                    self.sensitivity.shape(),
                    self.propagation.shape()
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidArgument(format!(
                "threshold must be in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// `α_i = σ(W1 · (u_i ‖ s_i))`.
fn propagation_weights(w1: &Param, u: &DenseMatrix, s: &DenseMatrix) -> Vec<f64> {
    let w = w1.value.row(0);
    (0..u.rows())
        .map(|i| logistic(concat_dot(w, u.row(i), s.row(i))))
        .collect()
}

/// Selective aggregation.
///
/// With `u = Σ_{j∈N(i)} S_j·WX_j` and `s = Σ_{j∈N(i)} WX_j`, returns
/// `A_i = Σ_{j∈N(i)} α_j·S_j·WX_j` and the per-source weights `α`.
pub fn selective_aggregate(
    g: &Graph,
    wx: &DenseMatrix,
    gate: &[f64],
    w1: &Param,
) -> Result<(DenseMatrix, Vec<f64>)> {
    if w1.shape() != (1, 2 * wx.cols()) {
        return Err(Error::shape(
            "selective_aggregate",
            format!("W1 is {:?} for F′={}", w1.shape(), wx.cols()),
        ));
    }
    let s = neighbor_sum(g, wx, None)?;
    let u = neighbor_sum(g, wx, Some(gate))?;
    let alpha = propagation_weights(w1, &u, &s);
    let beta: Vec<f64> = alpha.iter().zip(gate).map(|(a, s)| a * s).collect();
    Ok((neighbor_sum(g, wx, Some(&beta))?, alpha))
}

/// Everything the simple-layer backward pass needs.
#[derive(Clone, Debug)]
pub struct SimpleForward {
    pub activation: Activation,
    pub mode: GateMode,
    pub threshold: f64,
    pub wx: DenseMatrix,
    pub neighbor_sum: DenseMatrix,
    pub selected_sum: DenseMatrix,
    pub aggregate: DenseMatrix,
    pub phat: Vec<f64>,
    pub gate: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl SimpleForward {
    pub fn diag(&self) -> LayerDiag {
        LayerDiag {
            selection_fraction: selection_fraction(&self.phat, self.threshold),
            phat: self.phat.clone(),
            gate: self.gate.clone(),
            alpha: self.alpha.clone(),
        }
    }

    pub fn nbytes(&self) -> usize {
        let vecs = 4 * self.phat.len() * std::mem::size_of::<f64>();
        self.wx.nbytes()
            + self.neighbor_sum.nbytes()
            + self.selected_sum.nbytes()
            + self.aggregate.nbytes()
            + vecs
    }
}

/// `H_i = act(WX_i) + act(A_i)`.
pub fn simple_layer_forward(
    g: &Graph,
    x: &DenseMatrix,
    p: &SimpleLayerParams,
    mode: GateMode,
    activation: Activation,
) -> Result<(DenseMatrix, SimpleForward)> {
    p.check()?;
    if x.cols() != p.in_dim() {
        return Err(Error::shape(
            "simple_layer_forward",
            format!("input has {} features, W expects {}", x.cols(), p.in_dim()),
        ));
    }
    let wx = matmul_nt(x, &p.transform.value)?;
    let (phat, s) = sensitivity_with_sum(g, &wx, &p.sensitivity)?;
    let gate = apply_gate(&phat, p.threshold, mode);
    let u = neighbor_sum(g, &wx, Some(&gate))?;
    let alpha = propagation_weights(&p.propagation, &u, &s);
    let beta: Vec<f64> = alpha.iter().zip(&gate).map(|(a, s)| a * s).collect();
    let aggregate = neighbor_sum(g, &wx, Some(&beta))?;

    let h = activation
        .forward(&wx)
        .add(&activation.forward(&aggregate))?;
    Ok((
        h,
        SimpleForward {
            activation,
            mode,
            threshold: p.threshold,
            wx,
            neighbor_sum: s,
            selected_sum: u,
            aggregate,
            phat,
            gate,
            alpha,
            beta,
        },
    ))
}

/// Accumulates parameter gradients for upstream `grad_h` into `p` and, when
/// `input_grad` is set, returns the gradient w.r.t. the layer input.
pub fn simple_layer_backward(
    g: &Graph,
    x: &DenseMatrix,
    p: &mut SimpleLayerParams,
    fwd: &SimpleForward,
    grad_h: &DenseMatrix,
    rule: GateGradient,
    input_grad: bool,
) -> Result<Option<DenseMatrix>> {
    let f = p.out_dim();
    let n = g.num_nodes();
    let act = fwd.activation;

    let mut d_wx = act.backward(&fwd.wx, grad_h);
    let d_agg = act.backward(&fwd.aggregate, grad_h);

    let (g_wx, g_beta) = neighbor_sum_backward(g, &fwd.wx, Some(&fwd.beta), &d_agg)?;
    d_wx.add_assign(&g_wx)?;
    let g_beta = g_beta.unwrap_or_default();

    let mut d_gate = vec![0.0; n];
    let mut d_u = DenseMatrix::zeros(n, f);
    let mut d_s = DenseMatrix::zeros(n, f);
    {
        let w1 = p.propagation.value.row(0).to_vec();
        let w1_grad = p.propagation.grad.row_mut(0);
        for i in 0..n {
            d_gate[i] = g_beta[i] * fwd.alpha[i];
            let dz = g_beta[i] * fwd.gate[i] * logistic_grad(fwd.alpha[i]);
            if dz == 0.0 {
                continue;
            }
            let (ui, si) = (fwd.selected_sum.row(i), fwd.neighbor_sum.row(i));
            for k in 0..f {
                w1_grad[k] += dz * ui[k];
                w1_grad[f + k] += dz * si[k];
            }
            for (d, &w) in d_u.row_mut(i).iter_mut().zip(&w1[..f]) {
                *d = dz * w;
            }
            for (d, &w) in d_s.row_mut(i).iter_mut().zip(&w1[f..]) {
                *d = dz * w;
            }
        }
    }

    let (g_wx, g_gate) = neighbor_sum_backward(g, &fwd.wx, Some(&fwd.gate), &d_u)?;
    d_wx.add_assign(&g_wx)?;
    for (d, v) in d_gate.iter_mut().zip(g_gate.unwrap_or_default()) {
        *d += v;
    }

    let d_phat = apply_gate_backward(&d_gate, fwd.mode, rule);
    {
        let w0 = p.sensitivity.value.row(0).to_vec();
        let w0_grad = p.sensitivity.grad.row_mut(0);
        for i in 0..n {
            let dz = d_phat[i] * logistic_grad(fwd.phat[i]);
            if dz == 0.0 {
                continue;
            }
            for (gk, &sk) in w0_grad.iter_mut().zip(fwd.neighbor_sum.row(i)) {
                *gk += dz * sk;
            }
            for (d, &w) in d_s.row_mut(i).iter_mut().zip(&w0) {
                *d += dz * w;
            }
        }
    }
    let (g_wx, _) = neighbor_sum_backward(g, &fwd.wx, None, &d_s)?;
    d_wx.add_assign(&g_wx)?;

    p.transform.grad.add_assign(&matmul_tn(&d_wx, x)?)?;
    if input_grad {
        Ok(Some(matmul(&d_wx, &p.transform.value)?))
    } else {
        Ok(None)
    }
}
