use super::frontier::hop_depths;
use super::gate::{apply_gate, apply_gate_backward, selection_fraction, sensitivity_with_sum};
use super::{GateGradient, GateMode, LayerDiag};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernels::{
    concat_dot, dot, logistic, logistic_grad, matmul, matmul_nt, matmul_tn, neighbor_sum,
    neighbor_sum_backward, DenseMatrix, Param,
};

/// Parameters of the multi-hop sequential layer.
///
/// `transform` is F′×F, `sensitivity` 1×F′, `depth_weight` 1×(F′+Q) and
/// `blend` 1×2F′. Requires `Q ≥ 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexLayerParams {
    pub transform: Param,
    pub sensitivity: Param,
    pub depth_weight: Param,
    pub blend: Param,
    pub threshold: f64,
    pub depth: usize,
}

impl ComplexLayerParams {
    pub fn zeros(in_dim: usize, out_dim: usize, threshold: f64, depth: usize) -> Self {
        Self {
            transform: Param::new(DenseMatrix::zeros(out_dim, in_dim)),
            sensitivity: Param::new(DenseMatrix::zeros(1, out_dim)),
            depth_weight: Param::new(DenseMatrix::zeros(1, out_dim + depth)),
            blend: Param::new(DenseMatrix::zeros(1, 2 * out_dim)),
            threshold,
            depth,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.transform.value.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.transform.value.rows()
    }

    pub fn params(&self) -> [&Param; 4] {
        [
            &self.transform,
            &self.sensitivity,
            &self.depth_weight,
            &self.blend,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Param; 4] {
        [
            &mut self.transform,
            &mut self.sensitivity,
            &mut self.depth_weight,
            &mut self.blend,
        ]
    }

    fn check(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::InvalidArgument(format!(
                "multi-hop layer needs depth >= 2, got {}",
                self.depth
            )));
        }
        let f = self.out_dim();
        if self.sensitivity.shape() != (1, f)
            || self.depth_weight.shape() != (1, f + self.depth)
            || self.blend.shape() != (1, 2 * f)
        {
            return Err(Error::shape(
                "complex_layer",
                format!(
                    "W {:?}, W0 {:?}, W2 {:?}, W3 {:?} with Q={}",
                    self.transform.shape(),
                    self.sensitivity.shape(),
                    self.depth_weight.shape(),
                    self.blend.shape(),
                    self.depth
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

#[derive(Clone, Debug)]
pub struct ComplexForward {
    pub mode: GateMode,
    pub threshold: f64,
    pub depth: usize,
    pub neighbor_sum: DenseMatrix,
    pub phat: Vec<f64>,
    pub gate: Vec<f64>,
    /// Hop distance from the selected set, capped at `Q − 1`.
    pub shell: Vec<Option<usize>>,
    /// `y⁽⁰⁾ … y⁽Q⁾`.
    pub states: Vec<DenseMatrix>,
    /// Raw `α⁽q⁾_i = σ(W2 · (y_i⁽q⁾ ‖ onehot(q)))`; at depth 0 computed for
    /// every node, at deeper levels only on the shell (0 elsewhere).
    pub alpha: Vec<Vec<f64>>,
    /// Effective propagation weights: `α⁽⁰⁾ ⊙ S` at depth 0 and `α⁽q⁾`
    /// restricted to shell `q` afterwards.
    pub weights: Vec<Vec<f64>>,
    pub blend: Vec<f64>,
}

impl ComplexForward {
    pub fn diag(&self) -> LayerDiag {
        LayerDiag {
            selection_fraction: selection_fraction(&self.phat, self.threshold),
            phat: self.phat.clone(),
            gate: self.gate.clone(),
            alpha: self.weights[0].clone(),
        }
    }

    pub fn nbytes(&self) -> usize {
        let n = self.phat.len();
        let vecs = (3 + 2 * self.depth) * n * std::mem::size_of::<f64>();
        self.neighbor_sum.nbytes()
            + self.states.iter().map(DenseMatrix::nbytes).sum::<usize>()
            + vecs
    }
}

/// Multi-hop layer: selected nodes propagate at depth 0, their exact
/// `q`-hop shell at depth `q`, and the result is blended with the
/// transformed input through a learned per-node coefficient:
///
/// `y⁽q+1⁾_i = y⁽q⁾_i + Σ_{j∈N(i)} w⁽q⁾_j · y⁽q⁾_j`,
/// `H_i = (1−c_i)·y⁽⁰⁾_i + c_i·y⁽Q⁾_i`, `c_i = σ(W3 · (y⁽Q⁾_i ‖ y⁽⁰⁾_i))`.
pub fn complex_layer_forward(
    g: &Graph,
    x: &DenseMatrix,
    p: &ComplexLayerParams,
    mode: GateMode,
) -> Result<(DenseMatrix, ComplexForward)> {
    p.check()?;
    if x.cols() != p.in_dim() {
        return Err(Error::shape(
            "complex_layer_forward",
            format!("input has {} features, W expects {}", x.cols(), p.in_dim()),
        ));
    }
    let y0 = matmul_nt(x, &p.transform.value)?;
    let (phat, s) = sensitivity_with_sum(g, &y0, &p.sensitivity)?;
    let gate = apply_gate(&phat, p.threshold, mode);
    propagate(g, y0, p, mode, s, phat, gate)
}

/// Multi-hop propagation of `y⁽⁰⁾ = X·Wᵀ` from an explicit selection,
/// bypassing the sensitivity gate. Returns `H`.
pub fn complex_propagate_from(
    g: &Graph,
    x: &DenseMatrix,
    p: &ComplexLayerParams,
    selected: &[usize],
) -> Result<DenseMatrix> {
    p.check()?;
    let y0 = matmul_nt(x, &p.transform.value)?;
    let (phat, s) = sensitivity_with_sum(g, &y0, &p.sensitivity)?;
    let mut gate = vec![0.0; g.num_nodes()];
    for &v in selected {
        gate[v] = 1.0;
    }
    Ok(propagate(g, y0, p, GateMode::Hard, s, phat, gate)?.0)
}

fn propagate(
    g: &Graph,
    y0: DenseMatrix,
    p: &ComplexLayerParams,
    mode: GateMode,
    s: DenseMatrix,
    phat: Vec<f64>,
    gate: Vec<f64>,
) -> Result<(DenseMatrix, ComplexForward)> {
    let f = p.out_dim();
    let depth = p.depth;
    let n = g.num_nodes();
    let selected: Vec<usize> = (0..n).filter(|&i| gate[i] > 0.0).collect();
    let shell = hop_depths(g, &selected, depth - 1);

    let w2 = p.depth_weight.value.row(0);
    let mut states = vec![y0];
    let mut alpha = Vec::with_capacity(depth);
    let mut weights = Vec::with_capacity(depth);
    for q in 0..depth {
        let y = &states[q];
        let a: Vec<f64> = (0..n)
            .map(|i| {
                if q == 0 || shell[i] == Some(q) {
                    logistic(dot(&w2[..f], y.row(i)) + w2[f + q])
                } else {
                    0.0
                }
            })
            .collect();
        let w: Vec<f64> = if q == 0 {
            a.iter().zip(&gate).map(|(a, s)| a * s).collect()
        } else {
            a.clone()
        };
        let mut next = neighbor_sum(g, y, Some(&w))?;
        next.add_assign(y)?;
        alpha.push(a);
        weights.push(w);
        states.push(next);
    }

    let w3 = p.blend.value.row(0);
    let (y0, yq) = (&states[0], &states[depth]);
    let blend: Vec<f64> = (0..n)
        .map(|i| logistic(concat_dot(w3, yq.row(i), y0.row(i))))
        .collect();
    // (1−c)·y⁽⁰⁾ + c·y⁽Q⁾, written so that y⁽Q⁾ = y⁽⁰⁾ returns y⁽⁰⁾ exactly.
    let h = DenseMatrix::from_fn(n, f, |i, k| {
        y0[(i, k)] + blend[i] * (yq[(i, k)] - y0[(i, k)])
    });

    Ok((
        h,
        ComplexForward {
            mode,
            threshold: p.threshold,
            depth,
            neighbor_sum: s,
            phat,
            gate,
            shell,
            states,
            alpha,
            weights,
            blend,
        },
    ))
}

pub fn complex_layer_backward(
    g: &Graph,
    x: &DenseMatrix,
    p: &mut ComplexLayerParams,
    fwd: &ComplexForward,
    grad_h: &DenseMatrix,
    rule: GateGradient,
    input_grad: bool,
) -> Result<Option<DenseMatrix>> {
    let f = p.out_dim();
    let n = g.num_nodes();
    let depth = fwd.depth;
    let (y0, yq) = (&fwd.states[0], &fwd.states[depth]);

    // Blend.
    let mut d_top = DenseMatrix::zeros(n, f);
    let mut d_bottom = DenseMatrix::zeros(n, f);
    {
        let w3 = p.blend.value.row(0).to_vec();
        let w3_grad = p.blend.grad.row_mut(0);
        for i in 0..n {
            let gi = grad_h.row(i);
            let c = fwd.blend[i];
            let dc: f64 = (0..f).map(|k| gi[k] * (yq[(i, k)] - y0[(i, k)])).sum();
            let dz = dc * logistic_grad(c);
            for k in 0..f {
                w3_grad[k] += dz * yq[(i, k)];
                w3_grad[f + k] += dz * y0[(i, k)];
                d_top[(i, k)] = c * gi[k] + dz * w3[k];
                d_bottom[(i, k)] = (1.0 - c) * gi[k] + dz * w3[f + k];
            }
        }
    }

    // Unroll the depth recursion.
    let mut d_gate = vec![0.0; n];
    let mut d_next = d_top;
    {
        let w2 = p.depth_weight.value.row(0).to_vec();
        for q in (0..depth).rev() {
            let y = &fwd.states[q];
            let w = &fwd.weights[q];
            let (g_y, g_w) = neighbor_sum_backward(g, y, Some(w), &d_next)?;
            let g_w = g_w.unwrap_or_default();
            let mut d_y = d_next;
            d_y.add_assign(&g_y)?;
            if q == 0 {
                d_y.add_assign(&d_bottom)?;
            }
            let w2_grad = p.depth_weight.grad.row_mut(0);
            for i in 0..n {
                let a = fwd.alpha[q][i];
                let (d_a, on) = if q == 0 {
                    d_gate[i] = g_w[i] * a;
                    (g_w[i] * fwd.gate[i], true)
                } else {
                    (g_w[i], fwd.shell[i] == Some(q))
                };
                if !on {
                    continue;
                }
                let dz = d_a * logistic_grad(a);
                if dz == 0.0 {
                    continue;
                }
                for k in 0..f {
                    w2_grad[k] += dz * y[(i, k)];
                    d_y[(i, k)] += dz * w2[k];
                }
                w2_grad[f + q] += dz;
            }
            d_next = d_y;
        }
    }
    let mut d_y0 = d_next;

    // Sensitivity.
    let d_phat = apply_gate_backward(&d_gate, fwd.mode, rule);
    let mut d_s = DenseMatrix::zeros(n, f);
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
                *d = dz * w;
            }
        }
    }
    let (g_y0, _) = neighbor_sum_backward(g, y0, None, &d_s)?;
    d_y0.add_assign(&g_y0)?;

    p.transform.grad.add_assign(&matmul_tn(&d_y0, x)?)?;
    if input_grad {
        Ok(Some(matmul(&d_y0, &p.transform.value)?))
    } else {
        Ok(None)
    }
}
