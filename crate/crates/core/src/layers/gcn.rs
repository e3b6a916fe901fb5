use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernels::{matmul, matmul_nt, matmul_tn, Activation, DenseMatrix, Param};

/// `D̂^(−1/2)(A+I)D̂^(−1/2) · h`, with `D̂` the degree matrix of `A+I`.
///
/// The operator is symmetric, so it is also its own backward.
pub fn gcn_propagate(g: &Graph, h: &DenseMatrix) -> Result<DenseMatrix> {
    if h.rows() != g.num_nodes() {
        return Err(Error::shape(
            "gcn_propagate",
            format!("{} rows for {} nodes", h.rows(), g.num_nodes()),
        ));
    }
    let inv_sqrt: Vec<f64> = (0..g.num_nodes())
        .map(|i| 1.0 / ((g.degree(i) + 1) as f64).sqrt())
        .collect();
    let mut out = DenseMatrix::zeros(h.rows(), h.cols());
    for i in 0..g.num_nodes() {
        let di = inv_sqrt[i];
        let row = out.row_mut(i);
        for (o, &v) in row.iter_mut().zip(h.row(i)) {
            *o = di * di * v;
        }
        for &j in g.neighbors(i) {
            let c = di * inv_sqrt[j];
            for (o, &v) in row.iter_mut().zip(h.row(j)) {
                *o += c * v;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct GcnForward {
    pub activation: Activation,
    pub pre: DenseMatrix,
}

/// One renormalised graph-convolution layer: `act(Â · X · Wgᵀ)`.
pub fn gcn_baseline_forward(
    g: &Graph,
    x: &DenseMatrix,
    wg: &Param,
    activation: Activation,
) -> Result<(DenseMatrix, GcnForward)> {
    if x.cols() != wg.value.cols() {
        return Err(Error::shape(
            "gcn_baseline_forward",
            format!("input has {} features, Wg is {:?}", x.cols(), wg.shape()),
        ));
    }
    let pre = gcn_propagate(g, &matmul_nt(x, &wg.value)?)?;
    Ok((activation.forward(&pre), GcnForward { activation, pre }))
}

pub fn gcn_baseline_backward(
    g: &Graph,
    x: &DenseMatrix,
    wg: &mut Param,
    fwd: &GcnForward,
    grad_h: &DenseMatrix,
    input_grad: bool,
) -> Result<Option<DenseMatrix>> {
    let d_pre = fwd.activation.backward(&fwd.pre, grad_h);
    let d_xw = gcn_propagate(g, &d_pre)?;
    wg.grad.add_assign(&matmul_tn(&d_xw, x)?)?;
    if input_grad {
        Ok(Some(matmul(&d_xw, &wg.value)?))
    } else {
        Ok(None)
    }
}
