use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernels::DenseMatrix;

fn check(op: &'static str, g: &Graph, h: &DenseMatrix, gate: Option<&[f64]>) -> Result<()> {
    if h.rows() != g.num_nodes() {
        return Err(Error::shape(
            op,
            format!("{} rows for {} nodes", h.rows(), g.num_nodes()),
        ));
    }
    if let Some(gate) = gate {
        if gate.len() != g.num_nodes() {
            return Err(Error::shape(
                op,
                format!("gate of length {} for {} nodes", gate.len(), g.num_nodes()),
            ));
        }
    }
    Ok(())
}

#[inline]
fn sum_row(g: &Graph, h: &DenseMatrix, gate: Option<&[f64]>, i: usize, out: &mut [f64]) {
    for &j in g.neighbors(i) {
        let hj = h.row(j);
        match gate {
            Some(gate) => {
                let w = gate[j];
                if w == 0.0 {
                    continue;
                }
                for (o, &v) in out.iter_mut().zip(hj) {
                    *o += w * v;
                }
            }
            None => {
                for (o, &v) in out.iter_mut().zip(hj) {
                    *o += v;
                }
            }
        }
    }
}

/// `out_i = Σ_{j∈N(i)} gate_j · h_j`, with `gate_j = 1` when no gate is given.
///
/// Rows are reduced in CSR order, so the result is bit-deterministic.
/// Skipping `gate_j = 0` terms cannot change the result because the rows of
/// `h` are finite.
pub fn neighbor_sum(g: &Graph, h: &DenseMatrix, gate: Option<&[f64]>) -> Result<DenseMatrix> {
    check("neighbor_sum", g, h, gate)?;
    let mut out = DenseMatrix::zeros(h.rows(), h.cols());
    for i in 0..g.num_nodes() {
        sum_row(g, h, gate, i, out.row_mut(i));
    }
    Ok(out)
}

/// Row-sharded [`neighbor_sum`]. Each output row is reduced by one worker in
/// the same CSR order, so results match the serial kernel.
#[cfg(feature = "parallel")]
pub fn neighbor_sum_par(g: &Graph, h: &DenseMatrix, gate: Option<&[f64]>) -> Result<DenseMatrix> {
    use rayon::prelude::*;

    check("neighbor_sum", g, h, gate)?;
    let cols = h.cols();
    let mut out = DenseMatrix::zeros(h.rows(), cols);
    if cols == 0 {
        return Ok(out);
    }
    out.data_mut()
        .par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, row)| sum_row(g, h, gate, i, row));
    Ok(out)
}

/// Gradients of [`neighbor_sum`] for an upstream gradient `upstream`.
///
/// Returns `grad_h` with `grad_h_j = gate_j · Σ_{i: j∈N(i)} G_i` and, when a
/// gate was used, `grad_gate_j = ⟨Σ_{i: j∈N(i)} G_i, h_j⟩`.
pub fn neighbor_sum_backward(
    g: &Graph,
    h: &DenseMatrix,
    gate: Option<&[f64]>,
    upstream: &DenseMatrix,
) -> Result<(DenseMatrix, Option<Vec<f64>>)> {
    check("neighbor_sum_backward", g, h, gate)?;
    if upstream.shape() != h.shape() {
        return Err(Error::shape(
            "neighbor_sum_backward",
            format!("upstream {:?} vs input {:?}", upstream.shape(), h.shape()),
        ));
    }
    let scattered = scatter_transpose(g, upstream);
    match gate {
        None => Ok((scattered, None)),
        Some(gate) => {
            let mut grad_h = scattered.clone();
            let mut grad_gate = vec![0.0; g.num_nodes()];
            for j in 0..g.num_nodes() {
                let sj = scattered.row(j);
                grad_gate[j] = super::dot(sj, h.row(j));
                grad_h.row_mut(j).iter_mut().for_each(|v| *v *= gate[j]);
            }
            Ok((grad_h, Some(grad_gate)))
        }
    }
}

/// `Adjᵀ · m`: row `j` accumulates every row `i` that lists `j` as a neighbor.
pub fn scatter_transpose(g: &Graph, m: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for i in 0..g.num_nodes() {
        let mi = m.row(i);
        for &j in g.neighbors(i) {
            for (o, &v) in out.row_mut(j).iter_mut().zip(mi) {
                *o += v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::matmul;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    pub(crate) fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
        let mut rng = stream(seed, Purpose::Check, 100);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        Graph::from_edges(n, &edges, DenseMatrix::zeros(n, 1), vec![0; n], 1).unwrap()
    }

    fn random_matrix(r: usize, c: usize, seed: u64) -> DenseMatrix {
        let mut rng = stream(seed, Purpose::Check, 101);
        DenseMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn dense_oracle(g: &Graph, h: &DenseMatrix, gate: &[f64]) -> DenseMatrix {
        let n = g.num_nodes();
        let adj = g.dense_adjacency();
        let d = DenseMatrix::from_fn(n, n, |i, j| if i == j { gate[i] } else { 0.0 });
        matmul(&matmul(&adj, &d).unwrap(), h).unwrap()
    }

    #[test]
    fn isolated_node_gets_zero_row() {
        let g = Graph::from_edges(3, &[(0, 1)], DenseMatrix::zeros(3, 1), vec![0; 3], 1).unwrap();
        let h = random_matrix(3, 2, 1);
        let out = neighbor_sum(&g, &h, None).unwrap();
        assert_eq!(out.row(2), &[0.0, 0.0]);
    }

    #[test]
    fn one_hot_rows_give_adjacency() {
        let g = Graph::from_edges(
            3,
            &[(0, 1), (1, 2)],
            DenseMatrix::zeros(3, 1),
            vec![0; 3],
            1,
        )
        .unwrap();
        let out = neighbor_sum(&g, &DenseMatrix::identity(3), None).unwrap();
        assert_eq!(out, g.dense_adjacency());
    }

    #[test]
    fn matches_dense_oracle_with_gate() {
        for seed in 0..20 {
            let g = random_graph(6, 0.5, seed);
            let h = random_matrix(6, 3, seed);
            let gate: Vec<f64> = random_matrix(6, 1, seed + 1000).into_vec();
            let fast = neighbor_sum(&g, &h, Some(&gate)).unwrap();
            assert!(fast.max_abs_diff(&dense_oracle(&g, &h, &gate)) < 1e-14);
        }
    }

    #[test]
    fn unit_gate_is_bitwise_ungated() {
        let g = random_graph(12, 0.3, 5);
        let h = random_matrix(12, 4, 5);
        let ones = vec![1.0; 12];
        assert_eq!(
            neighbor_sum(&g, &h, Some(&ones)).unwrap(),
            neighbor_sum(&g, &h, None).unwrap()
        );
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_serial() {
        let g = random_graph(40, 0.2, 8);
        let h = random_matrix(40, 5, 8);
        let gate = random_matrix(40, 1, 9).into_vec();
        let a = neighbor_sum(&g, &h, Some(&gate)).unwrap();
        let b = neighbor_sum_par(&g, &h, Some(&gate)).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let g = random_graph(7, 0.5, 3);
        let h = random_matrix(7, 3, 3);
        let gate = random_matrix(7, 1, 4).into_vec();
        let up = random_matrix(7, 3, 5);
        let loss = |h: &DenseMatrix, gate: &[f64]| {
            super::super::dot(neighbor_sum(&g, h, Some(gate)).unwrap().data(), up.data())
        };
        let (gh, gg) = neighbor_sum_backward(&g, &h, Some(&gate), &up).unwrap();
        let gg = gg.unwrap();
        let eps = 1e-6;
        for k in 0..h.data().len() {
            let mut p = h.clone();
            p.data_mut()[k] += eps;
            let mut m = h.clone();
            m.data_mut()[k] -= eps;
            let fd = (loss(&p, &gate) - loss(&m, &gate)) / (2.0 * eps);
            assert!((fd - gh.data()[k]).abs() < 1e-8);
        }
        for k in 0..gate.len() {
            let mut p = gate.clone();
            p[k] += eps;
            let mut m = gate.clone();
            m[k] -= eps;
            let fd = (loss(&h, &p) - loss(&h, &m)) / (2.0 * eps);
            assert!((fd - gg[k]).abs() < 1e-8);
        }
    }
}
