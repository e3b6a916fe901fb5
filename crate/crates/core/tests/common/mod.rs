//! Dense brute-force oracles. They read the graph only through `has_edge`
//! and accumulate in ascending neighbour order, so results must match the
//! CSR kernels bit for bit.
#![allow(dead_code)]

use nodeselect::graph::Graph;
use nodeselect::kernels::{logistic, Activation, DenseMatrix};
use nodeselect::layers::{ComplexLayerParams, GateMode, SimpleLayerParams};
use rand::Rng;
use rand_distr::StandardNormal;

pub type Rows = Vec<Vec<f64>>;

pub fn rows(m: &DenseMatrix) -> Rows {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn adjacency(g: &Graph) -> Vec<Vec<bool>> {
    let n = g.num_nodes();
    (0..n)
        .map(|i| (0..n).map(|j| g.has_edge(i, j)).collect())
        .collect()
}

pub fn neighbor_sum(adj: &[Vec<bool>], h: &Rows, gate: Option<&[f64]>) -> Rows {
    let f = h.first().map_or(0, Vec::len);
    (0..adj.len())
        .map(|i| {
            let mut acc = vec![0.0; f];
            for j in 0..adj.len() {
                if !adj[i][j] {
                    continue;
                }
                let w = gate.map_or(1.0, |g| g[j]);
                if w == 0.0 {
                    continue;
                }
                for c in 0..f {
                    acc[c] += w * h[j][c];
                }
            }
            acc
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn concat_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().chain(b).copied().collect();
    dot(w, &ab)
}

/// `X · Wᵀ`.
pub fn transform(x: &Rows, w: &DenseMatrix) -> Rows {
    x.iter()
        .map(|xi| (0..w.rows()).map(|k| dot(xi, w.row(k))).collect())
        .collect()
}

pub fn gate(phat: &[f64], t: f64, mode: GateMode) -> Vec<f64> {
    phat.iter()
        .map(|&p| match mode {
            GateMode::Soft => p,
            GateMode::Hard => {
                if t < 1.0 && p >= t {
                    1.0
                } else {
                    0.0
                }
            }
        })
        .collect()
}

pub struct SimpleOracle {
    pub phat: Vec<f64>,
    pub alpha: Vec<f64>,
    pub aggregate: Rows,
    pub h: Rows,
}

/// `(A, α)` for a fixed gate.
pub fn selective_aggregate(
    adj: &[Vec<bool>],
    wx: &Rows,
    gate: &[f64],
    w1: &[f64],
) -> (Rows, Vec<f64>) {
    let s = neighbor_sum(adj, wx, None);
    let u = neighbor_sum(adj, wx, Some(gate));
    let alpha: Vec<f64> = (0..adj.len())
        .map(|i| logistic(concat_dot(w1, &u[i], &s[i])))
        .collect();
    let beta: Vec<f64> = alpha.iter().zip(gate).map(|(a, s)| a * s).collect();
    (neighbor_sum(adj, wx, Some(&beta)), alpha)
}

pub fn simple_layer(
    g: &Graph,
    x: &DenseMatrix,
    p: &SimpleLayerParams,
    mode: GateMode,
    act: Activation,
) -> SimpleOracle {
    let adj = adjacency(g);
    let wx = transform(&rows(x), &p.transform.value);
    let s = neighbor_sum(&adj, &wx, None);
    let w0 = p.sensitivity.value.row(0);
    let phat: Vec<f64> = s.iter().map(|si| logistic(dot(w0, si))).collect();
    let gate = gate(&phat, p.threshold, mode);
    let (aggregate, alpha) = selective_aggregate(&adj, &wx, &gate, p.propagation.value.row(0));
    let h = wx
        .iter()
        .zip(&aggregate)
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(&a, &b)| act.eval(a) + act.eval(b))
                .collect()
        })
        .collect();
    SimpleOracle {
        phat,
        alpha,
        aggregate,
        h,
    }
}

/// Hop distance from `selected` by repeated relaxation over the dense
/// adjacency, capped at `max_depth`.
pub fn distances(adj: &[Vec<bool>], selected: &[usize], max_depth: usize) -> Vec<Option<usize>> {
    let n = adj.len();
    let mut d = vec![None; n];
    for &s in selected {
        d[s] = Some(0);
    }
    for q in 0..max_depth {
        let prev = d.clone();
        for v in 0..n {
            if prev[v].is_none() && (0..n).any(|u| adj[v][u] && prev[u] == Some(q)) {
                d[v] = Some(q + 1);
            }
        }
    }
    d
}

pub fn frontier_sets(adj: &[Vec<bool>], selected: &[usize], depth: usize) -> Vec<Vec<usize>> {
    if depth == 0 {
        return Vec::new();
    }
    let d = distances(adj, selected, depth - 1);
    (0..depth)
        .map(|q| (0..adj.len()).filter(|&v| d[v] == Some(q)).collect())
        .collect()
}

pub fn complex_layer(g: &Graph, x: &DenseMatrix, p: &ComplexLayerParams, mode: GateMode) -> Rows {
    let adj = adjacency(g);
    let n = g.num_nodes();
    let y0 = transform(&rows(x), &p.transform.value);
    let f = p.transform.value.rows();
    let s = neighbor_sum(&adj, &y0, None);
    let w0 = p.sensitivity.value.row(0);
    let phat: Vec<f64> = s.iter().map(|si| logistic(dot(w0, si))).collect();
    let gate = gate(&phat, p.threshold, mode);
    let selected: Vec<usize> = (0..n).filter(|&i| gate[i] > 0.0).collect();
    let shell = distances(&adj, &selected, p.depth - 1);

    let w2 = p.depth_weight.value.row(0);
    let mut y = y0.clone();
    for q in 0..p.depth {
        let w: Vec<f64> = (0..n)
            .map(|i| {
                let a = logistic(dot(&w2[..f], &y[i]) + w2[f + q]);
                if q == 0 {
                    a * gate[i]
                } else if shell[i] == Some(q) {
                    a
                } else {
                    0.0
                }
            })
            .collect();
        let agg = neighbor_sum(&adj, &y, Some(&w));
        y = (0..n)
            .map(|i| (0..f).map(|k| agg[i][k] + y[i][k]).collect())
            .collect();
    }
    let w3 = p.blend.value.row(0);
    (0..n)
        .map(|i| {
            let c = logistic(concat_dot(w3, &y[i], &y0[i]));
            (0..f)
                .map(|k| y0[i][k] + c * (y[i][k] - y0[i][k]))
                .collect()
        })
        .collect()
}

pub fn random_matrix(r: usize, c: usize, scale: f64, rng: &mut impl Rng) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn assert_rows_eq(actual: &DenseMatrix, expected: &Rows, what: &str) {
    assert_eq!(actual.rows(), expected.len(), "{what}: row count");
    for (i, e) in expected.iter().enumerate() {
        assert_eq!(actual.row(i), e.as_slice(), "{what}: row {i}");
    }
}

fn expect_eq(actual: &DenseMatrix, expected: &Rows, what: &str) -> Result<(), String> {
    for (i, e) in expected.iter().enumerate() {
        if actual.row(i) != e.as_slice() {
            return Err(format!(
                "{what}: row {i} is {:?}, oracle {:?}",
                actual.row(i),
                e
            ));
        }
    }
    Ok(())
}

/// One random graph with ≤ 16 nodes; every aggregation kernel and both
/// layer forwards are compared with their oracles.
pub fn oracle_case(seed: u64) -> Result<(), String> {
    use nodeselect::gradcheck::random_graph;
    use nodeselect::kernels;
    use nodeselect::layers;
    use nodeselect::rng::{stream, Purpose};

    let mut rng = stream(seed, Purpose::Check, 0);
    let n = rng.random_range(1..=16);
    let density = rng.random::<f64>();
    let in_dim = rng.random_range(1..=5);
    let out_dim = rng.random_range(1..=4);
    let g = random_graph(n, density, in_dim, 2, &mut rng).map_err(|e| e.to_string())?;
    let adj = adjacency(&g);
    let x = g.features().clone();
    let err = |e: nodeselect::Error| e.to_string();

    let h = random_matrix(n, out_dim, 1.0, &mut rng);
    let soft: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let hard: Vec<f64> = soft
        .iter()
        .map(|&v| if v < 0.5 { 0.0 } else { 1.0 })
        .collect();
    expect_eq(
        &kernels::neighbor_sum(&g, &h, None).map_err(err)?,
        &neighbor_sum(&adj, &rows(&h), None),
        "neighbor_sum",
    )?;
    for gv in [&soft, &hard] {
        expect_eq(
            &kernels::neighbor_sum(&g, &h, Some(gv)).map_err(err)?,
            &neighbor_sum(&adj, &rows(&h), Some(gv)),
            "gated neighbor_sum",
        )?;
    }

    let w1 = kernels::Param::new(random_matrix(1, 2 * out_dim, 1.0, &mut rng));
    let (agg, alpha) = layers::selective_aggregate(&g, &h, &hard, &w1).map_err(err)?;
    let (agg_o, alpha_o) = selective_aggregate(&adj, &rows(&h), &hard, w1.value.row(0));
    expect_eq(&agg, &agg_o, "selective_aggregate")?;
    if alpha != alpha_o {
        return Err(format!(
            "selective_aggregate α {alpha:?}, oracle {alpha_o:?}"
        ));
    }

    let threshold = match rng.random_range(0..4) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random::<f64>(),
    };
    let mode = if rng.random::<bool>() {
        GateMode::Hard
    } else {
        GateMode::Soft
    };
    let act = [Activation::Relu, Activation::Elu, Activation::Identity][rng.random_range(0..3)];
    let sp = SimpleLayerParams {
        transform: kernels::Param::new(random_matrix(out_dim, in_dim, 1.0, &mut rng)),
        sensitivity: kernels::Param::new(random_matrix(1, out_dim, 3.0, &mut rng)),
        propagation: kernels::Param::new(random_matrix(1, 2 * out_dim, 1.0, &mut rng)),
        threshold,
    };
    let (hs, fwd) = layers::simple_layer_forward(&g, &x, &sp, mode, act).map_err(err)?;
    let o = simple_layer(&g, &x, &sp, mode, act);
    expect_eq(&hs, &o.h, "simple_layer_forward")?;
    expect_eq(&fwd.aggregate, &o.aggregate, "simple aggregate")?;
    if fwd.phat != o.phat || fwd.alpha != o.alpha {
        return Err("simple_layer_forward p̂ or α differs from oracle".into());
    }

    let depth = rng.random_range(2..=4);
    let cp = ComplexLayerParams {
        transform: kernels::Param::new(random_matrix(out_dim, in_dim, 0.5, &mut rng)),
        sensitivity: kernels::Param::new(random_matrix(1, out_dim, 3.0, &mut rng)),
        depth_weight: kernels::Param::new(random_matrix(1, out_dim + depth, 1.0, &mut rng)),
        blend: kernels::Param::new(random_matrix(1, 2 * out_dim, 1.0, &mut rng)),
        threshold,
        depth,
    };
    let (hc, _) = layers::complex_layer_forward(&g, &x, &cp, mode).map_err(err)?;
    expect_eq(
        &hc,
        &complex_layer(&g, &x, &cp, mode),
        "complex_layer_forward",
    )?;

    let selected: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.3).collect();
    for q in 0..=5 {
        let got = layers::frontier_sets(&g, &selected, q);
        let want = frontier_sets(&adj, &selected, q);
        if got != want {
            return Err(format!("frontier_sets depth {q}: {got:?}, oracle {want:?}"));
        }
    }
    Ok(())
}
