use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernels::{dot, logistic, neighbor_sum, DenseMatrix, Param};

/// How the selection `S(v_i)` is formed from the sensitivity `p̂_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GateMode {
    /// `S = 1[p̂ ≥ T]`, trained with a straight-through backward.
    #[default]
    Hard,
    /// `S = p̂`, exactly differentiable.
    Soft,
}

impl fmt::Display for GateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateMode::Hard => "hard",
            GateMode::Soft => "soft",
        })
    }
}

impl FromStr for GateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(GateMode::Hard),
            "soft" => Ok(GateMode::Soft),
            _ => Err(Error::Config(format!(
                "gate_mode must be hard|soft, got {s:?}"
            ))),
        }
    }
}

/// Backward rule for the hard gate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GateGradient {
    /// `d S / d p̂ := 1`.
    #[default]
    StraightThrough,
    /// Treat the gate pattern as a constant (`d S / d p̂ = 0`). This is the
    /// true derivative away from the threshold and is what finite differences
    /// see when no `p̂` crosses `T`.
    Frozen,
}

/// Sensitivity together with the neighbor sum it was computed from.
pub(crate) fn sensitivity_with_sum(
    g: &Graph,
    wx: &DenseMatrix,
    w0: &Param,
) -> Result<(Vec<f64>, DenseMatrix)> {
    if w0.shape() != (1, wx.cols()) {
        return Err(Error::shape(
            "compute_sensitivity",
            format!(
                "W0 is {:?}, transformed features have {} columns",
                w0.shape(),
                wx.cols()
            ),
        ));
    }
    let s = neighbor_sum(g, wx, None)?;
    let w = w0.value.row(0);
    let phat = (0..s.rows()).map(|i| logistic(dot(w, s.row(i)))).collect();
    Ok((phat, s))
}

/// `p̂_i = σ(W0 · Σ_{j∈N(i)} WX_j)`.
pub fn compute_sensitivity(g: &Graph, wx: &DenseMatrix, w0: &Param) -> Result<Vec<f64>> {
    sensitivity_with_sum(g, wx, w0).map(|(p, _)| p)
}

/// Whether a node with sensitivity `p` is selected at threshold `t`.
///
/// `p̂` lies strictly inside (0, 1) in exact arithmetic, so `t ≥ 1` selects
/// nothing even when rounding produced `p̂ = 1.0`.
#[inline]
pub fn is_selected(p: f64, t: f64) -> bool {
    t < 1.0 && p >= t
}

/// Selection values for every node.
pub fn apply_gate(phat: &[f64], threshold: f64, mode: GateMode) -> Vec<f64> {
    match mode {
        GateMode::Hard => phat
            .iter()
            .map(|&p| if is_selected(p, threshold) { 1.0 } else { 0.0 })
            .collect(),
        GateMode::Soft => phat.to_vec(),
    }
}

/// Gradient w.r.t. `p̂` given the gradient w.r.t. the gate.
pub fn apply_gate_backward(grad_gate: &[f64], mode: GateMode, rule: GateGradient) -> Vec<f64> {
    match (mode, rule) {
        (GateMode::Soft, _) | (GateMode::Hard, GateGradient::StraightThrough) => grad_gate.to_vec(),
        (GateMode::Hard, GateGradient::Frozen) => vec![0.0; grad_gate.len()],
    }
}

/// Fraction of nodes with `p̂ ≥ T`.
pub fn selection_fraction(phat: &[f64], threshold: f64) -> f64 {
    if phat.is_empty() {
        return 0.0;
    }
    phat.iter().filter(|&&p| is_selected(p, threshold)).count() as f64 / phat.len() as f64
}
