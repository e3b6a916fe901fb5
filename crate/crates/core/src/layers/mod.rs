//! Selective-propagation layer mathematics and the convolutional foil.

mod complex;
mod frontier;
mod gate;
mod gcn;
mod simple;


pub use complex::{
    complex_layer_backward, complex_layer_forward, complex_propagate_from, ComplexForward,
    ComplexLayerParams,
};
pub use frontier::{frontier_sets, hop_depths};
pub use gate::{
    apply_gate, apply_gate_backward, compute_sensitivity, is_selected, selection_fraction,
    GateGradient, GateMode,
};
pub use gcn::{gcn_baseline_backward, gcn_baseline_forward, gcn_propagate, GcnForward};
pub use simple::{
    selective_aggregate, simple_layer_backward, simple_layer_forward, SimpleForward,
    SimpleLayerParams,
};

/// Per-layer record of the selection step.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerDiag {
    pub phat: Vec<f64>,
    pub gate: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Fraction of nodes with `p̂ ≥ T`.
    pub selection_fraction: f64,
}
