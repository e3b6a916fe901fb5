//! Dense and sparse numerical kernels with analytic backward passes.

mod activation;
mod adam;
mod aggregate;
mod dropout;
mod loss;
mod matrix;

pub use activation::{logistic, logistic_grad, relu, relu_grad, Activation};
pub use adam::{adam_step, AdamState, Param};
#[cfg(feature = "parallel")]
pub use aggregate::neighbor_sum_par;
pub use aggregate::{neighbor_sum, neighbor_sum_backward, scatter_transpose};
pub use dropout::dropout;
pub use loss::log_softmax_nll;
pub use matrix::{concat_dot, dot, matmul, matmul_nt, matmul_tn, DenseMatrix};
