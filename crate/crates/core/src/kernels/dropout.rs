use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::DenseMatrix;
use crate::rng::{self, Purpose};

/// Inverted dropout.
///
/// In training mode every entry is zeroed with probability `p` and survivors
/// are scaled by `1/(1-p)`; the mask depends only on `(seed, counter)`.
/// Returns the output and the multiplier matrix needed for the backward pass
/// (`None` when dropout is the identity).
pub fn dropout(
    h: &DenseMatrix,
    p: f64,
    seed: u64,
    counter: u64,
    training: bool,
) -> Result<(DenseMatrix, Option<DenseMatrix>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate must be in [0, 1), got {p}"
        )));
    }
    if !training || p == 0.0 {
        return Ok((h.clone(), None));
    }
    let keep = 1.0 / (1.0 - p);
    let mut rng = rng::stream(seed, Purpose::Dropout, counter);
    let mask = DenseMatrix::from_fn(h.rows(), h.cols(), |_, _| {
        if rng.random::<f64>() < p {
            0.0
        } else {
            keep
        }
    });
    let out = h.hadamard(&mask)?;
    Ok((out, Some(mask)))
}
