use crate::error::{Error, Result};
use crate::kernels::DenseMatrix;

/// Mean negative log-likelihood of `labels` under `softmax(logits)` over the
/// masked rows, with its gradient w.r.t. the logits (zero outside the mask).
pub fn log_softmax_nll(
    logits: &DenseMatrix,
    labels: &[usize],
    mask: &[bool],
) -> Result<(f64, DenseMatrix)> {
    if labels.len() != logits.rows() || mask.len() != logits.rows() {
        return Err(Error::shape(
            "log_softmax_nll",
            format!(
                "{} logits rows, {} labels, {} mask entries",
                logits.rows(),
                labels.len(),
                mask.len()
            ),
        ));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::InvalidArgument("loss over an empty mask".into()));
    }
    let c = logits.cols();
    let inv = 1.0 / count as f64;
    let mut grad = DenseMatrix::zeros(logits.rows(), c);
    let mut total = 0.0;
    for i in (0..logits.rows()).filter(|&i| mask[i]) {
        let row = logits.row(i);
        let y = labels[i];
        if y >= c {
            return Err(Error::InvalidArgument(format!(
                "label {y} for {c} logit columns"
            )));
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&z| (z - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[y];
        let g = grad.row_mut(i);
        for k in 0..c {
            g[k] = (row[k] - log_z).exp() * inv;
        }
        g[y] -= inv;
    }
    Ok((total * inv, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_c() {
        let logits = DenseMatrix::zeros(3, 5);
        let (loss, _) = log_softmax_nll(&logits, &[0, 4, 2], &[true; 3]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn confident_logits_drive_loss_to_zero() {
        let mut logits = DenseMatrix::zeros(1, 3);
        logits[(0, 1)] = 50.0;
        let (loss, _) = log_softmax_nll(&logits, &[1], &[true]).unwrap();
        assert!(loss < 1e-20, "{loss}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = crate::rng::stream(8, crate::rng::Purpose::Check, 0);
        use rand::Rng;
        let logits = DenseMatrix::from_fn(6, 3, |_, _| rng.random_range(-2.0..2.0));
        let labels = [0, 2, 1, 1, 0, 2];
        let mask = [true, false, true, true, false, true];
        let (_, grad) = log_softmax_nll(&logits, &labels, &mask).unwrap();
        let h = 1e-6;
        for k in 0..logits.data().len() {
            let mut p = logits.clone();
            p.data_mut()[k] += h;
            let mut m = logits.clone();
            m.data_mut()[k] -= h;
            let fd = (log_softmax_nll(&p, &labels, &mask).unwrap().0
                - log_softmax_nll(&m, &labels, &mask).unwrap().0)
                / (2.0 * h);
            let an = grad.data()[k];
            if an == 0.0 {
                assert_eq!(fd, 0.0);
            } else {
                assert!(((fd - an) / an).abs() <= 1e-6, "k={k}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn empty_mask_is_an_error() {
        assert!(log_softmax_nll(&DenseMatrix::zeros(2, 2), &[0, 1], &[false, false]).is_err());
    }
}
