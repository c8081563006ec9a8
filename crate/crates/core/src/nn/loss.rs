//! Loss functions. Each returns the scalar loss and its gradient w.r.t. the
//! prediction argument.

use super::Matrix;
use crate::error::{Error, Result};

/// Predictions are clamped into `[PROB_FLOOR, 1 - PROB_FLOOR]` before the log.
pub const PROB_FLOOR: f64 = 1e-7;

/// Binary cross-entropy averaged over every entry.
///
/// The gradient is evaluated at the clamped prediction, so it stays finite
/// when a sigmoid saturates.
pub fn bce_loss(predictions: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
    predictions.ensure_same_shape(targets, "bce_loss")?;
    if predictions.data().is_empty() {
        return Err(Error::Config("bce_loss on an empty batch".into()));
    }
    let n = predictions.data().len() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(predictions.rows(), predictions.cols());
    for ((g, &p), &t) in grad
        .data_mut()
        .iter_mut()
        .zip(predictions.data())
        .zip(targets.data())
    {
        let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        loss -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        *g = (-t / p + (1.0 - t) / (1.0 - p)) / n;
    }
    Ok((loss / n, grad))
}

/// Mean squared error between `target` and `prediction`, averaged over
/// samples and features. The gradient is w.r.t. `prediction`.
pub fn mse_loss(target: &Matrix, prediction: &Matrix) -> Result<(f64, Matrix)> {
    target.ensure_same_shape(prediction, "mse_loss")?;
    if target.data().is_empty() {
        return Err(Error::Config("mse_loss on an empty batch".into()));
    }
    let n = target.data().len() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(target.rows(), target.cols());
    for ((g, &x), &y) in grad
        .data_mut()
        .iter_mut()
        .zip(target.data())
        .zip(prediction.data())
    {
        let diff = y - x;
        loss += diff * diff;
        *g = 2.0 * diff / n;
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_half_against_one_is_ln2() {
        let (loss, _) = bce_loss(&Matrix::row_vector(&[0.5]), &Matrix::row_vector(&[1.0])).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_perfect_prediction_hits_the_clamp_floor() {
        let (loss, grad) = bce_loss(
            &Matrix::row_vector(&[1.0, 0.0]),
            &Matrix::row_vector(&[1.0, 0.0]),
        )
        .unwrap();
        // -ln(1 - 1e-7) ≈ 1e-7
        assert!(loss > 0.0 && loss < 2e-7, "{loss}");
        assert!(grad.is_finite());
    }

    #[test]
    fn mse_examples() {
        let x = Matrix::row_vector(&[1.0, 1.0]);
        assert_eq!(mse_loss(&x, &x).unwrap().0, 0.0);
        let (loss, grad) = mse_loss(&x, &Matrix::row_vector(&[0.0, 0.0])).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad.data(), &[-1.0, -1.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(mse_loss(&Matrix::zeros(2, 2), &Matrix::zeros(2, 3)).is_err());
        assert!(bce_loss(&Matrix::zeros(2, 1), &Matrix::zeros(1, 1)).is_err());
    }
}
