use crate::error::{Error, Result};

/// Softmax cross-entropy with max-subtraction for stability.
///
/// Returns `(loss, grad)` where `grad = softmax(logits) - onehot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    let c = logits.len();
    if c < 2 {
        return Err(Error::Contract(format!(
            "need at least 2 classes, got {c}"
        )));
    }
    if label >= c {
        return Err(Error::Contract(format!(
            "label {label} out of range for {c} classes"
        )));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let log_sum = sum.ln() + max;
    let loss = log_sum - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_c() {
        let (loss, _) = softmax_cross_entropy(&[0.5; 6], 2).unwrap();
        assert!((loss - 6.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logit_gives_small_loss() {
        // -log softmax([10,0,0])[0] = log(1 + 2 e^{-10})
        let (loss, _) = softmax_cross_entropy(&[10.0, 0.0, 0.0], 0).unwrap();
        let expected = (1.0 + 2.0 * (-10.0f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-12);
        assert!(loss < 1e-4 && loss > 0.0);
    }

    #[test]
    fn gradient_sums_to_zero() {
        let (_, grad) = softmax_cross_entropy(&[1.3, -0.2, 4.0, 0.0], 3).unwrap();
        assert!(grad.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn non_finite_logits_are_surfaced() {
        assert!(softmax_cross_entropy(&[f64::NAN, 0.0], 0).is_err());
        assert!(softmax_cross_entropy(&[f64::INFINITY, 0.0], 0).is_err());
    }

    #[test]
    fn invalid_label_or_class_count_rejected() {
        assert!(softmax_cross_entropy(&[1.0], 0).is_err());
        assert!(softmax_cross_entropy(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn loss_is_nonnegative() {
        let (loss, _) = softmax_cross_entropy(&[3.0, -1.0, 0.5], 1).unwrap();
        assert!(loss >= 0.0);
    }
}
