use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean softmax cross-entropy over the batch and its gradient
/// `(softmax - onehot) / N`.
///
/// The log-sum-exp is evaluated in `f64` after max subtraction so large
/// logits neither overflow nor lose the loss to rounding.
pub fn softmax_xent(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    logits.expect_rank("softmax_xent", 2)?;
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    if labels.len() != n {
        return Err(Error::shape("softmax_xent", n, labels.len()));
    }
    let mut grad = vec![0.0f32; n * k];
    let mut total = 0.0f64;
    for (i, (row, &label)) in logits.data().chunks_exact(k).zip(labels).enumerate() {
        if label >= k {
            return Err(Error::invalid(
                "softmax_xent",
                format!("label {label} out of range for {k} classes"),
            ));
        }
        let max = row.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b)) as f64;
        let exps: Vec<f64> = row.iter().map(|&v| (v as f64 - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        total += sum.ln() - (row[label] as f64 - max);
        let g = &mut grad[i * k..(i + 1) * k];
        for (j, e) in exps.iter().enumerate() {
            let onehot = if j == label { 1.0 } else { 0.0 };
            g[j] = ((e / sum - onehot) / n as f64) as f32;
        }
    }
    Ok((total / n as f64, Tensor::new(&[n, k], grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_tensor;

    #[test]
    fn uniform_logits() {
        let (loss, _) = softmax_xent(&Tensor::zeros(&[4, 10]), &[0, 3, 7, 9]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-9);
        assert!((loss - std::f64::consts::LN_10).abs() < 1e-6);
    }

    #[test]
    fn confident_correct_logit() {
        let mut l = vec![0.0f32; 10];
        l[0] = 20.0;
        let (loss, _) = softmax_xent(&Tensor::new(&[1, 10], l).unwrap(), &[0]).unwrap();
        assert!((0.0..1e-7).contains(&loss), "{loss}");
        let mut l = vec![0.0f32; 10];
        l[0] = 1000.0;
        let (loss, g) = softmax_xent(&Tensor::new(&[1, 10], l).unwrap(), &[1]).unwrap();
        assert!(loss.is_finite() && (loss - 1000.0).abs() < 1e-6);
        assert!(g.all_finite());
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let logits = random_tensor(&[6, 10], 5);
        let (_, g) = softmax_xent(&logits, &[0, 1, 2, 3, 4, 9]).unwrap();
        for row in g.data().chunks_exact(10) {
            assert!(row.iter().map(|&v| v as f64).sum::<f64>().abs() < 1e-6);
        }
    }

    #[test]
    fn label_out_of_range() {
        assert!(softmax_xent(&Tensor::zeros(&[1, 10]), &[10]).is_err());
        assert!(softmax_xent(&Tensor::zeros(&[2, 10]), &[1]).is_err());
    }
}
