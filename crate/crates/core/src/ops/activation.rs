use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.grad = None;
    y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    y
}

/// The derivative at exactly zero is taken to be zero.
pub fn relu_backward(x: &Tensor, dy: &Tensor) -> Result<Tensor> {
    if x.shape() != dy.shape() {
        return Err(Error::shape("relu_backward", x.shape(), dy.shape()));
    }
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&xv, &g)| if xv > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(x.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_tensor, rel_err};

    #[test]
    fn forward_and_backward() {
        let x = Tensor::new(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let dy = Tensor::full(&[3], 5.0);
        assert_eq!(relu_backward(&x, &dy).unwrap().data(), &[0.0, 0.0, 5.0]);
        assert!(relu_backward(&x, &Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let x = random_tensor(&[50], 9);
        let r = random_tensor(&[50], 10);
        let dx = relu_backward(&x, &r).unwrap();
        let h = 1e-3f32;
        for i in 0..x.len() {
            if x.data()[i].abs() < 1e-2 {
                continue;
            }
            let f = |v: f32| v.max(0.0) as f64 * r.data()[i] as f64;
            let fd = (f(x.data()[i] + h) - f(x.data()[i] - h)) / (2.0 * h as f64);
            assert!(rel_err(dx.data()[i], fd) < 1e-2);
        }
    }
}
