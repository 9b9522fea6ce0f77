use super::{gemm, OpCounter};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn dims(op: &'static str, x: &Tensor, w: &Tensor) -> Result<(usize, usize, usize)> {
    x.expect_rank(op, 2)?;
    w.expect_rank(op, 2)?;
    let (n, d) = (x.shape()[0], x.shape()[1]);
    let (wd, u) = (w.shape()[0], w.shape()[1]);
    if d != wd {
        return Err(Error::ShapeMismatch {
            op,
            expected: format!("input width {wd} (weights {:?})", w.shape()),
            found: format!("{d} (input {:?})", x.shape()),
        });
    }
    Ok((n, d, u))
}

/// `y = x·w + b` with `x: [N,D]`, `w: [D,U]`, `b: [U]`.
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor, counter: &mut OpCounter) -> Result<Tensor> {
    let (n, d, u) = dims("dense_forward", x, w)?;
    if b.shape() != [u] {
        return Err(Error::shape("dense_forward", [u], b.shape()));
    }
    let mut y: Vec<f32> = b.data().iter().copied().cycle().take(n * u).collect();
    gemm(n, d, u, x.data(), (d, 1), w.data(), (u, 1), 1.0, &mut y);
    counter.forward_macs += (n * d * u) as u64;
    Tensor::new(&[n, u], y)
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub dx: Option<Tensor>,
    pub dw: Tensor,
    pub db: Tensor,
}

pub fn dense_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    need_dx: bool,
    counter: &mut OpCounter,
) -> Result<DenseGrads> {
    let (n, d, u) = dims("dense_backward", x, w)?;
    if dy.shape() != [n, u] {
        return Err(Error::shape("dense_backward", [n, u], dy.shape()));
    }
    // dw = x^T [D,N] * dy [N,U]
    let mut dw = vec![0.0f32; d * u];
    gemm(d, n, u, x.data(), (1, d), dy.data(), (u, 1), 0.0, &mut dw);
    let mut db = vec![0.0f32; u];
    for row in dy.data().chunks_exact(u) {
        db.iter_mut().zip(row).for_each(|(a, g)| *a += g);
    }
    counter.backward_macs += (n * d * u) as u64;

    let dx = if need_dx {
        // dx = dy [N,U] * w^T [U,D]
        let mut dx = vec![0.0f32; n * d];
        gemm(n, u, d, dy.data(), (u, 1), w.data(), (1, u), 0.0, &mut dx);
        counter.backward_macs += (n * d * u) as u64;
        Some(Tensor::new(&[n, d], dx)?)
    } else {
        None
    };
    Ok(DenseGrads {
        dx,
        dw: Tensor::new(&[d, u], dw)?,
        db: Tensor::new(&[u], db)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_tensor, rel_err};

    #[test]
    fn identity_weights() {
        let x = random_tensor(&[3, 4], 1);
        let w = Tensor::from_fn(&[4, 4], |i| if i / 4 == i % 4 { 1.0 } else { 0.0 });
        let y = dense_forward(&x, &w, &Tensor::zeros(&[4]), &mut OpCounter::default()).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn tiny_hand_case() {
        let x = Tensor::new(&[1, 2], vec![1.0, 2.0]).unwrap();
        let w = Tensor::new(&[2, 1], vec![3.0, 4.0]).unwrap();
        let b = Tensor::new(&[1], vec![5.0]).unwrap();
        let mut c = OpCounter::default();
        let y = dense_forward(&x, &w, &b, &mut c).unwrap();
        assert_eq!(y.data(), &[16.0]);
        assert_eq!(c.forward_macs, 2);
    }

    #[test]
    fn mismatch() {
        let mut c = OpCounter::default();
        let x = Tensor::zeros(&[2, 3]);
        let w = Tensor::zeros(&[4, 2]);
        assert!(dense_forward(&x, &w, &Tensor::zeros(&[2]), &mut c).is_err());
        let w = Tensor::zeros(&[3, 2]);
        assert!(dense_backward(&x, &w, &Tensor::zeros(&[2, 3]), true, &mut c).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = random_tensor(&[3, 5], 1);
        let w = random_tensor(&[5, 4], 2);
        let b = random_tensor(&[4], 3);
        let r = random_tensor(&[3, 4], 4);
        let loss = |x: &Tensor, w: &Tensor, b: &Tensor| -> f64 {
            let y = dense_forward(x, w, b, &mut OpCounter::default()).unwrap();
            y.data().iter().zip(r.data()).map(|(a, b)| *a as f64 * *b as f64).sum()
        };
        let mut c = OpCounter::default();
        let g = dense_backward(&x, &w, &r, true, &mut c).unwrap();
        assert_eq!(c.backward_macs, 2 * 3 * 5 * 4);
        let h = 1e-2f32;
        let perturb = |t: &Tensor, i: usize, s: f32| {
            let mut t = t.clone();
            t.data_mut()[i] += s;
            t
        };
        let two_h = 2.0 * h as f64;
        let dx = g.dx.unwrap();
        for i in 0..x.len() {
            let fd = (loss(&perturb(&x, i, h), &w, &b) - loss(&perturb(&x, i, -h), &w, &b)) / two_h;
            assert!(rel_err(dx.data()[i], fd) < 1e-2);
        }
        for i in 0..w.len() {
            let fd = (loss(&x, &perturb(&w, i, h), &b) - loss(&x, &perturb(&w, i, -h), &b)) / two_h;
            assert!(rel_err(g.dw.data()[i], fd) < 1e-2);
        }
        for i in 0..b.len() {
            let fd = (loss(&x, &w, &perturb(&b, i, h)) - loss(&x, &w, &perturb(&b, i, -h))) / two_h;
            assert!(rel_err(g.db.data()[i], fd) < 1e-2);
        }
    }
}
