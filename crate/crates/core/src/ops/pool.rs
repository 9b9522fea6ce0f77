use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Flat input offsets of each pooling window's maximum, one per output element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices(pub Vec<usize>);

/// 2x2 max-pooling with stride 2. A trailing odd row or column is dropped.
/// Ties resolve to the first element in row-major window order.
pub fn maxpool2_forward(x: &Tensor) -> Result<(Tensor, PoolIndices)> {
    x.expect_rank("maxpool2_forward", 4)?;
    let s = x.shape();
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    if h < 2 || w < 2 {
        return Err(Error::shape("maxpool2_forward", "H >= 2 and W >= 2", s));
    }
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(n * c * ho * wo);
    let mut idx = Vec::with_capacity(n * c * ho * wo);
    let data = x.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for i in 0..ho {
            for j in 0..wo {
                let top = base + 2 * i * w + 2 * j;
                let mut best = top;
                for off in [top + 1, top + w, top + w + 1] {
                    if data[off] > data[best] {
                        best = off;
                    }
                }
                out.push(data[best]);
                idx.push(best);
            }
        }
    }
    Ok((Tensor::new(&[n, c, ho, wo], out)?, PoolIndices(idx)))
}

/// Routes `dy` to the recorded maxima; every other input position gets zero.
pub fn maxpool2_backward(indices: &PoolIndices, dy: &Tensor, input_shape: &[usize]) -> Result<Tensor> {
    if indices.0.len() != dy.len() {
        return Err(Error::shape("maxpool2_backward", indices.0.len(), dy.shape()));
    }
    let mut dx = Tensor::zeros(input_shape);
    let len = dx.len();
    let out = dx.data_mut();
    for (&i, &g) in indices.0.iter().zip(dy.data()) {
        if i >= len {
            return Err(Error::invalid(
                "maxpool2_backward",
                format!("index {i} out of range for input of {len} elements"),
            ));
        }
        out[i] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_tensor, rel_err};

    #[test]
    fn single_window() {
        let x = Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, idx) = maxpool2_forward(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(idx.0, vec![3]);
    }

    #[test]
    fn ties_pick_first_in_window() {
        let x = Tensor::full(&[1, 2, 4, 4], 0.5);
        let (y, idx) = maxpool2_forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.5));
        assert_eq!(idx.0, vec![0, 2, 8, 10, 16, 18, 24, 26]);
    }

    #[test]
    fn odd_trailing_dropped() {
        let x = random_tensor(&[1, 1, 5, 5], 1);
        let (y, idx) = maxpool2_forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert!(idx.0.iter().all(|&i| i % 5 < 4 && i / 5 < 4));
    }

    #[test]
    fn too_small() {
        assert!(maxpool2_forward(&Tensor::zeros(&[1, 1, 1, 4])).is_err());
    }

    #[test]
    fn backward_routes_ones() {
        let x = random_tensor(&[1, 1, 4, 4], 2);
        let (_, idx) = maxpool2_forward(&x).unwrap();
        let dx = maxpool2_backward(&idx, &Tensor::full(&[1, 1, 2, 2], 1.0), x.shape()).unwrap();
        assert_eq!(dx.data().iter().filter(|&&v| v == 1.0).count(), 4);
        assert_eq!(dx.data().iter().filter(|&&v| v == 0.0).count(), 12);
        let dz = maxpool2_backward(&idx, &Tensor::zeros(&[1, 1, 2, 2]), x.shape()).unwrap();
        assert!(dz.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_bad_index() {
        let idx = PoolIndices(vec![16]);
        assert!(maxpool2_backward(&idx, &Tensor::zeros(&[1, 1, 1, 1]), &[1, 1, 4, 4]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let x = random_tensor(&[2, 2, 5, 4], 3);
        let r = random_tensor(&[2, 2, 2, 2], 4);
        let (_, idx) = maxpool2_forward(&x).unwrap();
        let dx = maxpool2_backward(&idx, &r, x.shape()).unwrap();
        let loss = |t: &Tensor| -> f64 {
            let (y, _) = maxpool2_forward(t).unwrap();
            y.data().iter().zip(r.data()).map(|(a, b)| *a as f64 * *b as f64).sum()
        };
        let h = 1e-3f32;
        for i in 0..x.len() {
            let mut p = x.clone();
            let mut m = x.clone();
            p.data_mut()[i] += h;
            m.data_mut()[i] -= h;
            let fd = (loss(&p) - loss(&m)) / (2.0 * h as f64);
            assert!(rel_err(dx.data()[i], fd) < 1e-2, "{i}: {} vs {fd}", dx.data()[i]);
        }
    }
}
