//! Forward and backward kernels for every layer type the networks use,
//! plus the plain SGD update.
//!
//! Kernels are pure functions of their inputs apart from the [`OpCounter`]
//! they bump, so disjoint tensors can be processed on different threads.

mod activation;
mod conv;
mod dense;
mod loss;
mod pool;

pub use activation::{relu, relu_backward};
pub use conv::{conv2d_backward, conv2d_forward, conv_output_hw, ConvGrads};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use loss::softmax_xent;
pub use pool::{maxpool2_backward, maxpool2_forward, PoolIndices};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Multiply-accumulate and update counts for one trial.
///
/// Only multiply-accumulates are counted; bias sums, activations and
/// pooling are free.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct OpCounter {
    pub forward_macs: u64,
    pub backward_macs: u64,
    pub param_updates: u64,
}

impl OpCounter {
    pub fn merge(&mut self, other: &OpCounter) {
        self.forward_macs += other.forward_macs;
        self.backward_macs += other.backward_macs;
        self.param_updates += other.param_updates;
    }
}

/// `param <- param - lr * grad`.
pub fn sgd_step(param: &mut Tensor, grad: &[f32], lr: f32, counter: &mut OpCounter) -> Result<()> {
    if grad.len() != param.len() {
        return Err(Error::shape("sgd_step", param.shape(), grad.len()));
    }
    for (p, g) in param.data_mut().iter_mut().zip(grad) {
        *p -= lr * g;
    }
    counter.param_updates += grad.len() as u64;
    Ok(())
}

/// Row-major single-precision `c = a * b + beta * c`, with explicit strides
/// so transposed operands need no copy.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    (rsa, csa): (usize, usize),
    b: &[f32],
    (rsb, csb): (usize, usize),
    beta: f32,
    c: &mut [f32],
) {
    assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every element the kernel touches.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
