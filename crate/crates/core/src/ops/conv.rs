use super::{gemm, OpCounter};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Output spatial size of a valid, stride-1 convolution.
pub fn conv_output_hw(h: usize, w: usize, k: usize) -> Option<(usize, usize)> {
    if k == 0 || k > h || k > w {
        None
    } else {
        Some((h - k + 1, w - k + 1))
    }
}

struct Geometry {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    k: usize,
    ho: usize,
    wo: usize,
}

impl Geometry {
    fn check(op: &'static str, x: &Tensor, w: &Tensor) -> Result<Self> {
        x.expect_rank(op, 4)?;
        w.expect_rank(op, 4)?;
        let (xs, ws) = (x.shape(), w.shape());
        if ws[2] != ws[3] {
            return Err(Error::shape(op, "square kernel", ws));
        }
        if xs[1] != ws[1] {
            return Err(Error::ShapeMismatch {
                op,
                expected: format!("input channels {} (kernel {:?})", ws[1], ws),
                found: format!("{} (input {:?})", xs[1], xs),
            });
        }
        let k = ws[2];
        let (ho, wo) = conv_output_hw(xs[2], xs[3], k).ok_or_else(|| Error::ShapeMismatch {
            op,
            expected: format!("spatial dims >= kernel size {k}"),
            found: format!("{}x{}", xs[2], xs[3]),
        })?;
        Ok(Geometry {
            n: xs[0],
            c: xs[1],
            h: xs[2],
            w: xs[3],
            f: ws[0],
            k,
            ho,
            wo,
        })
    }

    fn patch(&self) -> usize {
        self.c * self.k * self.k
    }

    fn positions(&self) -> usize {
        self.ho * self.wo
    }

    fn macs(&self) -> u64 {
        (self.n * self.f * self.patch() * self.positions()) as u64
    }

    /// Unfolds one sample into a `[C*k*k, Ho*Wo]` patch matrix.
    fn im2col(&self, x: &[f32], cols: &mut [f32]) {
        let p = self.positions();
        let mut row = 0;
        for c in 0..self.c {
            let plane = &x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.k {
                for kj in 0..self.k {
                    let dst = &mut cols[row * p..(row + 1) * p];
                    for i in 0..self.ho {
                        let src = &plane[(i + ki) * self.w + kj..][..self.wo];
                        dst[i * self.wo..(i + 1) * self.wo].copy_from_slice(src);
                    }
                    row += 1;
                }
            }
        }
    }

    /// Scatter-adds a patch-matrix gradient back onto one sample.
    fn col2im(&self, cols: &[f32], dx: &mut [f32]) {
        let p = self.positions();
        let mut row = 0;
        for c in 0..self.c {
            let plane = &mut dx[c * self.h * self.w..(c + 1) * self.h * self.w];
            for ki in 0..self.k {
                for kj in 0..self.k {
                    let src = &cols[row * p..(row + 1) * p];
                    for i in 0..self.ho {
                        let dst = &mut plane[(i + ki) * self.w + kj..][..self.wo];
                        for (d, s) in dst.iter_mut().zip(&src[i * self.wo..(i + 1) * self.wo]) {
                            *d += s;
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Valid (unpadded), stride-1 cross-correlation with per-filter bias.
///
/// `x: [N,C,H,W]`, `w: [F,C,k,k]`, `b: [F]` → `[N,F,H-k+1,W-k+1]`.
pub fn conv2d_forward(x: &Tensor, w: &Tensor, b: &Tensor, counter: &mut OpCounter) -> Result<Tensor> {
    let g = Geometry::check("conv2d_forward", x, w)?;
    if b.shape() != [g.f] {
        return Err(Error::shape("conv2d_forward", [g.f], b.shape()));
    }
    let (kk, p) = (g.patch(), g.positions());
    let in_len = g.c * g.h * g.w;
    let mut cols = vec![0.0f32; kk * p];
    let mut out = vec![0.0f32; g.n * g.f * p];
    for (xn, yn) in x.data().chunks_exact(in_len).zip(out.chunks_exact_mut(g.f * p)) {
        g.im2col(xn, &mut cols);
        gemm(g.f, kk, p, w.data(), (kk, 1), &cols, (p, 1), 0.0, yn);
        for (row, &bias) in yn.chunks_exact_mut(p).zip(b.data()) {
            row.iter_mut().for_each(|v| *v += bias);
        }
    }
    counter.forward_macs += g.macs();
    Tensor::new(&[g.n, g.f, g.ho, g.wo], out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    /// `None` when the caller did not ask for the input gradient.
    pub dx: Option<Tensor>,
    pub dw: Tensor,
    pub db: Tensor,
}

/// Gradients of [`conv2d_forward`]. `dw` and `db` are summed over the batch.
///
/// With `need_dx == false` the input gradient is skipped entirely and its
/// multiply-accumulates are not counted.
pub fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    need_dx: bool,
    counter: &mut OpCounter,
) -> Result<ConvGrads> {
    let g = Geometry::check("conv2d_backward", x, w)?;
    let expected = [g.n, g.f, g.ho, g.wo];
    if dy.shape() != expected {
        return Err(Error::shape("conv2d_backward", expected, dy.shape()));
    }
    let (kk, p) = (g.patch(), g.positions());
    let in_len = g.c * g.h * g.w;
    let mut cols = vec![0.0f32; kk * p];
    let mut dcols = vec![0.0f32; kk * p];
    let mut dw = vec![0.0f32; g.f * kk];
    let mut db = vec![0.0f32; g.f];
    let mut dx = if need_dx { vec![0.0f32; x.len()] } else { Vec::new() };

    for n in 0..g.n {
        let xn = &x.data()[n * in_len..(n + 1) * in_len];
        let dyn_ = &dy.data()[n * g.f * p..(n + 1) * g.f * p];
        g.im2col(xn, &mut cols);
        // dw += dy_n [F,P] * cols^T [P,KK]
        gemm(g.f, p, kk, dyn_, (p, 1), &cols, (1, p), 1.0, &mut dw);
        for (acc, row) in db.iter_mut().zip(dyn_.chunks_exact(p)) {
            *acc += row.iter().sum::<f32>();
        }
        if need_dx {
            // dcols = w^T [KK,F] * dy_n [F,P]
            gemm(kk, g.f, p, w.data(), (1, kk), dyn_, (p, 1), 0.0, &mut dcols);
            g.col2im(&dcols, &mut dx[n * in_len..(n + 1) * in_len]);
        }
    }

    counter.backward_macs += g.macs();
    let dx = if need_dx {
        counter.backward_macs += g.macs();
        Some(Tensor::new(x.shape(), dx)?)
    } else {
        None
    };
    Ok(ConvGrads {
        dx,
        dw: Tensor::new(w.shape(), dw)?,
        db: Tensor::new(&[g.f], db)?,
    })
}
