//! Dense and convolution kernels over flat row-major buffers.

/// `c = a · b + beta · c`, with `a: m×k`, `b: k×n`, `c: m×n` (row-major `c`).
///
/// Operand strides are `(row, col)` so transposed views need no copy.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(a.len() > (m - 1) * a_strides.0 + k.saturating_sub(1) * a_strides.1 || k == 0);
    assert!(b.len() > k.saturating_sub(1) * b_strides.0 + (n - 1) * b_strides.1 || k == 0);
    assert!(c.len() >= m * n);
    // SAFETY: bounds of every operand were checked above against the strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `y = x · wᵀ + b` for a batch of `n` rows.
pub(crate) fn dense_forward(
    x: &[f64],
    n: usize,
    inputs: usize,
    outputs: usize,
    weight: &[f64],
    bias: Option<&[f64]>,
) -> Vec<f64> {
    let mut y = vec![0.0; n * outputs];
    if let Some(b) = bias {
        for row in y.chunks_exact_mut(outputs) {
            row.copy_from_slice(b);
        }
    }
    gemm(
        n,
        inputs,
        outputs,
        x,
        (inputs, 1),
        weight,
        (1, inputs),
        if bias.is_some() { 1.0 } else { 0.0 },
        &mut y,
    );
    y
}

/// Returns `(dW, db, dx)` for a dense layer.
pub(crate) fn dense_backward(
    x: &[f64],
    dy: &[f64],
    n: usize,
    inputs: usize,
    outputs: usize,
    weight: &[f64],
    bias: bool,
) -> (Vec<f64>, Option<Vec<f64>>, Vec<f64>) {
    let mut dw = vec![0.0; outputs * inputs];
    gemm(outputs, n, inputs, dy, (1, outputs), x, (inputs, 1), 0.0, &mut dw);
    let db = bias.then(|| {
        let mut db = vec![0.0; outputs];
        for row in dy.chunks_exact(outputs) {
            for (acc, v) in db.iter_mut().zip(row) {
                *acc += v;
            }
        }
        db
    });
    let mut dx = vec![0.0; n * inputs];
    gemm(n, outputs, inputs, dy, (outputs, 1), weight, (inputs, 1), 0.0, &mut dx);
    (dw, db, dx)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        (self.height - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width - self.kernel) / self.stride + 1
    }

    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn positions(&self) -> usize {
        self.out_height() * self.out_width()
    }

    pub fn in_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn out_len(&self) -> usize {
        self.out_channels * self.positions()
    }

    /// Unfolds one `[c, h, w]` image into a `patch_len × positions` matrix.
    fn im2col(&self, image: &[f64], cols: &mut [f64]) {
        let (k, s, ow, p) = (self.kernel, self.stride, self.out_width(), self.positions());
        for c in 0..self.channels {
            for ki in 0..k {
                for kj in 0..k {
                    let r = (c * k + ki) * k + kj;
                    let dst = &mut cols[r * p..(r + 1) * p];
                    for oy in 0..self.out_height() {
                        let src = &image[(c * self.height + oy * s + ki) * self.width..];
                        for ox in 0..ow {
                            dst[oy * ow + ox] = src[ox * s + kj];
                        }
                    }
                }
            }
        }
    }

    fn col2im_add(&self, cols: &[f64], image: &mut [f64]) {
        let (k, s, ow, p) = (self.kernel, self.stride, self.out_width(), self.positions());
        for c in 0..self.channels {
            for ki in 0..k {
                for kj in 0..k {
                    let r = (c * k + ki) * k + kj;
                    let src = &cols[r * p..(r + 1) * p];
                    for oy in 0..self.out_height() {
                        let row = (c * self.height + oy * s + ki) * self.width;
                        for ox in 0..ow {
                            image[row + ox * s + kj] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv_forward(
    x: &[f64],
    n: usize,
    g: &ConvGeometry,
    weight: &[f64],
    bias: Option<&[f64]>,
) -> Vec<f64> {
    let (r, p) = (g.patch_len(), g.positions());
    let mut cols = vec![0.0; r * p];
    let mut y = vec![0.0; n * g.out_len()];
    for (image, out) in x.chunks_exact(g.in_len()).zip(y.chunks_exact_mut(g.out_len())) {
        g.im2col(image, &mut cols);
        if let Some(b) = bias {
            for (plane, &bv) in out.chunks_exact_mut(p).zip(b) {
                plane.fill(bv);
            }
        }
        gemm(
            g.out_channels,
            r,
            p,
            weight,
            (r, 1),
            &cols,
            (p, 1),
            if bias.is_some() { 1.0 } else { 0.0 },
            out,
        );
    }
    y
}

/// Returns `(dK, db, dx)` for a conv layer.
pub(crate) fn conv_backward(
    x: &[f64],
    dy: &[f64],
    n: usize,
    g: &ConvGeometry,
    weight: &[f64],
    bias: bool,
) -> (Vec<f64>, Option<Vec<f64>>, Vec<f64>) {
    let (r, p, o) = (g.patch_len(), g.positions(), g.out_channels);
    let mut cols = vec![0.0; r * p];
    let mut dcols = vec![0.0; r * p];
    let mut dk = vec![0.0; o * r];
    let mut db = bias.then(|| vec![0.0; o]);
    let mut dx = vec![0.0; n * g.in_len()];
    for ((image, dout), dimage) in x
        .chunks_exact(g.in_len())
        .zip(dy.chunks_exact(g.out_len()))
        .zip(dx.chunks_exact_mut(g.in_len()))
    {
        g.im2col(image, &mut cols);
        gemm(o, p, r, dout, (p, 1), &cols, (1, p), 1.0, &mut dk);
        if let Some(db) = db.as_mut() {
            for (acc, plane) in db.iter_mut().zip(dout.chunks_exact(p)) {
                *acc += plane.iter().sum::<f64>();
            }
        }
        gemm(r, o, p, weight, (1, r), dout, (p, 1), 0.0, &mut dcols);
        g.col2im_add(&dcols, dimage);
    }
    (dk, db, dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &[f64], g: &ConvGeometry, w: &[f64]) -> Vec<f64> {
        let (oh, ow, k) = (g.out_height(), g.out_width(), g.kernel);
        let mut y = vec![0.0; g.out_len()];
        for o in 0..g.out_channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for c in 0..g.channels {
                        for ki in 0..k {
                            for kj in 0..k {
                                acc += w[((o * g.channels + c) * k + ki) * k + kj]
                                    * x[(c * g.height + oy * g.stride + ki) * g.width
                                        + ox * g.stride
                                        + kj];
                            }
                        }
                    }
                    y[(o * oh + oy) * ow + ox] = acc;
                }
            }
        }
        y
    }

    #[test]
    fn conv_matches_direct_loops() {
        let g = ConvGeometry {
            channels: 2,
            height: 5,
            width: 6,
            out_channels: 3,
            kernel: 2,
            stride: 2,
        };
        let x: Vec<f64> = (0..g.in_len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let w: Vec<f64> = (0..g.out_channels * g.patch_len())
            .map(|i| (i as f64 * 0.11).cos())
            .collect();
        let y = conv_forward(&x, 1, &g, &w, None);
        let expected = naive_conv(&x, &g, &w);
        for (a, b) in y.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_matches_direct_loops() {
        let (n, i, o) = (3, 4, 2);
        let x: Vec<f64> = (0..n * i).map(|v| v as f64).collect();
        let w: Vec<f64> = (0..o * i).map(|v| v as f64 * 0.5 - 1.0).collect();
        let b = [0.25, -0.5];
        let y = dense_forward(&x, n, i, o, &w, Some(&b));
        for r in 0..n {
            for c in 0..o {
                let direct: f64 =
                    (0..i).map(|j| x[r * i + j] * w[c * i + j]).sum::<f64>() + b[c];
                assert!((y[r * o + c] - direct).abs() < 1e-12);
            }
        }
    }
}
