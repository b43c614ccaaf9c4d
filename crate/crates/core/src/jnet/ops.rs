//! Batched tensor kernels with periodic boundaries, and their adjoints.
//!
//! A [`Batch`] holds `b` examples of `c` square `n x n` channels, laid out
//! example-major, then channel, then row, with x varying fastest.

use rayon::prelude::*;

/// Dense batch of multi-channel square images.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub b: usize,
    pub c: usize,
    pub n: usize,
    pub data: Vec<f64>,
}

impl Batch {
    pub fn zeros(b: usize, c: usize, n: usize) -> Self {
        Self { b, c, n, data: vec![0.0; b * c * n * n] }
    }

    pub fn example_len(&self) -> usize {
        self.c * self.n * self.n
    }

    pub fn example(&self, e: usize) -> &[f64] {
        let len = self.example_len();
        &self.data[e * len..(e + 1) * len]
    }

    pub(crate) fn same_shape(&self) -> Self {
        Self::zeros(self.b, self.c, self.n)
    }
}

/// `C = A B + beta C` with explicit strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(m == 0 || k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || n == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() >= m * n);
    // SAFETY: the bounds of every strided access were checked above.
    unsafe {
        matrixmultiply::dgemm(
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

/// Unfolds one example into a `(cin * k * k) x (n * n)` patch matrix.
fn im2col(x: &[f64], cin: usize, n: usize, k: usize, cols: &mut [f64]) {
    let r = (k / 2) as isize;
    let nn = n * n;
    let ni = n as isize;
    for ci in 0..cin {
        let plane = &x[ci * nn..(ci + 1) * nn];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((ci * k + ky) * k + kx) * nn..][..nn];
                let dx = kx as isize - r;
                let dy = ky as isize - r;
                for y in 0..n {
                    let sy = ((y as isize + dy).rem_euclid(ni)) as usize;
                    let src = &plane[sy * n..(sy + 1) * n];
                    let dst = &mut row[y * n..(y + 1) * n];
                    let shift = dx.rem_euclid(ni) as usize;
                    // dst[x] = src[(x + dx) mod n]
                    dst[..n - shift].copy_from_slice(&src[shift..]);
                    dst[n - shift..].copy_from_slice(&src[..shift]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the image.
fn col2im(cols: &[f64], cin: usize, n: usize, k: usize, dx_out: &mut [f64]) {
    let r = (k / 2) as isize;
    let nn = n * n;
    let ni = n as isize;
    for ci in 0..cin {
        let plane = &mut dx_out[ci * nn..(ci + 1) * nn];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((ci * k + ky) * k + kx) * nn..][..nn];
                let dx = kx as isize - r;
                let dy = ky as isize - r;
                let shift = dx.rem_euclid(ni) as usize;
                for y in 0..n {
                    let sy = ((y as isize + dy).rem_euclid(ni)) as usize;
                    let dst = &mut plane[sy * n..(sy + 1) * n];
                    let src = &row[y * n..(y + 1) * n];
                    for (x, &g) in src.iter().enumerate() {
                        let t = x + shift;
                        dst[if t >= n { t - n } else { t }] += g;
                    }
                }
            }
        }
    }
}

/// Periodic cross-correlation with a `cout x cin x k x k` kernel, optional
/// bias, optionally followed by ReLU.
pub(crate) fn conv_forward(
    x: &Batch,
    weight: &[f64],
    bias: Option<&[f64]>,
    cout: usize,
    k: usize,
    relu: bool,
) -> Batch {
    let (cin, n) = (x.c, x.n);
    let nn = n * n;
    let kk = cin * k * k;
    let mut out = Batch::zeros(x.b, cout, n);
    out.data.par_chunks_mut(cout * nn).zip(x.data.par_chunks(cin * nn)).for_each(|(oe, xe)| {
        if k == 1 {
            gemm(cout, kk, nn, weight, (kk, 1), xe, (nn, 1), 0.0, oe);
        } else {
            let mut cols = vec![0.0; kk * nn];
            im2col(xe, cin, n, k, &mut cols);
            gemm(cout, kk, nn, weight, (kk, 1), &cols, (nn, 1), 0.0, oe);
        }
        if let Some(b) = bias {
            for (co, plane) in oe.chunks_mut(nn).enumerate() {
                plane.iter_mut().for_each(|v| *v += b[co]);
            }
        }
        if relu {
            oe.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    });
    out
}

/// Weight and bias gradients of one example.
type ParamGrads = (Vec<f64>, Vec<f64>);

/// Gradients of [`conv_forward`]; `dy` must already include the ReLU mask.
/// Returns `(dx, dweight, dbias)`; `dx` is skipped when not requested.
pub(crate) fn conv_backward(
    x: &Batch,
    dy: &Batch,
    weight: &[f64],
    k: usize,
    want_dx: bool,
) -> (Option<Batch>, Vec<f64>, Vec<f64>) {
    let (cin, n, cout) = (x.c, x.n, dy.c);
    let nn = n * n;
    let kk = cin * k * k;
    let per_example = |xe: &[f64], dye: &[f64], dxe: Option<&mut [f64]>| {
        let mut dw = vec![0.0; cout * kk];
        let db: Vec<f64> = dye.chunks(nn).map(|p| p.iter().sum()).collect();
        let cols_owned;
        let cols: &[f64] = if k == 1 {
            xe
        } else {
            let mut c = vec![0.0; kk * nn];
            im2col(xe, cin, n, k, &mut c);
            cols_owned = c;
            &cols_owned
        };
        gemm(cout, nn, kk, dye, (nn, 1), cols, (1, nn), 0.0, &mut dw);
        if let Some(dxe) = dxe {
            if k == 1 {
                gemm(kk, cout, nn, weight, (1, kk), dye, (nn, 1), 0.0, dxe);
            } else {
                let mut dcols = vec![0.0; kk * nn];
                gemm(kk, cout, nn, weight, (1, kk), dye, (nn, 1), 0.0, &mut dcols);
                dxe.iter_mut().for_each(|v| *v = 0.0);
                col2im(&dcols, cin, n, k, dxe);
            }
        }
        (dw, db)
    };
    let (dx, partials): (Option<Batch>, Vec<ParamGrads>) = if want_dx {
        let mut dx = x.same_shape();
        let partials = dx
            .data
            .par_chunks_mut(cin * nn)
            .zip(x.data.par_chunks(cin * nn))
            .zip(dy.data.par_chunks(cout * nn))
            .map(|((dxe, xe), dye)| per_example(xe, dye, Some(dxe)))
            .collect();
        (Some(dx), partials)
    } else {
        let partials = x
            .data
            .par_chunks(cin * nn)
            .zip(dy.data.par_chunks(cout * nn))
            .map(|(xe, dye)| per_example(xe, dye, None))
            .collect();
        (None, partials)
    };
    // fixed-order reduction keeps results independent of the worker count
    let mut dw = vec![0.0; cout * kk];
    let mut db = vec![0.0; cout];
    for (pw, pb) in &partials {
        dw.iter_mut().zip(pw).for_each(|(a, b)| *a += b);
        db.iter_mut().zip(pb).for_each(|(a, b)| *a += b);
    }
    (dx, dw, db)
}

/// Zeroes gradient entries where the ReLU output was not positive.
pub(crate) fn relu_mask(dy: &mut Batch, out: &Batch) {
    dy.data.iter_mut().zip(&out.data).for_each(|(g, &o)| {
        if o <= 0.0 {
            *g = 0.0
        }
    });
}

/// Per-channel mean and biased variance over examples and pixels.
pub(crate) fn channel_stats(x: &Batch) -> (Vec<f64>, Vec<f64>) {
    let nn = x.n * x.n;
    let count = (x.b * nn) as f64;
    let mut mean = vec![0.0; x.c];
    let mut var = vec![0.0; x.c];
    for ch in 0..x.c {
        let planes = || (0..x.b).map(move |e| &x.data[(e * x.c + ch) * nn..][..nn]);
        let m = planes().map(|p| p.iter().sum::<f64>()).sum::<f64>() / count;
        let v = planes().map(|p| p.iter().map(|&a| (a - m) * (a - m)).sum::<f64>()).sum::<f64>() / count;
        mean[ch] = m;
        var[ch] = v;
    }
    (mean, var)
}

/// `y = gamma (x - mean) * inv_std + beta`, per channel.
pub(crate) fn affine_normalize(x: &Batch, mean: &[f64], inv_std: &[f64], gamma: &[f64], beta: &[f64]) -> Batch {
    let nn = x.n * x.n;
    let mut y = x.same_shape();
    for (idx, (yp, xp)) in y.data.chunks_mut(nn).zip(x.data.chunks(nn)).enumerate() {
        let ch = idx % x.c;
        let (m, s, g, b) = (mean[ch], inv_std[ch], gamma[ch], beta[ch]);
        yp.iter_mut().zip(xp).for_each(|(o, &a)| *o = g * (a - m) * s + b);
    }
    y
}

/// Backward pass of training-mode batch normalization.
/// Returns `(dx, dgamma, dbeta)`.
pub(crate) fn batchnorm_backward(
    x: &Batch,
    dy: &Batch,
    mean: &[f64],
    inv_std: &[f64],
    gamma: &[f64],
) -> (Batch, Vec<f64>, Vec<f64>) {
    let nn = x.n * x.n;
    let count = (x.b * nn) as f64;
    let mut dgamma = vec![0.0; x.c];
    let mut dbeta = vec![0.0; x.c];
    for (idx, (dp, xp)) in dy.data.chunks(nn).zip(x.data.chunks(nn)).enumerate() {
        let ch = idx % x.c;
        let (m, s) = (mean[ch], inv_std[ch]);
        for (&g, &a) in dp.iter().zip(xp) {
            dbeta[ch] += g;
            dgamma[ch] += g * (a - m) * s;
        }
    }
    let mut dx = x.same_shape();
    for (idx, ((op, dp), xp)) in dx.data.chunks_mut(nn).zip(dy.data.chunks(nn)).zip(x.data.chunks(nn)).enumerate() {
        let ch = idx % x.c;
        let (m, s, g) = (mean[ch], inv_std[ch], gamma[ch]);
        let (sb, sg) = (dbeta[ch] / count, dgamma[ch] / count);
        for ((o, &d), &a) in op.iter_mut().zip(dp).zip(xp) {
            let xhat = (a - m) * s;
            *o = g * s * (d - sb - xhat * sg);
        }
    }
    (dx, dgamma, dbeta)
}

/// 2x2 average pooling: coarse pixel `(I, J)` averages fine `(2I..2I+1, 2J..2J+1)`.
pub(crate) fn avgpool(x: &Batch) -> Batch {
    let (n, m) = (x.n, x.n / 2);
    let mut out = Batch::zeros(x.b, x.c, m);
    for (op, xp) in out.data.chunks_mut(m * m).zip(x.data.chunks(n * n)) {
        for j in 0..m {
            for i in 0..m {
                let a = (2 * j) * n + 2 * i;
                op[j * m + i] = 0.25 * (xp[a] + xp[a + 1] + xp[a + n] + xp[a + n + 1]);
            }
        }
    }
    out
}

pub(crate) fn avgpool_backward(dy: &Batch) -> Batch {
    let (m, n) = (dy.n, dy.n * 2);
    let mut dx = Batch::zeros(dy.b, dy.c, n);
    for (xp, op) in dx.data.chunks_mut(n * n).zip(dy.data.chunks(m * m)) {
        for j in 0..m {
            for i in 0..m {
                let g = 0.25 * op[j * m + i];
                let a = (2 * j) * n + 2 * i;
                xp[a] = g;
                xp[a + 1] = g;
                xp[a + n] = g;
                xp[a + n + 1] = g;
            }
        }
    }
    dx
}

/// Node-aligned bilinear upsampling by 2 with periodic wrap: even nodes copy,
/// odd nodes average their two neighbours along each axis.
pub(crate) fn upsample(x: &Batch) -> Batch {
    let (m, n) = (x.n, 2 * x.n);
    let mut out = Batch::zeros(x.b, x.c, n);
    let mut rows = vec![0.0; m * n];
    for (op, xp) in out.data.chunks_mut(n * n).zip(x.data.chunks(m * m)) {
        for j in 0..m {
            for i in 0..m {
                let a = xp[j * m + i];
                let b = xp[j * m + (i + 1) % m];
                rows[j * n + 2 * i] = a;
                rows[j * n + 2 * i + 1] = 0.5 * (a + b);
            }
        }
        for j in 0..m {
            let jn = (j + 1) % m;
            for i in 0..n {
                let a = rows[j * n + i];
                let b = rows[jn * n + i];
                op[(2 * j) * n + i] = a;
                op[(2 * j + 1) * n + i] = 0.5 * (a + b);
            }
        }
    }
    out
}

pub(crate) fn upsample_backward(dy: &Batch) -> Batch {
    let (n, m) = (dy.n, dy.n / 2);
    let mut dx = Batch::zeros(dy.b, dy.c, m);
    let mut rows = vec![0.0; m * n];
    for (xp, op) in dx.data.chunks_mut(m * m).zip(dy.data.chunks(n * n)) {
        rows.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..m {
            let jn = (j + 1) % m;
            for i in 0..n {
                let even = op[(2 * j) * n + i];
                let odd = 0.5 * op[(2 * j + 1) * n + i];
                rows[j * n + i] += even + odd;
                rows[jn * n + i] += odd;
            }
        }
        for j in 0..m {
            for i in 0..m {
                let even = rows[j * n + 2 * i];
                let odd = 0.5 * rows[j * n + 2 * i + 1];
                xp[j * m + i] += even + odd;
                xp[j * m + (i + 1) % m] += odd;
            }
        }
    }
    dx
}

/// Channel concatenation `[a; b]` per example.
pub(crate) fn concat(a: &Batch, b: &Batch) -> Batch {
    let nn = a.n * a.n;
    let mut out = Batch::zeros(a.b, a.c + b.c, a.n);
    for e in 0..a.b {
        let dst = &mut out.data[e * (a.c + b.c) * nn..][..(a.c + b.c) * nn];
        dst[..a.c * nn].copy_from_slice(a.example(e));
        dst[a.c * nn..].copy_from_slice(b.example(e));
    }
    out
}

pub(crate) fn split(d: &Batch, ca: usize) -> (Batch, Batch) {
    let nn = d.n * d.n;
    let cb = d.c - ca;
    let mut a = Batch::zeros(d.b, ca, d.n);
    let mut b = Batch::zeros(d.b, cb, d.n);
    for e in 0..d.b {
        let src = d.example(e);
        a.data[e * ca * nn..][..ca * nn].copy_from_slice(&src[..ca * nn]);
        b.data[e * cb * nn..][..cb * nn].copy_from_slice(&src[ca * nn..]);
    }
    (a, b)
}

pub(crate) fn add_into(acc: &mut Batch, other: &Batch) {
    acc.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
}
