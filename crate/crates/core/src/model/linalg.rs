//! Thin safe wrappers over `matrixmultiply::dgemm` plus the elementwise
//! kernels shared by training and inference.

/// A strided matrix view: element (i, j) lives at `off + i*rs + j*cs`.
#[derive(Clone, Copy)]
pub(crate) struct View {
    pub off: usize,
    pub rs: usize,
    pub cs: usize,
}

impl View {
    pub fn rows(cols: usize) -> View {
        View { off: 0, rs: cols, cs: 1 }
    }

    /// Transposed view of a row-major matrix with `cols` columns.
    pub fn t(cols: usize) -> View {
        View { off: 0, rs: 1, cs: cols }
    }

    pub fn at(self, off: usize) -> View {
        View { off, ..self }
    }

    fn last(self, m: usize, n: usize) -> usize {
        self.off + (m - 1) * self.rs + (n - 1) * self.cs
    }
}

/// `C = alpha·A·B + beta·C` with `A` m×k, `B` k×n, `C` m×n.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    av: View,
    b: &[f64],
    bv: View,
    beta: f64,
    c: &mut [f64],
    cv: View,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(cv.last(m, n) < c.len());
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                let x = &mut c[cv.off + i * cv.rs + j * cv.cs];
                *x *= beta;
            }
        }
        return;
    }
    assert!(av.last(m, k) < a.len() && bv.last(k, n) < b.len());
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is borrowed mutably so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr().add(av.off),
            av.rs as isize,
            av.cs as isize,
            b.as_ptr().add(bv.off),
            bv.rs as isize,
            bv.cs as isize,
            beta,
            c.as_mut_ptr().add(cv.off),
            cv.rs as isize,
            cv.cs as isize,
        );
    }
}

/// `out = x·W + bias` for row-major `x` (rows×inp) and `W` (inp×outp).
pub(crate) fn linear(x: &[f64], rows: usize, inp: usize, w: &[f64], bias: &[f64], outp: usize, out: &mut [f64]) {
    for r in 0..rows {
        out[r * outp..(r + 1) * outp].copy_from_slice(bias);
    }
    gemm(rows, inp, outp, 1.0, x, View::rows(inp), w, View::rows(outp), 1.0, out, View::rows(outp));
}

/// Backward of [`linear`]: accumulates weight and bias gradients and
/// writes (or adds, when `accumulate`) the input gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward(
    x: &[f64],
    rows: usize,
    inp: usize,
    w: &[f64],
    outp: usize,
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: &mut [f64],
    accumulate: bool,
) {
    gemm(inp, rows, outp, 1.0, x, View::t(inp), dout, View::rows(outp), 1.0, dw, View::rows(outp));
    for r in 0..rows {
        for (b, g) in db.iter_mut().zip(&dout[r * outp..(r + 1) * outp]) {
            *b += g;
        }
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    gemm(rows, outp, inp, 1.0, dout, View::rows(outp), w, View::t(outp), beta, dx, View::rows(inp));
}

/// Row-wise LayerNorm. Returns normalized inputs and reciprocal deviations
/// for the backward pass when `keep` is set.
pub(crate) fn layer_norm(
    x: &[f64],
    d: usize,
    g: &[f64],
    b: &[f64],
    eps: f64,
    out: &mut [f64],
    xhat: Option<&mut Vec<f64>>,
    rstd: Option<&mut Vec<f64>>,
) {
    let rows = x.len() / d;
    let mut xh = Vec::new();
    let mut rs = Vec::new();
    let keep = xhat.is_some();
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let s = 1.0 / (var + eps).sqrt();
        for j in 0..d {
            let h = (row[j] - mean) * s;
            out[r * d + j] = h * g[j] + b[j];
            if keep {
                xh.push(h);
            }
        }
        if keep {
            rs.push(s);
        }
    }
    if let (Some(xhat), Some(rstd)) = (xhat, rstd) {
        *xhat = xh;
        *rstd = rs;
    }
}

/// Backward of [`layer_norm`]; adds the input gradient into `dx`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn layer_norm_backward(
    dy: &[f64],
    d: usize,
    xhat: &[f64],
    rstd: &[f64],
    g: &[f64],
    dg: &mut [f64],
    db: &mut [f64],
    dx: &mut [f64],
) {
    let rows = dy.len() / d;
    let mut dxhat = vec![0.0; d];
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xr = &xhat[r * d..(r + 1) * d];
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_x = 0.0;
        for j in 0..d {
            dg[j] += dyr[j] * xr[j];
            db[j] += dyr[j];
            dxhat[j] = dyr[j] * g[j];
            mean_dxhat += dxhat[j];
            mean_dxhat_x += dxhat[j] * xr[j];
        }
        mean_dxhat /= d as f64;
        mean_dxhat_x /= d as f64;
        for j in 0..d {
            dx[r * d + j] += rstd[r] * (dxhat[j] - mean_dxhat - xr[j] * mean_dxhat_x);
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// The tanh approximation of GELU used by GPT-2 ("gelu_new").
pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

/// In-place softmax of one row; returns log of the normalizer.
pub(crate) fn softmax_row(row: &mut [f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
    max + sum.ln()
}

/// Log-softmax of a row into a new vector.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}
