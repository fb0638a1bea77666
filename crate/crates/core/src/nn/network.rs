//! Batched forward and reverse passes, generic over the element type.
//!
//! Activations are stored channel-major, `[C, B, H, W]`, so each convolution
//! is one GEMM of the kernel matrix `[c_out, 9 c_in]` with an im2col buffer
//! `[9 c_in, B H_out W_out]` whose product lands directly in the same layout.
//! Stride-2 convolutions pad one pixel at the leading edge and produce
//! `floor(h / 2)` outputs.

use super::arch::{ArchitectureSpec, ConvShape};
use super::params::ParamSet;
use super::scalar::{gemm, Mat, Scalar};

/// Probability clipping bound applied before taking logarithms.
pub const PROB_EPS: f64 = 1e-7;

fn im2col<T: Scalar>(x: &[T], shape: &ConvShape, batch: usize, col: &mut [T]) {
    let (h, ho, s) = (shape.h_in, shape.h_out, shape.stride);
    let n = batch * ho * ho;
    for ci in 0..shape.c_in {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut col[(ci * 9 + ky * 3 + kx) * n..][..n];
                for b in 0..batch {
                    let img = &x[(ci * batch + b) * h * h..][..h * h];
                    for oy in 0..ho {
                        let dst = &mut row[(b * ho + oy) * ho..][..ho];
                        let iy = (oy * s + ky) as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            dst.fill(T::zero());
                            continue;
                        }
                        let src = &img[iy as usize * h..][..h];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * s + kx) as isize - 1;
                            *d = if ix >= 0 && ix < h as isize { src[ix as usize] } else { T::zero() };
                        }
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(col: &[T], shape: &ConvShape, batch: usize, dx: &mut [T]) {
    let (h, ho, s) = (shape.h_in, shape.h_out, shape.stride);
    let n = batch * ho * ho;
    dx.fill(T::zero());
    for ci in 0..shape.c_in {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &col[(ci * 9 + ky * 3 + kx) * n..][..n];
                for b in 0..batch {
                    let img = &mut dx[(ci * batch + b) * h * h..][..h * h];
                    for oy in 0..ho {
                        let iy = (oy * s + ky) as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &row[(b * ho + oy) * ho..][..ho];
                        let dst = &mut img[iy as usize * h..][..h];
                        for (ox, &g) in src.iter().enumerate() {
                            let ix = (ox * s + kx) as isize - 1;
                            if ix >= 0 && ix < h as isize {
                                dst[ix as usize] += g;
                            }
                        }
                    }
                }
            }
        }
    }
}

#[inline]
fn leaky<T: Scalar>(v: T, slope: T) -> T {
    if v >= T::zero() {
        v
    } else {
        v * slope
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy of logits against 0/1 targets, with probabilities
/// clipped to `[eps, 1 - eps]`.
pub(crate) fn bce(logits: &[f64], targets: &[f64]) -> f64 {
    let (lo, hi) = (PROB_EPS.ln(), (1.0 - PROB_EPS).ln());
    let total: f64 = logits
        .iter()
        .zip(targets)
        .map(|(&z, &y)| {
            let ln_p = (-softplus(-z)).clamp(lo, hi);
            let ln_q = (-softplus(z)).clamp(lo, hi);
            -(y * ln_p + (1.0 - y) * ln_q)
        })
        .sum();
    total / logits.len().max(1) as f64
}

pub(crate) struct Forward<T> {
    pub logits: Vec<T>,
    batch: usize,
    cols: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
    pooled: Vec<T>,
}

/// Run the network on `batch` inputs laid out `[C, B, H, W]`.
/// With `keep` unset the per-layer buffers are dropped as soon as possible.
pub(crate) fn forward<T: Scalar>(
    arch: &ArchitectureSpec,
    params: &ParamSet<T>,
    input: &[T],
    batch: usize,
    keep: bool,
) -> Forward<T> {
    let slope = T::of_f64(arch.leaky_slope);
    let convs = arch.convs();
    let mut cols = Vec::with_capacity(if keep { convs.len() } else { 0 });
    let mut pres = Vec::with_capacity(cols.capacity());
    let mut x: Vec<T> = input.to_vec();
    for (l, shape) in convs.iter().enumerate() {
        let n = batch * shape.h_out * shape.h_out;
        let mut col = vec![T::zero(); shape.fan_in() * n];
        im2col(&x, shape, batch, &mut col);
        let mut pre = vec![T::zero(); shape.c_out * n];
        for (c, row) in pre.chunks_mut(n).enumerate() {
            row.fill(params.conv_bias(l)[c]);
        }
        gemm(
            shape.c_out,
            shape.fan_in(),
            n,
            T::one(),
            Mat::rows(params.conv_weight(l), shape.fan_in()),
            Mat::rows(&col, n),
            T::one(),
            &mut pre,
        );
        x = pre.iter().map(|&v| leaky(v, slope)).collect();
        if keep {
            cols.push(col);
            pres.push(pre);
        }
    }
    let c_last = arch.final_channels();
    let p = arch.final_size() * arch.final_size();
    let inv_p = T::of_f64(1.0 / p as f64);
    let mut pooled = vec![T::zero(); c_last * batch];
    for (g, chunk) in pooled.iter_mut().zip(x.chunks(p)) {
        *g = chunk.iter().fold(T::zero(), |a, &v| a + v) * inv_p;
    }
    let fc = params.fc_weight();
    let logits = (0..batch)
        .map(|b| (0..c_last).fold(params.fc_bias(), |acc, c| acc + fc[c] * pooled[c * batch + b]))
        .collect();
    Forward { logits, batch, cols, pre: pres, pooled }
}

/// Gradients of a scalar loss given its derivative w.r.t. each logit.
pub(crate) fn backward<T: Scalar>(
    arch: &ArchitectureSpec,
    params: &ParamSet<T>,
    fwd: &Forward<T>,
    dlogits: &[T],
) -> ParamSet<T> {
    let batch = fwd.batch;
    assert_eq!(fwd.cols.len(), 2 * arch.blocks.len(), "forward pass did not keep its buffers");
    let slope = T::of_f64(arch.leaky_slope);
    let convs = arch.convs();
    let mut grads = params.zeros_like();
    let n_slots = grads.slots.len();

    let c_last = arch.final_channels();
    let p = arch.final_size() * arch.final_size();
    {
        let dfc = grads.slice_mut(n_slots - 2);
        for (c, d) in dfc.iter_mut().enumerate() {
            *d = (0..batch).fold(T::zero(), |a, b| a + dlogits[b] * fwd.pooled[c * batch + b]);
        }
    }
    grads.slice_mut(n_slots - 1)[0] = dlogits.iter().fold(T::zero(), |a, &v| a + v);

    let inv_p = T::of_f64(1.0 / p as f64);
    let fc = params.fc_weight();
    let mut dy = vec![T::zero(); c_last * batch * p];
    for c in 0..c_last {
        for b in 0..batch {
            let g = fc[c] * dlogits[b] * inv_p;
            dy[(c * batch + b) * p..][..p].fill(g);
        }
    }

    for l in (0..convs.len()).rev() {
        let shape = &convs[l];
        let n = batch * shape.h_out * shape.h_out;
        let pre = &fwd.pre[l];
        for (d, &v) in dy.iter_mut().zip(pre) {
            if v < T::zero() {
                *d *= slope;
            }
        }
        {
            let dw = grads.slice_mut(2 * l);
            gemm(
                shape.c_out,
                n,
                shape.fan_in(),
                T::one(),
                Mat::rows(&dy, n),
                Mat::transposed(&fwd.cols[l], n),
                T::zero(),
                dw,
            );
        }
        {
            let db = grads.slice_mut(2 * l + 1);
            for (c, row) in dy.chunks(n).enumerate() {
                db[c] = row.iter().fold(T::zero(), |a, &v| a + v);
            }
        }
        if l > 0 {
            let mut dcol = vec![T::zero(); shape.fan_in() * n];
            gemm(
                shape.fan_in(),
                shape.c_out,
                n,
                T::one(),
                Mat::transposed(params.conv_weight(l), shape.fan_in()),
                Mat::rows(&dy, n),
                T::zero(),
                &mut dcol,
            );
            let mut dx = vec![T::zero(); shape.c_in * batch * shape.h_in * shape.h_in];
            col2im(&dcol, shape, batch, &mut dx);
            dy = dx;
        }
    }
    grads
}

/// Mean cross-entropy loss and its gradient for inputs laid out `[C, B, H, W]`.
pub(crate) fn loss_and_grad<T: Scalar>(
    arch: &ArchitectureSpec,
    params: &ParamSet<T>,
    input: &[T],
    targets: &[f64],
) -> (f64, Vec<f64>, ParamSet<T>) {
    let batch = targets.len();
    let fwd = forward(arch, params, input, batch, true);
    let logits: Vec<f64> = fwd.logits.iter().map(|v| v.as_f64()).collect();
    let loss = bce(&logits, targets);
    // d(loss)/dz = (p - y) / B: the derivative of the unclipped loss.
    let dlogits: Vec<T> = logits
        .iter()
        .zip(targets)
        .map(|(&z, &y)| T::of_f64((sigmoid(z) - y) / batch as f64))
        .collect();
    let grads = backward(arch, params, &fwd, &dlogits);
    (loss, logits, grads)
}
