//! Forward and backward passes for every layer kind, as free functions.
//!
//! Layout conventions: volumetric activations are `[C, D, H, W]` with W
//! contiguous; convolution weights are `[K, C, kd, kh, kw]`; dense weights
//! `[M, N]`. Strides and pads are `[d, h, w]` triples.

use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Output size of a convolution/pool axis, rejecting non-integral fits.
fn out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = input + 2 * pad;
    if padded < kernel || (padded - kernel) % stride != 0 {
        return Err(Error::InvalidLayer(format!(
            "axis of {input} with kernel {kernel}, stride {stride}, pad {pad} \
             gives a non-integral output size"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

pub fn conv3d_output_shape(
    input: &[usize],
    weight: &[usize],
    stride: [usize; 3],
    pad: [usize; 3],
) -> Result<[usize; 4]> {
    if input.len() != 4 || weight.len() != 5 {
        return Err(Error::ShapeMismatch(format!(
            "conv3d expects input [C,D,H,W] and weight [K,C,kd,kh,kw], got {input:?} / {weight:?}"
        )));
    }
    if input[0] != weight[1] {
        return Err(Error::ShapeMismatch(format!(
            "conv3d input has {} channels but weight expects {}",
            input[0], weight[1]
        )));
    }
    if stride.iter().any(|&s| s == 0) {
        return Err(Error::InvalidLayer("stride must be >= 1".into()));
    }
    Ok([
        weight[0],
        out_dim(input[1], weight[2], stride[0], pad[0])?,
        out_dim(input[2], weight[3], stride[1], pad[1])?,
        out_dim(input[3], weight[4], stride[2], pad[2])?,
    ])
}

/// Valid output index range along one axis so that
/// `0 <= o*stride + k_off - pad < input`.
#[inline]
fn valid_range(out_len: usize, input: usize, stride: usize, k_off: usize, pad: usize) -> (usize, usize) {
    let k = k_off as isize - pad as isize;
    let s = stride as isize;
    let lo = if k >= 0 { 0 } else { (-k + s - 1) / s };
    let hi = ((input as isize - 1 - k) / s + 1).clamp(0, out_len as isize);
    (lo.min(hi) as usize, hi as usize)
}

/// Zero-padded cross-correlation.
pub fn conv3d<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: [usize; 3],
    pad: [usize; 3],
) -> Result<Tensor<T>> {
    let [k_out, od, oh, ow] = conv3d_output_shape(input.shape(), weight.shape(), stride, pad)?;
    if bias.shape() != [k_out] {
        return Err(Error::ShapeMismatch(format!(
            "bias {:?} does not match {k_out} output channels",
            bias.shape()
        )));
    }
    let (c_in, d, h, w) = {
        let s = input.shape();
        (s[0], s[1], s[2], s[3])
    };
    let (kd, kh, kw) = {
        let s = weight.shape();
        (s[2], s[3], s[4])
    };
    let mut out = Tensor::zeros(&[k_out, od, oh, ow]);
    let x = input.data();
    let wt = weight.data();
    let out_data = out.data_mut();

    if stride == [1, 1, 1] {
        conv3d_s1_forward(
            x,
            wt,
            bias.data(),
            out_data,
            [c_in, d, h, w],
            [k_out, kd, kh, kw],
            pad,
            [od, oh, ow],
        );
        return Ok(out);
    }

    for k in 0..k_out {
        let b = bias.data()[k];
        let out_k = &mut out_data[k * od * oh * ow..(k + 1) * od * oh * ow];
        out_k.iter_mut().for_each(|v| *v = b);
        for c in 0..c_in {
            for dz in 0..kd {
                let (z0, z1) = valid_range(od, d, stride[0], dz, pad[0]);
                for dy in 0..kh {
                    let (y0, y1) = valid_range(oh, h, stride[1], dy, pad[1]);
                    for dx in 0..kw {
                        let (x0, x1) = valid_range(ow, w, stride[2], dx, pad[2]);
                        let wv = wt[(((k * c_in + c) * kd + dz) * kh + dy) * kw + dx];
                        if wv == T::ZERO {
                            continue;
                        }
                        if x1 <= x0 {
                            continue;
                        }
                        let n = x1 - x0;
                        let ix0 = x0 * stride[2] + dx - pad[2];
                        for oz in z0..z1 {
                            let iz = oz * stride[0] + dz - pad[0];
                            for oy in y0..y1 {
                                let iy = oy * stride[1] + dy - pad[1];
                                let in_row = &x[((c * d + iz) * h + iy) * w..][..w];
                                let out_row =
                                    &mut out_k[(oz * oh + oy) * ow + x0..][..n];
                                if stride[2] == 1 {
                                    let in_s = &in_row[ix0..][..n];
                                    for (o, i) in out_row.iter_mut().zip(in_s) {
                                        *o += wv * *i;
                                    }
                                } else {
                                    for (k, o) in out_row.iter_mut().enumerate() {
                                        *o += wv * in_row[ix0 + k * stride[2]];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Stride-1 forward fast path: plane sweeps per kernel tap with input
/// channels blocked in fours, so each output-row store amortizes four FMA
/// streams.
#[allow(clippy::too_many_arguments)]
fn conv3d_s1_forward<T: Real>(
    x: &[T],
    wt: &[T],
    bias: &[T],
    out: &mut [T],
    in_shape: [usize; 4],
    k_shape: [usize; 4],
    pad: [usize; 3],
    out_shape: [usize; 3],
) {
    let [c_in, d, h, w] = in_shape;
    let [k_out, kd, kh, kw] = k_shape;
    let [od, oh, ow] = out_shape;
    let in_plane = d * h * w;
    for k in 0..k_out {
        let b = bias[k];
        let out_k = &mut out[k * od * oh * ow..(k + 1) * od * oh * ow];
        out_k.iter_mut().for_each(|v| *v = b);
        let w_k = &wt[k * c_in * kd * kh * kw..(k + 1) * c_in * kd * kh * kw];
        for dz in 0..kd {
            let (z0, z1) = valid_range(od, d, 1, dz, pad[0]);
            for dy in 0..kh {
                let (y0, y1) = valid_range(oh, h, 1, dy, pad[1]);
                for dx in 0..kw {
                    let (x0, x1) = valid_range(ow, w, 1, dx, pad[2]);
                    if x1 <= x0 || y1 <= y0 || z1 <= z0 {
                        continue;
                    }
                    let n = x1 - x0;
                    let ix0 = x0 + dx - pad[2];
                    let mut c = 0;
                    // four input channels share each output-row pass
                    while c + 4 <= c_in {
                        let wv = [
                            w_k[((c * kd + dz) * kh + dy) * kw + dx],
                            w_k[(((c + 1) * kd + dz) * kh + dy) * kw + dx],
                            w_k[(((c + 2) * kd + dz) * kh + dy) * kw + dx],
                            w_k[(((c + 3) * kd + dz) * kh + dy) * kw + dx],
                        ];
                        for oz in z0..z1 {
                            let iz = oz + dz - pad[0];
                            for oy in y0..y1 {
                                let iy = oy + dy - pad[1];
                                let row = (iz * h + iy) * w + ix0;
                                let r0 = &x[c * in_plane + row..][..n];
                                let r1 = &x[(c + 1) * in_plane + row..][..n];
                                let r2 = &x[(c + 2) * in_plane + row..][..n];
                                let r3 = &x[(c + 3) * in_plane + row..][..n];
                                let out_row = &mut out_k[(oz * oh + oy) * ow + x0..][..n];
                                for i in 0..n {
                                    out_row[i] += wv[0] * r0[i]
                                        + wv[1] * r1[i]
                                        + wv[2] * r2[i]
                                        + wv[3] * r3[i];
                                }
                            }
                        }
                        c += 4;
                    }
                    while c < c_in {
                        let wv = w_k[((c * kd + dz) * kh + dy) * kw + dx];
                        for oz in z0..z1 {
                            let iz = oz + dz - pad[0];
                            for oy in y0..y1 {
                                let iy = oy + dy - pad[1];
                                let src = &x[c * in_plane + (iz * h + iy) * w + ix0..][..n];
                                let out_row = &mut out_k[(oz * oh + oy) * ow + x0..][..n];
                                for (o, v) in out_row.iter_mut().zip(src) {
                                    *o += wv * *v;
                                }
                            }
                        }
                        c += 1;
                    }
                }
            }
        }
    }
}

/// Stride-1 input-gradient fast path: the transposed sweep with output
/// channels blocked in fours.
#[allow(clippy::too_many_arguments)]
fn conv3d_s1_grad_input<T: Real>(
    go: &[T],
    wt: &[T],
    gin: &mut [T],
    in_shape: [usize; 4],
    k_shape: [usize; 4],
    pad: [usize; 3],
    out_shape: [usize; 3],
) {
    let [c_in, d, h, w] = in_shape;
    let [k_out, kd, kh, kw] = k_shape;
    let [od, oh, ow] = out_shape;
    let out_plane = od * oh * ow;
    let w_per_k = c_in * kd * kh * kw;
    for c in 0..c_in {
        let gin_c = &mut gin[c * d * h * w..(c + 1) * d * h * w];
        for dz in 0..kd {
            let (z0, z1) = valid_range(od, d, 1, dz, pad[0]);
            for dy in 0..kh {
                let (y0, y1) = valid_range(oh, h, 1, dy, pad[1]);
                for dx in 0..kw {
                    let (x0, x1) = valid_range(ow, w, 1, dx, pad[2]);
                    if x1 <= x0 || y1 <= y0 || z1 <= z0 {
                        continue;
                    }
                    let n = x1 - x0;
                    let ix0 = x0 + dx - pad[2];
                    let tap = ((c * kd + dz) * kh + dy) * kw + dx;
                    let mut k = 0;
                    while k + 4 <= k_out {
                        let wv = [
                            wt[k * w_per_k + tap],
                            wt[(k + 1) * w_per_k + tap],
                            wt[(k + 2) * w_per_k + tap],
                            wt[(k + 3) * w_per_k + tap],
                        ];
                        for oz in z0..z1 {
                            let iz = oz + dz - pad[0];
                            for oy in y0..y1 {
                                let iy = oy + dy - pad[1];
                                let row = (oz * oh + oy) * ow + x0;
                                let g0 = &go[k * out_plane + row..][..n];
                                let g1 = &go[(k + 1) * out_plane + row..][..n];
                                let g2 = &go[(k + 2) * out_plane + row..][..n];
                                let g3 = &go[(k + 3) * out_plane + row..][..n];
                                let gin_row = &mut gin_c[(iz * h + iy) * w + ix0..][..n];
                                for i in 0..n {
                                    gin_row[i] += wv[0] * g0[i]
                                        + wv[1] * g1[i]
                                        + wv[2] * g2[i]
                                        + wv[3] * g3[i];
                                }
                            }
                        }
                        k += 4;
                    }
                    while k < k_out {
                        let wv = wt[k * w_per_k + tap];
                        for oz in z0..z1 {
                            let iz = oz + dz - pad[0];
                            for oy in y0..y1 {
                                let iy = oy + dy - pad[1];
                                let src = &go[k * out_plane + (oz * oh + oy) * ow + x0..][..n];
                                let gin_row = &mut gin_c[(iz * h + iy) * w + ix0..][..n];
                                for (g, v) in gin_row.iter_mut().zip(src) {
                                    *g += wv * *v;
                                }
                            }
                        }
                        k += 1;
                    }
                }
            }
        }
    }
}

/// Stride-1 weight-gradient fast path: per (k, tap) reductions with input
/// channels blocked in fours so each grad-output row load feeds four
/// accumulators.
#[allow(clippy::too_many_arguments)]
fn conv3d_s1_grad_w<T: Real>(
    x: &[T],
    go: &[T],
    gw: &mut [T],
    in_shape: [usize; 4],
    k_shape: [usize; 4],
    pad: [usize; 3],
    out_shape: [usize; 3],
) {
    let [c_in, d, h, w] = in_shape;
    let [k_out, kd, kh, kw] = k_shape;
    let [od, oh, ow] = out_shape;
    let in_plane = d * h * w;
    let w_per_k = c_in * kd * kh * kw;
    for k in 0..k_out {
        let go_k = &go[k * od * oh * ow..(k + 1) * od * oh * ow];
        for dz in 0..kd {
            let (z0, z1) = valid_range(od, d, 1, dz, pad[0]);
            for dy in 0..kh {
                let (y0, y1) = valid_range(oh, h, 1, dy, pad[1]);
                for dx in 0..kw {
                    let (x0, x1) = valid_range(ow, w, 1, dx, pad[2]);
                    if x1 <= x0 || y1 <= y0 || z1 <= z0 {
                        continue;
                    }
                    let n = x1 - x0;
                    let ix0 = x0 + dx - pad[2];
                    let mut c = 0;
                    while c + 4 <= c_in {
                        let mut acc = [T::ZERO; 4];
                        for oz in z0..z1 {
                            let iz = oz + dz - pad[0];
                            for oy in y0..y1 {
                                let iy = oy + dy - pad[1];
                                let row = (iz * h + iy) * w + ix0;
                                let g = &go_k[(oz * oh + oy) * ow + x0..][..n];
                                let r0 = &x[c * in_plane + row..][..n];
                                let r1 = &x[(c + 1) * in_plane + row..][..n];
                                let r2 = &x[(c + 2) * in_plane + row..][..n];
                                let r3 = &x[(c + 3) * in_plane + row..][..n];
                                for i in 0..n {
                                    acc[0] += g[i] * r0[i];
                                    acc[1] += g[i] * r1[i];
                                    acc[2] += g[i] * r2[i];
                                    acc[3] += g[i] * r3[i];
                                }
                            }
                        }
                        for (j, a) in acc.iter().enumerate() {
                            gw[k * w_per_k + (((c + j) * kd + dz) * kh + dy) * kw + dx] += *a;
                        }
                        c += 4;
                    }
                    while c < c_in {
                        let mut acc = T::ZERO;
                        for oz in z0..z1 {
                            let iz = oz + dz - pad[0];
                            for oy in y0..y1 {
                                let iy = oy + dy - pad[1];
                                let g = &go_k[(oz * oh + oy) * ow + x0..][..n];
                                let src = &x[c * in_plane + (iz * h + iy) * w + ix0..][..n];
                                for (gv, xv) in g.iter().zip(src) {
                                    acc += *gv * *xv;
                                }
                            }
                        }
                        gw[k * w_per_k + ((c * kd + dz) * kh + dy) * kw + dx] += acc;
                        c += 1;
                    }
                }
            }
        }
    }
}

/// Gradients of [`conv3d`] with respect to input, weight and bias.
pub fn conv3d_backward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: [usize; 3],
    pad: [usize; 3],
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let [k_out, od, oh, ow] = conv3d_output_shape(input.shape(), weight.shape(), stride, pad)?;
    if grad_out.shape() != [k_out, od, oh, ow] {
        return Err(Error::ShapeMismatch(format!(
            "grad_out {:?} does not match conv output {:?}",
            grad_out.shape(),
            [k_out, od, oh, ow]
        )));
    }
    let (c_in, d, h, w) = {
        let s = input.shape();
        (s[0], s[1], s[2], s[3])
    };
    let (kd, kh, kw) = {
        let s = weight.shape();
        (s[2], s[3], s[4])
    };
    let mut grad_in = Tensor::zeros(input.shape());
    let mut grad_w = Tensor::zeros(weight.shape());
    let mut grad_b = Tensor::zeros(&[k_out]);

    let x = input.data();
    let wt = weight.data();
    let go = grad_out.data();

    let fast_input_path = stride == [1, 1, 1];
    if fast_input_path {
        conv3d_s1_grad_input(
            go,
            wt,
            grad_in.data_mut(),
            [c_in, d, h, w],
            [k_out, kd, kh, kw],
            pad,
            [od, oh, ow],
        );
        conv3d_s1_grad_w(
            x,
            go,
            grad_w.data_mut(),
            [c_in, d, h, w],
            [k_out, kd, kh, kw],
            pad,
            [od, oh, ow],
        );
        for k in 0..k_out {
            let go_k = &go[k * od * oh * ow..(k + 1) * od * oh * ow];
            grad_b.data_mut()[k] = go_k.iter().fold(T::ZERO, |acc, v| acc + *v);
        }
        return Ok((grad_in, grad_w, grad_b));
    }

    for k in 0..k_out {
        let go_k = &go[k * od * oh * ow..(k + 1) * od * oh * ow];
        grad_b.data_mut()[k] = go_k.iter().fold(T::ZERO, |acc, v| acc + *v);
        for c in 0..c_in {
            for dz in 0..kd {
                let (z0, z1) = valid_range(od, d, stride[0], dz, pad[0]);
                for dy in 0..kh {
                    let (y0, y1) = valid_range(oh, h, stride[1], dy, pad[1]);
                    for dx in 0..kw {
                        let (x0, x1) = valid_range(ow, w, stride[2], dx, pad[2]);
                        let w_idx = (((k * c_in + c) * kd + dz) * kh + dy) * kw + dx;
                        let wv = wt[w_idx];
                        if x1 <= x0 {
                            continue;
                        }
                        let n = x1 - x0;
                        let ix0 = x0 * stride[2] + dx - pad[2];
                        let mut gw_acc = T::ZERO;
                        for oz in z0..z1 {
                            let iz = oz * stride[0] + dz - pad[0];
                            for oy in y0..y1 {
                                let iy = oy * stride[1] + dy - pad[1];
                                let in_base = ((c * d + iz) * h + iy) * w + ix0;
                                let go_row = &go_k[(oz * oh + oy) * ow + x0..][..n];
                                if stride[2] == 1 {
                                    let x_s = &x[in_base..][..n];
                                    for (g, xi) in go_row.iter().zip(x_s) {
                                        gw_acc += *g * *xi;
                                    }
                                    if !fast_input_path {
                                        let gin_s = &mut grad_in.data_mut()[in_base..][..n];
                                        for (gi, g) in gin_s.iter_mut().zip(go_row) {
                                            *gi += wv * *g;
                                        }
                                    }
                                } else {
                                    let gin = grad_in.data_mut();
                                    for (kk, g) in go_row.iter().enumerate() {
                                        let ix = in_base + kk * stride[2];
                                        gw_acc += *g * x[ix];
                                        gin[ix] += wv * *g;
                                    }
                                }
                            }
                        }
                        grad_w.data_mut()[w_idx] += gw_acc;
                    }
                }
            }
        }
    }
    Ok((grad_in, grad_w, grad_b))
}

/// Windowed maximum; returns the output and per-cell argmax (flat input
/// index, first index wins ties) for gradient routing.
pub fn maxpool3d<T: Real>(
    input: &Tensor<T>,
    window: [usize; 3],
    stride: [usize; 3],
) -> Result<(Tensor<T>, Vec<usize>)> {
    let s = input.shape();
    if s.len() != 4 {
        return Err(Error::ShapeMismatch(format!(
            "maxpool3d expects [C,D,H,W], got {s:?}"
        )));
    }
    let (c_in, d, h, w) = (s[0], s[1], s[2], s[3]);
    if window[0] > d || window[1] > h || window[2] > w {
        return Err(Error::InvalidLayer(format!(
            "pool window {window:?} exceeds input {:?}",
            &s[1..]
        )));
    }
    let od = out_dim(d, window[0], stride[0], 0)?;
    let oh = out_dim(h, window[1], stride[1], 0)?;
    let ow = out_dim(w, window[2], stride[2], 0)?;
    let mut out = Tensor::zeros(&[c_in, od, oh, ow]);
    let mut argmax = vec![0usize; c_in * od * oh * ow];
    let x = input.data();
    let out_data = out.data_mut();

    let mut oi = 0;
    for c in 0..c_in {
        for oz in 0..od {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = T::ZERO;
                    let mut best_idx = usize::MAX;
                    for dz in 0..window[0] {
                        let iz = oz * stride[0] + dz;
                        for dy in 0..window[1] {
                            let iy = oy * stride[1] + dy;
                            let base = ((c * d + iz) * h + iy) * w + ox * stride[2];
                            for dx in 0..window[2] {
                                let v = x[base + dx];
                                if best_idx == usize::MAX || v > best {
                                    best = v;
                                    best_idx = base + dx;
                                }
                            }
                        }
                    }
                    out_data[oi] = best;
                    argmax[oi] = best_idx;
                    oi += 1;
                }
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool3d_backward<T: Real>(
    argmax: &[usize],
    grad_out: &Tensor<T>,
    input_shape: &[usize],
) -> Tensor<T> {
    let mut grad_in = Tensor::zeros(input_shape);
    let gin = grad_in.data_mut();
    for (g, &idx) in grad_out.data().iter().zip(argmax) {
        gin[idx] += *g;
    }
    grad_in
}

pub fn relu<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    let mut out = input.clone();
    out.data_mut()
        .iter_mut()
        .for_each(|v| *v = v.maximum(T::ZERO));
    out
}

/// Subgradient 0 at exactly 0.
pub fn relu_backward<T: Real>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let mut grad_in = grad_out.clone();
    for (g, x) in grad_in.data_mut().iter_mut().zip(input.data()) {
        if !(*x > T::ZERO) {
            *g = T::ZERO;
        }
    }
    grad_in
}

/// Affine map `y = W x + b` on a flat input.
pub fn dense<T: Real>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let n = input.numel();
    let ws = weight.shape();
    if ws.len() != 2 || ws[1] != n || bias.numel() != ws[0] {
        return Err(Error::ShapeMismatch(format!(
            "dense: input {n}, weight {ws:?}, bias {:?}",
            bias.shape()
        )));
    }
    let m = ws[0];
    let mut out = Tensor::zeros(&[m]);
    let x = input.data();
    let wt = weight.data();
    for (i, o) in out.data_mut().iter_mut().enumerate() {
        let row = &wt[i * n..(i + 1) * n];
        let mut acc = bias.data()[i];
        for (wv, xv) in row.iter().zip(x) {
            acc += *wv * *xv;
        }
        *o = acc;
    }
    Ok(out)
}

pub fn dense_backward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let n = input.numel();
    let m = weight.shape()[0];
    let mut grad_in = Tensor::zeros(input.shape());
    let mut grad_w = Tensor::zeros(weight.shape());
    let grad_b = grad_out.clone().reshaped(&[m]).expect("grad_out is [m]");
    let x = input.data();
    let wt = weight.data();
    let go = grad_out.data();
    for i in 0..m {
        let g = go[i];
        let row = &wt[i * n..(i + 1) * n];
        let gw_row = &mut grad_w.data_mut()[i * n..(i + 1) * n];
        for j in 0..n {
            gw_row[j] += g * x[j];
        }
        let gin = grad_in.data_mut();
        for j in 0..n {
            gin[j] += g * row[j];
        }
    }
    (grad_in, grad_w, grad_b)
}

/// Max-subtracted softmax probabilities.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Tensor<T> {
    let mut out = logits.clone();
    let data = out.data_mut();
    let max = data
        .iter()
        .fold(T::from_f64(f64::NEG_INFINITY), |a, v| a.maximum(*v));
    let mut sum = T::ZERO;
    for v in data.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in data.iter_mut() {
        *v = *v / sum;
    }
    out
}

/// Returns `(-log p[label], p - one_hot(label))`.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor<T>, label: usize) -> Result<(T, Tensor<T>)> {
    let n = logits.numel();
    if label >= n {
        return Err(Error::LabelOutOfRange { label, classes: n });
    }
    let mut probs = softmax(logits);
    let p_label = probs.data()[label];
    // clamp to avoid -inf on a fully collapsed softmax
    let loss = -(p_label.maximum(T::from_f64(1e-300))).ln();
    probs.data_mut()[label] -= T::ONE;
    Ok((loss, probs))
}

/// Elementwise smooth-L1 (quadratic inside |x| < 1), summed.
/// Returns `(loss, grad_pred)`.
pub fn smooth_l1<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "smooth_l1: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let mut loss = T::ZERO;
    let mut grad = Tensor::zeros(pred.shape());
    let half = T::from_f64(0.5);
    for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let x = *p - *t;
        if x.abs() < T::ONE {
            loss += half * x * x;
            *g = x;
        } else {
            loss += x.abs() - half;
            *g = if x > T::ZERO { T::ONE } else { -T::ONE };
        }
    }
    Ok((loss, grad))
}

/// Axis-aligned region in continuous feature-grid coordinates, `[d, h, w]`
/// order, used by ROI pooling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoiBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

pub const ROI_POOL_SIZE: usize = 6;

/// Result of ROI max pooling: fixed 6x6x6 cells per channel, argmax routing
/// (None for cells that fell outside the grid) and a flag set when the whole
/// ROI missed the grid.
pub struct RoiPool<T: Real> {
    pub output: Tensor<T>,
    pub argmax: Vec<Option<usize>>,
    pub fully_outside: bool,
}

/// Max-pools an ROI into a 6x6x6 lattice with floor/ceil bin edges. Cells
/// outside the feature grid read 0.
pub fn roi_maxpool3d<T: Real>(feature: &Tensor<T>, roi: &RoiBox) -> Result<RoiPool<T>> {
    let s = feature.shape();
    if s.len() != 4 {
        return Err(Error::ShapeMismatch(format!(
            "roi_maxpool3d expects [C,D,H,W], got {s:?}"
        )));
    }
    let (c_in, dims) = (s[0], [s[1], s[2], s[3]]);
    let n = ROI_POOL_SIZE;

    // per-axis integer cell ranges for each of the 6 bins
    let mut ranges = [[(0usize, 0usize); ROI_POOL_SIZE]; 3];
    for axis in 0..3 {
        let lo = roi.min[axis];
        let len = roi.max[axis] - roi.min[axis];
        for bin in 0..n {
            let e0 = lo + len * bin as f64 / n as f64;
            let e1 = lo + len * (bin + 1) as f64 / n as f64;
            let start = e0.floor().max(0.0) as usize;
            let end = (e1.ceil().min(dims[axis] as f64)).max(0.0) as usize;
            ranges[axis][bin] = (start.min(end), end);
        }
    }

    let mut out = Tensor::zeros(&[c_in, n, n, n]);
    let mut argmax = vec![None; c_in * n * n * n];
    let x = feature.data();
    let (d, h, w) = (dims[0], dims[1], dims[2]);
    let mut any_cell = false;

    let out_data = out.data_mut();
    let mut oi = 0;
    for c in 0..c_in {
        for bz in 0..n {
            let (z0, z1) = ranges[0][bz];
            for by in 0..n {
                let (y0, y1) = ranges[1][by];
                for bx in 0..n {
                    let (x0, x1) = ranges[2][bx];
                    let mut best = T::ZERO;
                    let mut best_idx = None;
                    for iz in z0..z1 {
                        for iy in y0..y1 {
                            let base = ((c * d + iz) * h + iy) * w;
                            for ix in x0..x1 {
                                let v = x[base + ix];
                                if best_idx.is_none() || v > best {
                                    best = v;
                                    best_idx = Some(base + ix);
                                }
                            }
                        }
                    }
                    if best_idx.is_some() {
                        any_cell = true;
                        out_data[oi] = best;
                    }
                    argmax[oi] = best_idx;
                    oi += 1;
                }
            }
        }
    }
    Ok(RoiPool {
        output: out,
        argmax,
        fully_outside: !any_cell,
    })
}

pub fn roi_maxpool3d_backward<T: Real>(
    argmax: &[Option<usize>],
    grad_out: &Tensor<T>,
    feature_shape: &[usize],
) -> Tensor<T> {
    let mut grad_in = Tensor::zeros(feature_shape);
    let gin = grad_in.data_mut();
    for (g, idx) in grad_out.data().iter().zip(argmax) {
        if let Some(i) = idx {
            gin[*i] += *g;
        }
    }
    grad_in
}
