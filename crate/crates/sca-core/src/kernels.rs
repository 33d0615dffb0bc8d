//! Raw forward/backward kernels behind the graph ops. Loops are ordered
//! so the innermost axis walks contiguous memory.

use alloc::vec::Vec;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Cross-correlation with bias, NCHW input, FCKhKw weight.
pub fn conv2d_forward<E: Scalar>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    bias: &Tensor<E>,
    stride: usize,
    padding: usize,
) -> Tensor<E> {
    let [n, c_in, h, w] = dims4(input);
    let [f_out, _, kh, kw] = dims4(weight);
    let oh = (h + 2 * padding - kh) / stride + 1;
    let ow = (w + 2 * padding - kw) / stride + 1;

    let x = input.data();
    let wgt = weight.data();
    let b = bias.data();
    let mut out = Tensor::zeros(&[n, f_out, oh, ow]);
    let o = out.data_mut();

    for ni in 0..n {
        for fi in 0..f_out {
            let out_base = (ni * f_out + fi) * oh * ow;
            let bv = b[fi];
            for v in &mut o[out_base..out_base + oh * ow] {
                *v = bv;
            }
            for ci in 0..c_in {
                let in_base = (ni * c_in + ci) * h * w;
                let w_base = (fi * c_in + ci) * kh * kw;
                for khi in 0..kh {
                    for kwi in 0..kw {
                        let wv = wgt[w_base + khi * kw + kwi];
                        for ohi in 0..oh {
                            let ih = (ohi * stride + khi) as isize - padding as isize;
                            if ih < 0 || ih >= h as isize {
                                continue;
                            }
                            let in_row = in_base + ih as usize * w;
                            let out_row = out_base + ohi * ow;
                            for owi in 0..ow {
                                let iw = (owi * stride + kwi) as isize - padding as isize;
                                if iw < 0 || iw >= w as isize {
                                    continue;
                                }
                                o[out_row + owi] += wv * x[in_row + iw as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of conv2d w.r.t. input, weight and bias.
pub fn conv2d_backward<E: Scalar>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    grad_out: &Tensor<E>,
    stride: usize,
    padding: usize,
) -> (Tensor<E>, Tensor<E>, Tensor<E>) {
    let [n, c_in, h, w] = dims4(input);
    let [f_out, _, kh, kw] = dims4(weight);
    let [_, _, oh, ow] = dims4(grad_out);

    let x = input.data();
    let wgt = weight.data();
    let go = grad_out.data();

    let mut d_in = Tensor::zeros(input.shape());
    let mut d_w = Tensor::zeros(weight.shape());
    let mut d_b = Tensor::zeros(&[f_out]);
    let dx = d_in.data_mut();
    let dw = d_w.data_mut();
    let db = d_b.data_mut();

    for ni in 0..n {
        for fi in 0..f_out {
            let out_base = (ni * f_out + fi) * oh * ow;
            let mut b_acc = E::ZERO;
            for &g in &go[out_base..out_base + oh * ow] {
                b_acc += g;
            }
            db[fi] += b_acc;
            for ci in 0..c_in {
                let in_base = (ni * c_in + ci) * h * w;
                let w_base = (fi * c_in + ci) * kh * kw;
                for khi in 0..kh {
                    for kwi in 0..kw {
                        let wv = wgt[w_base + khi * kw + kwi];
                        let mut w_acc = E::ZERO;
                        for ohi in 0..oh {
                            let ih = (ohi * stride + khi) as isize - padding as isize;
                            if ih < 0 || ih >= h as isize {
                                continue;
                            }
                            let in_row = in_base + ih as usize * w;
                            let out_row = out_base + ohi * ow;
                            for owi in 0..ow {
                                let iw = (owi * stride + kwi) as isize - padding as isize;
                                if iw < 0 || iw >= w as isize {
                                    continue;
                                }
                                let g = go[out_row + owi];
                                w_acc += g * x[in_row + iw as usize];
                                dx[in_row + iw as usize] += wv * g;
                            }
                        }
                        dw[w_base + khi * kw + kwi] += w_acc;
                    }
                }
            }
        }
    }
    (d_in, d_w, d_b)
}

/// `out[r, o] = bias[o] + Σ_i input[r, i] · weight[o, i]` over the last axis.
pub fn linear_forward<E: Scalar>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    bias: &Tensor<E>,
) -> Tensor<E> {
    let d_in = *input.shape().last().unwrap();
    let rows = input.numel() / d_in;
    let d_out = weight.shape()[0];

    let x = input.data();
    let wm = weight.data();
    let b = bias.data();

    let mut out_shape: Vec<usize> = input.shape().to_vec();
    *out_shape.last_mut().unwrap() = d_out;
    let mut out = Tensor::zeros(&out_shape);
    let o = out.data_mut();

    for r in 0..rows {
        let xr = &x[r * d_in..(r + 1) * d_in];
        let or = &mut o[r * d_out..(r + 1) * d_out];
        for oi in 0..d_out {
            let wr = &wm[oi * d_in..(oi + 1) * d_in];
            let mut acc = b[oi];
            for i in 0..d_in {
                acc += xr[i] * wr[i];
            }
            or[oi] = acc;
        }
    }
    out
}

pub fn linear_backward<E: Scalar>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    grad_out: &Tensor<E>,
) -> (Tensor<E>, Tensor<E>, Tensor<E>) {
    let d_in = *input.shape().last().unwrap();
    let rows = input.numel() / d_in;
    let d_out = weight.shape()[0];

    let x = input.data();
    let wm = weight.data();
    let go = grad_out.data();

    let mut d_input = Tensor::zeros(input.shape());
    let mut d_weight = Tensor::zeros(weight.shape());
    let mut d_bias = Tensor::zeros(&[d_out]);
    let dx = d_input.data_mut();
    let dw = d_weight.data_mut();
    let db = d_bias.data_mut();

    for r in 0..rows {
        let xr = &x[r * d_in..(r + 1) * d_in];
        let gr = &go[r * d_out..(r + 1) * d_out];
        let dxr = &mut dx[r * d_in..(r + 1) * d_in];
        for oi in 0..d_out {
            let g = gr[oi];
            db[oi] += g;
            let wr = &wm[oi * d_in..(oi + 1) * d_in];
            let dwr = &mut dw[oi * d_in..(oi + 1) * d_in];
            for i in 0..d_in {
                dxr[i] += g * wr[i];
                dwr[i] += g * xr[i];
            }
        }
    }
    (d_input, d_weight, d_bias)
}

/// Tied-transpose affine map: `out[r, i] = bias[i] + Σ_o input[r, o] · weight[o, i]`.
/// Shares the weight matrix of `linear_forward`, used transposed.
pub fn linear_t_forward<E: Scalar>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    bias: &Tensor<E>,
) -> Tensor<E> {
    let d_out = *input.shape().last().unwrap(); // weight rows
    let rows = input.numel() / d_out;
    let d_in = weight.shape()[1];

    let x = input.data();
    let wm = weight.data();
    let b = bias.data();

    let mut out_shape: Vec<usize> = input.shape().to_vec();
    *out_shape.last_mut().unwrap() = d_in;
    let mut out = Tensor::zeros(&out_shape);
    let o = out.data_mut();

    for r in 0..rows {
        let xr = &x[r * d_out..(r + 1) * d_out];
        let or = &mut o[r * d_in..(r + 1) * d_in];
        or.copy_from_slice(&b[..d_in]);
        for oi in 0..d_out {
            let v = xr[oi];
            if v == E::ZERO {
                continue; // k-sparse inputs make this the common case
            }
            let wr = &wm[oi * d_in..(oi + 1) * d_in];
            for i in 0..d_in {
                or[i] += v * wr[i];
            }
        }
    }
    out
}

pub fn linear_t_backward<E: Scalar>(
    input: &Tensor<E>,
    weight: &Tensor<E>,
    grad_out: &Tensor<E>,
) -> (Tensor<E>, Tensor<E>, Tensor<E>) {
    let d_out = *input.shape().last().unwrap();
    let rows = input.numel() / d_out;
    let d_in = weight.shape()[1];

    let x = input.data();
    let wm = weight.data();
    let go = grad_out.data();

    let mut d_input = Tensor::zeros(input.shape());
    let mut d_weight = Tensor::zeros(weight.shape());
    let mut d_bias = Tensor::zeros(&[d_in]);
    let dx = d_input.data_mut();
    let dw = d_weight.data_mut();
    let db = d_bias.data_mut();

    for r in 0..rows {
        let xr = &x[r * d_out..(r + 1) * d_out];
        let gr = &go[r * d_in..(r + 1) * d_in];
        for i in 0..d_in {
            db[i] += gr[i];
        }
        let dxr = &mut dx[r * d_out..(r + 1) * d_out];
        for oi in 0..d_out {
            let wr = &wm[oi * d_in..(oi + 1) * d_in];
            let dwr = &mut dw[oi * d_in..(oi + 1) * d_in];
            let mut acc = E::ZERO;
            let v = xr[oi];
            if v == E::ZERO {
                for i in 0..d_in {
                    acc += gr[i] * wr[i];
                }
            } else {
                for i in 0..d_in {
                    acc += gr[i] * wr[i];
                    dwr[i] += v * gr[i];
                }
            }
            dxr[oi] += acc;
        }
    }
    (d_input, d_weight, d_bias)
}

/// Corner-aligned source coordinate and interpolation weights for one
/// output index. Degenerate source extent 1 replicates.
fn bilinear_coords(out_len: usize, in_len: usize, j: usize) -> (usize, usize, f64) {
    if in_len == 1 || out_len == 1 {
        return (0, 0, 0.0);
    }
    let pos = j as f64 * (in_len - 1) as f64 / (out_len - 1) as f64;
    let lo = pos as usize;
    let hi = if lo + 1 < in_len { lo + 1 } else { lo };
    (lo, hi, pos - lo as f64)
}

pub fn bilinear_forward<E: Scalar>(input: &Tensor<E>, factor: usize) -> Tensor<E> {
    if factor == 1 {
        return input.clone();
    }
    let [n, c, h, w] = dims4(input);
    let (fh, fw) = (h * factor, w * factor);
    let x = input.data();
    let mut out = Tensor::zeros(&[n, c, fh, fw]);
    let o = out.data_mut();

    for plane in 0..n * c {
        let in_base = plane * h * w;
        let out_base = plane * fh * fw;
        for ohi in 0..fh {
            let (h0, h1, th) = bilinear_coords(fh, h, ohi);
            for owi in 0..fw {
                let (w0, w1, tw) = bilinear_coords(fw, w, owi);
                let v00 = x[in_base + h0 * w + w0].to_f64();
                let v01 = x[in_base + h0 * w + w1].to_f64();
                let v10 = x[in_base + h1 * w + w0].to_f64();
                let v11 = x[in_base + h1 * w + w1].to_f64();
                let top = v00 + tw * (v01 - v00);
                let bot = v10 + tw * (v11 - v10);
                o[out_base + ohi * fw + owi] = E::from_f64(top + th * (bot - top));
            }
        }
    }
    out
}

pub fn bilinear_backward<E: Scalar>(
    input_shape: &[usize],
    grad_out: &Tensor<E>,
    factor: usize,
) -> Tensor<E> {
    if factor == 1 {
        return grad_out.clone();
    }
    let (n, c, h, w) = (
        input_shape[0],
        input_shape[1],
        input_shape[2],
        input_shape[3],
    );
    let (fh, fw) = (h * factor, w * factor);
    let go = grad_out.data();
    let mut d_in = Tensor::zeros(input_shape);
    let dx = d_in.data_mut();

    for plane in 0..n * c {
        let in_base = plane * h * w;
        let out_base = plane * fh * fw;
        for ohi in 0..fh {
            let (h0, h1, th) = bilinear_coords(fh, h, ohi);
            for owi in 0..fw {
                let (w0, w1, tw) = bilinear_coords(fw, w, owi);
                let g = go[out_base + ohi * fw + owi].to_f64();
                dx[in_base + h0 * w + w0] += E::from_f64(g * (1.0 - th) * (1.0 - tw));
                dx[in_base + h0 * w + w1] += E::from_f64(g * (1.0 - th) * tw);
                dx[in_base + h1 * w + w0] += E::from_f64(g * th * (1.0 - tw));
                dx[in_base + h1 * w + w1] += E::from_f64(g * th * tw);
            }
        }
    }
    d_in
}

/// Indices of the `k` largest-magnitude entries of one row; ties on
/// magnitude go to the lower index. O(m) selection, not a full sort.
pub fn top_k_indices<E: Scalar>(row: &[E], k: usize) -> Vec<u32> {
    let m = row.len();
    let mut idx: Vec<u32> = (0..m as u32).collect();
    let cmp = |&a: &u32, &b: &u32| {
        let ma = row[a as usize].abs();
        let mb = row[b as usize].abs();
        mb.partial_cmp(&ma)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    };
    if k < m {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable();
    idx
}

pub fn dims4<E: Scalar>(t: &Tensor<E>) -> [usize; 4] {
    let s = t.shape();
    [s[0], s[1], s[2], s[3]]
}
