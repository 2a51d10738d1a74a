//! Forward and backward kernels. Each op validates shapes, computes its
//! forward value, and exposes the matching vector-Jacobian product used by
//! `Graph::backward`. Accumulation order is fixed so gradients are
//! bit-identical across runs.

use super::scalar::Scalar;
use super::FieldTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Same,
    Valid,
}

/// Output height/width and zero-pad amount for a conv.
fn conv_geometry(
    h: usize,
    w: usize,
    k: usize,
    padding: Padding,
    stride: usize,
) -> Result<(usize, usize, usize)> {
    if k % 2 == 0 {
        return Err(Error::Dim(format!("kernel size {k} must be odd")));
    }
    if stride != 1 && stride != 2 {
        return Err(Error::Dim(format!("stride {stride} unsupported")));
    }
    match padding {
        Padding::Same => Ok((h.div_ceil(stride), w.div_ceil(stride), k / 2)),
        Padding::Valid => {
            if h < k || w < k {
                return Err(Error::Dim(format!(
                    "valid conv needs input >= kernel, got {h}x{w} vs {k}"
                )));
            }
            Ok(((h - k) / stride + 1, (w - k) / stride + 1, 0))
        }
    }
}

/// dst[y, x] += w * src[y + off_y, x + off_x] over the valid overlap.
fn axpy_shift<F: Scalar>(
    dst: &mut [F],
    (dh, dw): (usize, usize),
    src: &[F],
    (sh, sw): (usize, usize),
    w: F,
    off_y: isize,
    off_x: isize,
) {
    let y_lo = 0.max(-off_y) as usize;
    let y_hi = (dh as isize).min(sh as isize - off_y).max(0) as usize;
    let x_lo = 0.max(-off_x) as usize;
    let x_hi = (dw as isize).min(sw as isize - off_x).max(0) as usize;
    if x_lo >= x_hi {
        return;
    }
    for y in y_lo..y_hi {
        let sy = (y as isize + off_y) as usize;
        let d = &mut dst[y * dw + x_lo..y * dw + x_hi];
        let s = &src[sy * sw + (x_lo as isize + off_x) as usize..];
        for (dv, sv) in d.iter_mut().zip(&s[..x_hi - x_lo]) {
            *dv += w * *sv;
        }
    }
}

/// Sum of a[y, x] * b[y + off_y, x + off_x] over the valid overlap.
fn dot_shift<F: Scalar>(
    a: &[F],
    (ah, aw): (usize, usize),
    b: &[F],
    (bh, bw): (usize, usize),
    off_y: isize,
    off_x: isize,
) -> F {
    let y_lo = 0.max(-off_y) as usize;
    let y_hi = (ah as isize).min(bh as isize - off_y).max(0) as usize;
    let x_lo = 0.max(-off_x) as usize;
    let x_hi = (aw as isize).min(bw as isize - off_x).max(0) as usize;
    let mut acc = F::zero();
    if x_lo >= x_hi {
        return acc;
    }
    for y in y_lo..y_hi {
        let by = (y as isize + off_y) as usize;
        let ar = &a[y * aw + x_lo..y * aw + x_hi];
        let br = &b[by * bw + (x_lo as isize + off_x) as usize..];
        for (av, bv) in ar.iter().zip(&br[..x_hi - x_lo]) {
            acc += *av * *bv;
        }
    }
    acc
}

pub fn conv2d<F: Scalar>(
    input: &FieldTensor<F>,
    kernel: &FieldTensor<F>,
    bias: &FieldTensor<F>,
    padding: Padding,
    stride: usize,
) -> Result<FieldTensor<F>> {
    let (ci, h, w) = input.dims3()?;
    let (co, kci, kh, kw) = kernel.dims4()?;
    let bn = bias.dims1()?;
    if kci != ci || kh != kw || bn != co {
        return Err(Error::Dim(format!(
            "conv2d shapes: input {:?}, kernel {:?}, bias {:?}",
            input.shape(),
            kernel.shape(),
            bias.shape()
        )));
    }
    let k = kh;
    let (oh, ow, pad) = conv_geometry(h, w, k, padding, stride)?;
    let p = pad as isize;
    let mut out = FieldTensor::zeros(vec![co, oh, ow]);
    let xd = input.data();
    let kd = kernel.data();
    let bd = bias.data();
    let od = out.data_mut();
    for c_out in 0..co {
        let o_plane = &mut od[c_out * oh * ow..(c_out + 1) * oh * ow];
        o_plane.fill(bd[c_out]);
        for c_in in 0..ci {
            let i_plane = &xd[c_in * h * w..(c_in + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let wgt = kd[((c_out * ci + c_in) * k + ky) * k + kx];
                    if stride == 1 {
                        axpy_shift(
                            o_plane,
                            (oh, ow),
                            i_plane,
                            (h, w),
                            wgt,
                            ky as isize - p,
                            kx as isize - p,
                        );
                    } else {
                        for oy in 0..oh {
                            let iy = (oy * stride) as isize + ky as isize - p;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for ox in 0..ow {
                                let ix = (ox * stride) as isize + kx as isize - p;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                o_plane[oy * ow + ox] +=
                                    wgt * i_plane[iy as usize * w + ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of conv2d wrt (input, kernel, bias).
pub fn conv2d_backward<F: Scalar>(
    grad_out: &FieldTensor<F>,
    input: &FieldTensor<F>,
    kernel: &FieldTensor<F>,
    padding: Padding,
    stride: usize,
) -> Result<(FieldTensor<F>, FieldTensor<F>, FieldTensor<F>)> {
    let (ci, h, w) = input.dims3()?;
    let (co, _, k, _) = kernel.dims4()?;
    let (oh, ow, pad) = conv_geometry(h, w, k, padding, stride)?;
    let p = pad as isize;
    let g = grad_out.data();
    let xd = input.data();
    let kd = kernel.data();
    let mut gin = FieldTensor::zeros(vec![ci, h, w]);
    let mut gk = FieldTensor::zeros(vec![co, ci, k, k]);
    let mut gb = FieldTensor::zeros(vec![co]);
    {
        let gbd = gb.data_mut();
        for c_out in 0..co {
            let gp = &g[c_out * oh * ow..(c_out + 1) * oh * ow];
            let mut acc = F::zero();
            for &v in gp {
                acc += v;
            }
            gbd[c_out] = acc;
        }
    }
    let gkd = gk.data_mut();
    let gind = gin.data_mut();
    for c_out in 0..co {
        let gp = &g[c_out * oh * ow..(c_out + 1) * oh * ow];
        for c_in in 0..ci {
            let i_plane = &xd[c_in * h * w..(c_in + 1) * h * w];
            let gi_plane = &mut gind[c_in * h * w..(c_in + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let widx = ((c_out * ci + c_in) * k + ky) * k + kx;
                    let wgt = kd[widx];
                    if stride == 1 {
                        gkd[widx] += dot_shift(
                            gp,
                            (oh, ow),
                            i_plane,
                            (h, w),
                            ky as isize - p,
                            kx as isize - p,
                        );
                        axpy_shift(
                            gi_plane,
                            (h, w),
                            gp,
                            (oh, ow),
                            wgt,
                            p - ky as isize,
                            p - kx as isize,
                        );
                    } else {
                        let mut wacc = F::zero();
                        for oy in 0..oh {
                            let iy = (oy * stride) as isize + ky as isize - p;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for ox in 0..ow {
                                let ix = (ox * stride) as isize + kx as isize - p;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let gv = gp[oy * ow + ox];
                                wacc += gv * i_plane[iy as usize * w + ix as usize];
                                gi_plane[iy as usize * w + ix as usize] += wgt * gv;
                            }
                        }
                        gkd[widx] += wacc;
                    }
                }
            }
        }
    }
    Ok((gin, gk, gb))
}

pub fn linear<F: Scalar>(
    input: &FieldTensor<F>,
    weight: &FieldTensor<F>,
    bias: &FieldTensor<F>,
) -> Result<FieldTensor<F>> {
    let din = input.dims1()?;
    let (dout, wdin) = weight.dims2()?;
    let bn = bias.dims1()?;
    if wdin != din || bn != dout {
        return Err(Error::Dim(format!(
            "linear shapes: input {:?}, weight {:?}, bias {:?}",
            input.shape(),
            weight.shape(),
            bias.shape()
        )));
    }
    let x = input.data();
    let wd = weight.data();
    let mut out = FieldTensor::zeros(vec![dout]);
    for (i, o) in out.data_mut().iter_mut().enumerate() {
        let row = &wd[i * din..(i + 1) * din];
        let mut acc = bias.data()[i];
        for (wv, xv) in row.iter().zip(x) {
            acc += *wv * *xv;
        }
        *o = acc;
    }
    Ok(out)
}

pub fn linear_backward<F: Scalar>(
    grad_out: &FieldTensor<F>,
    input: &FieldTensor<F>,
    weight: &FieldTensor<F>,
) -> Result<(FieldTensor<F>, FieldTensor<F>, FieldTensor<F>)> {
    let din = input.dims1()?;
    let (dout, _) = weight.dims2()?;
    let g = grad_out.data();
    let x = input.data();
    let wd = weight.data();
    let mut gin = FieldTensor::zeros(vec![din]);
    let mut gw = FieldTensor::zeros(vec![dout, din]);
    let gwd = gw.data_mut();
    let gind = gin.data_mut();
    for i in 0..dout {
        let gi = g[i];
        let row = &wd[i * din..(i + 1) * din];
        let grow = &mut gwd[i * din..(i + 1) * din];
        for j in 0..din {
            gind[j] += gi * row[j];
            grow[j] = gi * x[j];
        }
    }
    Ok((gin, gw, grad_out.clone()))
}

/// Per-position layer normalization over channels with externally supplied
/// (scale, shift): out = normalized * (1 + scale[c]) + shift[c].
/// Returns (output, normalized, inv_std) — the latter two are saved for
/// the backward pass.
pub fn cond_layer_norm<F: Scalar>(
    input: &FieldTensor<F>,
    scale: &FieldTensor<F>,
    shift: &FieldTensor<F>,
    epsilon: F,
) -> Result<(FieldTensor<F>, FieldTensor<F>, Vec<F>)> {
    let (c, h, w) = input.dims3()?;
    if scale.dims1()? != c || shift.dims1()? != c {
        return Err(Error::Dim(format!(
            "cond_layer_norm: input {:?} vs scale {:?} / shift {:?}",
            input.shape(),
            scale.shape(),
            shift.shape()
        )));
    }
    if epsilon <= F::zero() {
        return Err(Error::Config("cond_layer_norm epsilon must be > 0".into()));
    }
    let hw = h * w;
    let x = input.data();
    let sc = scale.data();
    let sh = shift.data();
    let mut out = FieldTensor::zeros(vec![c, h, w]);
    let mut normalized = FieldTensor::zeros(vec![c, h, w]);
    let mut inv_std = vec![F::zero(); hw];
    let inv_c = F::one() / F::from_usize(c);
    {
        let od = out.data_mut();
        let nd = normalized.data_mut();
        for p in 0..hw {
            let mut mean = F::zero();
            for ch in 0..c {
                mean += x[ch * hw + p];
            }
            mean *= inv_c;
            let mut var = F::zero();
            for ch in 0..c {
                let d = x[ch * hw + p] - mean;
                var += d * d;
            }
            var *= inv_c;
            let istd = F::one() / (var + epsilon).sqrt();
            inv_std[p] = istd;
            for ch in 0..c {
                let n = (x[ch * hw + p] - mean) * istd;
                nd[ch * hw + p] = n;
                od[ch * hw + p] = n * (F::one() + sc[ch]) + sh[ch];
            }
        }
    }
    Ok((out, normalized, inv_std))
}

/// Gradients of cond_layer_norm wrt (input, scale, shift).
pub fn cond_layer_norm_backward<F: Scalar>(
    grad_out: &FieldTensor<F>,
    scale: &FieldTensor<F>,
    normalized: &FieldTensor<F>,
    inv_std: &[F],
) -> Result<(FieldTensor<F>, FieldTensor<F>, FieldTensor<F>)> {
    let (c, h, w) = normalized.dims3()?;
    let hw = h * w;
    let g = grad_out.data();
    let sc = scale.data();
    let n = normalized.data();
    let mut gin = FieldTensor::zeros(vec![c, h, w]);
    let mut gscale = FieldTensor::zeros(vec![c]);
    let mut gshift = FieldTensor::zeros(vec![c]);
    let inv_c = F::one() / F::from_usize(c);
    {
        let gind = gin.data_mut();
        let gs = gscale.data_mut();
        let gt = gshift.data_mut();
        for p in 0..hw {
            // dL/dn for this position, plus the two reduction terms of the
            // layer-norm jacobian.
            let mut mean_dn = F::zero();
            let mut mean_dn_n = F::zero();
            for ch in 0..c {
                let idx = ch * hw + p;
                let dn = g[idx] * (F::one() + sc[ch]);
                mean_dn += dn;
                mean_dn_n += dn * n[idx];
                gs[ch] += g[idx] * n[idx];
                gt[ch] += g[idx];
            }
            mean_dn *= inv_c;
            mean_dn_n *= inv_c;
            let istd = inv_std[p];
            for ch in 0..c {
                let idx = ch * hw + p;
                let dn = g[idx] * (F::one() + sc[ch]);
                gind[idx] = istd * (dn - mean_dn - n[idx] * mean_dn_n);
            }
        }
    }
    Ok((gin, gscale, gshift))
}

pub fn silu<F: Scalar>(input: &FieldTensor<F>) -> FieldTensor<F> {
    input.map(|x| x * sigmoid(x))
}

pub fn silu_backward<F: Scalar>(grad_out: &FieldTensor<F>, input: &FieldTensor<F>) -> FieldTensor<F> {
    let mut gin = FieldTensor::zeros(input.shape().to_vec());
    for ((gi, &g), &x) in gin.data_mut().iter_mut().zip(grad_out.data()).zip(input.data()) {
        let s = sigmoid(x);
        *gi = g * s * (F::one() + x * (F::one() - s));
    }
    gin
}

fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

fn require_same_shape<F: Scalar>(a: &FieldTensor<F>, b: &FieldTensor<F>, op: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dim(format!(
            "{op}: shapes {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

pub fn add<F: Scalar>(a: &FieldTensor<F>, b: &FieldTensor<F>) -> Result<FieldTensor<F>> {
    require_same_shape(a, b, "add")?;
    let mut out = a.clone();
    for (o, &v) in out.data_mut().iter_mut().zip(b.data()) {
        *o += v;
    }
    Ok(out)
}

pub fn multiply<F: Scalar>(a: &FieldTensor<F>, b: &FieldTensor<F>) -> Result<FieldTensor<F>> {
    require_same_shape(a, b, "multiply")?;
    let mut out = a.clone();
    for (o, &v) in out.data_mut().iter_mut().zip(b.data()) {
        *o *= v;
    }
    Ok(out)
}

/// Elementwise |a - b|. The subgradient at ties is 0.
pub fn abs_subtract<F: Scalar>(a: &FieldTensor<F>, b: &FieldTensor<F>) -> Result<FieldTensor<F>> {
    require_same_shape(a, b, "abs_subtract")?;
    let mut out = FieldTensor::zeros(a.shape().to_vec());
    for ((o, &av), &bv) in out.data_mut().iter_mut().zip(a.data()).zip(b.data()) {
        *o = (av - bv).abs();
    }
    Ok(out)
}

/// sign(a - b) with 0 at ties, used by the abs_subtract backward.
pub fn tie_sign<F: Scalar>(a: F, b: F) -> F {
    if a > b {
        F::one()
    } else if a < b {
        -F::one()
    } else {
        F::zero()
    }
}

pub fn affine<F: Scalar>(input: &FieldTensor<F>, mul: F, add: F) -> FieldTensor<F> {
    input.map(|x| x * mul + add)
}

/// Validates and canonicalizes reduction axes.
fn check_axes(shape: &[usize], axes: &[usize]) -> Result<Vec<usize>> {
    let mut sorted = axes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != axes.len() {
        return Err(Error::Dim(format!("duplicate reduction axes {axes:?}")));
    }
    if sorted.iter().any(|&a| a >= shape.len()) {
        return Err(Error::Dim(format!(
            "reduction axes {axes:?} out of range for shape {shape:?}"
        )));
    }
    Ok(sorted)
}

fn reduced_shape(shape: &[usize], axes: &[usize]) -> Vec<usize> {
    shape
        .iter()
        .enumerate()
        .filter(|(i, _)| !axes.contains(i))
        .map(|(_, &d)| d)
        .collect()
}

/// Maps each flat input index to the flat index of the reduced output.
fn reduction_index_map(shape: &[usize], axes: &[usize]) -> Vec<usize> {
    let numel: usize = shape.iter().product();
    let out_shape = reduced_shape(shape, axes);
    let mut out_strides = vec![0usize; shape.len()];
    {
        let mut stride = 1;
        let mut oi = out_shape.len();
        for i in (0..shape.len()).rev() {
            if !axes.contains(&i) {
                oi -= 1;
                out_strides[i] = stride;
                stride *= out_shape[oi];
            }
        }
    }
    let mut map = vec![0usize; numel];
    for (flat, slot) in map.iter_mut().enumerate() {
        let mut rem = flat;
        let mut out = 0;
        for i in (0..shape.len()).rev() {
            let coord = rem % shape[i];
            rem /= shape[i];
            out += coord * out_strides[i];
        }
        *slot = out;
    }
    map
}

pub fn sum_over_axes<F: Scalar>(input: &FieldTensor<F>, axes: &[usize]) -> Result<FieldTensor<F>> {
    let axes = check_axes(input.shape(), axes)?;
    let out_shape = reduced_shape(input.shape(), &axes);
    let map = reduction_index_map(input.shape(), &axes);
    let mut out = FieldTensor::zeros(out_shape);
    let od = out.data_mut();
    for (&v, &oi) in input.data().iter().zip(&map) {
        od[oi] += v;
    }
    Ok(out)
}

pub fn mean_over_axes<F: Scalar>(input: &FieldTensor<F>, axes: &[usize]) -> Result<FieldTensor<F>> {
    let axes = check_axes(input.shape(), axes)?;
    let count: usize = axes.iter().map(|&a| input.shape()[a]).product();
    let sum = sum_over_axes(input, &axes)?;
    Ok(affine(&sum, F::one() / F::from_usize(count), F::zero()))
}

/// Broadcast a reduced gradient back over the input shape, scaled by `factor`.
pub fn reduction_backward<F: Scalar>(
    grad_out: &FieldTensor<F>,
    in_shape: &[usize],
    axes: &[usize],
    factor: F,
) -> Result<FieldTensor<F>> {
    let axes = check_axes(in_shape, axes)?;
    let map = reduction_index_map(in_shape, &axes);
    let g = grad_out.data();
    let mut gin = FieldTensor::zeros(in_shape.to_vec());
    for (o, &oi) in gin.data_mut().iter_mut().zip(&map) {
        *o = g[oi] * factor;
    }
    Ok(gin)
}

pub fn concat_channels<F: Scalar>(parts: &[&FieldTensor<F>]) -> Result<FieldTensor<F>> {
    if parts.is_empty() {
        return Err(Error::Dim("concat_channels of zero tensors".into()));
    }
    let (_, h, w) = parts[0].dims3()?;
    let mut total_c = 0;
    for p in parts {
        let (c, ph, pw) = p.dims3()?;
        if ph != h || pw != w {
            return Err(Error::Dim(format!(
                "concat_channels: spatial mismatch {:?} vs {h}x{w}",
                p.shape()
            )));
        }
        total_c += c;
    }
    let mut out = FieldTensor::zeros(vec![total_c, h, w]);
    let od = out.data_mut();
    let mut offset = 0;
    for p in parts {
        od[offset..offset + p.numel()].copy_from_slice(p.data());
        offset += p.numel();
    }
    Ok(out)
}

pub fn nearest_upsample2x<F: Scalar>(input: &FieldTensor<F>) -> Result<FieldTensor<F>> {
    let (c, h, w) = input.dims3()?;
    let mut out = FieldTensor::zeros(vec![c, 2 * h, 2 * w]);
    let x = input.data();
    let od = out.data_mut();
    for ch in 0..c {
        for y in 0..2 * h {
            let src_row = &x[ch * h * w + (y / 2) * w..ch * h * w + (y / 2 + 1) * w];
            let dst_row = &mut od[ch * 4 * h * w + y * 2 * w..ch * 4 * h * w + (y + 1) * 2 * w];
            for (xo, v) in dst_row.iter_mut().enumerate() {
                *v = src_row[xo / 2];
            }
        }
    }
    Ok(out)
}

pub fn nearest_upsample2x_backward<F: Scalar>(
    grad_out: &FieldTensor<F>,
) -> Result<FieldTensor<F>> {
    let (c, h2, w2) = grad_out.dims3()?;
    let (h, w) = (h2 / 2, w2 / 2);
    let g = grad_out.data();
    let mut gin = FieldTensor::zeros(vec![c, h, w]);
    let gd = gin.data_mut();
    for ch in 0..c {
        for y in 0..h2 {
            for x in 0..w2 {
                gd[ch * h * w + (y / 2) * w + x / 2] += g[ch * h2 * w2 + y * w2 + x];
            }
        }
    }
    Ok(gin)
}

pub fn average_pool2x<F: Scalar>(input: &FieldTensor<F>) -> Result<FieldTensor<F>> {
    let (c, h, w) = input.dims3()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Dim(format!("average_pool2x needs even dims, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let quarter = F::from_f64(0.25);
    let x = input.data();
    let mut out = FieldTensor::zeros(vec![c, oh, ow]);
    let od = out.data_mut();
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let base = ch * h * w + 2 * oy * w + 2 * ox;
                od[ch * oh * ow + oy * ow + ox] =
                    (x[base] + x[base + 1] + x[base + w] + x[base + w + 1]) * quarter;
            }
        }
    }
    Ok(out)
}

pub fn average_pool2x_backward<F: Scalar>(grad_out: &FieldTensor<F>) -> Result<FieldTensor<F>> {
    let (c, oh, ow) = grad_out.dims3()?;
    let (h, w) = (2 * oh, 2 * ow);
    let quarter = F::from_f64(0.25);
    let g = grad_out.data();
    let mut gin = FieldTensor::zeros(vec![c, h, w]);
    let gd = gin.data_mut();
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let gv = g[ch * oh * ow + oy * ow + ox] * quarter;
                let base = ch * h * w + 2 * oy * w + 2 * ox;
                gd[base] = gv;
                gd[base + 1] = gv;
                gd[base + w] = gv;
                gd[base + w + 1] = gv;
            }
        }
    }
    Ok(gin)
}

/// Spatial crop of a [C, H, W] tensor.
pub fn crop_hw<F: Scalar>(
    input: &FieldTensor<F>,
    y0: usize,
    x0: usize,
    h: usize,
    w: usize,
) -> Result<FieldTensor<F>> {
    let (c, ih, iw) = input.dims3()?;
    if y0 + h > ih || x0 + w > iw {
        return Err(Error::Dim(format!(
            "crop {y0}+{h} x {x0}+{w} exceeds input {ih}x{iw}"
        )));
    }
    let x = input.data();
    let mut out = FieldTensor::zeros(vec![c, h, w]);
    let od = out.data_mut();
    for ch in 0..c {
        for y in 0..h {
            let src = ch * ih * iw + (y0 + y) * iw + x0;
            od[ch * h * w + y * w..ch * h * w + (y + 1) * w]
                .copy_from_slice(&x[src..src + w]);
        }
    }
    Ok(out)
}

/// Embed a [C, h, w] tensor into a zero [C, out_h, out_w] frame at (y0, x0).
/// Exact adjoint of `crop_hw`.
pub fn pad_hw<F: Scalar>(
    input: &FieldTensor<F>,
    y0: usize,
    x0: usize,
    out_h: usize,
    out_w: usize,
) -> Result<FieldTensor<F>> {
    let (c, h, w) = input.dims3()?;
    if y0 + h > out_h || x0 + w > out_w {
        return Err(Error::Dim(format!(
            "pad target {out_h}x{out_w} too small for {h}x{w} at ({y0},{x0})"
        )));
    }
    let x = input.data();
    let mut out = FieldTensor::zeros(vec![c, out_h, out_w]);
    let od = out.data_mut();
    for ch in 0..c {
        for y in 0..h {
            let dst = ch * out_h * out_w + (y0 + y) * out_w + x0;
            od[dst..dst + w].copy_from_slice(&x[ch * h * w + y * w..ch * h * w + (y + 1) * w]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Vec<usize>, data: Vec<f32>) -> FieldTensor<f32> {
        FieldTensor::new(shape, data).unwrap()
    }

    #[test]
    fn conv_scaling_identity() {
        // 1x3x3 ones, 1x1x1x1 kernel [2], bias [0] -> all twos.
        let input = FieldTensor::full(vec![1, 3, 3], 1.0f32);
        let kernel = t(vec![1, 1, 1, 1], vec![2.0]);
        let bias = t(vec![1], vec![0.0]);
        let out = conv2d(&input, &kernel, &bias, Padding::Same, 1).unwrap();
        assert_eq!(out.shape(), &[1, 3, 3]);
        assert!(out.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn conv_center_window_sum() {
        // input 1..9 in a 3x3, 3x3 ones kernel, same padding: center is the
        // full window sum 45.
        let input = t(vec![1, 3, 3], (1..=9).map(|v| v as f32).collect());
        let kernel = FieldTensor::full(vec![1, 1, 3, 3], 1.0f32);
        let bias = t(vec![1], vec![0.0]);
        let out = conv2d(&input, &kernel, &bias, Padding::Same, 1).unwrap();
        assert_eq!(out.at3(0, 1, 1), 45.0);
        // corner (0,0) sees rows {1,2,4,5}
        assert_eq!(out.at3(0, 0, 0), 1.0 + 2.0 + 4.0 + 5.0);
    }

    #[test]
    fn conv_zero_kernel_gives_bias() {
        let input = FieldTensor::gaussian(vec![2, 5, 5], &mut crate::tensor::Rng::seeded(1));
        let kernel = FieldTensor::zeros(vec![3, 2, 3, 3]);
        let bias = t(vec![3], vec![0.5, -1.0, 2.0]);
        let out = conv2d(&input, &kernel, &bias, Padding::Same, 1).unwrap();
        for c in 0..3 {
            for y in 0..5 {
                for x in 0..5 {
                    assert_eq!(out.at3(c, y, x), bias.data()[c]);
                }
            }
        }
    }

    #[test]
    fn conv_stride2_same_halves_dims() {
        let input = FieldTensor::full(vec![1, 24, 24], 1.0f32);
        let kernel = FieldTensor::full(vec![4, 1, 3, 3], 0.1f32);
        let bias = FieldTensor::zeros(vec![4]);
        let out = conv2d(&input, &kernel, &bias, Padding::Same, 2).unwrap();
        assert_eq!(out.shape(), &[4, 12, 12]);
        // interior positions see the full 3x3 window
        assert!((out.at3(0, 5, 5) - 0.9).abs() < 1e-6);
    }

    #[test]
    fn conv_valid_geometry() {
        let input = FieldTensor::full(vec![1, 5, 7], 1.0f32);
        let kernel = FieldTensor::full(vec![1, 1, 3, 3], 1.0f32);
        let bias = FieldTensor::zeros(vec![1]);
        let out = conv2d(&input, &kernel, &bias, Padding::Valid, 1).unwrap();
        assert_eq!(out.shape(), &[1, 3, 5]);
        assert!(out.data().iter().all(|&v| v == 9.0));
        let too_small = FieldTensor::full(vec![1, 2, 2], 1.0f32);
        assert!(conv2d(&too_small, &kernel, &bias, Padding::Valid, 1).is_err());
    }

    #[test]
    fn conv_rejects_even_kernel_and_shape_mismatch() {
        let input = FieldTensor::full(vec![1, 4, 4], 1.0f32);
        let even = FieldTensor::full(vec![1, 1, 2, 2], 1.0f32);
        let bias = FieldTensor::zeros(vec![1]);
        assert!(conv2d(&input, &even, &bias, Padding::Same, 1).is_err());
        let wrong_ci = FieldTensor::full(vec![1, 3, 3, 3], 1.0f32);
        assert!(conv2d(&input, &wrong_ci, &bias, Padding::Same, 1).is_err());
    }

    #[test]
    fn linear_identity_sum_and_hand_product() {
        let eye = t(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let zb = FieldTensor::zeros(vec![2]);
        let x = t(vec![2], vec![3.0, -1.5]);
        assert_eq!(linear(&x, &eye, &zb).unwrap().data(), x.data());

        let sum_w = t(vec![1, 2], vec![1.0, 1.0]);
        let out = linear(&t(vec![2], vec![2.0, 3.0]), &sum_w, &FieldTensor::zeros(vec![1])).unwrap();
        assert_eq!(out.data(), &[5.0]);

        // [[1,2],[3,4]] * [1,1] + [1,1] = [4, 8]
        let w = t(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let b = t(vec![2], vec![1.0, 1.0]);
        let out = linear(&t(vec![2], vec![1.0, 1.0]), &w, &b).unwrap();
        assert_eq!(out.data(), &[4.0, 8.0]);
    }

    #[test]
    fn silu_values() {
        let x = t(vec![3], vec![0.0, 1.0, 30.0]);
        let y = silu(&x);
        assert_eq!(y.data()[0], 0.0);
        assert!((y.data()[1] - 0.731_058_6).abs() < 1e-6);
        assert!((y.data()[2] - 30.0).abs() < 1e-4);
    }

    #[test]
    fn cond_layer_norm_already_normalized() {
        // channel vector [1,-1] with scale=shift=0 stays (up to epsilon).
        let input = t(vec![2, 1, 1], vec![1.0, -1.0]);
        let zero = FieldTensor::zeros(vec![2]);
        let (out, _, _) = cond_layer_norm(&input, &zero, &zero, 1e-5).unwrap();
        assert!((out.data()[0] - 1.0).abs() < 1e-4);
        assert!((out.data()[1] + 1.0).abs() < 1e-4);
    }

    #[test]
    fn cond_layer_norm_constant_input_becomes_shift() {
        let input = FieldTensor::full(vec![3, 2, 2], 7.0f32);
        let zero = FieldTensor::zeros(vec![3]);
        let shift = t(vec![3], vec![0.5, -2.0, 9.0]);
        let (out, _, _) = cond_layer_norm(&input, &zero, &shift, 1e-5).unwrap();
        for c in 0..3 {
            for p in 0..4 {
                assert_eq!(out.data()[c * 4 + p], shift.data()[c]);
            }
        }
    }

    #[test]
    fn cond_layer_norm_hand_example() {
        // channel vector [3,5], scale=[1,0], shift=[0,2]:
        // normalized = [-1,1]/sqrt(1+eps), out = [-2/sqrt(1+eps), 1/sqrt(1+eps)+2]
        let eps = 1e-5f32;
        let input = t(vec![2, 1, 1], vec![3.0, 5.0]);
        let scale = t(vec![2], vec![1.0, 0.0]);
        let shift = t(vec![2], vec![0.0, 2.0]);
        let (out, _, _) = cond_layer_norm(&input, &scale, &shift, eps).unwrap();
        let k = 1.0 / (1.0 + eps).sqrt();
        assert!((out.data()[0] - (-2.0 * k)).abs() < 1e-6);
        assert!((out.data()[1] - (k + 2.0)).abs() < 1e-6);
    }

    #[test]
    fn cond_layer_norm_statistics_invariant() {
        // with scale=shift=0 and C >= 8: per-position mean ~0, variance ~1.
        let mut rng = crate::tensor::Rng::seeded(9);
        let input = FieldTensor::gaussian(vec![16, 4, 4], &mut rng);
        let zero = FieldTensor::zeros(vec![16]);
        let (out, _, _) = cond_layer_norm(&input, &zero, &zero, 1e-5).unwrap();
        for p in 0..16 {
            let vals: Vec<f32> = (0..16).map(|c| out.data()[c * 16 + p]).collect();
            let mean: f32 = vals.iter().sum::<f32>() / 16.0;
            let var: f32 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / 16.0;
            assert!(mean.abs() < 1e-5, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-3, "var {var}");
        }
    }

    #[test]
    fn abs_subtract_and_tie_sign() {
        let a = t(vec![3], vec![3.0, 1.0, 2.0]);
        let b = t(vec![3], vec![1.0, 3.0, 2.0]);
        let d = abs_subtract(&a, &b).unwrap();
        assert_eq!(d.data(), &[2.0, 2.0, 0.0]);
        assert_eq!(tie_sign(3.0f32, 1.0), 1.0);
        assert_eq!(tie_sign(1.0f32, 3.0), -1.0);
        assert_eq!(tie_sign(2.0f32, 2.0), 0.0);
    }

    #[test]
    fn add_multiply_examples() {
        let a = t(vec![2], vec![1.0, 2.0]);
        let z = FieldTensor::zeros(vec![2]);
        let ones = FieldTensor::full(vec![2], 1.0f32);
        assert_eq!(add(&a, &z).unwrap().data(), a.data());
        assert_eq!(multiply(&a, &ones).unwrap().data(), a.data());
        assert_eq!(multiply(&a, &z).unwrap().data(), &[0.0, 0.0]);
        let b = t(vec![2], vec![10.0, -3.0]);
        assert_eq!(add(&a, &b).unwrap().data(), &[11.0, -1.0]);
        assert_eq!(multiply(&a, &b).unwrap().data(), &[10.0, -6.0]);
        assert!(add(&a, &FieldTensor::zeros(vec![3])).is_err());
    }

    #[test]
    fn reductions_examples() {
        // [[1,2,3],[4,5,6]]
        let m = t(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let rows = sum_over_axes(&m, &[1]).unwrap();
        assert_eq!(rows.shape(), &[2]);
        assert_eq!(rows.data(), &[6.0, 15.0]);
        let cols = sum_over_axes(&m, &[0]).unwrap();
        assert_eq!(cols.data(), &[5.0, 7.0, 9.0]);
        let total = sum_over_axes(&m, &[0, 1]).unwrap();
        assert!(total.is_scalar());
        assert_eq!(total.item().unwrap(), 21.0);
        let mean = mean_over_axes(&m, &[0, 1]).unwrap();
        assert_eq!(mean.item().unwrap(), 3.5);
        let mean_rows = mean_over_axes(&m, &[1]).unwrap();
        assert_eq!(mean_rows.data(), &[2.0, 5.0]);
        assert!(sum_over_axes(&m, &[2]).is_err());
    }

    #[test]
    fn concat_upsample_pool_examples() {
        let a = FieldTensor::full(vec![1, 2, 2], 1.0f32);
        let b = FieldTensor::full(vec![2, 2, 2], 2.0f32);
        let cat = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(cat.shape(), &[3, 2, 2]);
        assert_eq!(cat.at3(0, 1, 1), 1.0);
        assert_eq!(cat.at3(2, 0, 0), 2.0);

        let m = t(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let up = nearest_upsample2x(&m).unwrap();
        assert_eq!(up.shape(), &[1, 4, 4]);
        assert_eq!(up.at3(0, 0, 1), 1.0);
        assert_eq!(up.at3(0, 3, 3), 4.0);
        // pooling the upsample recovers the original
        let down = average_pool2x(&up).unwrap();
        assert_eq!(down.data(), m.data());
        assert!(average_pool2x(&t(vec![1, 3, 3], vec![0.0; 9])).is_err());
    }

    #[test]
    fn crop_pad_adjoint_shapes() {
        let m = t(vec![1, 4, 4], (0..16).map(|v| v as f32).collect());
        let c = crop_hw(&m, 1, 1, 2, 2).unwrap();
        assert_eq!(c.data(), &[5.0, 6.0, 9.0, 10.0]);
        let p = pad_hw(&c, 1, 1, 4, 4).unwrap();
        assert_eq!(p.at3(0, 1, 1), 5.0);
        assert_eq!(p.at3(0, 0, 0), 0.0);
        assert_eq!(p.at3(0, 3, 3), 0.0);
    }
}
