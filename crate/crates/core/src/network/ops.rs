//! Convolution, normalization and resampling kernels on [`FeatureMap`]s.
//!
//! Spatial filters use edge-replicate padding. Work is split per channel,
//! so results do not depend on the number of worker threads.

use rayon::prelude::*;

use super::tensor::FeatureMap;
use crate::error::{arg_err, shape_err, Result};
use crate::image::axis_taps;
use crate::priors::haar_block;

/// Instance-norm variance stabilizer.
pub const HIN_EPS: f64 = 1e-5;
pub const LEAKY_SLOPE: f32 = 0.2;

/// Borrowed weights of a depthwise-separable 3x3 convolution: per-channel
/// `3x3` kernels (`C x 9`), pointwise mixing (`Cout x C`) and bias (`Cout`).
#[derive(Clone, Copy, Debug)]
pub struct DwsWeights<'a> {
    pub depthwise: &'a [f32],
    pub pointwise: &'a [f32],
    pub bias: &'a [f32],
}

impl DwsWeights<'_> {
    pub fn out_channels(&self) -> usize {
        self.bias.len()
    }
}

/// Copies one plane into an `(h + 2p) x (w + 2p)` buffer with replicated edges.
fn pad_plane(src: &[f32], h: usize, w: usize, p: usize) -> Vec<f32> {
    let (ph, pw) = (h + 2 * p, w + 2 * p);
    let mut out = vec![0.0; ph * pw];
    for y in 0..ph {
        let sy = y.saturating_sub(p).min(h - 1);
        let row = &src[sy * w..(sy + 1) * w];
        let dst = &mut out[y * pw..(y + 1) * pw];
        dst[..p].fill(row[0]);
        dst[p..p + w].copy_from_slice(row);
        dst[p + w..].fill(row[w - 1]);
    }
    out
}

/// Per-channel 3x3 correlation, stride 1.
pub fn depthwise3x3(x: &FeatureMap, kernels: &[f32]) -> Result<FeatureMap> {
    let (c, h, w) = x.shape();
    if kernels.len() != c * 9 {
        return shape_err(format!("depthwise kernels: {} values for {c} channels", kernels.len()));
    }
    let mut out = FeatureMap::zeros(c, h, w);
    let n = h * w;
    out.data_mut().par_chunks_mut(n).enumerate().for_each(|(ch, dst)| {
        let k = &kernels[ch * 9..ch * 9 + 9];
        correlate3x3_plane(x.plane(ch), h, w, k, dst);
    });
    Ok(out)
}

fn correlate3x3_plane(src: &[f32], h: usize, w: usize, k: &[f32], dst: &mut [f32]) {
    let pad = pad_plane(src, h, w, 1);
    let pw = w + 2;
    for y in 0..h {
        let d = &mut dst[y * w..(y + 1) * w];
        for dy in 0..3 {
            let row = &pad[(y + dy) * pw..(y + dy + 1) * pw];
            let (k0, k1, k2) = (k[dy * 3], k[dy * 3 + 1], k[dy * 3 + 2]);
            for (x, o) in d.iter_mut().enumerate() {
                *o += k0 * row[x] + k1 * row[x + 1] + k2 * row[x + 2];
            }
        }
    }
}

/// `out = W * x + b` with `W` of shape `Cout x Cin` applied at every pixel.
pub fn pointwise(x: &FeatureMap, weight: &[f32], bias: &[f32]) -> Result<FeatureMap> {
    let (cin, h, w) = x.shape();
    let cout = bias.len();
    if weight.len() != cout * cin {
        return shape_err(format!(
            "pointwise weight has {} values, expected {cout}x{cin}",
            weight.len()
        ));
    }
    let n = h * w;
    let mut out = FeatureMap::zeros(cout, h, w);
    for (co, plane) in out.data_mut().chunks_exact_mut(n).enumerate() {
        plane.fill(bias[co]);
    }
    gemm_acc(cout, cin, n, weight, x.data(), out.data_mut());
    Ok(out)
}

/// `c += a * b` for row-major `a: m x k`, `b: k x n`, `c: m x n`.
fn gemm_acc(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: bounds checked above; strides describe dense row-major storage.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Depthwise 3x3 followed by pointwise mixing and bias.
pub fn dws_conv(x: &FeatureMap, weights: DwsWeights<'_>) -> Result<FeatureMap> {
    let dw = depthwise3x3(x, weights.depthwise)?;
    pointwise(&dw, weights.pointwise, weights.bias)
}

/// Dense `k x k` convolution (`Cout x Cin x k x k` weights) with the given
/// stride. Odd kernels are centred; even kernels anchor at the top-left tap.
pub fn conv2d(
    x: &FeatureMap,
    weight: &[f32],
    bias: &[f32],
    k: usize,
    stride: usize,
) -> Result<FeatureMap> {
    let (cin, h, w) = x.shape();
    let cout = bias.len();
    if weight.len() != cout * cin * k * k {
        return shape_err(format!(
            "conv weight has {} values, expected {cout}x{cin}x{k}x{k}",
            weight.len()
        ));
    }
    if stride == 0 || h % stride != 0 || w % stride != 0 {
        return arg_err(format!("stride {stride} does not divide {h}x{w}"));
    }
    let (ho, wo) = (h / stride, w / stride);
    let pad = (k - 1) / 2;
    let n = ho * wo;
    let mut out = FeatureMap::zeros(cout, ho, wo);
    for (co, plane) in out.data_mut().chunks_exact_mut(n).enumerate() {
        plane.fill(bias[co]);
    }
    let mut shifted = vec![0.0f32; cin * n];
    let mut tap_w = vec![0.0f32; cout * cin];
    for dy in 0..k {
        for dx in 0..k {
            shifted.par_chunks_mut(n).enumerate().for_each(|(ci, dst)| {
                let src = x.plane(ci);
                for oy in 0..ho {
                    let sy = (oy * stride + dy).saturating_sub(pad).min(h - 1);
                    let row = &src[sy * w..(sy + 1) * w];
                    for ox in 0..wo {
                        let sx = (ox * stride + dx).saturating_sub(pad).min(w - 1);
                        dst[oy * wo + ox] = row[sx];
                    }
                }
            });
            for co in 0..cout {
                for ci in 0..cin {
                    tap_w[co * cin + ci] = weight[((co * cin + ci) * k + dy) * k + dx];
                }
            }
            gemm_acc(cout, cin, n, &tap_w, &shifted, out.data_mut());
        }
    }
    Ok(out)
}

/// Half instance normalization: the first `C/2` channels are normalized
/// (zero mean, unit variance over the plane) and affinely transformed, the
/// remaining channels pass through unchanged.
pub fn hin(x: &FeatureMap, scale: &[f32], shift: &[f32]) -> Result<FeatureMap> {
    let (c, _, _) = x.shape();
    if c % 2 != 0 {
        return arg_err(format!("half instance norm needs an even channel count, got {c}"));
    }
    let half = c / 2;
    if scale.len() != half || shift.len() != half {
        return shape_err(format!("norm affine terms must have {half} entries"));
    }
    let mut out = x.clone();
    let n = x.plane_len();
    out.data_mut()[..half * n]
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(ch, plane)| {
            let mean = plane.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
            let var = plane
                .iter()
                .map(|&v| {
                    let d = v as f64 - mean;
                    d * d
                })
                .sum::<f64>()
                / n as f64;
            let inv = 1.0 / (var + HIN_EPS).sqrt();
            let (g, b) = (scale[ch] as f64, shift[ch] as f64);
            for v in plane.iter_mut() {
                *v = (((*v as f64 - mean) * inv) * g + b) as f32;
            }
        });
    Ok(out)
}

pub fn leaky_relu_inplace(x: &mut FeatureMap) {
    x.map_inplace(|v| if v >= 0.0 { v } else { LEAKY_SLOPE * v });
}

#[inline]
pub fn sigmoid(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

/// Bilinear resampling to `new_h x new_w`, half-pixel centres.
pub fn resize_bilinear_fm(x: &FeatureMap, new_h: usize, new_w: usize) -> FeatureMap {
    let (c, h, w) = x.shape();
    let ys = axis_taps(h, new_h);
    let xs = axis_taps(w, new_w);
    let mut out = FeatureMap::zeros(c, new_h, new_w);
    out.data_mut()
        .par_chunks_mut(new_h * new_w)
        .enumerate()
        .for_each(|(ch, dst)| {
            let src = x.plane(ch);
            for (oy, &(y0, y1, ty)) in ys.iter().enumerate() {
                let (r0, r1) = (&src[y0 * w..(y0 + 1) * w], &src[y1 * w..(y1 + 1) * w]);
                let ty = ty as f32;
                for (ox, &(x0, x1, tx)) in xs.iter().enumerate() {
                    let tx = tx as f32;
                    let top = r0[x0] + (r0[x1] - r0[x0]) * tx;
                    let bot = r1[x0] + (r1[x1] - r1[x0]) * tx;
                    dst[oy * new_w + ox] = top + (bot - top) * ty;
                }
            }
        });
    out
}

/// Exact 2x bilinear upsampling; equals [`resize_bilinear_fm`] to doubled
/// size, using the fixed `1/4, 3/4` taps of that ratio.
pub fn upsample2x(x: &FeatureMap) -> FeatureMap {
    let (c, h, w) = x.shape();
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = FeatureMap::zeros(c, oh, ow);
    out.data_mut().par_chunks_mut(oh * ow).enumerate().for_each(|(ch, dst)| {
        let src = x.plane(ch);
        let mut wide = vec![0.0f32; h * ow];
        for (row, dst_row) in src.chunks_exact(w).zip(wide.chunks_exact_mut(ow)) {
            upsample_line(row, dst_row);
        }
        for oy in 0..oh {
            let (a, b) = if oy % 2 == 0 {
                ((oy / 2).saturating_sub(1), oy / 2)
            } else {
                (oy / 2, (oy / 2 + 1).min(h - 1))
            };
            // `a` is the upper neighbour, weight 1/4 on even rows and 3/4 on odd rows
            let (wa, wb) = if oy % 2 == 0 { (0.25, 0.75) } else { (0.75, 0.25) };
            let (ra, rb) = (&wide[a * ow..(a + 1) * ow], &wide[b * ow..(b + 1) * ow]);
            for ((d, &va), &vb) in dst[oy * ow..(oy + 1) * ow].iter_mut().zip(ra).zip(rb) {
                *d = wa * va + wb * vb;
            }
        }
    });
    out
}

fn upsample_line(src: &[f32], dst: &mut [f32]) {
    let w = src.len();
    for j in 0..w {
        let (l, r) = (src[j.saturating_sub(1)], src[(j + 1).min(w - 1)]);
        dst[2 * j] = 0.25 * l + 0.75 * src[j];
        dst[2 * j + 1] = 0.75 * src[j] + 0.25 * r;
    }
}

/// One-level Haar analysis of every channel, stacked as
/// `[LL (C), LH (C), HL (C), HH (C)]`. Height and width must be even.
pub fn haar_features(x: &FeatureMap) -> Result<FeatureMap> {
    let (c, h, w) = x.shape();
    if h % 2 != 0 || w % 2 != 0 || h < 2 || w < 2 {
        return arg_err(format!("haar_features needs even dimensions, got {h}x{w}"));
    }
    let (bh, bw) = (h / 2, w / 2);
    let n = bh * bw;
    let mut out = FeatureMap::zeros(4 * c, bh, bw);
    let data = out.data_mut();
    for ch in 0..c {
        let src = x.plane(ch);
        for y in 0..bh {
            for xx in 0..bw {
                let i = 2 * y * w + 2 * xx;
                let bands = haar_block(src[i], src[i + 1], src[i + w], src[i + w + 1]);
                for (band, v) in bands.into_iter().enumerate() {
                    data[(band * c + ch) * n + y * bw + xx] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Per-channel Sobel magnitude `sqrt(gx^2 + gy^2)`. Any plane size is
/// accepted; tiny planes are handled by the replicated border.
pub fn sobel_magnitude_fm(x: &FeatureMap) -> Result<FeatureMap> {
    let (c, h, w) = x.shape();
    let mut out = FeatureMap::zeros(c, h, w);
    out.data_mut().par_chunks_mut(h * w).enumerate().for_each(|(ch, dst)| {
        let pad = pad_plane(x.plane(ch), h, w, 1);
        let pw = w + 2;
        for y in 0..h {
            let (r0, r1, r2) = (
                &pad[y * pw..(y + 1) * pw],
                &pad[(y + 1) * pw..(y + 2) * pw],
                &pad[(y + 2) * pw..(y + 3) * pw],
            );
            for x in 0..w {
                let gx = (r0[x + 2] - r0[x]) + 2.0 * (r1[x + 2] - r1[x]) + (r2[x + 2] - r2[x]);
                let gy = (r2[x] - r0[x]) + 2.0 * (r2[x + 1] - r0[x + 1]) + (r2[x + 2] - r0[x + 2]);
                dst[y * w + x] = (gx * gx + gy * gy).sqrt();
            }
        }
    });
    Ok(out)
}
