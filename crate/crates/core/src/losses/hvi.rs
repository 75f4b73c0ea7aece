use std::f64::consts::PI;

use super::charbonnier::charbonnier_slices;
use crate::colorspace::{argmax_argmin, collapse_gain, hue_raw, hvi_pixel};
use crate::error::{arg_err, Result};
use crate::image::Image;

/// Jacobian `d(H, V, I) / d(R, G, B)` of [`hvi_pixel`] (rows are outputs).
/// At max/min ties the first channel in R, G, B order carries the
/// derivative.
pub fn hvi_jacobian(rgb: [f64; 3]) -> [[f64; 3]; 3] {
    let (imax, imin) = argmax_argmin(rgb);
    let (vmax, vmin) = (rgb[imax], rgb[imin]);
    let delta = vmax - vmin;

    let mut d_i = [0.0; 3];
    d_i[imax] = 1.0;
    let c = collapse_gain(vmax);
    let mut d_c = [0.0; 3];
    d_c[imax] = 0.5 * PI * (0.5 * PI * vmax).cos();

    let (s, d_s) = if vmax > 0.0 {
        let mut d = [0.0; 3];
        d[imax] += vmin / (vmax * vmax);
        d[imin] -= 1.0 / vmax;
        (delta / vmax, d)
    } else {
        (0.0, [0.0; 3])
    };

    let (h, d_h) = if delta > 0.0 {
        // numerator of the sextant formula and its channel pair
        let (p, q) = match imax {
            0 => (1, 2),
            1 => (2, 0),
            _ => (0, 1),
        };
        let num = rgb[p] - rgb[q];
        let mut d_num = [0.0; 3];
        d_num[p] += 1.0;
        d_num[q] -= 1.0;
        let mut d_delta = [0.0; 3];
        d_delta[imax] += 1.0;
        d_delta[imin] -= 1.0;
        let mut d = [0.0; 3];
        for j in 0..3 {
            d[j] = (d_num[j] * delta - num * d_delta[j]) / (delta * delta) / 6.0;
        }
        (hue_raw(rgb, imax, delta), d)
    } else {
        (0.0, [0.0; 3])
    };

    let (sin, cos) = (2.0 * PI * h).sin_cos();
    let mut jac = [[0.0; 3]; 3];
    for j in 0..3 {
        let radial = s * d_c[j] + c * d_s[j];
        let turn = c * s * 2.0 * PI * d_h[j];
        jac[0][j] = cos * radial - sin * turn;
        jac[1][j] = sin * radial + cos * turn;
        jac[2][j] = d_i[j];
    }
    jac
}

/// Charbonnier distance between the HVI planes of both images, averaged
/// over the `3 x H x W` plane samples.
pub fn hvi_loss(y: &Image, y_pred: &Image) -> Result<(f64, Image)> {
    y.check_same_shape(y_pred, "hvi loss")?;
    if y.channels() != 3 {
        return arg_err(format!("hvi loss needs 3 channels, got {}", y.channels()));
    }
    let px = |img: &Image, k: usize| [img.data()[3 * k], img.data()[3 * k + 1], img.data()[3 * k + 2]];
    let pixels = y.height() * y.width();
    let mut t = Vec::with_capacity(3 * pixels);
    let mut p = Vec::with_capacity(3 * pixels);
    for k in 0..pixels {
        t.extend_from_slice(&hvi_pixel(px(y, k)));
        p.extend_from_slice(&hvi_pixel(px(y_pred, k)));
    }
    let (value, d_hvi) = charbonnier_slices(&t, &p);
    let mut grad = Image::zeros_like(y);
    let out = grad.data_mut();
    for k in 0..pixels {
        let jac = hvi_jacobian(px(y_pred, k));
        for j in 0..3 {
            out[3 * k + j] = (0..3).map(|o| d_hvi[3 * k + o] * jac[o][j]).sum();
        }
    }
    Ok((value, grad))
}
