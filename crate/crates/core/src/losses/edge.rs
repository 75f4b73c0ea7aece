use crate::error::Result;
use crate::image::Image;
use crate::priors::{sobel_responses, SOBEL_X, SOBEL_Y};

/// Smoothing term inside the magnitude square root.
pub const EDGE_EPS: f64 = 1e-8;

fn smoothed_magnitude(img: &Image) -> (Image, Image, Image) {
    let (gx, gy) = sobel_responses(img);
    let mag = Image::from_fn(img.height(), img.width(), img.channels(), |y, x, c| {
        let (a, b) = (gx.get(y, x, c), gy.get(y, x, c));
        (a * a + b * b + EDGE_EPS).sqrt()
    });
    (gx, gy, mag)
}

/// Mean squared difference of per-channel Sobel magnitudes.
pub fn edge_loss(y: &Image, y_pred: &Image) -> Result<(f64, Image)> {
    y.check_same_shape(y_pred, "edge loss")?;
    let (h, w, c) = y.shape();
    let n = y.len() as f64;
    let (_, _, m_ref) = smoothed_magnitude(y);
    let (gx, gy, m_pred) = smoothed_magnitude(y_pred);

    let mut value = 0.0;
    let mut dx = Image::zeros_like(y);
    let mut dy = Image::zeros_like(y);
    for i in 0..y.len() {
        let d = m_pred.data()[i] - m_ref.data()[i];
        value += d * d;
        let dm = 2.0 * d / n / m_pred.data()[i];
        dx.data_mut()[i] = dm * gx.data()[i];
        dy.data_mut()[i] = dm * gy.data()[i];
    }

    // adjoint of the clamped 3x3 correlations
    let mut grad = Image::zeros_like(y);
    for yy in 0..h {
        for xx in 0..w {
            for ch in 0..c {
                let (ax, ay) = (dx.get(yy, xx, ch), dy.get(yy, xx, ch));
                if ax == 0.0 && ay == 0.0 {
                    continue;
                }
                for ky in 0..3 {
                    let sy = (yy + ky).saturating_sub(1).min(h - 1);
                    for kx in 0..3 {
                        let sx = (xx + kx).saturating_sub(1).min(w - 1);
                        let v = SOBEL_X[ky][kx] * ax + SOBEL_Y[ky][kx] * ay;
                        let idx = grad.index(sy, sx, ch);
                        grad.data_mut()[idx] += v;
                    }
                }
            }
        }
    }
    Ok((value / n, grad))
}
