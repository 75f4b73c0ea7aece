use crate::error::Result;
use crate::image::Image;

/// Charbonnier smoothing constant.
pub const CHARBONNIER_EPS: f64 = 1e-3;

/// Mean of `sqrt(d^2 + eps^2)` over paired samples, and its gradient with
/// respect to `pred`. The excess over `eps` is accumulated so that identical
/// inputs return `eps` exactly.
pub(crate) fn charbonnier_slices(target: &[f64], pred: &[f64]) -> (f64, Vec<f64>) {
    let n = target.len() as f64;
    let eps2 = CHARBONNIER_EPS * CHARBONNIER_EPS;
    let mut sum = 0.0;
    let grad = target
        .iter()
        .zip(pred)
        .map(|(&t, &p)| {
            let d = p - t;
            let r = (d * d + eps2).sqrt();
            sum += r - CHARBONNIER_EPS;
            d / (n * r)
        })
        .collect();
    (CHARBONNIER_EPS + sum / n, grad)
}

/// Smooth L1 distance, averaged over every sample.
pub fn charbonnier(y: &Image, y_pred: &Image) -> Result<(f64, Image)> {
    y.check_same_shape(y_pred, "charbonnier")?;
    let (h, w, c) = y.shape();
    let (value, grad) = charbonnier_slices(y.data(), y_pred.data());
    Ok((value, Image::new(h, w, c, grad)?))
}
