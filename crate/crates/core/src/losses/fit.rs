use super::{total_loss, FeatureExtractor, LossWeights};
use crate::error::{arg_err, Error, Result};
use crate::image::Image;

#[derive(Clone, Debug)]
pub struct FitResult {
    pub image: Image,
    /// Loss before the first step followed by the loss after every iteration.
    pub trace: Vec<f64>,
    /// Step length in effect when the loop ended.
    pub final_step: f64,
}

/// Projected gradient descent on pixel values.
///
/// Each iteration moves along `-g / max|g|`, so `step` is the largest
/// per-pixel change, then clamps to `[0, 1]`. A step that would raise the
/// loss is halved until it does not; after an accepted step the length
/// grows again, never beyond `step`. The trace is therefore non-increasing.
/// Gradients below `1e-12` count as stationary.
pub fn fit_image(
    init: &Image,
    reference: &Image,
    weights: &LossWeights,
    iters: usize,
    step: f64,
    extractor: Option<&dyn FeatureExtractor>,
) -> Result<FitResult> {
    init.check_same_shape(reference, "fit_image")?;
    if !(step > 0.0 && step.is_finite()) {
        return arg_err(format!("step size must be positive, got {step}"));
    }
    let mut x = init.clamp01();
    let mut cur = total_loss(reference, &x, weights, extractor)?;
    if !cur.total.is_finite() {
        return Err(Error::Diverged { iteration: 0 });
    }
    let mut trace = Vec::with_capacity(iters + 1);
    trace.push(cur.total);
    let mut lr = step;

    for it in 1..=iters {
        let gmax = cur.gradient.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax > 1e-12 {
            while lr > 1e-12 {
                let scale = lr / gmax;
                let mut cand = x.clone();
                for (v, g) in cand.data_mut().iter_mut().zip(cur.gradient.data()) {
                    *v = (*v - scale * g).clamp(0.0, 1.0);
                }
                let next = total_loss(reference, &cand, weights, extractor)?;
                if next.total.is_nan() {
                    return Err(Error::Diverged { iteration: it });
                }
                if next.total <= cur.total {
                    x = cand;
                    cur = next;
                    lr = (lr * 1.5).min(step);
                    break;
                }
                lr *= 0.5;
            }
        }
        trace.push(cur.total);
    }
    Ok(FitResult { image: x, trace, final_step: lr })
}
