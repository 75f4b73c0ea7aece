use super::blocks::{wgsrb_forward, BlockWeights};
use super::ops::{conv2d, pointwise, upsample2x};
use super::tensor::FeatureMap;
use super::weights::WeightStore;
use crate::error::{arg_err, Result};
use crate::image::Image;
use crate::priors::{fuse_wb, white_balance, WbGamma};

/// White-balance front end: `gamma * wb(x) + (1 - gamma) * x` per channel,
/// or `x` itself when the prior is disabled.
pub fn fused_input(x: &Image, store: &WeightStore) -> Result<Image> {
    if x.channels() != 3 {
        return arg_err(format!("model input must have 3 channels, got {}", x.channels()));
    }
    if !store.config().enable_wb_prior {
        return Ok(x.clone());
    }
    let g = store.data("wb.gamma")?;
    let gamma = WbGamma::new(g[0] as f64, g[1] as f64, g[2] as f64)?;
    fuse_wb(x, &white_balance(x)?, gamma)
}

/// Full enhancement pass. Sides that are not multiples of
/// `2^num_scales` are padded by edge replication and cropped at the end.
pub fn model_forward(x: &Image, store: &WeightStore) -> Result<Image> {
    let fused = fused_input(x, store)?;
    let cfg = store.config();
    let (h, w, _) = fused.shape();
    let m = cfg.size_multiple();
    let (ph, pw) = (h.div_ceil(m) * m, w.div_ceil(m) * m);
    let padded = FeatureMap::from_image(&fused).pad_replicate(ph, pw);

    let mut f = conv2d(&padded, store.data("stem.weight")?, store.data("stem.bias")?, 3, 1)?;
    let mut skips = Vec::with_capacity(cfg.num_scales);
    for s in 0..cfg.num_scales {
        f = wgsrb_forward(&f, &BlockWeights::new(store, format!("enc{s}")))?;
        let down = conv2d(
            &f,
            store.data(&format!("down{s}.weight"))?,
            store.data(&format!("down{s}.bias"))?,
            2,
            2,
        )?;
        skips.push(f);
        f = down;
    }
    f = wgsrb_forward(&f, &BlockWeights::new(store, "mid"))?;
    for s in (0..cfg.num_scales).rev() {
        // 1x1 mixing commutes with bilinear upsampling, so mix at low resolution
        let reduced = pointwise(
            &f,
            store.data(&format!("up{s}.weight"))?,
            store.data(&format!("up{s}.bias"))?,
        )?;
        let skip = skips.pop().expect("one skip per scale");
        let cat = upsample2x(&reduced).concat(&skip);
        f = pointwise(
            &cat,
            store.data(&format!("fuse{s}.weight"))?,
            store.data(&format!("fuse{s}.bias"))?,
        )?;
        f = wgsrb_forward(&f, &BlockWeights::new(store, format!("dec{s}")))?;
    }
    let residual = conv2d(&f, store.data("head.weight")?, store.data("head.bias")?, 3, 1)?;

    Ok(Image::from_fn(h, w, 3, |y, xx, c| {
        (fused.get(y, xx, c) + residual.get(c, y, xx) as f64).clamp(0.0, 1.0)
    }))
}
