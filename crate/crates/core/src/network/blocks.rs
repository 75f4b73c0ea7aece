//! Residual building blocks: DWS-HINB, the wavelet enhancement block (WEB),
//! the Sobel-gated fusion block (SGFB) and their composition (WGSRB).

use super::config::BlockOrder;
use super::ops::{
    dws_conv, haar_features, hin, leaky_relu_inplace, pointwise, sigmoid, sobel_magnitude_fm,
    upsample2x, DwsWeights,
};
use super::tensor::FeatureMap;
use super::weights::WeightStore;
use crate::error::{arg_err, Result};

/// View of the tensors below one name prefix, e.g. `enc0.web`.
#[derive(Clone, Debug)]
pub struct BlockWeights<'a> {
    store: &'a WeightStore,
    prefix: String,
}

impl<'a> BlockWeights<'a> {
    pub fn new(store: &'a WeightStore, prefix: impl Into<String>) -> Self {
        Self { store, prefix: prefix.into() }
    }

    pub fn store(&self) -> &'a WeightStore {
        self.store
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn child(&self, name: &str) -> BlockWeights<'a> {
        BlockWeights::new(self.store, format!("{}.{name}", self.prefix))
    }

    fn data(&self, suffix: &str) -> Result<&'a [f32]> {
        self.store.data(&format!("{}.{suffix}", self.prefix))
    }

    fn dws(&self, p: &str) -> Result<DwsWeights<'a>> {
        Ok(DwsWeights {
            depthwise: self.data(&format!("{p}.dw"))?,
            pointwise: self.data(&format!("{p}.pw"))?,
            bias: self.data(&format!("{p}.bias"))?,
        })
    }
}

/// `dws_conv -> HIN -> LeakyReLU -> dws_conv`, plus the block input.
pub fn dws_hinb(x: &FeatureMap, w: &BlockWeights<'_>) -> Result<FeatureMap> {
    let mut t = dws_conv(x, w.dws("conv1")?)?;
    t = hin(&t, w.data("norm.scale")?, w.data("norm.shift")?)?;
    leaky_relu_inplace(&mut t);
    let mut out = dws_conv(&t, w.dws("conv2")?)?;
    out.add_assign(x);
    Ok(out)
}

/// Haar subbands of every channel, compressed back to `C` channels,
/// refined at half resolution, upsampled and added to the input. Odd sizes
/// are padded by edge replication and the result cropped back.
pub fn web_forward(f_in: &FeatureMap, w: &BlockWeights<'_>) -> Result<FeatureMap> {
    let (_, h, wd) = f_in.shape();
    let (ph, pw) = (h + h % 2, wd + wd % 2);
    let padded = f_in.pad_replicate(ph, pw);
    let bands = haar_features(&padded)?;
    let fused = pointwise(
        &bands,
        w.data("compress.weight")?,
        w.data("compress.bias")?,
    )?;
    let refined = dws_hinb(&fused, &w.child("refine"))?;
    let mut out = upsample2x(&refined).crop(h, wd);
    out.add_assign(f_in);
    Ok(out)
}

/// Largest `f32` below one; saturated gates are kept inside `(0, 1)`.
const GATE_MAX: f32 = 1.0 - f32::EPSILON / 2.0;

/// Intermediate maps of one SGFB evaluation.
#[derive(Clone, Debug)]
pub struct SgfbTrace {
    /// Pre-refined features `F0`.
    pub f0: FeatureMap,
    /// Gating map `M`, or `None` when the gradient branch is disabled.
    pub gate: Option<FeatureMap>,
    /// Blended features `F1`.
    pub f1: FeatureMap,
    pub out: FeatureMap,
}

/// `F1 = alpha * (M * F0) + (1 - alpha) * F0`, evaluated as
/// `F0 * (1 - alpha * (1 - M))` so that `|F1| <= |F0|` holds exactly in
/// floating point and `alpha = 0` returns `F0` unchanged.
pub fn sgfb_blend(f0: &FeatureMap, gate: &FeatureMap, alpha: f32) -> Result<FeatureMap> {
    if !(0.0..=1.0).contains(&alpha) {
        return arg_err(format!("alpha must lie in [0, 1], got {alpha}"));
    }
    if f0.shape() != gate.shape() {
        return arg_err("gate and features differ in shape".to_string());
    }
    let mut out = f0.clone();
    for (v, &m) in out.data_mut().iter_mut().zip(gate.data()) {
        *v *= 1.0 - alpha * (1.0 - m);
    }
    Ok(out)
}

/// Full SGFB with every intermediate kept. `alpha` overrides the stored
/// value; pass `None` to use the weights.
pub fn sgfb_trace(f_in: &FeatureMap, w: &BlockWeights<'_>, alpha: Option<f32>) -> Result<SgfbTrace> {
    let f0 = dws_hinb(f_in, &w.child("pre"))?;
    let (gate, f1) = if w.store().config().enable_sgfb_gradient_branch {
        let alpha = match alpha {
            Some(a) => a,
            None => w.data("alpha")?[0],
        };
        let grad = sobel_magnitude_fm(&f0)?;
        let mut m = dws_conv(&grad, w.dws("gate")?)?;
        m.map_inplace(|v| sigmoid(v).clamp(f32::MIN_POSITIVE, GATE_MAX));
        let f1 = sgfb_blend(&f0, &m, alpha)?;
        (Some(m), f1)
    } else {
        (None, f0.clone())
    };
    let out = dws_hinb(&f1, &w.child("post"))?;
    Ok(SgfbTrace { f0, gate, f1, out })
}

pub fn sgfb_forward(f_in: &FeatureMap, w: &BlockWeights<'_>, alpha: f32) -> Result<FeatureMap> {
    Ok(sgfb_trace(f_in, w, Some(alpha))?.out)
}

/// WEB and SGFB in the configured order; disabled blocks are skipped.
pub fn wgsrb_forward(f_in: &FeatureMap, w: &BlockWeights<'_>) -> Result<FeatureMap> {
    let cfg = w.store().config();
    let web = |x: &FeatureMap| {
        if cfg.enable_web {
            web_forward(x, &w.child("web"))
        } else {
            Ok(x.clone())
        }
    };
    let sgfb = |x: &FeatureMap| {
        if cfg.enable_sgfb {
            Ok(sgfb_trace(x, &w.child("sgfb"), None)?.out)
        } else {
            Ok(x.clone())
        }
    };
    match cfg.block_order {
        BlockOrder::WebThenSgfb => sgfb(&web(f_in)?),
        BlockOrder::SgfbThenWeb => web(&sgfb(f_in)?),
    }
}
