//! Parameter and FLOP accounting. FLOPs are `2 x MACs` for every
//! convolution, including the fixed Haar and Sobel filters, plus explicit
//! per-element counts for the remaining operations. Bias additions are not
//! counted.

use std::ops::{Add, AddAssign};

use super::config::NetConfig;
use crate::error::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LayerCost {
    pub params: u64,
    pub flops: u64,
}

impl Add for LayerCost {
    type Output = LayerCost;

    fn add(self, o: LayerCost) -> LayerCost {
        LayerCost { params: self.params + o.params, flops: self.flops + o.flops }
    }
}

impl AddAssign for LayerCost {
    fn add_assign(&mut self, o: LayerCost) {
        *self = *self + o;
    }
}

/// Floating-point operations per element for the non-convolution steps.
pub mod per_element {
    /// Normalize plus affine on one sample of the normalized half.
    pub const HIN: u64 = 7;
    pub const LEAKY_RELU: u64 = 1;
    pub const SIGMOID: u64 = 4;
    pub const GATE_BLEND: u64 = 4;
    pub const ADD: u64 = 1;
    /// Per output sample of a bilinear resize.
    pub const BILINEAR: u64 = 6;
    /// Per input sample, one 2x2 Haar level.
    pub const HAAR: u64 = 8;
    /// Two 3x3 correlations plus the magnitude.
    pub const SOBEL: u64 = 36 + 4;
    /// Gray-world gains, log-mean shift and normalization.
    pub const WHITE_BALANCE: u64 = 10;
    pub const WB_FUSE: u64 = 3;
    /// Global residual and clamp.
    pub const OUTPUT: u64 = 2;
}

fn u(v: usize) -> u64 {
    v as u64
}

/// Dense `k x k` convolution producing a `ho x wo` map.
pub fn dense_conv_cost(cin: usize, cout: usize, k: usize, ho: usize, wo: usize) -> LayerCost {
    LayerCost {
        params: u(cout * cin * k * k + cout),
        flops: 2 * u(ho) * u(wo) * u(cin) * u(cout) * u(k * k),
    }
}

/// Per-channel 3x3 correlation, no bias.
pub fn depthwise_cost(c: usize, h: usize, w: usize) -> LayerCost {
    LayerCost { params: u(c * 9), flops: 2 * u(h) * u(w) * u(c) * 9 }
}

/// 1x1 convolution with bias.
pub fn pointwise_cost(cin: usize, cout: usize, h: usize, w: usize) -> LayerCost {
    LayerCost {
        params: u(cin * cout + cout),
        flops: 2 * u(h) * u(w) * u(cin) * u(cout),
    }
}

pub fn dws_cost(c: usize, h: usize, w: usize) -> LayerCost {
    depthwise_cost(c, h, w) + pointwise_cost(c, c, h, w)
}

fn elementwise(per: u64, n: usize) -> LayerCost {
    LayerCost { params: 0, flops: per * u(n) }
}

pub fn dws_hinb_cost(c: usize, h: usize, w: usize) -> LayerCost {
    let n = c * h * w;
    dws_cost(c, h, w)
        + LayerCost { params: u(c), flops: per_element::HIN * u(n / 2) }
        + elementwise(per_element::LEAKY_RELU, n)
        + dws_cost(c, h, w)
        + elementwise(per_element::ADD, n)
}

pub fn web_cost(c: usize, h: usize, w: usize) -> LayerCost {
    let (ph, pw) = (h + h % 2, w + w % 2);
    let (bh, bw) = (ph / 2, pw / 2);
    elementwise(per_element::HAAR, c * ph * pw)
        + pointwise_cost(4 * c, c, bh, bw)
        + dws_hinb_cost(c, bh, bw)
        + elementwise(per_element::BILINEAR, c * ph * pw)
        + elementwise(per_element::ADD, c * h * w)
}

pub fn sgfb_cost(c: usize, h: usize, w: usize, gradient_branch: bool) -> LayerCost {
    let n = c * h * w;
    let mut cost = dws_hinb_cost(c, h, w);
    if gradient_branch {
        cost += elementwise(per_element::SOBEL, n)
            + dws_cost(c, h, w)
            + elementwise(per_element::SIGMOID, n)
            + elementwise(per_element::GATE_BLEND, n)
            + LayerCost { params: 1, flops: 0 };
    }
    cost + dws_hinb_cost(c, h, w)
}

pub fn wgsrb_cost(cfg: &NetConfig, c: usize, h: usize, w: usize) -> LayerCost {
    let mut cost = LayerCost::default();
    if cfg.enable_web {
        cost += web_cost(c, h, w);
    }
    if cfg.enable_sgfb {
        cost += sgfb_cost(c, h, w, cfg.enable_sgfb_gradient_branch);
    }
    cost
}

/// Totals for one configuration at one input size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostReport {
    pub parameter_count: u64,
    /// `2 x MACs` plus elementwise operations.
    pub flop_count: u64,
    pub input_height: usize,
    pub input_width: usize,
    /// `(stage, cost)` in evaluation order.
    pub stages: Vec<(String, LayerCost)>,
}

impl CostReport {
    pub fn params_millions(&self) -> f64 {
        self.parameter_count as f64 / 1e6
    }

    pub fn gflops(&self) -> f64 {
        self.flop_count as f64 / 1e9
    }
}

/// Walks the architecture of [`super::model_forward`] at `input_h x input_w`.
pub fn count_cost(cfg: &NetConfig, input_h: usize, input_w: usize) -> Result<CostReport> {
    cfg.validate()?;
    let m = cfg.size_multiple();
    let (h, w) = (input_h.div_ceil(m) * m, input_w.div_ceil(m) * m);
    let samples = 3 * input_h * input_w;
    let mut stages: Vec<(String, LayerCost)> = Vec::new();

    if cfg.enable_wb_prior {
        stages.push((
            "wb".into(),
            LayerCost { params: 3, flops: 0 }
                + elementwise(per_element::WHITE_BALANCE + per_element::WB_FUSE, samples),
        ));
    }
    stages.push(("stem".into(), dense_conv_cost(3, cfg.ch(0), 3, h, w)));
    for s in 0..cfg.num_scales {
        let (hs, ws) = (h >> s, w >> s);
        stages.push((format!("enc{s}"), wgsrb_cost(cfg, cfg.ch(s), hs, ws)));
        stages.push((
            format!("down{s}"),
            dense_conv_cost(cfg.ch(s), cfg.ch(s + 1), 2, hs / 2, ws / 2),
        ));
    }
    let s = cfg.num_scales;
    stages.push(("mid".into(), wgsrb_cost(cfg, cfg.ch(s), h >> s, w >> s)));
    for s in (0..cfg.num_scales).rev() {
        let (hs, ws) = (h >> s, w >> s);
        let c = cfg.ch(s);
        stages.push((
            format!("up{s}"),
            pointwise_cost(cfg.ch(s + 1), c, hs / 2, ws / 2)
                + elementwise(per_element::BILINEAR, c * hs * ws),
        ));
        stages.push((format!("fuse{s}"), pointwise_cost(2 * c, c, hs, ws)));
        stages.push((format!("dec{s}"), wgsrb_cost(cfg, c, hs, ws)));
    }
    stages.push((
        "head".into(),
        dense_conv_cost(cfg.ch(0), 3, 3, h, w) + elementwise(per_element::OUTPUT, samples),
    ));

    let total = stages.iter().fold(LayerCost::default(), |acc, (_, c)| acc + *c);
    Ok(CostReport {
        parameter_count: total.params,
        flop_count: total.flops,
        input_height: input_h,
        input_width: input_w,
        stages,
    })
}
