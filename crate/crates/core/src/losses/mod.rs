//! Composite restoration objective on image pairs. Every term is a mean
//! over samples and returns its gradient with respect to the prediction.

mod charbonnier;
mod edge;
mod fit;
mod gradcheck;
mod hvi;
mod perceptual;
mod ssim;

use std::fmt;
use std::str::FromStr;

pub use charbonnier::{charbonnier, CHARBONNIER_EPS};
pub use edge::{edge_loss, EDGE_EPS};
pub use fit::{fit_image, FitResult};
pub use gradcheck::{grad_check, GradCheckReport, GradCheckRow};
pub use hvi::{hvi_jacobian, hvi_loss};
pub use perceptual::{perceptual_loss, ConvStackExtractor, FeatureExtractor, IdentityExtractor};
pub use ssim::{gaussian_taps, ssim, ssim_loss, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};

use crate::error::{arg_err, Error, Result};
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub charbonnier: f64,
    pub perceptual: f64,
    pub ssim: f64,
    pub edge: f64,
    pub hvi: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { charbonnier: 1.0, perceptual: 0.1, ssim: 0.1, edge: 0.4, hvi: 0.5 }
    }
}

impl LossWeights {
    pub fn as_array(&self) -> [f64; 5] {
        [self.charbonnier, self.perceptual, self.ssim, self.edge, self.hvi]
    }

    pub fn from_array(w: [f64; 5]) -> Result<Self> {
        let lw = Self { charbonnier: w[0], perceptual: w[1], ssim: w[2], edge: w[3], hvi: w[4] };
        lw.validate()?;
        Ok(lw)
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|w| !w.is_finite() || *w < 0.0) {
            return arg_err(format!("loss weights must be finite and >= 0, got {self}"));
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        let w = self.as_array().map(|v| v * k);
        Self { charbonnier: w[0], perceptual: w[1], ssim: w[2], edge: w[3], hvi: w[4] }
    }
}

impl fmt::Display for LossWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d, e] = self.as_array();
        write!(f, "{a},{b},{c},{d},{e}")
    }
}

/// Parses `c,vgg,ssim,edge,hvi`.
impl FromStr for LossWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidArgument(format!("bad loss weights {s:?}")))?;
        let arr: [f64; 5] = parts
            .try_into()
            .map_err(|_| Error::InvalidArgument(format!("expected 5 loss weights, got {s:?}")))?;
        Self::from_array(arr)
    }
}

/// Term values, weighted total and total gradient.
#[derive(Clone, Debug)]
pub struct LossBreakdown {
    pub charbonnier: f64,
    /// `None` when no feature extractor was supplied; the term then
    /// contributes nothing.
    pub perceptual: Option<f64>,
    pub ssim: f64,
    pub edge: f64,
    pub hvi: f64,
    pub total: f64,
    pub gradient: Image,
    /// False when the extractor could not supply a gradient, in which case
    /// the perceptual term is absent from `gradient`.
    pub perceptual_gradient: bool,
}

impl LossBreakdown {
    /// Term values in weight order, with a missing perceptual term as 0.
    pub fn terms(&self) -> [f64; 5] {
        [self.charbonnier, self.perceptual.unwrap_or(0.0), self.ssim, self.edge, self.hvi]
    }
}

/// Weighted sum of all five terms.
pub fn total_loss(
    y: &Image,
    y_pred: &Image,
    weights: &LossWeights,
    extractor: Option<&dyn FeatureExtractor>,
) -> Result<LossBreakdown> {
    weights.validate()?;
    y.check_same_shape(y_pred, "total loss")?;
    let (lc, gc) = charbonnier(y, y_pred)?;
    let (ls, gs) = ssim_loss(y, y_pred)?;
    let (le, ge) = edge_loss(y, y_pred)?;
    let (lh, gh) = hvi_loss(y, y_pred)?;
    let (perceptual, gp) = match extractor {
        Some(ex) => {
            let (v, g) = perceptual_loss(y, y_pred, ex)?;
            (Some(v), g)
        }
        None => (None, None),
    };
    let w = weights;
    let total = w.charbonnier * lc
        + w.perceptual * perceptual.unwrap_or(0.0)
        + w.ssim * ls
        + w.edge * le
        + w.hvi * lh;

    let mut gradient = Image::zeros_like(y);
    let parts = [
        (w.charbonnier, Some(&gc)),
        (w.perceptual, gp.as_ref()),
        (w.ssim, Some(&gs)),
        (w.edge, Some(&ge)),
        (w.hvi, Some(&gh)),
    ];
    for (wt, g) in parts {
        if let Some(g) = g {
            for (acc, v) in gradient.data_mut().iter_mut().zip(g.data()) {
                *acc += wt * v;
            }
        }
    }
    Ok(LossBreakdown {
        charbonnier: lc,
        perceptual,
        ssim: ls,
        edge: le,
        hvi: lh,
        total,
        gradient,
        perceptual_gradient: perceptual.is_none() || gp.is_some(),
    })
}

/// Selects one differentiable term for verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossTerm {
    Charbonnier,
    Perceptual,
    Ssim,
    Edge,
    Hvi,
}

impl LossTerm {
    pub const ALL: [LossTerm; 5] =
        [LossTerm::Charbonnier, LossTerm::Perceptual, LossTerm::Ssim, LossTerm::Edge, LossTerm::Hvi];

    pub fn name(self) -> &'static str {
        match self {
            LossTerm::Charbonnier => "charbonnier",
            LossTerm::Perceptual => "perceptual",
            LossTerm::Ssim => "ssim",
            LossTerm::Edge => "edge",
            LossTerm::Hvi => "hvi",
        }
    }

    /// Maximum relative finite-difference error accepted by [`grad_check`].
    pub fn tolerance(self) -> f64 {
        match self {
            LossTerm::Charbonnier => 1e-5,
            LossTerm::Edge => 1e-3,
            LossTerm::Ssim | LossTerm::Hvi | LossTerm::Perceptual => 1e-2,
        }
    }

    /// Value and gradient; the perceptual term uses a seeded
    /// [`ConvStackExtractor`].
    pub fn eval(self, y: &Image, y_pred: &Image) -> Result<(f64, Image)> {
        match self {
            LossTerm::Charbonnier => charbonnier(y, y_pred),
            LossTerm::Ssim => ssim_loss(y, y_pred),
            LossTerm::Edge => edge_loss(y, y_pred),
            LossTerm::Hvi => hvi_loss(y, y_pred),
            LossTerm::Perceptual => {
                let (v, g) = perceptual_loss(y, y_pred, &ConvStackExtractor::new(0))?;
                Ok((v, g.expect("conv stack is differentiable")))
            }
        }
    }
}

impl fmt::Display for LossTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossTerm::ALL
            .into_iter()
            .find(|t| t.name() == s || (s == "vgg" && *t == LossTerm::Perceptual))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown loss term {s:?}")))
    }
}
