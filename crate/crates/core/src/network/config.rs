use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Order of the two sub-blocks inside a residual block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BlockOrder {
    #[default]
    WebThenSgfb,
    SgfbThenWeb,
}

impl fmt::Display for BlockOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockOrder::WebThenSgfb => "web-sgfb",
            BlockOrder::SgfbThenWeb => "sgfb-web",
        })
    }
}

impl FromStr for BlockOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "web-sgfb" => Ok(BlockOrder::WebThenSgfb),
            "sgfb-web" => Ok(BlockOrder::SgfbThenWeb),
            other => Err(Error::InvalidArgument(format!(
                "unknown block order {other:?} (expected web-sgfb or sgfb-web)"
            ))),
        }
    }
}

/// Architecture hyperparameters and ablation switches.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NetConfig {
    /// Channels at full resolution.
    pub base_channels: usize,
    /// Number of stride-2 downsampling stages.
    pub num_scales: usize,
    /// Channel growth per scale.
    pub channel_multiplier: usize,
    pub block_order: BlockOrder,
    pub enable_wb_prior: bool,
    pub enable_web: bool,
    /// Whole SGFB sub-block; when off the block is the identity.
    pub enable_sgfb: bool,
    /// Sobel gate inside SGFB; when off `F1 = F0`.
    pub enable_sgfb_gradient_branch: bool,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            base_channels: 32,
            num_scales: 3,
            channel_multiplier: 2,
            block_order: BlockOrder::WebThenSgfb,
            enable_wb_prior: true,
            enable_web: true,
            enable_sgfb: true,
            enable_sgfb_gradient_branch: true,
            seed: 0,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.base_channels < 4 || !self.base_channels.is_multiple_of(2) {
            return bad(format!(
                "base_channels must be even and >= 4, got {}",
                self.base_channels
            ));
        }
        if self.num_scales < 1 {
            return bad("num_scales must be >= 1".into());
        }
        if self.channel_multiplier < 1 {
            return bad("channel_multiplier must be >= 1".into());
        }
        if self.channels_at(self.num_scales).is_none() {
            return bad("channel count overflows".into());
        }
        Ok(())
    }

    /// Channels at scale `s` (0 = full resolution, `num_scales` = bottleneck).
    pub fn channels_at(&self, s: usize) -> Option<usize> {
        let mult = self.channel_multiplier.checked_pow(s as u32)?;
        self.base_channels.checked_mul(mult)
    }

    pub(crate) fn ch(&self, s: usize) -> usize {
        self.channels_at(s).expect("validated config")
    }

    /// Input sides must be multiples of this; other sizes are padded.
    pub fn size_multiple(&self) -> usize {
        1 << self.num_scales
    }

    /// `key=value` lines, one per field.
    pub fn to_blob(&self) -> String {
        format!(
            "base_channels={}\nnum_scales={}\nchannel_multiplier={}\nblock_order={}\n\
             enable_wb_prior={}\nenable_web={}\nenable_sgfb={}\n\
             enable_sgfb_gradient_branch={}\nseed={}\n",
            self.base_channels,
            self.num_scales,
            self.channel_multiplier,
            self.block_order,
            self.enable_wb_prior,
            self.enable_web,
            self.enable_sgfb,
            self.enable_sgfb_gradient_branch,
            self.seed
        )
    }

    /// Parses [`NetConfig::to_blob`] output. Missing keys keep defaults,
    /// unknown keys are rejected.
    pub fn from_blob(blob: &str) -> Result<Self> {
        let mut cfg = NetConfig::default();
        let fmt_err = |m: String| Error::Format(format!("config blob: {m}"));
        for line in blob.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fmt_err(format!("line without '=': {line:?}")))?;
            let int = || {
                value
                    .parse::<usize>()
                    .map_err(|_| fmt_err(format!("{key}: bad integer {value:?}")))
            };
            let flag = || {
                value
                    .parse::<bool>()
                    .map_err(|_| fmt_err(format!("{key}: bad flag {value:?}")))
            };
            match key {
                "base_channels" => cfg.base_channels = int()?,
                "num_scales" => cfg.num_scales = int()?,
                "channel_multiplier" => cfg.channel_multiplier = int()?,
                "block_order" => cfg.block_order = value.parse()?,
                "enable_wb_prior" => cfg.enable_wb_prior = flag()?,
                "enable_web" => cfg.enable_web = flag()?,
                "enable_sgfb" => cfg.enable_sgfb = flag()?,
                "enable_sgfb_gradient_branch" => cfg.enable_sgfb_gradient_branch = flag()?,
                "seed" => {
                    cfg.seed = value
                        .parse()
                        .map_err(|_| fmt_err(format!("seed: bad integer {value:?}")))?
                }
                other => return Err(fmt_err(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate().map_err(|e| fmt_err(e.to_string()))?;
        Ok(cfg)
    }
}
