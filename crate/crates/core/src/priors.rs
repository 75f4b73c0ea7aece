//! Network-independent priors: gray-world white balance with per-channel
//! fusion, the one-level Haar filter bank, and Sobel gradient magnitude.

use std::path::{Path, PathBuf};

use crate::error::{arg_err, shape_err, Result};
use crate::image::{load_image, save_image, Image};

/// Stabilizer used in every white-balance denominator and inside the log.
pub const WB_EPS: f64 = 1e-6;

/// Per-channel fusion weights between an image and its white-balanced copy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WbGamma {
    pub gamma_r: f64,
    pub gamma_g: f64,
    pub gamma_b: f64,
}

impl WbGamma {
    pub fn new(gamma_r: f64, gamma_g: f64, gamma_b: f64) -> Result<Self> {
        let g = Self { gamma_r, gamma_g, gamma_b };
        g.validate()?;
        Ok(g)
    }

    pub fn uniform(v: f64) -> Result<Self> {
        Self::new(v, v, v)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.gamma_r, self.gamma_g, self.gamma_b]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in ["r", "g", "b"].iter().zip(self.as_array()) {
            if !(0.0..=1.0).contains(&v) {
                return arg_err(format!("gamma_{name} = {v} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

fn check_wb_input(img: &Image) -> Result<()> {
    if img.channels() != 3 {
        return arg_err(format!("white balance needs 3 channels, got {}", img.channels()));
    }
    if img.data().iter().any(|&v| v < 0.0) {
        return arg_err("white balance needs non-negative samples");
    }
    Ok(())
}

fn channel_means(data: &[f64], channels: usize) -> Vec<f64> {
    let mut sums = vec![0.0; channels];
    for px in data.chunks_exact(channels) {
        for (s, v) in sums.iter_mut().zip(px) {
            *s += v;
        }
    }
    let n = (data.len() / channels) as f64;
    sums.into_iter().map(|s| s / n).collect()
}

/// Gray-world channel gains `mean(mu_c) / (mu_c + eps)`.
pub fn gray_world_gains(img: &Image) -> Result<[f64; 3]> {
    check_wb_input(img)?;
    let mu = channel_means(img.data(), 3);
    let gray = (mu[0] + mu[1] + mu[2]) / 3.0;
    Ok([0, 1, 2].map(|c| gray / (mu[c] + WB_EPS)))
}

/// Simple white balance: gray-world gains, per-channel log-domain mean
/// centering, exponentiation and a global min-max stretch.
///
/// A constant input has zero dynamic range after centering and maps to an
/// all-zero output.
pub fn white_balance(img: &Image) -> Result<Image> {
    let gains = gray_world_gains(img)?;
    let mut out = img.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        for c in 0..3 {
            px[c] = (px[c] * gains[c] + WB_EPS).ln();
        }
    }
    let log_means = channel_means(out.data(), 3);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for px in out.data_mut().chunks_exact_mut(3) {
        for c in 0..3 {
            let v = (px[c] - log_means[c]).exp();
            lo = lo.min(v);
            hi = hi.max(v);
            px[c] = v;
        }
    }
    let range = hi - lo + WB_EPS;
    for v in out.data_mut() {
        *v = (*v - lo) / range;
    }
    Ok(out)
}

/// `gamma_c * x_wb + (1 - gamma_c) * x` per channel.
pub fn fuse_wb(x: &Image, x_wb: &Image, gamma: WbGamma) -> Result<Image> {
    x.check_same_shape(x_wb, "fuse_wb")?;
    if x.channels() != 3 {
        return arg_err(format!("fuse_wb needs 3 channels, got {}", x.channels()));
    }
    gamma.validate()?;
    let g = gamma.as_array();
    let mut out = x.clone();
    for (i, (o, &w)) in out.data_mut().iter_mut().zip(x_wb.data()).enumerate() {
        let gc = g[i % 3];
        *o = gc * w + (1.0 - gc) * *o;
    }
    Ok(out)
}

/// One-level Haar analysis of an image.
///
/// Odd inputs are padded bottom/right by edge replication; the original size
/// is kept so that [`haar_idwt2`] can crop back.
#[derive(Clone, Debug, PartialEq)]
pub struct SubbandSet {
    pub ll: Image,
    pub lh: Image,
    pub hl: Image,
    pub hh: Image,
    pub source_height: usize,
    pub source_width: usize,
}

impl SubbandSet {
    pub fn was_padded(&self) -> bool {
        self.source_height % 2 == 1 || self.source_width % 2 == 1
    }

    pub fn bands(&self) -> [(&'static str, &Image); 4] {
        [("ll", &self.ll), ("lh", &self.lh), ("hl", &self.hl), ("hh", &self.hh)]
    }

    /// Writes `<stem>.ll.pfm`, `<stem>.lh.pfm`, `<stem>.hl.pfm`, `<stem>.hh.pfm`.
    pub fn save(&self, stem: impl AsRef<Path>) -> Result<[PathBuf; 4]> {
        let paths = subband_paths(stem.as_ref());
        for ((_, band), path) in self.bands().into_iter().zip(&paths) {
            save_image(band, path)?;
        }
        Ok(paths)
    }

    /// Reads the four files written by [`SubbandSet::save`]. The source size
    /// is taken as twice the band size.
    pub fn load(stem: impl AsRef<Path>) -> Result<Self> {
        let [ll, lh, hl, hh] = subband_paths(stem.as_ref()).map(load_image);
        let (ll, lh, hl, hh) = (ll?, lh?, hl?, hh?);
        let (source_height, source_width) = (ll.height() * 2, ll.width() * 2);
        let sb = Self { ll, lh, hl, hh, source_height, source_width };
        sb.check()?;
        Ok(sb)
    }

    fn check(&self) -> Result<()> {
        let s = self.ll.shape();
        if self.lh.shape() != s || self.hl.shape() != s || self.hh.shape() != s {
            return shape_err(format!(
                "inconsistent subbands {:?} {:?} {:?} {:?}",
                s,
                self.lh.shape(),
                self.hl.shape(),
                self.hh.shape()
            ));
        }
        if self.source_height.div_ceil(2) != s.0 || self.source_width.div_ceil(2) != s.1 {
            return shape_err(format!(
                "source size {}x{} does not match band size {}x{}",
                self.source_height, self.source_width, s.0, s.1
            ));
        }
        Ok(())
    }
}

fn subband_paths(stem: &Path) -> [PathBuf; 4] {
    ["ll", "lh", "hl", "hh"].map(|b| {
        let mut s = stem.as_os_str().to_owned();
        s.push(format!(".{b}.pfm"));
        PathBuf::from(s)
    })
}

/// Correlates non-overlapping 2x2 blocks with the Haar kernels built from
/// `h = [1, 1] / 2` and `g = [1, -1] / 2` (LL = h'h, LH = g'h, HL = h'g,
/// HH = g'g), stride 2, per channel.
pub fn haar_dwt2(img: &Image) -> Result<SubbandSet> {
    let (h, w, c) = img.shape();
    if h < 2 || w < 2 {
        return arg_err(format!("haar_dwt2 needs at least 2x2, got {h}x{w}"));
    }
    let (hh_, hw) = (h.div_ceil(2), w.div_ceil(2));
    let src = if h % 2 == 1 || w % 2 == 1 {
        img.pad_replicate(hh_ * 2, hw * 2)
    } else {
        img.clone()
    };
    let mut ll = Image::filled(hh_, hw, c, 0.0);
    let mut lh = ll.clone();
    let mut hl = ll.clone();
    let mut hh = ll.clone();
    for y in 0..hh_ {
        for x in 0..hw {
            for ch in 0..c {
                let a = src.get(2 * y, 2 * x, ch);
                let b = src.get(2 * y, 2 * x + 1, ch);
                let d = src.get(2 * y + 1, 2 * x, ch);
                let e = src.get(2 * y + 1, 2 * x + 1, ch);
                let [vll, vlh, vhl, vhh] = haar_block(a, b, d, e);
                ll.set(y, x, ch, vll);
                lh.set(y, x, ch, vlh);
                hl.set(y, x, ch, vhl);
                hh.set(y, x, ch, vhh);
            }
        }
    }
    Ok(SubbandSet { ll, lh, hl, hh, source_height: h, source_width: w })
}

/// Haar analysis of one block `[[p00, p01], [p10, p11]]`.
#[inline]
pub(crate) fn haar_block<T>(p00: T, p01: T, p10: T, p11: T) -> [T; 4]
where
    T: Copy
        + std::ops::Add<Output = T>
        + std::ops::Sub<Output = T>
        + std::ops::Mul<Output = T>
        + From<f32>,
{
    let q = T::from(0.25);
    [
        (p00 + p01 + p10 + p11) * q,
        (p00 + p01 - p10 - p11) * q,
        (p00 - p01 + p10 - p11) * q,
        (p00 - p01 - p10 + p11) * q,
    ]
}

/// Exact inverse of [`haar_dwt2`]; padded inputs are cropped back.
pub fn haar_idwt2(sb: &SubbandSet) -> Result<Image> {
    sb.check()?;
    let (bh, bw, c) = sb.ll.shape();
    let mut out = Image::filled(bh * 2, bw * 2, c, 0.0);
    for y in 0..bh {
        for x in 0..bw {
            for ch in 0..c {
                let ll = sb.ll.get(y, x, ch);
                let lh = sb.lh.get(y, x, ch);
                let hl = sb.hl.get(y, x, ch);
                let hh = sb.hh.get(y, x, ch);
                out.set(2 * y, 2 * x, ch, ll + lh + hl + hh);
                out.set(2 * y, 2 * x + 1, ch, ll + lh - hl - hh);
                out.set(2 * y + 1, 2 * x, ch, ll - lh + hl - hh);
                out.set(2 * y + 1, 2 * x + 1, ch, ll - lh - hl + hh);
            }
        }
    }
    if sb.was_padded() {
        out = out.crop(0, 0, sb.source_height, sb.source_width)?;
    }
    Ok(out)
}

pub const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
pub const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Horizontal and vertical Sobel responses (correlation, edge-replicate
/// padding), per channel.
pub fn sobel_responses(img: &Image) -> (Image, Image) {
    let (h, w, c) = img.shape();
    let mut gx = Image::filled(h, w, c, 0.0);
    let mut gy = gx.clone();
    // paired differences keep constant neighbourhoods exactly zero
    let smooth = [SOBEL_Y[2][0], SOBEL_Y[2][1], SOBEL_Y[2][2]];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let at = |dy: usize, dx: usize| {
                    img.get_clamped(y as isize + dy as isize - 1, x as isize + dx as isize - 1, ch)
                };
                let (mut sx, mut sy) = (0.0, 0.0);
                for (k, &wt) in smooth.iter().enumerate() {
                    sx += wt * (at(k, 2) - at(k, 0));
                    sy += wt * (at(2, k) - at(0, k));
                }
                gx.set(y, x, ch, sx);
                gy.set(y, x, ch, sy);
            }
        }
    }
    (gx, gy)
}

/// `sqrt(gx^2 + gy^2)` of the per-channel Sobel responses.
pub fn sobel_magnitude(img: &Image) -> Result<Image> {
    if img.height() < 3 || img.width() < 3 {
        return arg_err(format!(
            "image {}x{} smaller than the 3x3 Sobel kernel",
            img.height(),
            img.width()
        ));
    }
    let (gx, gy) = sobel_responses(img);
    let mut out = gx;
    for (o, v) in out.data_mut().iter_mut().zip(gy.data()) {
        *o = o.hypot(*v);
    }
    Ok(out)
}
