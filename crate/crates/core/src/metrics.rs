//! Full-reference (PSNR, SSIM), no-reference (UCIQE) and colour-chart
//! (mean CIEDE2000) quality scores.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::colorspace::{ciede2000, rgb_to_hsv, rgb_to_lab, srgb_to_lab};
use crate::error::{arg_err, Error, Result};
use crate::image::Image;

pub use crate::losses::ssim;

/// Reported for identical images.
pub const PSNR_CAP_DB: f64 = 100.0;

pub const UCIQE_CHROMA_WEIGHT: f64 = 0.4680;
pub const UCIQE_CONTRAST_WEIGHT: f64 = 0.2745;
pub const UCIQE_SATURATION_WEIGHT: f64 = 0.2576;

/// Peak-1 PSNR in dB, capped at [`PSNR_CAP_DB`].
pub fn psnr(y: &Image, y_pred: &Image) -> Result<f64> {
    y.check_same_shape(y_pred, "psnr")?;
    let mse = y
        .data()
        .iter()
        .zip(y_pred.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Population mean and standard deviation (Welford), exact for constant data.
fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        let d = v - mean;
        mean += d / n;
        m2 += d * (v - mean);
    }
    if n == 0.0 {
        (0.0, 0.0)
    } else {
        (mean, (m2 / n).sqrt())
    }
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 100]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// The three UCIQE ingredients before weighting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UciqeTerms {
    /// Standard deviation of Lab chroma, divided by 100.
    pub chroma_std: f64,
    /// 99th minus 1st percentile of L, divided by 100.
    pub luminance_contrast: f64,
    /// Mean HSV saturation.
    pub mean_saturation: f64,
}

impl UciqeTerms {
    pub fn score(&self) -> f64 {
        UCIQE_CHROMA_WEIGHT * self.chroma_std
            + UCIQE_CONTRAST_WEIGHT * self.luminance_contrast
            + UCIQE_SATURATION_WEIGHT * self.mean_saturation
    }
}

pub fn uciqe_terms(img: &Image) -> Result<UciqeTerms> {
    let lab = rgb_to_lab(img)?;
    let (_, chroma_std) = mean_std(lab.a.iter().zip(&lab.b).map(|(a, b)| a.hypot(*b)));
    let mut l = lab.l.clone();
    l.sort_by(f64::total_cmp);
    let contrast = percentile(&l, 99.0) - percentile(&l, 1.0);
    let (mean_saturation, _) =
        mean_std(img.data().chunks_exact(3).map(|p| rgb_to_hsv([p[0], p[1], p[2]]).1));
    Ok(UciqeTerms {
        chroma_std: chroma_std / 100.0,
        luminance_contrast: contrast / 100.0,
        mean_saturation,
    })
}

/// Underwater colour image quality score of a 3-channel image.
pub fn uciqe(img: &Image) -> Result<f64> {
    Ok(uciqe_terms(img)?.score())
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)` with its expected sRGB colour.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Patch {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub rgb: [f64; 3],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PatchSpec {
    pub patches: Vec<Patch>,
}

impl PatchSpec {
    pub fn new(patches: Vec<Patch>) -> Self {
        Self { patches }
    }

    /// Parses CSV with header `x0,y0,x1,y1,R,G,B`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header != ["x0", "y0", "x1", "y1", "R", "G", "B"] {
            return Err(Error::Format(format!(
                "patch CSV header must be x0,y0,x1,y1,R,G,B, got {}",
                header.join(",")
            )));
        }
        let mut patches = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let px = |i: usize| {
                field(i).parse::<usize>().map_err(|_| {
                    Error::Format(format!("row {}: bad pixel coordinate {:?}", row + 1, field(i)))
                })
            };
            let col = |i: usize| {
                field(i)
                    .parse::<f64>()
                    .ok()
                    .filter(|v| (0.0..=1.0).contains(v))
                    .ok_or_else(|| {
                        Error::Format(format!("row {}: bad colour value {:?}", row + 1, field(i)))
                    })
            };
            patches.push(Patch {
                x0: px(0)?,
                y0: px(1)?,
                x1: px(2)?,
                y1: px(3)?,
                rgb: [col(4)?, col(5)?, col(6)?],
            });
        }
        Ok(Self { patches })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(File::open(path)?)
    }

    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        if self.patches.is_empty() {
            return arg_err("patch spec is empty");
        }
        for (i, p) in self.patches.iter().enumerate() {
            if p.x0 >= p.x1 || p.y0 >= p.y1 || p.x1 > width || p.y1 > height {
                return arg_err(format!(
                    "patch {i} [{}, {}) x [{}, {}) is empty or outside {width}x{height}",
                    p.x0, p.x1, p.y0, p.y1
                ));
            }
        }
        Ok(())
    }
}

/// Per-patch CIEDE2000 between the mean patch colour and its reference.
pub fn chart_scores(img: &Image, spec: &PatchSpec) -> Result<Vec<f64>> {
    if img.channels() != 3 {
        return arg_err(format!("chart evaluation needs 3 channels, got {}", img.channels()));
    }
    spec.validate(img.height(), img.width())?;
    Ok(spec
        .patches
        .iter()
        .map(|p| {
            let mut sum = [0.0; 3];
            for y in p.y0..p.y1 {
                for x in p.x0..p.x1 {
                    for (c, s) in sum.iter_mut().enumerate() {
                        *s += img.get(y, x, c);
                    }
                }
            }
            let n = ((p.y1 - p.y0) * (p.x1 - p.x0)) as f64;
            ciede2000(srgb_to_lab(sum.map(|s| s / n)), srgb_to_lab(p.rgb))
        })
        .collect())
}

/// Unweighted mean CIEDE2000 over all patches.
pub fn chart_eval(img: &Image, spec: &PatchSpec) -> Result<f64> {
    let scores = chart_scores(img, spec)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Scores of one image; `None` marks a metric that was not computed.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub uciqe: f64,
    pub ciede2000_mean: Option<f64>,
}

/// UCIQE always; PSNR and SSIM with a reference; chart score with patches.
/// SSIM is skipped for images smaller than its window.
pub fn evaluate(
    img: &Image,
    reference: Option<&Image>,
    patches: Option<&PatchSpec>,
) -> Result<MetricReport> {
    let (psnr_v, ssim_v) = match reference {
        Some(r) => {
            let p = psnr(r, img)?;
            let s = if img.height().min(img.width()) >= crate::losses::SSIM_WINDOW {
                Some(ssim(r, img)?)
            } else {
                None
            };
            (Some(p), s)
        }
        None => (None, None),
    };
    Ok(MetricReport {
        psnr: psnr_v,
        ssim: ssim_v,
        uciqe: uciqe(img)?,
        ciede2000_mean: patches.map(|p| chart_eval(img, p)).transpose()?,
    })
}
