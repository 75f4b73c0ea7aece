//! Colour representations used for supervision and evaluation: HVI,
//! CIELab with CIEDE2000, and CIE xyY chromaticity export.
//!
//! RGB inputs are treated as sRGB with a D65 white point.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{arg_err, shape_err, Result};
use crate::image::Image;

/// Offset added to the intensity-collapse gain so that `c(0) > 0`.
pub const HVI_EPS: f64 = 1e-8;

/// Planar HVI representation: polarized chroma `(h, v)` and intensity `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct HviImage {
    pub height: usize,
    pub width: usize,
    pub h_plane: Vec<f64>,
    pub v_plane: Vec<f64>,
    pub i_plane: Vec<f64>,
}

impl HviImage {
    pub fn new(
        height: usize,
        width: usize,
        h_plane: Vec<f64>,
        v_plane: Vec<f64>,
        i_plane: Vec<f64>,
    ) -> Result<Self> {
        let n = height * width;
        if h_plane.len() != n || v_plane.len() != n || i_plane.len() != n {
            return shape_err(format!("HVI planes must hold {n} samples"));
        }
        Ok(Self { height, width, h_plane, v_plane, i_plane })
    }

    /// Planes flattened as `[H..., V..., I...]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.h_plane.len());
        v.extend_from_slice(&self.h_plane);
        v.extend_from_slice(&self.v_plane);
        v.extend_from_slice(&self.i_plane);
        v
    }
}

/// Intensity-collapse gain `sin(pi * i / 2) + eps`.
#[inline]
pub fn collapse_gain(i: f64) -> f64 {
    (0.5 * PI * i).sin() + HVI_EPS
}

/// HSV decomposition of one pixel: hue in `[0, 1)`, saturation, value.
/// Ties for the max channel go to the first channel in R, G, B order.
#[inline]
pub(crate) fn rgb_to_hsv(rgb: [f64; 3]) -> (f64, f64, f64) {
    let (imax, imin) = argmax_argmin(rgb);
    let (max, min) = (rgb[imax], rgb[imin]);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta > 0.0 { hue_raw(rgb, imax, delta).rem_euclid(1.0) } else { 0.0 };
    (h, s, max)
}

/// Hue before wrapping into `[0, 1)`.
#[inline]
pub(crate) fn hue_raw(rgb: [f64; 3], imax: usize, delta: f64) -> f64 {
    let [r, g, b] = rgb;
    match imax {
        0 => (g - b) / delta / 6.0,
        1 => ((b - r) / delta + 2.0) / 6.0,
        _ => ((r - g) / delta + 4.0) / 6.0,
    }
}

/// Index of the maximum and minimum channel, first index wins on ties.
#[inline]
pub(crate) fn argmax_argmin(rgb: [f64; 3]) -> (usize, usize) {
    let mut imax = 0;
    let mut imin = 0;
    for c in 1..3 {
        if rgb[c] > rgb[imax] {
            imax = c;
        }
        if rgb[c] < rgb[imin] {
            imin = c;
        }
    }
    (imax, imin)
}

#[inline]
fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    if s <= 0.0 {
        return [v, v, v];
    }
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = (h6.floor() as usize).min(5);
    let f = h6 - sector as f64;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// HVI coordinates of a single pixel in `[0, 1]^3`.
#[inline]
pub fn hvi_pixel(rgb: [f64; 3]) -> [f64; 3] {
    let (h, s, i) = rgb_to_hsv(rgb);
    let c = collapse_gain(i);
    let angle = 2.0 * PI * h;
    [c * s * angle.cos(), c * s * angle.sin(), i]
}

/// Converts an RGB image to HVI. Samples outside `[0, 1]` are clamped; the
/// number of clamped samples is returned alongside.
pub fn rgb_to_hvi(img: &Image) -> Result<(HviImage, usize)> {
    if img.channels() != 3 {
        return arg_err(format!("rgb_to_hvi needs 3 channels, got {}", img.channels()));
    }
    let n = img.height() * img.width();
    let mut hp = Vec::with_capacity(n);
    let mut vp = Vec::with_capacity(n);
    let mut ip = Vec::with_capacity(n);
    let mut clamped = 0;
    for px in img.data().chunks_exact(3) {
        let mut rgb = [px[0], px[1], px[2]];
        for v in &mut rgb {
            if !(0.0..=1.0).contains(v) {
                clamped += 1;
                *v = v.clamp(0.0, 1.0);
            }
        }
        let [h, v, i] = hvi_pixel(rgb);
        hp.push(h);
        vp.push(v);
        ip.push(i);
    }
    Ok((HviImage::new(img.height(), img.width(), hp, vp, ip)?, clamped))
}

/// Inverts [`rgb_to_hvi`]. Pixels whose gain `c(I)` has collapsed to the
/// stabilizer while carrying chroma cannot be recovered; they are mapped to
/// gray and counted.
pub fn hvi_to_rgb(hvi: &HviImage) -> Result<(Image, usize)> {
    let n = hvi.height * hvi.width;
    if hvi.h_plane.len() != n || hvi.v_plane.len() != n || hvi.i_plane.len() != n {
        return shape_err("HVI plane sizes do not match dimensions");
    }
    let mut data = Vec::with_capacity(n * 3);
    let mut lost = 0;
    for k in 0..n {
        let (hc, vc) = (hvi.h_plane[k], hvi.v_plane[k]);
        let i = hvi.i_plane[k].clamp(0.0, 1.0);
        let c = collapse_gain(i);
        let r = hc.hypot(vc);
        let rgb = if r == 0.0 {
            [i, i, i]
        } else if c <= 2.0 * HVI_EPS {
            lost += 1;
            [i, i, i]
        } else {
            let s = (r / c).clamp(0.0, 1.0);
            let h = (vc.atan2(hc) / (2.0 * PI)).rem_euclid(1.0);
            hsv_to_rgb(h, s, i)
        };
        data.extend(rgb.iter().map(|v| v.clamp(0.0, 1.0)));
    }
    Ok((Image::new(hvi.height, hvi.width, 3, data)?, lost))
}

/// A CIELab colour (D65).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabColor {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }
}

/// Planar Lab result of [`rgb_to_lab`].
#[derive(Clone, Debug, PartialEq)]
pub struct LabPlanes {
    pub height: usize,
    pub width: usize,
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl LabPlanes {
    pub fn get(&self, k: usize) -> LabColor {
        LabColor::new(self.l[k], self.a[k], self.b[k])
    }
}

/// sRGB → linear-RGB → XYZ (D65), rows of the standard sRGB matrix.
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

/// D65 reference white (Y = 1), taken as the matrix row sums so that RGB
/// white maps exactly to the white point.
const WHITE: [f64; 3] = [
    SRGB_TO_XYZ[0][0] + SRGB_TO_XYZ[0][1] + SRGB_TO_XYZ[0][2],
    SRGB_TO_XYZ[1][0] + SRGB_TO_XYZ[1][1] + SRGB_TO_XYZ[1][2],
    SRGB_TO_XYZ[2][0] + SRGB_TO_XYZ[2][1] + SRGB_TO_XYZ[2][2],
];

/// D65 chromaticity used for black pixels in [`rgb_to_xy`].
pub const D65_XY: (f64, f64) = (0.3127, 0.3290);

#[inline]
pub fn srgb_to_linear(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
pub fn srgb_to_xyz(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    SRGB_TO_XYZ.map(|row| row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2])
}

#[inline]
fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// CIELab of one sRGB triple.
pub fn srgb_to_lab(rgb: [f64; 3]) -> LabColor {
    let xyz = srgb_to_xyz(rgb);
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    LabColor::new(116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
}

fn lab_f_inv(f: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if f > DELTA {
        f * f * f
    } else {
        3.0 * DELTA * DELTA * (f - 4.0 / 29.0)
    }
}

fn invert3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r: usize, k: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (k1, k2) = ((k + 1) % 3, (k + 2) % 3);
        m[r1][k1] * m[r2][k2] - m[r1][k2] * m[r2][k1]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = c(j, i) / det;
        }
    }
    inv
}

/// Linear-light value to the sRGB transfer curve, without clamping.
pub fn linear_to_srgb(v: f64) -> f64 {
    if v <= 0.0031308 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

/// Inverse of [`srgb_to_lab`] for in-gamut colours. Out-of-gamut colours
/// yield components outside `[0, 1]`.
pub fn lab_to_srgb(lab: LabColor) -> [f64; 3] {
    let fy = (lab.l + 16.0) / 116.0;
    let fx = fy + lab.a / 500.0;
    let fz = fy - lab.b / 200.0;
    let xyz = [
        lab_f_inv(fx) * WHITE[0],
        lab_f_inv(fy) * WHITE[1],
        lab_f_inv(fz) * WHITE[2],
    ];
    let inv = invert3(SRGB_TO_XYZ);
    inv.map(|row| linear_to_srgb(row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2]))
}

pub fn rgb_to_lab(img: &Image) -> Result<LabPlanes> {
    if img.channels() != 3 {
        return arg_err(format!("rgb_to_lab needs 3 channels, got {}", img.channels()));
    }
    let n = img.height() * img.width();
    let mut planes = LabPlanes {
        height: img.height(),
        width: img.width(),
        l: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
    };
    for px in img.data().chunks_exact(3) {
        let lab = srgb_to_lab([px[0], px[1], px[2]]);
        planes.l.push(lab.l);
        planes.a.push(lab.a);
        planes.b.push(lab.b);
    }
    Ok(planes)
}

/// CIEDE2000 colour difference with `kL = kC = kH = 1`.
pub fn ciede2000(c1: LabColor, c2: LabColor) -> f64 {
    let pow7 = |v: f64| v.powi(7);
    let deg = |r: f64| r.to_degrees();
    let rad = |d: f64| d.to_radians();
    const P25_7: f64 = 6_103_515_625.0; // 25^7

    let c_ab1 = c1.a.hypot(c1.b);
    let c_ab2 = c2.a.hypot(c2.b);
    let c_bar = 0.5 * (c_ab1 + c_ab2);
    let g = 0.5 * (1.0 - (pow7(c_bar) / (pow7(c_bar) + P25_7)).sqrt());
    let a1p = (1.0 + g) * c1.a;
    let a2p = (1.0 + g) * c2.a;
    let c1p = a1p.hypot(c1.b);
    let c2p = a2p.hypot(c2.b);
    let hue = |b: f64, ap: f64| {
        if b == 0.0 && ap == 0.0 {
            0.0
        } else {
            deg(b.atan2(ap)).rem_euclid(360.0)
        }
    };
    let h1p = hue(c1.b, a1p);
    let h2p = hue(c2.b, a2p);

    let dl = c2.l - c1.l;
    let dc = c2p - c1p;
    let cc = c1p * c2p;
    let dh = if cc == 0.0 {
        0.0
    } else {
        let d = h2p - h1p;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let d_h = 2.0 * cc.sqrt() * rad(dh / 2.0).sin();

    let l_bar = 0.5 * (c1.l + c2.l);
    let cp_bar = 0.5 * (c1p + c2p);
    let hp_bar = if cc == 0.0 {
        h1p + h2p
    } else if (h1p - h2p).abs() <= 180.0 {
        0.5 * (h1p + h2p)
    } else if h1p + h2p < 360.0 {
        0.5 * (h1p + h2p + 360.0)
    } else {
        0.5 * (h1p + h2p - 360.0)
    };

    let t = 1.0 - 0.17 * rad(hp_bar - 30.0).cos()
        + 0.24 * rad(2.0 * hp_bar).cos()
        + 0.32 * rad(3.0 * hp_bar + 6.0).cos()
        - 0.20 * rad(4.0 * hp_bar - 63.0).cos();
    let d_theta = 30.0 * (-((hp_bar - 275.0) / 25.0).powi(2)).exp();
    let r_c = 2.0 * (pow7(cp_bar) / (pow7(cp_bar) + P25_7)).sqrt();
    let l50 = (l_bar - 50.0).powi(2);
    let s_l = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
    let s_c = 1.0 + 0.045 * cp_bar;
    let s_h = 1.0 + 0.015 * cp_bar * t;
    let r_t = -rad(2.0 * d_theta).sin() * r_c;

    let tl = dl / s_l;
    let tc = dc / s_c;
    let th = d_h / s_h;
    (tl * tl + tc * tc + th * th + r_t * tc * th).max(0.0).sqrt()
}

/// A chromaticity sample `(x, y)` with luminance `Y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XyY {
    pub x: f64,
    pub y: f64,
    pub big_y: f64,
}

/// Per-pixel CIE xyY (row-major). Black pixels take the D65 chromaticity.
pub fn rgb_to_xy(img: &Image) -> Result<Vec<XyY>> {
    if img.channels() != 3 {
        return arg_err(format!("rgb_to_xy needs 3 channels, got {}", img.channels()));
    }
    Ok(img
        .data()
        .chunks_exact(3)
        .map(|px| {
            let [x, y, z] = srgb_to_xyz([px[0], px[1], px[2]]);
            let sum = x + y + z;
            if sum < 1e-9 {
                XyY { x: D65_XY.0, y: D65_XY.1, big_y: y }
            } else {
                XyY { x: x / sum, y: y / sum, big_y: y }
            }
        })
        .collect())
}

/// Writes the xyY samples as CSV with header `x,y,Y`, keeping every
/// `stride`-th row and column of the image.
pub fn write_xyy_csv<W: Write>(img: &Image, stride: usize, out: W) -> Result<usize> {
    if stride == 0 {
        return arg_err("stride must be at least 1");
    }
    let samples = rgb_to_xy(img)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "Y"])?;
    let mut rows = 0;
    for yy in (0..img.height()).step_by(stride) {
        for xx in (0..img.width()).step_by(stride) {
            let s = samples[yy * img.width() + xx];
            w.write_record([s.x.to_string(), s.y.to_string(), s.big_y.to_string()])?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}
