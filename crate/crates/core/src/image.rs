//! Raster value type, PPM/PFM file IO and bilinear resampling.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{arg_err, shape_err, Error, Result};

/// An `H x W x C` raster with channel-interleaved, row-major `f64` samples.
///
/// Nominal range is `[0, 1]`, but intermediate results (gradients, subbands)
/// reuse the type and may leave it.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return shape_err(format!("empty image {height}x{width}x{channels}"));
        }
        if data.len() != height * width * channels {
            return shape_err(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return arg_err(format!("non-finite sample at index {i}"));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && channels > 0, "empty image");
        Self { height, width, channels, data: vec![value; height * width * channels] }
    }

    pub fn zeros_like(other: &Image) -> Self {
        Self::filled(other.height, other.width, other.channels, 0.0)
    }

    /// Builds an image by evaluating `f(y, x, c)` at every sample.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut img = Self::filled(height, width, channels, 0.0);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    img.data[(y * width + x) * channels + c] = f(y, x, c);
                }
            }
        }
        img
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let i = self.index(y, x, c);
        self.data[i] = v;
    }

    /// Sample with coordinates clamped into the raster (edge replication).
    #[inline]
    pub fn get_clamped(&self, y: isize, x: isize, c: usize) -> f64 {
        let y = y.clamp(0, self.height as isize - 1) as usize;
        let x = x.clamp(0, self.width as isize - 1) as usize;
        self.get(y, x, c)
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn check_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            shape_err(format!("{what}: {:?} vs {:?}", self.shape(), other.shape()))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn clamp01(&self) -> Image {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Extracts channel `c` as a single-channel image.
    pub fn channel(&self, c: usize) -> Image {
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Image { height: self.height, width: self.width, channels: 1, data }
    }

    /// Copies the `h x w` window starting at `(y0, x0)`.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Result<Image> {
        if h == 0 || w == 0 || y0 + h > self.height || x0 + w > self.width {
            return shape_err(format!(
                "crop {h}x{w} at ({y0},{x0}) outside {}x{}",
                self.height, self.width
            ));
        }
        Ok(Image::from_fn(h, w, self.channels, |y, x, c| self.get(y0 + y, x0 + x, c)))
    }

    /// Pads bottom/right by edge replication to `h x w`.
    pub fn pad_replicate(&self, h: usize, w: usize) -> Image {
        assert!(h >= self.height && w >= self.width);
        Image::from_fn(h, w, self.channels, |y, x, c| {
            self.get(y.min(self.height - 1), x.min(self.width - 1), c)
        })
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        assert!(self.same_shape(other), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Reads a binary PPM (`P6`, maxval 255) or a PFM (`PF` colour / `Pf` grey).
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let bytes = fs::read(path.as_ref())?;
    decode_image(&bytes)
}

/// Decodes PPM/PFM bytes; the format is chosen by the magic number.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    match bytes.get(..2) {
        Some(b"P6") => decode_ppm(bytes),
        Some(b"PF") | Some(b"Pf") => decode_pfm(bytes),
        _ => Err(Error::Format("unknown magic, expected P6, PF or Pf".into())),
    }
}

/// Writes `img` as PPM (`.ppm`) or PFM (`.pfm`), chosen by extension.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    let bytes = match ext.as_str() {
        "ppm" => encode_ppm(img)?,
        "pfm" => encode_pfm(img)?,
        other => return arg_err(format!("unsupported output extension {other:?}")),
    };
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Quantizes to 8 bits: clamp to `[0, 1]`, then round half up.
#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn encode_ppm(img: &Image) -> Result<Vec<u8>> {
    if img.channels != 3 {
        return arg_err(format!("P6 needs 3 channels, image has {}", img.channels));
    }
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| quantize_u8(v)));
    Ok(out)
}

pub fn encode_pfm(img: &Image) -> Result<Vec<u8>> {
    let magic = match img.channels {
        3 => "PF",
        1 => "Pf",
        c => return arg_err(format!("PFM supports 1 or 3 channels, image has {c}")),
    };
    let mut out = format!("{magic}\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    let row = img.width * img.channels;
    out.reserve(img.data.len() * 4);
    for y in (0..img.height).rev() {
        for &v in &img.data[y * row..(y + 1) * row] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Splits a netpbm-style header into `count` whitespace separated tokens,
/// skipping `#` comments. Returns the tokens and the offset of the payload
/// (one whitespace byte after the last token).
fn header_tokens(bytes: &[u8], count: usize) -> Result<(Vec<String>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::Format("truncated header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    if i >= bytes.len() || !bytes[i].is_ascii_whitespace() {
        return Err(Error::Format("missing separator after header".into()));
    }
    Ok((tokens, i + 1))
}

fn parse_dims(w: &str, h: &str) -> Result<(usize, usize)> {
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad dimension {s:?}")))
    };
    let (w, h) = (parse(w)?, parse(h)?);
    if w < 2 || h < 2 {
        return Err(Error::Format(format!("dimension below 2: {w}x{h}")));
    }
    Ok((w, h))
}

fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let (tok, offset) = header_tokens(bytes, 4)?;
    let (w, h) = parse_dims(&tok[1], &tok[2])?;
    if tok[3] != "255" {
        return Err(Error::Format(format!("unsupported maxval {}", tok[3])));
    }
    let payload = &bytes[offset..];
    let n = w * h * 3;
    if payload.len() != n {
        return Err(Error::Format(format!(
            "payload is {} bytes, expected {n}",
            payload.len()
        )));
    }
    let data = payload.iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(h, w, 3, data)
}

fn decode_pfm(bytes: &[u8]) -> Result<Image> {
    let (tok, offset) = header_tokens(bytes, 4)?;
    let channels = if tok[0] == "PF" { 3 } else { 1 };
    let (w, h) = parse_dims(&tok[1], &tok[2])?;
    let scale: f64 = tok[3]
        .parse()
        .map_err(|_| Error::Format(format!("bad PFM scale {:?}", tok[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Format(format!("bad PFM scale {scale}")));
    }
    let little = scale < 0.0;
    let payload = &bytes[offset..];
    let n = w * h * channels;
    if payload.len() != n * 4 {
        return Err(Error::Format(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            n * 4
        )));
    }
    let row = w * channels;
    let mut data = vec![0.0; n];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        // stored bottom-up
        let (file_row, col) = (i / row, i % row);
        data[(h - 1 - file_row) * row + col] = v as f64;
    }
    Image::new(h, w, channels, data)
        .map_err(|e| Error::Format(format!("PFM payload rejected: {e}")))
}

/// Bilinear resampling with half-pixel-centred coordinates and edge clamping.
pub fn resize_bilinear(img: &Image, new_h: usize, new_w: usize) -> Result<Image> {
    if new_h < 2 || new_w < 2 {
        return arg_err(format!("degenerate target size {new_h}x{new_w}"));
    }
    let ys = axis_taps(img.height, new_h);
    let xs = axis_taps(img.width, new_w);
    let c = img.channels;
    let mut out = Image::filled(new_h, new_w, c, 0.0);
    for (oy, &(y0, y1, ty)) in ys.iter().enumerate() {
        for (ox, &(x0, x1, tx)) in xs.iter().enumerate() {
            for ch in 0..c {
                let top = lerp(img.get(y0, x0, ch), img.get(y0, x1, ch), tx);
                let bot = lerp(img.get(y1, x0, ch), img.get(y1, x1, ch), tx);
                out.set(oy, ox, ch, lerp(top, bot, ty));
            }
        }
    }
    Ok(out)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Source taps `(i0, i1, frac)` for each output coordinate along one axis.
pub(crate) fn axis_taps(n_in: usize, n_out: usize) -> Vec<(usize, usize, f64)> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(n_in - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ppm_bytes(w: usize, h: usize, fill: u8) -> Vec<u8> {
        let mut b = format!("P6\n{w} {h}\n255\n").into_bytes();
        b.extend(std::iter::repeat_n(fill, w * h * 3));
        b
    }

    #[test]
    fn ppm_quantization_levels() {
        let img = decode_image(&ppm_bytes(3, 2, 255)).unwrap();
        assert!(img.data().iter().all(|&v| v == 1.0));
        let img = decode_image(&ppm_bytes(3, 2, 0)).unwrap();
        assert!(img.data().iter().all(|&v| v == 0.0));
        let img = decode_image(&ppm_bytes(2, 2, 128)).unwrap();
        assert!((img.get(0, 0, 0) - 0.50196).abs() < 1e-5);
        assert_eq!(img.get(1, 1, 2), 128.0 / 255.0);
    }

    #[test]
    fn ppm_header_comments_and_errors() {
        let mut b = b"P6 # comment\n2 2\n# another\n255\n".to_vec();
        b.extend([10u8; 12]);
        assert_eq!(decode_image(&b).unwrap().shape(), (2, 2, 3));

        let mut b = b"P6\n2 2\n65535\n".to_vec();
        b.extend([0u8; 24]);
        assert!(matches!(decode_image(&b), Err(Error::Format(_))));

        assert!(matches!(decode_image(&ppm_bytes(1, 4, 0)), Err(Error::Format(_))));
        let mut short = ppm_bytes(2, 2, 0);
        short.pop();
        assert!(matches!(decode_image(&short), Err(Error::Format(_))));
        assert!(matches!(decode_image(b"P3\n2 2\n255\n"), Err(Error::Format(_))));
        assert!(matches!(decode_image(b"P6\n2"), Err(Error::Format(_))));
    }

    #[test]
    fn ppm_rounding_and_clamp() {
        assert_eq!(quantize_u8(0.5), 128);
        assert_eq!(quantize_u8(1.7), 255);
        assert_eq!(quantize_u8(-0.2), 0);
        let img = Image::new(2, 2, 3, vec![0.5; 12]).unwrap();
        let bytes = encode_ppm(&img).unwrap();
        assert!(bytes.ends_with(&[128; 12]));
    }

    #[test]
    fn ppm_rejects_single_channel() {
        let img = Image::filled(2, 2, 1, 0.3);
        assert!(matches!(encode_ppm(&img), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pfm_is_bottom_up_little_endian() {
        let img = Image::from_fn(2, 2, 1, |y, x, _| (y * 2 + x) as f64);
        let bytes = encode_pfm(&img).unwrap();
        let header = b"Pf\n2 2\n-1.0\n";
        assert_eq!(&bytes[..header.len()], header);
        let first = f32::from_le_bytes(bytes[header.len()..header.len() + 4].try_into().unwrap());
        assert_eq!(first, 2.0); // bottom-left sample comes first
        assert_eq!(decode_image(&bytes).unwrap(), img);
    }

    #[test]
    fn pfm_big_endian_is_accepted() {
        let mut b = b"Pf\n2 2\n1.0\n".to_vec();
        for v in [1.0f32, 2.0, 3.0, 4.0] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        let img = decode_image(&b).unwrap();
        assert_eq!(img.data(), &[3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn pfm_rejects_nan() {
        let mut b = b"Pf\n2 2\n-1.0\n".to_vec();
        for v in [1.0f32, f32::NAN, 3.0, 4.0] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(decode_image(&b), Err(Error::Format(_))));
    }

    #[test]
    fn save_rejects_unknown_extension() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::filled(2, 2, 3, 0.1);
        assert!(save_image(&img, dir.path().join("x.png")).is_err());
    }

    #[test]
    fn resize_constant_and_identity() {
        let img = Image::filled(5, 7, 3, 0.3);
        let out = resize_bilinear(&img, 11, 4).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.3));

        let img = Image::from_fn(6, 5, 3, |y, x, c| ((y * 31 + x * 7 + c) % 13) as f64 / 13.0);
        assert_eq!(resize_bilinear(&img, 6, 5).unwrap(), img);
        assert!(resize_bilinear(&img, 1, 5).is_err());
    }

    #[test]
    fn resize_two_by_two_stretch() {
        // direct per-pixel oracle: src = (o + 0.5) / 2 - 0.5, clamped to [0, 1]
        let img = Image::from_fn(2, 2, 3, |_, x, _| x as f64);
        let out = resize_bilinear(&img, 4, 4).unwrap();
        let expect: Vec<f64> = (0..4)
            .map(|o| ((o as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, 1.0))
            .collect();
        assert_eq!(expect, vec![0.0, 0.25, 0.75, 1.0]);
        for y in 0..4 {
            for x in 0..4 {
                for c in 0..3 {
                    assert!((out.get(y, x, c) - expect[x]).abs() < 1e-15);
                }
            }
        }
    }
}
