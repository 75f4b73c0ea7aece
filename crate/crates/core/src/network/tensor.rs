use crate::error::{shape_err, Result};
use crate::image::Image;

/// Planar (`C x H x W`, row-major per channel) `f32` activations.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return shape_err(format!("empty feature map {channels}x{height}x{width}"));
        }
        if data.len() != channels * height * width {
            return shape_err(format!(
                "data length {} does not match {channels}x{height}x{width}",
                data.len()
            ));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self { channels, height, width, data }
    }

    /// Converts an interleaved `f64` image to planar `f32`.
    pub fn from_image(img: &Image) -> Self {
        let (h, w, c) = img.shape();
        Self::from_fn(c, h, w, |ch, y, x| img.get(y, x, ch) as f32)
    }

    pub fn to_image(&self) -> Image {
        Image::from_fn(self.height, self.width, self.channels, |y, x, c| {
            self.get(c, y, x) as f64
        })
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
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
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &FeatureMap) -> f32 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    pub(crate) fn add_assign(&mut self, other: &FeatureMap) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Channel concatenation `[self, other]`.
    pub(crate) fn concat(&self, other: &FeatureMap) -> FeatureMap {
        debug_assert_eq!((self.height, self.width), (other.height, other.width));
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        FeatureMap {
            channels: self.channels + other.channels,
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Bottom/right edge-replicate padding to `h x w`.
    pub(crate) fn pad_replicate(&self, h: usize, w: usize) -> FeatureMap {
        if h == self.height && w == self.width {
            return self.clone();
        }
        FeatureMap::from_fn(self.channels, h, w, |c, y, x| {
            self.get(c, y.min(self.height - 1), x.min(self.width - 1))
        })
    }

    pub(crate) fn crop(&self, h: usize, w: usize) -> FeatureMap {
        if h == self.height && w == self.width {
            return self.clone();
        }
        FeatureMap::from_fn(self.channels, h, w, |c, y, x| self.get(c, y, x))
    }

    pub(crate) fn map_inplace(&mut self, f: impl Fn(f32) -> f32) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }
}
