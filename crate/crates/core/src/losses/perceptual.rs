use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Error, Result};
use crate::image::Image;

/// Maps an image to a list of feature maps, optionally with a
/// vector-Jacobian product for gradients.
pub trait FeatureExtractor {
    fn features(&self, img: &Image) -> Result<Vec<Image>>;

    /// Pulls per-layer cotangents back to the input. `None` means the
    /// extractor is not differentiable.
    fn backward(&self, _img: &Image, _cotangents: &[Image]) -> Option<Result<Image>> {
        None
    }
}

/// `phi(x) = [x]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityExtractor;

impl FeatureExtractor for IdentityExtractor {
    fn features(&self, img: &Image) -> Result<Vec<Image>> {
        Ok(vec![img.clone()])
    }

    fn backward(&self, _img: &Image, cotangents: &[Image]) -> Option<Result<Image>> {
        Some(match cotangents {
            [g] => Ok(g.clone()),
            _ => Err(Error::Extractor("identity extractor has one layer".into())),
        })
    }
}

#[derive(Clone, Debug)]
struct ConvLayer {
    cin: usize,
    cout: usize,
    /// `cout x cin x 3 x 3`
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvLayer {
    fn random(cin: usize, cout: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (3.0 / (cin * 9) as f64).sqrt();
        let weight = (0..cout * cin * 9).map(|_| rng.random_range(-bound..bound)).collect();
        let bias = (0..cout).map(|_| rng.random_range(-0.1..0.1)).collect();
        Self { cin, cout, weight, bias }
    }

    fn w(&self, co: usize, ci: usize, ky: usize, kx: usize) -> f64 {
        self.weight[((co * self.cin + ci) * 3 + ky) * 3 + kx]
    }

    /// 3x3 correlation with edge-replicate padding, then `tanh`.
    fn forward(&self, x: &Image) -> Image {
        let (h, w, _) = x.shape();
        Image::from_fn(h, w, self.cout, |y, xx, co| {
            let mut acc = self.bias[co];
            for ci in 0..self.cin {
                for ky in 0..3 {
                    for kx in 0..3 {
                        let v = x.get_clamped(y as isize + ky as isize - 1, xx as isize + kx as isize - 1, ci);
                        acc += self.w(co, ci, ky, kx) * v;
                    }
                }
            }
            acc.tanh()
        })
    }

    /// Gradient with respect to the layer input, given the output and its cotangent.
    fn backward(&self, x: &Image, out: &Image, g_out: &Image) -> Image {
        let (h, w, _) = x.shape();
        let mut g_in = Image::filled(h, w, self.cin, 0.0);
        for y in 0..h {
            for xx in 0..w {
                for co in 0..self.cout {
                    let t = out.get(y, xx, co);
                    let g = g_out.get(y, xx, co) * (1.0 - t * t);
                    if g == 0.0 {
                        continue;
                    }
                    for ci in 0..self.cin {
                        for ky in 0..3 {
                            let sy = (y + ky).saturating_sub(1).min(h - 1);
                            for kx in 0..3 {
                                let sx = (xx + kx).saturating_sub(1).min(w - 1);
                                let idx = g_in.index(sy, sx, ci);
                                g_in.data_mut()[idx] += g * self.w(co, ci, ky, kx);
                            }
                        }
                    }
                }
            }
        }
        g_in
    }
}

/// Fixed, seeded two-layer `3x3 conv + tanh` stack with 8 channels per
/// layer. Both activations are returned as features.
#[derive(Clone, Debug)]
pub struct ConvStackExtractor {
    layers: [ConvLayer; 2],
}

impl ConvStackExtractor {
    pub const WIDTH: usize = 8;

    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l1 = ConvLayer::random(3, Self::WIDTH, &mut rng);
        let l2 = ConvLayer::random(Self::WIDTH, Self::WIDTH, &mut rng);
        Self { layers: [l1, l2] }
    }

    fn check(img: &Image) -> Result<()> {
        if img.channels() != 3 {
            return Err(Error::Extractor(format!(
                "conv stack expects 3 channels, got {}",
                img.channels()
            )));
        }
        Ok(())
    }
}

impl FeatureExtractor for ConvStackExtractor {
    fn features(&self, img: &Image) -> Result<Vec<Image>> {
        Self::check(img)?;
        let a = self.layers[0].forward(img);
        let b = self.layers[1].forward(&a);
        Ok(vec![a, b])
    }

    fn backward(&self, img: &Image, cotangents: &[Image]) -> Option<Result<Image>> {
        let run = || {
            Self::check(img)?;
            let [ga, gb] = cotangents else {
                return Err(Error::Extractor("conv stack has two layers".into()));
            };
            let a = self.layers[0].forward(img);
            let b = self.layers[1].forward(&a);
            let mut g_a = self.layers[1].backward(&a, &b, gb);
            for (s, v) in g_a.data_mut().iter_mut().zip(ga.data()) {
                *s += v;
            }
            Ok(self.layers[0].backward(img, &a, &g_a))
        };
        Some(run())
    }
}

/// `(1 / N) * sum_i ||phi_i(y) - phi_i(y_pred)||_2` and, when the extractor
/// supports it, the gradient with respect to `y_pred`.
pub fn perceptual_loss(
    y: &Image,
    y_pred: &Image,
    extractor: &dyn FeatureExtractor,
) -> Result<(f64, Option<Image>)> {
    y.check_same_shape(y_pred, "perceptual loss")?;
    let fa = extractor.features(y)?;
    let fb = extractor.features(y_pred)?;
    if fa.len() != fb.len() || fa.is_empty() {
        return Err(Error::Extractor(format!(
            "feature layer counts differ or are empty: {} vs {}",
            fa.len(),
            fb.len()
        )));
    }
    let n = fa.len() as f64;
    let mut value = 0.0;
    let mut cotangents = Vec::with_capacity(fa.len());
    for (a, b) in fa.iter().zip(&fb) {
        if !a.same_shape(b) {
            return shape_err(format!("feature shapes differ: {:?} vs {:?}", a.shape(), b.shape()));
        }
        let norm = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(p, q)| (q - p) * (q - p))
            .sum::<f64>()
            .sqrt();
        value += norm / n;
        let scale = if norm > 0.0 { 1.0 / (n * norm) } else { 0.0 };
        let mut g = b.clone();
        for (gv, p) in g.data_mut().iter_mut().zip(a.data()) {
            *gv = (*gv - p) * scale;
        }
        cotangents.push(g);
    }
    let grad = extractor.backward(y_pred, &cotangents).transpose()?;
    Ok((value, grad))
}
