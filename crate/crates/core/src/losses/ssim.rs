//! Structural similarity with an 11x11 Gaussian window (sigma 1.5) over the
//! valid region, dynamic range 1, averaged over positions and channels.

use crate::error::{arg_err, Result};
use crate::image::Image;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
const C1: f64 = SSIM_K1 * SSIM_K1;
const C2: f64 = SSIM_K2 * SSIM_K2;

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let mid = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - mid;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Single-channel plane with its own dimensions.
struct Plane {
    h: usize,
    w: usize,
    v: Vec<f64>,
}

impl Plane {
    fn from_fn(h: usize, w: usize, f: impl Fn(usize) -> f64) -> Plane {
        Plane { h, w, v: (0..h * w).map(f).collect() }
    }
}

/// Valid-region separable Gaussian filtering.
fn filter(p: &Plane, g: &[f64]) -> Plane {
    let k = g.len();
    let (oh, ow) = (p.h - k + 1, p.w - k + 1);
    let mut rows = vec![0.0; p.h * ow];
    for y in 0..p.h {
        for x in 0..ow {
            rows[y * ow + x] = (0..k).map(|t| g[t] * p.v[y * p.w + x + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|t| g[t] * rows[(y + t) * ow + x]).sum();
        }
    }
    Plane { h: oh, w: ow, v: out }
}

/// Adjoint of [`filter`]: scatters a valid-region map back to `h x w`.
fn filter_adjoint(q: &Plane, g: &[f64], h: usize, w: usize) -> Plane {
    let k = g.len();
    let ow = q.w;
    let mut rows = vec![0.0; h * ow];
    for y in 0..q.h {
        for x in 0..ow {
            let v = q.v[y * ow + x];
            for t in 0..k {
                rows[(y + t) * ow + x] += g[t] * v;
            }
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..ow {
            let v = rows[y * ow + x];
            for t in 0..k {
                out[y * w + x + t] += g[t] * v;
            }
        }
    }
    Plane { h, w, v: out }
}

fn check(y: &Image, y_pred: &Image) -> Result<()> {
    y.check_same_shape(y_pred, "ssim")?;
    if y.height() < SSIM_WINDOW || y.width() < SSIM_WINDOW {
        return arg_err(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {}x{}",
            y.height(),
            y.width()
        ));
    }
    Ok(())
}

/// Mean SSIM and, if requested, its gradient with respect to `y_pred`.
fn ssim_impl(y: &Image, y_pred: &Image, want_grad: bool) -> Result<(f64, Option<Image>)> {
    check(y, y_pred)?;
    let (h, w, c) = y.shape();
    let g = gaussian_taps();
    let positions = ((h - SSIM_WINDOW + 1) * (w - SSIM_WINDOW + 1)) as f64;
    let norm = c as f64 * positions;
    let mut total = 0.0;
    let mut grad = want_grad.then(|| Image::zeros_like(y));

    for ch in 0..c {
        let a = Plane::from_fn(h, w, |i| y.data()[i * c + ch]);
        let b = Plane::from_fn(h, w, |i| y_pred.data()[i * c + ch]);
        let mu_a = filter(&a, &g);
        let mu_b = filter(&b, &g);
        let e_aa = filter(&Plane::from_fn(h, w, |i| a.v[i] * a.v[i]), &g);
        let e_bb = filter(&Plane::from_fn(h, w, |i| b.v[i] * b.v[i]), &g);
        let e_ab = filter(&Plane::from_fn(h, w, |i| a.v[i] * b.v[i]), &g);

        let n = mu_a.v.len();
        let (mut d_mu, mut d_bb, mut d_ab) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            let (ma, mb) = (mu_a.v[i], mu_b.v[i]);
            let var_a = e_aa.v[i] - ma * ma;
            let var_b = e_bb.v[i] - mb * mb;
            let cov = e_ab.v[i] - ma * mb;
            let a1 = 2.0 * ma * mb + C1;
            let a2 = 2.0 * cov + C2;
            let b1 = ma * ma + mb * mb + C1;
            let b2 = var_a + var_b + C2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            if want_grad {
                d_mu[i] = 2.0 * ma * (a2 - a1) / (b1 * b2) - 2.0 * mb * s * (1.0 / b1 - 1.0 / b2);
                d_bb[i] = -s / b2;
                d_ab[i] = 2.0 * a1 / (b1 * b2);
            }
        }
        if let Some(grad) = grad.as_mut() {
            let wrap = |v: Vec<f64>| Plane { h: mu_a.h, w: mu_a.w, v };
            let g_mu = filter_adjoint(&wrap(d_mu), &g, h, w);
            let g_bb = filter_adjoint(&wrap(d_bb), &g, h, w);
            let g_ab = filter_adjoint(&wrap(d_ab), &g, h, w);
            let out = grad.data_mut();
            for i in 0..h * w {
                let ds = g_mu.v[i] + 2.0 * b.v[i] * g_bb.v[i] + a.v[i] * g_ab.v[i];
                out[i * c + ch] = -ds / norm;
            }
        }
    }
    Ok((total / norm, grad))
}

/// Mean structural similarity of two same-shape images.
pub fn ssim(y: &Image, y_pred: &Image) -> Result<f64> {
    Ok(ssim_impl(y, y_pred, false)?.0)
}

/// `1 - SSIM` and its gradient with respect to `y_pred`.
pub fn ssim_loss(y: &Image, y_pred: &Image) -> Result<(f64, Image)> {
    let (s, g) = ssim_impl(y, y_pred, true)?;
    Ok((1.0 - s, g.expect("gradient requested")))
}
