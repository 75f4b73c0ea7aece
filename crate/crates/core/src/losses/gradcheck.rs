use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LossTerm;
use crate::colorspace::hvi_pixel;
use crate::error::Result;
use crate::image::Image;

const SIDE: usize = 16;
const STEP: f64 = 1e-4;
const HVI_GAP: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckRow {
    pub term: LossTerm,
    pub trials: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckRow {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub rows: Vec<GradCheckRow>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(GradCheckRow::passed)
    }

    /// Aligned, human-readable table.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<12} {:>6} {:>6} {:>12} {:>10}  status\n",
            "loss", "trials", "coords", "max_rel_err", "tolerance"
        );
        for r in &self.rows {
            s += &format!(
                "{:<12} {:>6} {:>6} {:>12.3e} {:>10.0e}  {}\n",
                r.term.name(),
                r.trials,
                r.coordinates,
                r.max_rel_error,
                r.tolerance,
                if r.passed() { "ok" } else { "FAIL" }
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("loss,trials,coordinates,max_rel_error,tolerance,passed\n");
        for r in &self.rows {
            s += &format!(
                "{},{},{},{:e},{:e},{}\n",
                r.term.name(),
                r.trials,
                r.coordinates,
                r.max_rel_error,
                r.tolerance,
                r.passed()
            );
        }
        s
    }
}

/// A pixel whose channels are separated by more than 0.05 in a random order.
fn separated_pixel(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let lo = rng.random_range(0.1..0.3);
    let mid = lo + rng.random_range(0.08..0.25);
    let hi = mid + rng.random_range(0.08..0.25);
    let mut v = [lo, mid, hi];
    for i in (1..3).rev() {
        v.swap(i, rng.random_range(0..=i));
    }
    v
}

/// Reference in `[0.25, 0.75]` and a prediction offset by `+-[0.02, 0.2]`,
/// away from the Charbonnier kink. HVI pairs use well-separated channels and
/// differ by at least [`HVI_GAP`] in every HVI component.
fn sample_pair(term: LossTerm, rng: &mut ChaCha8Rng) -> (Image, Image) {
    let (y, p): (Vec<f64>, Vec<f64>) = if term == LossTerm::Hvi {
        (0..SIDE * SIDE)
            .flat_map(|_| {
                let a = separated_pixel(rng);
                let b = loop {
                    let b = separated_pixel(rng);
                    let (ha, hb) = (hvi_pixel(a), hvi_pixel(b));
                    if ha.iter().zip(&hb).all(|(u, v)| (u - v).abs() >= HVI_GAP) {
                        break b;
                    }
                };
                (0..3).map(move |c| (a[c], b[c]))
            })
            .unzip()
    } else {
        (0..SIDE * SIDE * 3)
            .map(|_| {
                let y = rng.random_range(0.25..0.75);
                let d = rng.random_range(0.02..0.2);
                (y, if rng.random_bool(0.5) { y + d } else { y - d })
            })
            .unzip()
    };
    (
        Image::new(SIDE, SIDE, 3, y).expect("valid"),
        Image::new(SIDE, SIDE, 3, p).expect("valid"),
    )
}

/// `|a - b| / max(|a|, |b|, 1e-12)`.
fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Compares analytic gradients against central differences (step `1e-4`)
/// at every coordinate of `trials` random `16 x 16 x 3` pairs per term.
pub fn grad_check(terms: &[LossTerm], trials: usize, seed: u64) -> Result<GradCheckReport> {
    let mut rows = Vec::new();
    for &term in terms {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (term as u64).wrapping_mul(0x9E37_79B9));
        let mut worst = 0.0f64;
        let mut coords = 0;
        for _ in 0..trials {
            let (y, p) = sample_pair(term, &mut rng);
            let (_, grad) = term.eval(&y, &p)?;
            let mut probe = p.clone();
            for i in 0..p.len() {
                let orig = p.data()[i];
                probe.data_mut()[i] = orig + STEP;
                let up = term.eval(&y, &probe)?.0;
                probe.data_mut()[i] = orig - STEP;
                let down = term.eval(&y, &probe)?.0;
                probe.data_mut()[i] = orig;
                let fd = (up - down) / (2.0 * STEP);
                worst = worst.max(rel_error(grad.data()[i], fd));
                coords += 1;
            }
        }
        rows.push(GradCheckRow {
            term,
            trials,
            coordinates: coords,
            max_rel_error: worst,
            tolerance: term.tolerance(),
        });
    }
    Ok(GradCheckReport { rows })
}
