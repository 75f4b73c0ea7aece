//! Acceptance criteria 1-10, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so that criterion 9 can time
//! the real `aquaprior bench` command without other tests running beside it.

use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use aquaprior::colorspace::{ciede2000, LabColor};
use aquaprior::image::{decode_image, encode_pfm, Image};
use aquaprior::losses::{
    charbonnier, edge_loss, fit_image, grad_check, hvi_loss, perceptual_loss, ssim, ssim_loss,
    total_loss, ConvStackExtractor, LossTerm, LossWeights, CHARBONNIER_EPS,
};
use aquaprior::metrics::psnr;
use aquaprior::network::{
    count_cost, dense_conv_cost, depthwise_cost, fused_input, init_random, model_forward,
    pointwise_cost, sgfb_trace, BlockOrder, BlockWeights, FeatureMap, NetConfig, WeightStore,
};
use aquaprior::priors::{gray_world_gains, haar_dwt2, haar_idwt2, white_balance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Image {
    let data = (0..h * w * c).map(|_| rng.random_range(0.0..1.0)).collect();
    Image::new(h, w, c, data).unwrap()
}

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    ensure!(
        elapsed.as_secs_f64() < limit_s,
        "{what} took {:.1} s, limit {limit_s} s",
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn c1_wavelet_round_trip() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let h = 2 * rng.random_range(1..=128);
        let w = 2 * rng.random_range(1..=128);
        let x = random_image(&mut rng, h, w, 3);
        let back = haar_idwt2(&haar_dwt2(&x).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        worst = worst.max(back.max_abs_diff(&x));
    }
    ensure!(worst < 1e-6, "max reconstruction error {worst:e}");

    let block = Image::new(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let sb = haar_dwt2(&block).map_err(|e| e.to_string())?;
    let got = [sb.ll.data()[0], sb.lh.data()[0], sb.hl.data()[0], sb.hh.data()[0]];
    ensure!(got == [2.5, -1.0, -0.5, 0.0], "[[1,2],[3,4]] gave {got:?}");
    within(t.elapsed(), 10.0, "50 round trips")?;
    Ok(format!(
        "50 images, max |idwt(dwt(x)) - x| = {worst:.1e}; block subbands {got:?}; {:.2} s",
        t.elapsed().as_secs_f64()
    ))
}

fn post_gain_means(img: &Image) -> [f64; 3] {
    let g = gray_world_gains(img).unwrap();
    let mut sums = [0.0; 3];
    for px in img.data().chunks_exact(3) {
        for c in 0..3 {
            sums[c] += px[c] * g[c];
        }
    }
    let n = (img.len() / 3) as f64;
    sums.map(|s| s / n)
}

fn spread(v: [f64; 3]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Post-gain spread predicted by `mu_g * mu_c / (mu_c + eps)`.
fn eps_spread(img: &Image) -> f64 {
    let mut mu = [0.0; 3];
    for px in img.data().chunks_exact(3) {
        for c in 0..3 {
            mu[c] += px[c];
        }
    }
    let mu = mu.map(|s| s / (img.len() / 3) as f64);
    let g = (mu[0] + mu[1] + mu[2]) / 3.0;
    spread(mu.map(|m| g * m / (m + 1e-6)))
}

fn scale_channels(x: &Image, k: [f64; 3]) -> Image {
    let mut out = x.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        for c in 0..3 {
            px[c] *= k[c];
        }
    }
    out
}

const SCALINGS: [[f64; 3]; 8] = [
    [0.5, 0.5, 0.5],
    [2.0, 0.5, 0.5],
    [0.5, 2.0, 0.5],
    [2.0, 2.0, 0.5],
    [0.5, 0.5, 2.0],
    [2.0, 0.5, 2.0],
    [0.5, 2.0, 2.0],
    [2.0, 2.0, 2.0],
];

#[derive(Clone, Copy)]
enum Samples {
    /// Uniform in `[1/255, 1]`, bounded away from the log's `eps`.
    Floored,
    Unit,
    /// 8-bit grid, zeros included.
    Quantized,
}

/// Worst `|wb(X) - wb(kX)|` over 20 seeded images.
fn wb_invariance(seed: u64, samples: Samples) -> Result<(f64, f64, f64, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut inv, mut base_spread, mut scaled_spread, mut model_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let h = rng.random_range(4..=64);
        let w = rng.random_range(4..=64);
        let x = random_image(&mut rng, h, w, 3).map(|v| match samples {
            Samples::Floored => 1.0 / 255.0 + v * (254.0 / 255.0),
            Samples::Unit => v,
            Samples::Quantized => (v * 255.0).round() / 255.0,
        });
        let base = white_balance(&x).map_err(|e| e.to_string())?;
        base_spread = base_spread.max(spread(post_gain_means(&x)));
        for k in SCALINGS {
            let scaled = scale_channels(&x, k);
            let out = white_balance(&scaled).map_err(|e| e.to_string())?;
            inv = inv.max(out.max_abs_diff(&base));
            let observed = spread(post_gain_means(&scaled));
            scaled_spread = scaled_spread.max(observed);
            model_err = model_err.max((observed - eps_spread(&scaled)).abs());
        }
    }
    Ok((inv, base_spread, scaled_spread, model_err))
}

fn c2_white_balance_invariance() -> Outcome {
    let (inv, base, scaled, model) = wb_invariance(2, Samples::Floored)?;
    ensure!(inv < 1e-4, "max |wb(X) - wb(kX)| = {inv:e}");
    ensure!(base < 1e-6, "post-gain channel means differ by {base:e}");
    ensure!(model < 1e-12, "scaled post-gain spread deviates from the eps term by {model:e}");
    let (unit, ..) = wb_invariance(2, Samples::Unit)?;
    let (quant, ..) = wb_invariance(2, Samples::Quantized)?;
    println!(
        "    not asserted, samples reaching eps inside the log: U[0,1] {unit:.2e}, 8-bit with zeros {quant:.2e}"
    );
    Ok(format!(
        "samples in [1/255, 1]: max |wb(X) - wb(kX)| = {inv:.1e}; post-gain mean spread {base:.1e} on X; \
         on kX {scaled:.2e}, equal to the eps=1e-6 gain term within {model:.0e}"
    ))
}

fn c3_gradient_suite() -> Outcome {
    let t = Instant::now();
    let terms = [LossTerm::Charbonnier, LossTerm::Edge, LossTerm::Ssim, LossTerm::Hvi];
    let report = grad_check(&terms, 3, 0).map_err(|e| e.to_string())?;
    print!("{}", report.to_table());
    let want = [1e-5, 1e-3, 1e-2, 1e-2];
    for (row, tol) in report.rows.iter().zip(want) {
        ensure!(row.tolerance == tol, "{} tolerance is {:e}, expected {tol:e}", row.term, row.tolerance);
        ensure!(row.passed(), "{} max rel. error {:e} >= {tol:e}", row.term, row.max_rel_error);
    }
    within(t.elapsed(), 60.0, "gradient suite")?;
    let summary: Vec<String> =
        report.rows.iter().map(|r| format!("{} {:.1e}", r.term, r.max_rel_error)).collect();
    Ok(format!("{}; {:.1} s", summary.join(", "), t.elapsed().as_secs_f64()))
}

fn max_abs(img: &Image) -> f64 {
    img.data().iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn c4_loss_floors() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let y = random_image(&mut rng, 24, 24, 3);
    let ex = ConvStackExtractor::new(0);
    let err = |e: aquaprior::Error| e.to_string();

    let (v, g) = charbonnier(&y, &y).map_err(err)?;
    ensure!(v == CHARBONNIER_EPS && max_abs(&g) == 0.0, "charbonnier floor {v:e}, |g| {:e}", max_abs(&g));
    let (v, g) = hvi_loss(&y, &y).map_err(err)?;
    ensure!(v == CHARBONNIER_EPS && max_abs(&g) == 0.0, "hvi floor {v:e}, |g| {:e}", max_abs(&g));
    let (v, g) = ssim_loss(&y, &y).map_err(err)?;
    ensure!(v.abs() < 1e-12 && max_abs(&g) < 1e-9, "ssim floor {v:e}, |g| {:e}", max_abs(&g));
    let (v, g) = edge_loss(&y, &y).map_err(err)?;
    ensure!(v == 0.0 && max_abs(&g) == 0.0, "edge floor {v:e}, |g| {:e}", max_abs(&g));
    let (v, g) = perceptual_loss(&y, &y, &ex).map_err(err)?;
    let g = g.ok_or("conv stack gave no gradient")?;
    ensure!(v == 0.0 && max_abs(&g) == 0.0, "perceptual floor {v:e}, |g| {:e}", max_abs(&g));

    let w = LossWeights::default();
    ensure!(w.as_array() == [1.0, 0.1, 0.1, 0.4, 0.5], "default weights {w}");
    let at_floor = total_loss(&y, &y, &w, Some(&ex)).map_err(err)?;
    ensure!(max_abs(&at_floor.gradient) < 1e-9, "total gradient at y' = y is {:e}", max_abs(&at_floor.gradient));

    let p = y.map(|v| (0.85 * v + 0.1 + 0.03 * (v * 40.0).sin()).clamp(0.0, 1.0));
    let b = total_loss(&y, &p, &w, Some(&ex)).map_err(err)?;
    let manual = 1.0 * charbonnier(&y, &p).map_err(err)?.0
        + 0.1 * perceptual_loss(&y, &p, &ex).map_err(err)?.0
        + 0.1 * ssim_loss(&y, &p).map_err(err)?.0
        + 0.4 * edge_loss(&y, &p).map_err(err)?.0
        + 0.5 * hvi_loss(&y, &p).map_err(err)?.0;
    let diff = (b.total - manual).abs();
    ensure!(diff < 1e-9, "total {} vs manual {manual}", b.total);
    Ok(format!(
        "floors: charbonnier/hvi = 1e-3, ssim/edge/perceptual = 0, zero gradients; \
         total {:.6} vs manual recombination, diff {diff:.1e}",
        b.total
    ))
}

fn scene(h: usize, w: usize) -> Image {
    Image::from_fn(h, w, 3, |y, x, c| {
        let (fy, fx) = (y as f64, x as f64);
        let base = [0.55, 0.45, 0.35][c] + 0.2 * (fx / 7.0 + c as f64).sin() * (fy / 11.0).cos();
        let square = if (16..40).contains(&y) && (20..44).contains(&x) { [0.25, -0.1, 0.05][c] } else { 0.0 };
        (base + square).clamp(0.0, 1.0)
    })
}

/// Per-channel attenuation plus veiling light and small deterministic noise.
fn degrade(img: &Image) -> Image {
    let gain = [0.6, 0.9, 1.15];
    let mut state: u64 = 0x2545_f491_4f6c_dd1d;
    let mut out = img.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let noise = ((state >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * 0.04;
        *v = (*v * gain[i % 3] * 0.8 + 0.1 + noise).clamp(0.0, 1.0);
    }
    out
}

fn c5_fit_demo() -> Outcome {
    let t = Instant::now();
    let reference = scene(64, 64);
    let degraded = degrade(&reference);
    let before = psnr(&reference, &degraded).map_err(|e| e.to_string())?;
    let fit = fit_image(&degraded, &reference, &LossWeights::default(), 500, 0.05, None)
        .map_err(|e| e.to_string())?;
    let after = psnr(&reference, &fit.image).map_err(|e| e.to_string())?;
    ensure!(fit.trace.len() == 501, "trace has {} entries", fit.trace.len());
    for i in 10..500 {
        ensure!(
            fit.trace[i + 1] <= fit.trace[i] + 1e-6,
            "loss rose at iteration {}: {} -> {}",
            i + 1,
            fit.trace[i],
            fit.trace[i + 1]
        );
    }
    ensure!(after > 35.0, "final PSNR {after:.2} dB");
    within(t.elapsed(), 120.0, "fit demo")?;
    Ok(format!(
        "PSNR {before:.2} -> {after:.2} dB, loss {:.4e} -> {:.4e}, trace non-increasing; {:.1} s",
        fit.trace[0],
        fit.trace[500],
        t.elapsed().as_secs_f64()
    ))
}

/// Windowed statistics computed directly over every 11x11 window.
fn ssim_direct(a: &Image, b: &Image) -> f64 {
    let raw: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / (2.0 * 1.5 * 1.5)).exp()).collect();
    let s: f64 = raw.iter().sum();
    let g: Vec<f64> = raw.iter().map(|v| v / s).collect();
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (h, w, ch) = a.shape();
    let mut total = 0.0;
    let mut count = 0usize;
    for c in 0..ch {
        for y0 in 0..=h - 11 {
            for x0 in 0..=w - 11 {
                let (mut ma, mut mb) = (0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let wt = g[i] * g[j];
                        ma += wt * a.get(y0 + i, x0 + j, c);
                        mb += wt * b.get(y0 + i, x0 + j, c);
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let wt = g[i] * g[j];
                        let (da, db) = (a.get(y0 + i, x0 + j, c) - ma, b.get(y0 + i, x0 + j, c) - mb);
                        va += wt * da * da;
                        vb += wt * db * db;
                        cov += wt * da * db;
                    }
                }
                total += (2.0 * ma * mb + c1) * (2.0 * cov + c2)
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
    }
    total / count as f64
}

fn c6_oracles() -> Outcome {
    let table = include_str!("../../core/tests/data/ciede2000_pairs.txt");
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for line in table.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let v: Vec<f64> = line.split_whitespace().map(|t| t.parse().unwrap()).collect();
        let d = ciede2000(LabColor::new(v[0], v[1], v[2]), LabColor::new(v[3], v[4], v[5]));
        let e = (d - v[6]).abs();
        ensure!(e < 1e-4, "pair {}: {d:.6} vs {}", pairs + 1, v[6]);
        worst = worst.max(e);
        pairs += 1;
    }
    ensure!(pairs == 34, "expected 34 reference pairs, read {pairs}");

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_ssim = 0.0f64;
    for _ in 0..20 {
        let h = rng.random_range(11..=24);
        let w = rng.random_range(11..=24);
        let a = random_image(&mut rng, h, w, 3);
        let noise = rng.random_range(0.02..0.3);
        let b = a.map(|v| (v + noise * (v * 97.0).sin()).clamp(0.0, 1.0));
        let got = ssim(&a, &b).map_err(|e| e.to_string())?;
        worst_ssim = worst_ssim.max((got - ssim_direct(&a, &b)).abs());
    }
    ensure!(worst_ssim < 1e-6, "SSIM deviates from the direct windowed form by {worst_ssim:e}");
    Ok(format!(
        "{pairs} CIEDE2000 pairs, max |error| {worst:.1e}; SSIM vs direct windows on 20 pairs, max |diff| {worst_ssim:.1e}"
    ))
}

fn c7_network_contracts() -> Outcome {
    let err = |e: aquaprior::Error| e.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut zero = WeightStore::zeros(&NetConfig::default()).map_err(err)?;
    zero.set("wb.gamma", vec![0.3, 0.6, 0.9]).map_err(err)?;
    let x = random_image(&mut rng, 48, 40, 3);
    let out = model_forward(&x, &zero).map_err(err)?;
    let expected = fused_input(&x, &zero).map_err(err)?.clamp01();
    let identity_err = out.max_abs_diff(&expected);
    ensure!(identity_err == 0.0, "zero-weight model deviates from clamp(fused) by {identity_err:e}");

    let small = NetConfig { base_channels: 4, num_scales: 1, ..Default::default() };
    let alphas = [0.0f32, 0.3, 1.0];
    for trial in 0..1000 {
        let store = init_random(&small, trial as u64).map_err(err)?;
        let (h, w) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let data = (0..4 * h * w).map(|_| rng.random_range(-3.0f32..3.0)).collect();
        let f_in = FeatureMap::new(4, h, w, data).map_err(err)?;
        let alpha = alphas[trial % 3];
        let tr = sgfb_trace(&f_in, &BlockWeights::new(&store, "enc0.sgfb"), Some(alpha)).map_err(err)?;
        for (i, (a, b)) in tr.f1.data().iter().zip(tr.f0.data()).enumerate() {
            ensure!(a.abs() <= b.abs(), "trial {trial} alpha {alpha}: |F1| > |F0| at {i} ({a} vs {b})");
        }
        if alpha == 0.0 {
            ensure!(tr.f1.data() == tr.f0.data(), "trial {trial}: alpha = 0 changed F0");
        }
    }

    let store = init_random(&NetConfig::default(), 7).map_err(err)?;
    for (h, w) in [(256, 256), (100, 77)] {
        let y = model_forward(&random_image(&mut rng, h, w, 3), &store).map_err(err)?;
        ensure!(y.shape() == (h, w, 3), "{h}x{w} input gave {:?}", y.shape());
    }

    let base = NetConfig::default();
    let swapped = NetConfig { block_order: BlockOrder::SgfbThenWeb, ..base.clone() };
    let (pa, pb) = (
        init_random(&base, 0).map_err(err)?.parameter_count(),
        init_random(&swapped, 0).map_err(err)?.parameter_count(),
    );
    ensure!(pa == pb, "order swap changed parameter count {pa} -> {pb}");
    let (ca, cb) = (count_cost(&base, 256, 256).map_err(err)?, count_cost(&swapped, 256, 256).map_err(err)?);
    ensure!(ca.parameter_count == cb.parameter_count, "cost model params differ under order swap");
    Ok(format!(
        "zero weights: exact clamp(fused); SGFB |F1| <= |F0| in 1000 trials; shapes 256x256, 100x77 kept; \
         order swap params {pa} == {pb}"
    ))
}

fn c8_complexity() -> Outcome {
    let err = |e: aquaprior::Error| e.to_string();
    let dense = dense_conv_cost(3, 32, 3, 256, 256);
    ensure!(
        (dense.params, dense.flops) == (896, 113_246_208),
        "dense 3->32 k3 @256: {dense:?}"
    );
    let dw = depthwise_cost(32, 64, 64);
    ensure!((dw.params, dw.flops) == (288, 2_359_296), "depthwise 32 @64: {dw:?}");
    let pw = pointwise_cost(64, 32, 32, 32);
    ensure!((pw.params, pw.flops) == (2_080, 4_194_304), "pointwise 64->32 @32: {pw:?}");

    let cfg = NetConfig::default();
    let (a, b) = (count_cost(&cfg, 256, 256).map_err(err)?, count_cost(&cfg, 512, 512).map_err(err)?);
    ensure!(b.flop_count == 4 * a.flop_count, "FLOPs {} -> {} under doubling", a.flop_count, b.flop_count);
    ensure!(a.parameter_count == b.parameter_count, "params depend on input size");

    let (ref_p, ref_f) = (0.734, 6.251);
    let dp = 100.0 * (a.params_millions() - ref_p) / ref_p;
    let df = 100.0 * (a.gflops() - ref_f) / ref_f;
    let soft = if dp.abs() <= 25.0 && df.abs() <= 25.0 { "inside" } else { "outside" };
    println!(
        "    default config @256x256: {:.3} M params ({dp:+.1}% vs {ref_p} M), {:.3} GFLOPs ({df:+.1}% vs {ref_f} G); \
         {soft} the +-25% calibration target (not asserted)",
        a.params_millions(),
        a.gflops()
    );
    Ok(format!(
        "closed forms exact; FLOPs x4 under H,W doubling; reported {:.3} M / {:.3} G ({dp:+.0}% / {df:+.0}%)",
        a.params_millions(),
        a.gflops()
    ))
}

fn c9_bench() -> Outcome {
    println!("    running `aquaprior bench --runs 1000 --size 256 --threads 1` (several minutes)");
    let out = Command::new(env!("CARGO_BIN_EXE_aquaprior"))
        .args(["bench", "--runs", "1000", "--size", "256", "--threads", "1", "--csv"])
        .output()
        .map_err(|e| format!("spawn failed: {e}"))?;
    ensure!(out.status.success(), "bench exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("no CSV header")?.split(',').collect();
    let row: Vec<&str> = lines.next().ok_or("no CSV row")?.split(',').collect();
    let field = |name: &str| -> Result<f64, String> {
        let i = header.iter().position(|h| *h == name).ok_or(format!("missing column {name}"))?;
        row.get(i).and_then(|v| v.parse().ok()).ok_or(format!("bad value for {name}"))
    };
    let (runs, threads) = (field("runs")?, field("threads")?);
    let (mean, std, min, max) = (field("mean_ms")?, field("std_ms")?, field("min_ms")?, field("max_ms")?);
    ensure!(runs == 1000.0 && threads == 1.0 && field("size")? == 256.0, "unexpected run shape {row:?}");
    ensure!(
        [mean, std, min, max].iter().all(|v| v.is_finite()) && min <= mean && mean <= max,
        "inconsistent stats {row:?}"
    );
    let rel = std / mean;
    ensure!(rel < 0.2, "std/mean = {:.1}%", 100.0 * rel);
    Ok(format!(
        "mean {mean:.2} ms, std {std:.2} ms, min {min:.2} ms, max {max:.2} ms, std/mean {:.2}% (CPU, 1 thread)",
        100.0 * rel
    ))
}

fn c10_formats() -> Outcome {
    let err = |e: aquaprior::Error| e.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(10);

    for cfg in [
        NetConfig::default(),
        NetConfig { base_channels: 8, num_scales: 2, enable_web: false, ..Default::default() },
        NetConfig { block_order: BlockOrder::SgfbThenWeb, enable_sgfb_gradient_branch: false, ..Default::default() },
    ] {
        let store = init_random(&cfg, rng.random()).map_err(err)?;
        let bytes = store.to_bytes();
        let back = WeightStore::from_bytes(&bytes).map_err(err)?;
        ensure!(back.to_bytes() == bytes, "weight bytes changed on round trip");
        ensure!(back.config() == store.config(), "config changed on round trip");
        for (name, t) in store.tensors() {
            let u = back.get(name).map_err(err)?;
            let same = t.shape == u.shape
                && t.data.iter().zip(&u.data).all(|(a, b)| a.to_bits() == b.to_bits());
            ensure!(same, "tensor {name} differs after round trip");
        }
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("w.bin");
        aquaprior::network::save_weights(&store, &path).map_err(err)?;
        let reread = aquaprior::network::load_weights(&path).map_err(err)?;
        ensure!(reread.to_bytes() == bytes, "file round trip changed the weights");

        let mut bad_magic = bytes.clone();
        bad_magic[0] ^= 0xff;
        let mut bad_version = bytes.clone();
        bad_version[4] = 99;
        let mut bad_blob_len = bytes.clone();
        bad_blob_len[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        for (what, b) in [
            ("magic", bad_magic),
            ("version", bad_version),
            ("blob length", bad_blob_len),
            ("truncated", bytes[..bytes.len() - 1].to_vec()),
            ("header only", bytes[..6].to_vec()),
        ] {
            ensure!(WeightStore::from_bytes(&b).is_err(), "corrupted weights ({what}) accepted");
        }
    }

    for c in [1, 3] {
        let (h, w) = (rng.random_range(2..40), rng.random_range(2..40));
        let data = (0..h * w * c).map(|_| rng.random_range(-2.0f32..2.0) as f64).collect();
        let img = Image::new(h, w, c, data).unwrap();
        let bytes = encode_pfm(&img).map_err(err)?;
        let back = decode_image(&bytes).map_err(err)?;
        ensure!(back.shape() == img.shape(), "PFM shape changed");
        ensure!(
            back.data().iter().zip(img.data()).all(|(a, b)| a.to_bits() == b.to_bits()),
            "PFM samples changed"
        );
        ensure!(encode_pfm(&back).map_err(err)? == bytes, "PFM re-encoding differs");

        let magic = if c == 3 { "PF" } else { "Pf" };
        let payload = &bytes[bytes.len() - h * w * c * 4..];
        let with_header = |hdr: &str| [hdr.as_bytes(), payload].concat();
        for (what, b) in [
            ("magic", with_header(&format!("PX\n{w} {h}\n-1.0\n"))),
            ("width", with_header(&format!("{magic}\n{} {h}\n-1.0\n", w + 1))),
            ("negative size", with_header(&format!("{magic}\n-{w} {h}\n-1.0\n"))),
            ("zero scale", with_header(&format!("{magic}\n{w} {h}\n0.0\n"))),
            ("scale text", with_header(&format!("{magic}\n{w} {h}\nabc\n"))),
            ("truncated", bytes[..bytes.len() - 1].to_vec()),
        ] {
            ensure!(decode_image(&b).is_err(), "corrupted PFM ({what}) accepted");
        }
    }
    Ok("weight container and PFM round trips bitwise exact; 5 weight and 12 PFM corruptions rejected".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("wavelet round trip", c1_wavelet_round_trip),
        ("white-balance invariance", c2_white_balance_invariance),
        ("gradient suite", c3_gradient_suite),
        ("loss floors", c4_loss_floors),
        ("fit demo", c5_fit_demo),
        ("CIEDE2000 and SSIM oracles", c6_oracles),
        ("network contracts", c7_network_contracts),
        ("complexity accounting", c8_complexity),
        ("bench methodology", c9_bench),
        ("format fidelity", c10_formats),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  criterion {id:>2} ({name}) [{secs:.1}s]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {id:>2} ({name}) [{secs:.1}s]: {why}");
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}
