//! Wall-clock latency of the forward pass.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{arg_err, Error, Result};
use crate::image::Image;
use crate::network::{model_forward, WeightStore};

pub const DEFAULT_RUNS: usize = 1000;
pub const DEFAULT_SIZE: usize = 256;
pub const WARMUP_RUNS: usize = 10;
/// Seed of the fixed benchmark input.
pub const INPUT_SEED: u64 = 0x5eed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchStats {
    pub runs: usize,
    pub mean_ms: f64,
    /// Population standard deviation.
    pub std_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    /// Side of the square input.
    pub size: usize,
    /// Worker threads; 1 means single-threaded.
    pub threads: usize,
}

impl BenchStats {
    pub fn from_samples(samples_ms: &[f64], size: usize, threads: usize) -> Result<Self> {
        if samples_ms.is_empty() {
            return arg_err("no timing samples");
        }
        let n = samples_ms.len() as f64;
        let mean = samples_ms.iter().sum::<f64>() / n;
        let var = samples_ms.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        Ok(Self {
            runs: samples_ms.len(),
            mean_ms: mean,
            std_ms: var.sqrt(),
            min_ms: samples_ms.iter().copied().fold(f64::INFINITY, f64::min),
            max_ms: samples_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            size,
            threads,
        })
    }

    /// `std / mean`.
    pub fn relative_spread(&self) -> f64 {
        self.std_ms / self.mean_ms
    }

    pub fn csv_header() -> &'static str {
        "runs,size,threads,mean_ms,std_ms,min_ms,max_ms"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6}",
            self.runs, self.size, self.threads, self.mean_ms, self.std_ms, self.min_ms, self.max_ms
        )
    }
}

impl fmt::Display for BenchStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "runs={} size={}x{} threads={} mean={:.3}ms std={:.3}ms min={:.3}ms max={:.3}ms",
            self.runs,
            self.size,
            self.size,
            self.threads,
            self.mean_ms,
            self.std_ms,
            self.min_ms,
            self.max_ms
        )
    }
}

/// Seeded uniform `size x size x 3` input.
pub fn bench_input(size: usize) -> Result<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(INPUT_SEED);
    let data = (0..size * size * 3).map(|_| rng.random_range(0.0..1.0)).collect();
    Image::new(size, size, 3, data)
}

/// Runs [`WARMUP_RUNS`] untimed and `runs` timed forward passes inside a
/// dedicated pool of `threads` workers.
pub fn run_bench(store: &WeightStore, runs: usize, size: usize, threads: usize) -> Result<BenchStats> {
    if runs == 0 {
        return arg_err("runs must be >= 1");
    }
    if threads == 0 {
        return arg_err("threads must be >= 1");
    }
    let input = bench_input(size)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        for _ in 0..WARMUP_RUNS {
            model_forward(&input, store)?;
        }
        let mut samples = Vec::with_capacity(runs);
        for _ in 0..runs {
            let t = Instant::now();
            let out = model_forward(&input, store)?;
            samples.push(t.elapsed().as_secs_f64() * 1e3);
            std::hint::black_box(out);
        }
        BenchStats::from_samples(&samples, size, threads)
    })
}
