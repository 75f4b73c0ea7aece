use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use aquaprior::bench::{run_bench, BenchStats, DEFAULT_RUNS, DEFAULT_SIZE};
use aquaprior::colorspace::{ciede2000, write_xyy_csv, LabColor};
use aquaprior::image::{load_image, save_image};
use aquaprior::losses::{fit_image, grad_check, LossTerm, LossWeights};
use aquaprior::metrics::{evaluate, psnr, PatchSpec};
use aquaprior::network::{
    count_cost, init_random, load_weights, model_forward, save_weights, BlockOrder, CostReport,
    NetConfig, WeightStore,
};
use aquaprior::priors::{haar_dwt2, white_balance};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "aquaprior", version, about = "Prior-guided underwater image enhancement")]
struct Cli {
    /// Worker threads (1 = single-threaded).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Emit tabular output as CSV.
    #[arg(long, global = true)]
    csv: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Toggle {
    Wb,
    Web,
    Sgfb,
    SgfbGrad,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Weight file; overrides the architecture flags.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Seed for random initialization when no weight file is given.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_order)]
    order: Option<BlockOrder>,
    /// Ablation switches.
    #[arg(long, value_enum, value_delimiter = ',')]
    disable: Vec<Toggle>,
    #[arg(long)]
    base_channels: Option<usize>,
    #[arg(long)]
    num_scales: Option<usize>,
}

fn parse_order(s: &str) -> std::result::Result<BlockOrder, String> {
    s.parse().map_err(|e: aquaprior::Error| e.to_string())
}

impl ModelArgs {
    fn config(&self) -> NetConfig {
        let mut cfg = NetConfig::default();
        if let Some(o) = self.order {
            cfg.block_order = o;
        }
        if let Some(c) = self.base_channels {
            cfg.base_channels = c;
        }
        if let Some(s) = self.num_scales {
            cfg.num_scales = s;
        }
        for t in &self.disable {
            match t {
                Toggle::Wb => cfg.enable_wb_prior = false,
                Toggle::Web => cfg.enable_web = false,
                Toggle::Sgfb => cfg.enable_sgfb = false,
                Toggle::SgfbGrad => cfg.enable_sgfb_gradient_branch = false,
            }
        }
        cfg
    }

    fn has_overrides(&self) -> bool {
        self.order.is_some()
            || !self.disable.is_empty()
            || self.base_channels.is_some()
            || self.num_scales.is_some()
    }

    /// Loads the weight file, or initializes from the seed (`default_seed`
    /// when neither is given).
    fn store(&self, default_seed: Option<u64>) -> Result<WeightStore> {
        match (&self.weights, self.seed.or(default_seed)) {
            (Some(path), _) => {
                if self.has_overrides() {
                    bail!("architecture flags cannot be combined with --weights");
                }
                load_weights(path).with_context(|| format!("loading {}", path.display()))
            }
            (None, Some(seed)) => Ok(init_random(&self.config(), seed)?),
            (None, None) => bail!("either --weights or --seed is required"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the enhancement network on one image.
    Enhance {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Time repeated forward passes on a fixed random input.
    Bench {
        #[arg(long, default_value_t = DEFAULT_RUNS)]
        runs: usize,
        #[arg(long, default_value_t = DEFAULT_SIZE)]
        size: usize,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Parameter and FLOP totals for a configuration.
    Cost {
        #[arg(long, default_value_t = DEFAULT_SIZE)]
        size: usize,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Write a randomly initialized weight file.
    Init {
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Gray-world white balance.
    Wb {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// One-level Haar analysis; writes `<output>.{ll,lh,hl,hh}.pfm`.
    Dwt {
        #[arg(short, long)]
        input: PathBuf,
        /// Output path stem.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// PSNR and SSIM against a reference, UCIQE, and chart CIEDE2000.
    Metrics {
        #[arg(short = 'i', long = "test", visible_alias = "input")]
        test: PathBuf,
        #[arg(long = "ref")]
        reference: Option<PathBuf>,
        #[arg(long)]
        patches: Option<PathBuf>,
    },
    /// CIEDE2000 between two Lab colours: `L1 a1 b1 L2 a2 b2`.
    Ciede {
        #[arg(allow_negative_numbers = true, num_args = 6, required = true, value_name = "LAB")]
        values: Vec<f64>,
    },
    /// Compare analytic loss gradients with finite differences.
    Gradcheck {
        /// Comma-separated terms, or `all`.
        #[arg(long, default_value = "all")]
        loss: String,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Optimize pixel values of an image towards a reference.
    Fit {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Loss weights `c,vgg,ssim,edge,hvi`.
        #[arg(long, default_value = "1,0.1,0.1,0.4,0.5")]
        lw: LossWeights,
        /// Optional CSV file for the loss trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// CIE xyY chromaticities as CSV.
    Xyy {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
}

fn print_cost(cost: &CostReport, csv: bool) {
    if csv {
        println!("params,flops,height,width");
        println!(
            "{},{},{},{}",
            cost.parameter_count, cost.flop_count, cost.input_height, cost.input_width
        );
    } else {
        println!(
            "params: {} ({:.3} M)  flops@{}x{}: {} ({:.3} G, 2 x MACs + elementwise)",
            cost.parameter_count,
            cost.params_millions(),
            cost.input_height,
            cost.input_width,
            cost.flop_count,
            cost.gflops()
        );
    }
}

fn describe_config(cfg: &NetConfig) -> String {
    format!(
        "C={} scales={} order={} wb={} web={} sgfb={} sgfb-grad={}",
        cfg.base_channels,
        cfg.num_scales,
        cfg.block_order,
        cfg.enable_wb_prior,
        cfg.enable_web,
        cfg.enable_sgfb,
        cfg.enable_sgfb_gradient_branch
    )
}

fn parse_terms(s: &str) -> Result<Vec<LossTerm>> {
    if s == "all" {
        return Ok(LossTerm::ALL.to_vec());
    }
    Ok(s.split(',').map(|t| t.trim().parse()).collect::<aquaprior::Result<_>>()?)
}

fn run(cli: Cli) -> Result<bool> {
    let csv = cli.csv;
    match cli.command {
        Command::Enhance { input, output, model } => {
            let store = model.store(None)?;
            let img = load_image(&input).with_context(|| format!("reading {}", input.display()))?;
            let out = model_forward(&img, &store)?;
            save_image(&out, &output).with_context(|| format!("writing {}", output.display()))?;
            eprintln!("config: {}", describe_config(store.config()));
            print_cost(&count_cost(store.config(), img.height(), img.width())?, csv);
        }
        Command::Bench { runs, size, model } => {
            let store = model.store(Some(0))?;
            let stats = run_bench(&store, runs, size, cli.threads)?;
            let cost = count_cost(store.config(), size, size)?;
            if csv {
                println!("{},params,flops", BenchStats::csv_header());
                println!("{},{},{}", stats.to_csv_row(), cost.parameter_count, cost.flop_count);
            } else {
                println!("config: {}", describe_config(store.config()));
                println!("{stats}");
                println!("std/mean: {:.2}%", 100.0 * stats.relative_spread());
                print_cost(&cost, false);
            }
        }
        Command::Cost { size, model } => {
            let cfg = match &model.weights {
                Some(_) => model.store(None)?.config().clone(),
                None => model.config(),
            };
            let cost = count_cost(&cfg, size, size)?;
            print_cost(&cost, csv);
            if !csv {
                for (name, c) in &cost.stages {
                    println!("  {name:<6} params {:>9}  flops {:>12}", c.params, c.flops);
                }
            }
        }
        Command::Init { output, model } => {
            let store = model.store(Some(0))?;
            save_weights(&store, &output)?;
            println!("wrote {} ({} parameters)", output.display(), store.parameter_count());
        }
        Command::Wb { input, output } => {
            let img = load_image(&input)?;
            save_image(&white_balance(&img)?, &output)?;
        }
        Command::Dwt { input, output } => {
            let img = load_image(&input)?;
            for path in haar_dwt2(&img)?.save(&output)? {
                println!("{}", path.display());
            }
        }
        Command::Metrics { test, reference, patches } => {
            let img = load_image(&test)?;
            let reference = reference.as_deref().map(load_image).transpose()?;
            let patches = patches.as_deref().map(PatchSpec::load).transpose()?;
            let r = evaluate(&img, reference.as_ref(), patches.as_ref())?;
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
            if csv {
                println!("psnr,ssim,uciqe,ciede2000");
                println!("{},{},{:.6},{}", fmt(r.psnr), fmt(r.ssim), r.uciqe, fmt(r.ciede2000_mean));
            } else {
                if let Some(p) = r.psnr {
                    println!("PSNR: {p:.4} dB");
                }
                if let Some(s) = r.ssim {
                    println!("SSIM: {s:.6}");
                }
                println!("UCIQE: {:.6}", r.uciqe);
                if let Some(d) = r.ciede2000_mean {
                    println!("CIEDE2000 mean: {d:.4}");
                }
            }
        }
        Command::Ciede { values: v } => {
            let d = ciede2000(LabColor::new(v[0], v[1], v[2]), LabColor::new(v[3], v[4], v[5]));
            println!("{d:.4}");
        }
        Command::Gradcheck { loss, trials, seed } => {
            let report = grad_check(&parse_terms(&loss)?, trials, seed)?;
            print!("{}", if csv { report.to_csv() } else { report.to_table() });
            return Ok(report.passed());
        }
        Command::Fit { input, reference, output, iters, step, lw, trace } => {
            let init = load_image(&input)?;
            let target = load_image(&reference)?;
            let result = fit_image(&init, &target, &lw, iters, step, None)?;
            save_image(&result.image, &output)?;
            if let Some(path) = trace {
                let mut w = BufWriter::new(File::create(&path)?);
                writeln!(w, "iteration,loss")?;
                for (i, v) in result.trace.iter().enumerate() {
                    writeln!(w, "{i},{v:e}")?;
                }
            }
            let first = result.trace.first().copied().unwrap_or(f64::NAN);
            let last = result.trace.last().copied().unwrap_or(f64::NAN);
            let (p0, p1) = (psnr(&target, &init)?, psnr(&target, &result.image)?);
            if csv {
                println!("iters,loss_start,loss_end,psnr_start,psnr_end");
                println!("{iters},{first:e},{last:e},{p0:.4},{p1:.4}");
            } else {
                println!("loss {first:.6e} -> {last:.6e}  PSNR {p0:.3} -> {p1:.3} dB");
            }
        }
        Command::Xyy { input, output, stride } => {
            let img = load_image(&input)?;
            let rows = write_xyy_csv(&img, stride, BufWriter::new(File::create(&output)?))?;
            println!("{rows} rows");
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
