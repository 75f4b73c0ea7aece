use std::path::Path;
use std::process::{Command, Output};

use aquaprior::image::{load_image, save_image};
use aquaprior::Image;

fn aquaprior(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aquaprior")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_scene(path: &Path, h: usize, w: usize) {
    let img = Image::from_fn(h, w, 3, |y, x, c| {
        (0.2 + 0.5 * ((x * (c + 1) + 2 * y) % 17) as f64 / 17.0) * [0.6, 0.9, 1.1][c]
    });
    save_image(&img, path).unwrap();
}

#[test]
fn ciede_reference_pair() {
    let o = aquaprior(&["ciede", "50", "2.6772", "-79.7751", "50", "0", "-82.7485"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "2.0425");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(aquaprior(&["ciede", "1", "2", "3"]).status.code(), Some(2));
    assert_eq!(aquaprior(&["enhance", "-i", "a.ppm"]).status.code(), Some(2));
    assert_eq!(aquaprior(&["bench", "--disable", "nope"]).status.code(), Some(2));
}

#[test]
fn enhance_with_seed_and_weights() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.ppm");
    write_scene(&input, 21, 30);
    let out = dir.path().join("out.ppm");
    let args = ["enhance", "-i", input.to_str().unwrap(), "-o", out.to_str().unwrap()];

    let missing = aquaprior(&args);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--weights or --seed"));

    let o = aquaprior(&[&args[..], &["--seed", "3", "--base-channels", "8", "--num-scales", "2"]].concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("params: "));
    let first = load_image(&out).unwrap();
    assert_eq!(first.shape(), (21, 30, 3));

    let weights = dir.path().join("w.bin");
    let w = weights.to_str().unwrap();
    let init = aquaprior(&["init", "-o", w, "--seed", "3", "--base-channels", "8", "--num-scales", "2"]);
    assert!(init.status.success());
    let o = aquaprior(&[&args[..], &["--weights", w]].concat());
    assert!(o.status.success());
    assert_eq!(load_image(&out).unwrap(), first);

    let clash = aquaprior(&[&args[..], &["--weights", w, "--order", "sgfb-web"]].concat());
    assert_eq!(clash.status.code(), Some(1));
}

#[test]
fn bench_small_csv() {
    let o = aquaprior(&[
        "bench", "--runs", "3", "--size", "32", "--base-channels", "4", "--num-scales", "1", "--csv",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "runs,size,threads,mean_ms,std_ms,min_ms,max_ms,params,flops");
    assert!(lines.next().unwrap().starts_with("3,32,1,"));
}

#[test]
fn cost_reports_ablation_and_order() {
    let full = stdout(&aquaprior(&["cost", "--csv"]));
    let swapped = stdout(&aquaprior(&["cost", "--csv", "--order", "sgfb-web"]));
    let ablated = stdout(&aquaprior(&["cost", "--csv", "--disable", "web,sgfb-grad"]));
    let params = |s: &str| s.lines().nth(1).unwrap().split(',').next().unwrap().parse::<u64>().unwrap();
    assert_eq!(params(&full), params(&swapped));
    assert!(params(&ablated) < params(&full));
}

#[test]
fn priors_metrics_and_xyy() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.ppm");
    write_scene(&input, 16, 18);
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    let i = input.to_str().unwrap();

    assert!(aquaprior(&["wb", "-i", i, "-o", &p("wb.pfm")]).status.success());
    let wb = load_image(p("wb.pfm")).unwrap();
    assert!(wb.data().iter().all(|v| (0.0..=1.0).contains(v)));

    let o = aquaprior(&["dwt", "-i", i, "-o", &p("bands")]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 4);
    assert_eq!(load_image(p("bands.ll.pfm")).unwrap().shape(), (8, 9, 3));

    let o = aquaprior(&["metrics", "--test", i, "--ref", i, "--csv"]);
    assert!(o.status.success());
    let row = stdout(&o).lines().nth(1).unwrap().to_owned();
    assert!(row.starts_with("100.000000,1.000000,"), "{row}");

    std::fs::write(p("patches.csv"), "x0,y0,x1,y1,R,G,B\n0,0,4,4,0.5,0.5,0.5\n").unwrap();
    let o = aquaprior(&["metrics", "-i", i, "--patches", &p("patches.csv")]);
    assert!(stdout(&o).contains("CIEDE2000 mean:"));
    std::fs::write(p("bad.csv"), "x0,y0,x1,y1,R,G,B\n0,0,40,4,0.5,0.5,0.5\n").unwrap();
    assert_eq!(aquaprior(&["metrics", "-i", i, "--patches", &p("bad.csv")]).status.code(), Some(1));

    let o = aquaprior(&["xyy", "-i", i, "-o", &p("xy.csv"), "--stride", "4"]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(p("xy.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 5);
}

#[test]
fn gradcheck_exit_status() {
    let o = aquaprior(&["gradcheck", "--loss", "charbonnier,edge", "--trials", "1", "--csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("loss,trials,coordinates,max_rel_error,tolerance,passed\n"));
    assert_eq!(text.lines().filter(|l| l.ends_with(",true")).count(), 2);
    assert_eq!(aquaprior(&["gradcheck", "--loss", "nope"]).status.code(), Some(1));
}

#[test]
fn fit_improves_psnr() {
    let dir = tempfile::tempdir().unwrap();
    let (reference, degraded) = (dir.path().join("ref.pfm"), dir.path().join("deg.pfm"));
    let img = Image::from_fn(24, 24, 3, |y, x, c| 0.3 + 0.4 * (((x + y + c) % 7) as f64 / 7.0));
    save_image(&img, &reference).unwrap();
    save_image(&img.map(|v| 0.7 * v + 0.1), &degraded).unwrap();
    let out = dir.path().join("fit.pfm");
    let trace = dir.path().join("trace.csv");
    let o = aquaprior(&[
        "fit",
        "-i", degraded.to_str().unwrap(),
        "--ref", reference.to_str().unwrap(),
        "-o", out.to_str().unwrap(),
        "--iters", "40",
        "--trace", trace.to_str().unwrap(),
        "--csv",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let row: Vec<f64> = stdout(&o).lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(row[4] > row[3] + 5.0, "{row:?}");
    assert_eq!(std::fs::read_to_string(trace).unwrap().lines().count(), 42);
}
