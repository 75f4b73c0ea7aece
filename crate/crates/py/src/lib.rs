//! Python bindings. Images cross the boundary as flat lists of floats in
//! row-major `(height, width, channels)` order.

use std::collections::BTreeMap;

use aquaprior::bench::run_bench;
use aquaprior::colorspace::{self, LabColor};
use aquaprior::losses::{self, LossTerm, LossWeights};
use aquaprior::network::{self, BlockOrder, NetConfig, WeightStore};
use aquaprior::{image, metrics, priors};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: aquaprior::Error) -> PyErr {
    match e {
        aquaprior::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "Image", module = "aquaprior", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyImage {
    inner: aquaprior::Image,
}

impl From<aquaprior::Image> for PyImage {
    fn from(inner: aquaprior::Image) -> Self {
        Self { inner }
    }
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> PyResult<Self> {
        aquaprior::Image::new(height, width, channels, data).map(Self::from).map_err(to_py)
    }

    #[staticmethod]
    fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        aquaprior::Image::filled(height, width, channels, value).into()
    }

    /// Reads a PPM (P6) or PFM file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        image::load_image(path).map(Self::from).map_err(to_py)
    }

    /// Writes PPM or PFM, chosen by extension.
    fn save(&self, path: &str) -> PyResult<()> {
        image::save_image(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        self.inner.shape()
    }

    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn get(&self, y: usize, x: usize, c: usize) -> PyResult<f64> {
        let (h, w, ch) = self.inner.shape();
        if y >= h || x >= w || c >= ch {
            return Err(PyValueError::new_err(format!("index ({y}, {x}, {c}) outside {h}x{w}x{ch}")));
        }
        Ok(self.inner.get(y, x, c))
    }

    fn max_abs_diff(&self, other: &PyImage) -> f64 {
        self.inner.max_abs_diff(&other.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let (h, w, c) = self.inner.shape();
        format!("Image({h}x{w}x{c})")
    }
}

#[pyclass(name = "Model", module = "aquaprior", frozen)]
struct PyModel {
    store: WeightStore,
}

fn net_config(
    base_channels: usize,
    num_scales: usize,
    order: &str,
    disable: Vec<String>,
) -> PyResult<NetConfig> {
    let mut cfg = NetConfig {
        base_channels,
        num_scales,
        block_order: order.parse::<BlockOrder>().map_err(to_py)?,
        ..Default::default()
    };
    for d in disable {
        match d.as_str() {
            "wb" => cfg.enable_wb_prior = false,
            "web" => cfg.enable_web = false,
            "sgfb" => cfg.enable_sgfb = false,
            "sgfb-grad" => cfg.enable_sgfb_gradient_branch = false,
            other => return Err(PyValueError::new_err(format!("unknown toggle {other:?}"))),
        }
    }
    Ok(cfg)
}

#[pymethods]
impl PyModel {
    /// Randomly initialized network.
    #[staticmethod]
    #[pyo3(signature = (seed=0, base_channels=32, num_scales=3, order="web-sgfb", disable=Vec::new()))]
    fn random(
        seed: u64,
        base_channels: usize,
        num_scales: usize,
        order: &str,
        disable: Vec<String>,
    ) -> PyResult<Self> {
        let cfg = net_config(base_channels, num_scales, order, disable)?;
        Ok(Self { store: network::init_random(&cfg, seed).map_err(to_py)? })
    }

    /// All-zero weights: the output is the clamped white-balance fused input.
    #[staticmethod]
    #[pyo3(signature = (base_channels=32, num_scales=3))]
    fn zeros(base_channels: usize, num_scales: usize) -> PyResult<Self> {
        let cfg = net_config(base_channels, num_scales, "web-sgfb", Vec::new())?;
        Ok(Self { store: WeightStore::zeros(&cfg).map_err(to_py)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { store: network::load_weights(path).map_err(to_py)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        network::save_weights(&self.store, path).map_err(to_py)
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.store.to_bytes()
    }

    #[staticmethod]
    fn from_bytes(data: Vec<u8>) -> PyResult<Self> {
        Ok(Self { store: WeightStore::from_bytes(&data).map_err(to_py)? })
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.store.parameter_count()
    }

    #[getter]
    fn config(&self) -> BTreeMap<String, String> {
        self.store
            .config()
            .to_blob()
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_owned(), v.to_owned()))
            .collect()
    }

    fn forward(&self, py: Python<'_>, img: &PyImage) -> PyResult<PyImage> {
        let x = img.inner.clone();
        py.detach(|| network::model_forward(&x, &self.store)).map(PyImage::from).map_err(to_py)
    }

    /// `(parameters, flops)` for an `height x width` input.
    fn cost(&self, height: usize, width: usize) -> PyResult<(u64, u64)> {
        let c = network::count_cost(self.store.config(), height, width).map_err(to_py)?;
        Ok((c.parameter_count, c.flop_count))
    }

    #[pyo3(signature = (runs=1000, size=256, threads=1))]
    fn bench(&self, py: Python<'_>, runs: usize, size: usize, threads: usize) -> PyResult<BTreeMap<&'static str, f64>> {
        let s = py.detach(|| run_bench(&self.store, runs, size, threads)).map_err(to_py)?;
        Ok(BTreeMap::from([
            ("runs", s.runs as f64),
            ("mean_ms", s.mean_ms),
            ("std_ms", s.std_ms),
            ("min_ms", s.min_ms),
            ("max_ms", s.max_ms),
        ]))
    }
}

#[pyfunction]
fn white_balance(img: &PyImage) -> PyResult<PyImage> {
    priors::white_balance(&img.inner).map(PyImage::from).map_err(to_py)
}

#[pyfunction]
fn fuse_wb(x: &PyImage, x_wb: &PyImage, gamma: (f64, f64, f64)) -> PyResult<PyImage> {
    let g = priors::WbGamma::new(gamma.0, gamma.1, gamma.2).map_err(to_py)?;
    priors::fuse_wb(&x.inner, &x_wb.inner, g).map(PyImage::from).map_err(to_py)
}

/// `{"ll", "lh", "hl", "hh"}` sub-bands.
#[pyfunction]
fn haar_dwt2(img: &PyImage) -> PyResult<BTreeMap<&'static str, PyImage>> {
    let sb = priors::haar_dwt2(&img.inner).map_err(to_py)?;
    Ok(sb.bands().into_iter().map(|(k, v)| (k, v.clone().into())).collect())
}

/// Inverse of `haar_dwt2` for even-sized sources.
#[pyfunction]
fn haar_idwt2(ll: &PyImage, lh: &PyImage, hl: &PyImage, hh: &PyImage) -> PyResult<PyImage> {
    let (h, w, _) = ll.inner.shape();
    let sb = priors::SubbandSet {
        ll: ll.inner.clone(),
        lh: lh.inner.clone(),
        hl: hl.inner.clone(),
        hh: hh.inner.clone(),
        source_height: 2 * h,
        source_width: 2 * w,
    };
    priors::haar_idwt2(&sb).map(PyImage::from).map_err(to_py)
}

#[pyfunction]
fn sobel_magnitude(img: &PyImage) -> PyResult<PyImage> {
    priors::sobel_magnitude(&img.inner).map(PyImage::from).map_err(to_py)
}

#[pyfunction]
fn srgb_to_lab(rgb: (f64, f64, f64)) -> (f64, f64, f64) {
    let l = colorspace::srgb_to_lab([rgb.0, rgb.1, rgb.2]);
    (l.l, l.a, l.b)
}

#[pyfunction]
fn ciede2000(lab1: (f64, f64, f64), lab2: (f64, f64, f64)) -> f64 {
    colorspace::ciede2000(LabColor::new(lab1.0, lab1.1, lab1.2), LabColor::new(lab2.0, lab2.1, lab2.2))
}

#[pyfunction]
fn psnr(y: &PyImage, y_pred: &PyImage) -> PyResult<f64> {
    metrics::psnr(&y.inner, &y_pred.inner).map_err(to_py)
}

#[pyfunction]
fn ssim(y: &PyImage, y_pred: &PyImage) -> PyResult<f64> {
    metrics::ssim(&y.inner, &y_pred.inner).map_err(to_py)
}

#[pyfunction]
fn uciqe(img: &PyImage) -> PyResult<f64> {
    metrics::uciqe(&img.inner).map_err(to_py)
}

/// `(value, gradient)` of one loss term: `charbonnier`, `perceptual`,
/// `ssim`, `edge` or `hvi`.
#[pyfunction]
fn loss(term: &str, y: &PyImage, y_pred: &PyImage) -> PyResult<(f64, PyImage)> {
    let t: LossTerm = term.parse().map_err(to_py)?;
    let (v, g) = t.eval(&y.inner, &y_pred.inner).map_err(to_py)?;
    Ok((v, g.into()))
}

fn weights(w: Option<(f64, f64, f64, f64, f64)>) -> PyResult<LossWeights> {
    match w {
        Some((a, b, c, d, e)) => LossWeights::from_array([a, b, c, d, e]).map_err(to_py),
        None => Ok(LossWeights::default()),
    }
}

/// Weighted total and per-term values; the perceptual term uses the
/// built-in seeded conv extractor.
#[pyfunction]
#[pyo3(signature = (y, y_pred, weights=None))]
fn total_loss(
    y: &PyImage,
    y_pred: &PyImage,
    weights: Option<(f64, f64, f64, f64, f64)>,
) -> PyResult<(BTreeMap<&'static str, f64>, PyImage)> {
    let w = self::weights(weights)?;
    let ex = losses::ConvStackExtractor::new(0);
    let b = losses::total_loss(&y.inner, &y_pred.inner, &w, Some(&ex)).map_err(to_py)?;
    let [c, p, s, e, h] = b.terms();
    let values = BTreeMap::from([
        ("charbonnier", c),
        ("perceptual", p),
        ("ssim", s),
        ("edge", e),
        ("hvi", h),
        ("total", b.total),
    ]);
    Ok((values, b.gradient.into()))
}

/// Rows of `(term, max_rel_error, tolerance, passed)`.
#[pyfunction]
#[pyo3(signature = (terms=None, trials=3, seed=0))]
fn grad_check(
    py: Python<'_>,
    terms: Option<Vec<String>>,
    trials: usize,
    seed: u64,
) -> PyResult<Vec<(String, f64, f64, bool)>> {
    let terms: Vec<LossTerm> = match terms {
        Some(t) => t.iter().map(|s| s.parse()).collect::<aquaprior::Result<_>>().map_err(to_py)?,
        None => LossTerm::ALL.to_vec(),
    };
    let report = py.detach(|| losses::grad_check(&terms, trials, seed)).map_err(to_py)?;
    Ok(report
        .rows
        .iter()
        .map(|r| (r.term.name().to_owned(), r.max_rel_error, r.tolerance, r.passed()))
        .collect())
}

/// Pixel-space descent towards `reference`; returns the image and loss trace.
#[pyfunction]
#[pyo3(signature = (init, reference, iters=500, step=0.05, weights=None))]
fn fit_image(
    py: Python<'_>,
    init: &PyImage,
    reference: &PyImage,
    iters: usize,
    step: f64,
    weights: Option<(f64, f64, f64, f64, f64)>,
) -> PyResult<(PyImage, Vec<f64>)> {
    let w = self::weights(weights)?;
    let (x, r) = (init.inner.clone(), reference.inner.clone());
    let fit = py.detach(|| losses::fit_image(&x, &r, &w, iters, step, None)).map_err(to_py)?;
    Ok((fit.image.into(), fit.trace))
}

#[pymodule]
#[pyo3(name = "aquaprior")]
fn aquaprior_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(white_balance, m)?)?;
    m.add_function(wrap_pyfunction!(fuse_wb, m)?)?;
    m.add_function(wrap_pyfunction!(haar_dwt2, m)?)?;
    m.add_function(wrap_pyfunction!(haar_idwt2, m)?)?;
    m.add_function(wrap_pyfunction!(sobel_magnitude, m)?)?;
    m.add_function(wrap_pyfunction!(srgb_to_lab, m)?)?;
    m.add_function(wrap_pyfunction!(ciede2000, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(uciqe, m)?)?;
    m.add_function(wrap_pyfunction!(loss, m)?)?;
    m.add_function(wrap_pyfunction!(total_loss, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    m.add_function(wrap_pyfunction!(fit_image, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
