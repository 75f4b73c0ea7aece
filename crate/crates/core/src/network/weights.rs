//! Named-tensor weight container, its tensor layout for a given
//! [`NetConfig`], seeded initialization and the binary `WWEW` format.
//!
//! File layout (little-endian):
//!
//! ```text
//! "WWEW" | u32 version = 1 | u32 blob_len | blob (UTF-8 key=value lines)
//! u32 tensor_count
//! tensor_count x { u16 name_len | name | u8 ndim | ndim x u32 dims | f32 payload }
//! ```
//!
//! Trailing bytes after the last tensor are rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::NetConfig;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"WWEW";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!(
                "tensor shape {shape:?} does not hold {} values",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn filled(shape: Vec<usize>, v: f32) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![v; n] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// How a tensor is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TensorRole {
    /// Convolution kernel, uniform in `+-sqrt(6 / fan_in)`.
    Kernel { fan_in: usize },
    Bias,
    NormScale,
    NormShift,
    /// White-balance fusion weights, in `[0, 1]`.
    Gamma,
    /// Gate blend weight, in `[0, 1]`.
    Alpha,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub role: TensorRole,
}

impl TensorSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

struct SpecBuilder(Vec<TensorSpec>);

impl SpecBuilder {
    fn push(&mut self, name: String, shape: Vec<usize>, role: TensorRole) {
        self.0.push(TensorSpec { name, shape, role });
    }

    fn conv(&mut self, p: &str, cout: usize, cin: usize, k: usize) {
        self.push(
            format!("{p}.weight"),
            vec![cout, cin, k, k],
            TensorRole::Kernel { fan_in: cin * k * k },
        );
        self.push(format!("{p}.bias"), vec![cout], TensorRole::Bias);
    }

    fn pointwise(&mut self, p: &str, cout: usize, cin: usize) {
        self.push(format!("{p}.weight"), vec![cout, cin], TensorRole::Kernel { fan_in: cin });
        self.push(format!("{p}.bias"), vec![cout], TensorRole::Bias);
    }

    fn dws(&mut self, p: &str, c: usize) {
        self.push(format!("{p}.dw"), vec![c, 3, 3], TensorRole::Kernel { fan_in: 9 });
        self.push(format!("{p}.pw"), vec![c, c], TensorRole::Kernel { fan_in: c });
        self.push(format!("{p}.bias"), vec![c], TensorRole::Bias);
    }

    fn hinb(&mut self, p: &str, c: usize) {
        self.dws(&format!("{p}.conv1"), c);
        self.push(format!("{p}.norm.scale"), vec![c / 2], TensorRole::NormScale);
        self.push(format!("{p}.norm.shift"), vec![c / 2], TensorRole::NormShift);
        self.dws(&format!("{p}.conv2"), c);
    }

    fn wgsrb(&mut self, p: &str, c: usize, cfg: &NetConfig) {
        if cfg.enable_web {
            self.pointwise(&format!("{p}.web.compress"), c, 4 * c);
            self.hinb(&format!("{p}.web.refine"), c);
        }
        if cfg.enable_sgfb {
            self.hinb(&format!("{p}.sgfb.pre"), c);
            if cfg.enable_sgfb_gradient_branch {
                self.dws(&format!("{p}.sgfb.gate"), c);
                self.push(format!("{p}.sgfb.alpha"), vec![1], TensorRole::Alpha);
            }
            self.hinb(&format!("{p}.sgfb.post"), c);
        }
    }
}

/// Every learnable tensor required by `cfg`, in canonical order.
pub fn tensor_specs(cfg: &NetConfig) -> Vec<TensorSpec> {
    let mut b = SpecBuilder(Vec::new());
    if cfg.enable_wb_prior {
        b.push("wb.gamma".into(), vec![3], TensorRole::Gamma);
    }
    let c0 = cfg.ch(0);
    b.conv("stem", c0, 3, 3);
    for s in 0..cfg.num_scales {
        b.wgsrb(&format!("enc{s}"), cfg.ch(s), cfg);
        b.conv(&format!("down{s}"), cfg.ch(s + 1), cfg.ch(s), 2);
    }
    b.wgsrb("mid", cfg.ch(cfg.num_scales), cfg);
    for s in (0..cfg.num_scales).rev() {
        b.pointwise(&format!("up{s}"), cfg.ch(s), cfg.ch(s + 1));
        b.pointwise(&format!("fuse{s}"), cfg.ch(s), 2 * cfg.ch(s));
        b.wgsrb(&format!("dec{s}"), cfg.ch(s), cfg);
    }
    b.conv("head", 3, c0, 3);
    b.0
}

/// All learnable parameters of one network instance plus its configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightStore {
    config: NetConfig,
    tensors: BTreeMap<String, Tensor>,
}

impl WeightStore {
    /// Builds a store and checks it against `config`.
    pub fn from_tensors(config: NetConfig, tensors: BTreeMap<String, Tensor>) -> Result<Self> {
        let store = Self { config, tensors };
        store.validate()?;
        Ok(store)
    }

    /// Every tensor set to zero, including gamma and alpha.
    pub fn zeros(config: &NetConfig) -> Result<Self> {
        config.validate()?;
        let tensors = tensor_specs(config)
            .into_iter()
            .map(|s| (s.name, Tensor::filled(s.shape, 0.0)))
            .collect();
        Self::from_tensors(config.clone(), tensors)
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor> {
        &self.tensors
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Weights(format!("missing tensor {name:?}")))
    }

    pub(crate) fn data(&self, name: &str) -> Result<&[f32]> {
        Ok(&self.get(name)?.data)
    }

    /// Replaces the values of an existing tensor and re-validates ranges.
    pub fn set(&mut self, name: &str, data: Vec<f32>) -> Result<()> {
        let t = self
            .tensors
            .get_mut(name)
            .ok_or_else(|| Error::Weights(format!("missing tensor {name:?}")))?;
        if t.data.len() != data.len() {
            return Err(Error::Weights(format!(
                "{name}: {} values, expected {}",
                data.len(),
                t.data.len()
            )));
        }
        t.data = data;
        self.validate()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Checks that the tensor set matches the configuration exactly and that
    /// range-constrained parameters lie in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let specs = tensor_specs(&self.config);
        if specs.len() != self.tensors.len() {
            let expected: Vec<_> = specs.iter().map(|s| s.name.as_str()).collect();
            let extra: Vec<_> = self
                .tensors
                .keys()
                .filter(|k| !expected.contains(&k.as_str()))
                .collect();
            return Err(Error::Weights(format!(
                "expected {} tensors, found {} (unexpected: {extra:?})",
                specs.len(),
                self.tensors.len()
            )));
        }
        for spec in &specs {
            let t = self.get(&spec.name)?;
            if t.shape != spec.shape {
                return Err(Error::Weights(format!(
                    "{}: shape {:?}, expected {:?}",
                    spec.name, t.shape, spec.shape
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Weights(format!("{}: non-finite value", spec.name)));
            }
            if matches!(spec.role, TensorRole::Gamma | TensorRole::Alpha)
                && t.data.iter().any(|v| !(0.0..=1.0).contains(v))
            {
                return Err(Error::Weights(format!("{}: value outside [0, 1]", spec.name)));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let blob = self.config.to_blob();
        let mut out = Vec::with_capacity(16 + blob.len() + 4 * self.parameter_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
        out.extend_from_slice(blob.as_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.shape.len() as u8);
            for &d in &t.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, not a WWEW weight file".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported weight format version {version}"
            )));
        }
        let blob_len = r.u32()? as usize;
        let blob = std::str::from_utf8(r.take(blob_len)?)
            .map_err(|_| Error::Format("config blob is not UTF-8".into()))?;
        let config = NetConfig::from_blob(blob)?;
        let count = r.u32()? as usize;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
                .to_owned();
            let ndim = r.u8()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Format(format!("{name}: shape overflows")))?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| {
                Error::Format(format!("{name}: payload size overflows"))
            })?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if tensors.insert(name.clone(), Tensor { shape, data }).is_some() {
                return Err(Error::Format(format!("duplicate tensor {name:?}")));
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after {count} tensors",
                bytes.len() - r.pos
            )));
        }
        Self::from_tensors(config, tensors)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated payload at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Seeded initialization: kernels uniform in `+-sqrt(6 / fan_in)`, biases and
/// norm shifts 0, norm scales 1, gamma and alpha 0.5.
pub fn init_random(config: &NetConfig, seed: u64) -> Result<WeightStore> {
    let mut config = config.clone();
    config.seed = seed;
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = BTreeMap::new();
    for spec in tensor_specs(&config) {
        let n = spec.numel();
        let data = match spec.role {
            TensorRole::Kernel { fan_in } => {
                let bound = (6.0 / fan_in as f64).sqrt() as f32;
                (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
            }
            TensorRole::Bias | TensorRole::NormShift => vec![0.0; n],
            TensorRole::NormScale => vec![1.0; n],
            TensorRole::Gamma | TensorRole::Alpha => vec![0.5; n],
        };
        tensors.insert(spec.name, Tensor { shape: spec.shape, data });
    }
    WeightStore::from_tensors(config, tensors)
}

pub fn save_weights(store: &WeightStore, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, store.to_bytes())?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightStore> {
    WeightStore::from_bytes(&fs::read(path)?)
}
