//! Binary checkpoint format shared by both architectures.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"MROICKPT"  u32 version  u8 arch tag
//! u32 n  n bytes of TOML metadata (model config, spectral mode, feature order)
//! u32 tensor count, then per tensor:
//!   u16 name length, name bytes, u8 ndim, ndim × u64 dims, prod(dims) × f64
//! ```
//!
//! Complex spectral weights are stored as the separate `spectral.re` and
//! `spectral.im` tensors. The fitted scaler travels as `scaler.min` and
//! `scaler.max` so prediction needs nothing but the checkpoint file.

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::lstm::{LstmConfig, LstmNet};
use super::mineroi::{MineRoiNet, ModelConfig};
use super::params::Params;
use super::spectral::SpectralMode;
use super::{Classifier, ModelKind, NUM_CLASSES};
use crate::dataset::{FeatureOrder, Scaler};
use crate::error::{Error, Result};
use crate::par::Exec;

pub const MAGIC: &[u8; 8] = b"MROICKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Architecture plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    MineRoi(ModelConfig),
    Lstm(LstmConfig),
}

impl Architecture {
    pub fn kind(&self) -> ModelKind {
        match self {
            Architecture::MineRoi(_) => ModelKind::MineRoi,
            Architecture::Lstm(_) => ModelKind::Lstm,
        }
    }

    pub fn spectral_mode(&self) -> SpectralMode {
        match self {
            Architecture::MineRoi(c) => c.spectral_mode,
            Architecture::Lstm(c) => c.spectral_mode,
        }
    }

    pub fn window(&self) -> usize {
        match self {
            Architecture::MineRoi(c) => c.window,
            Architecture::Lstm(c) => c.window,
        }
    }

    pub fn features(&self) -> usize {
        match self {
            Architecture::MineRoi(c) => c.features,
            Architecture::Lstm(c) => c.features,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Architecture::MineRoi(c) => c.validate(),
            Architecture::Lstm(c) => c.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    spectral_mode: SpectralMode,
    features: FeatureOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    model: Architecture,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arch: Architecture,
    pub features: FeatureOrder,
    pub scaler: Option<Scaler>,
    pub params: Params,
    /// Selected epoch (1-based) when produced by training.
    pub epoch: Option<usize>,
    pub seed: Option<u64>,
}

impl Checkpoint {
    pub fn new(arch: Architecture, params: Params) -> Result<Self> {
        let expected = match &arch {
            Architecture::MineRoi(c) => c.parameter_count(),
            Architecture::Lstm(c) => c.parameter_count(),
        };
        if params.data().len() != expected {
            return Err(Error::Checkpoint(format!(
                "{} parameters do not fit a {} with {expected}",
                params.data().len(),
                arch.kind()
            )));
        }
        Ok(Self {
            arch,
            features: FeatureOrder::default(),
            scaler: None,
            params,
            epoch: None,
            seed: None,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = Metadata {
            spectral_mode: self.arch.spectral_mode(),
            features: self.features.clone(),
            epoch: self.epoch,
            seed: self.seed,
            model: self.arch.clone(),
        };
        let text = toml::to_string(&meta).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::with_capacity(64 + text.len() + 8 * self.params.data().len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.arch.kind().tag());
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());

        let mut tensors: Vec<(&str, Vec<usize>, &[f64])> = self
            .params
            .named()
            .map(|(e, v)| (e.name.as_str(), e.shape.clone(), v))
            .collect();
        if let Some(s) = &self.scaler {
            tensors.push(("scaler.min", vec![s.width()], s.min()));
            tensors.push(("scaler.max", vec![s.width()], s.max()));
        }
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, shape, values) in tensors {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(shape.len() as u8);
            for d in shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let tag = r.u8()?;
        let kind = ModelKind::from_tag(tag).ok_or_else(|| Error::Checkpoint(format!("unknown architecture tag {tag}")))?;
        let n = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(n)?).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let meta: Metadata = toml::from_str(text).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        if meta.model.kind() != kind {
            return Err(Error::Checkpoint(format!("header tag says {kind}, metadata says {}", meta.model.kind())));
        }
        if meta.spectral_mode != meta.model.spectral_mode() {
            return Err(Error::Checkpoint("spectral_mode disagrees with the model config".into()));
        }
        meta.model.validate()?;
        let layout = match &meta.model {
            Architecture::MineRoi(c) => MineRoiNet::new(c.clone())?.layout().clone(),
            Architecture::Lstm(c) => LstmNet::new(c.clone())?.layout().clone(),
        };

        let count = r.u32()? as usize;
        let mut data = Vec::with_capacity(layout.size());
        let mut entries = layout.entries().iter();
        let (mut smin, mut smax) = (None, None);
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|e| Error::Checkpoint(e.to_string()))?
                .to_string();
            let ndim = r.u8()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u64()? as usize);
            }
            let size: usize = shape.iter().product();
            let mut values = Vec::with_capacity(size);
            for _ in 0..size {
                values.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
            }
            match name.as_str() {
                "scaler.min" => smin = Some(values),
                "scaler.max" => smax = Some(values),
                _ => {
                    let e = entries
                        .next()
                        .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor {name}")))?;
                    if e.name != name || e.shape != shape {
                        return Err(Error::Checkpoint(format!(
                            "tensor {name} {shape:?} where {} {:?} was expected",
                            e.name, e.shape
                        )));
                    }
                    data.extend(values);
                }
            }
        }
        if let Some(e) = entries.next() {
            return Err(Error::Checkpoint(format!("missing tensor {}", e.name)));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let scaler = match (smin, smax) {
            (Some(a), Some(b)) => Some(Scaler::from_bounds(a, b)?),
            (None, None) => None,
            _ => return Err(Error::Checkpoint("scaler bounds are incomplete".into())),
        };
        let params = Params::from_data(layout, data).expect("sizes checked per tensor");
        Ok(Self {
            arch: meta.model,
            features: meta.features,
            scaler,
            params,
            epoch: meta.epoch,
            seed: meta.seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Class probabilities for raw (unscaled) `L×F` windows, scaled with the
    /// bundled scaler when present.
    pub fn predict(&self, windows: &[Array2<f64>], exec: Exec) -> Result<Vec<[f64; NUM_CLASSES]>> {
        let scaled: Vec<Array2<f64>> = match &self.scaler {
            Some(s) => windows.iter().map(|w| s.transform(w.view())).collect::<Result<_>>()?,
            None => windows.to_vec(),
        };
        match &self.arch {
            Architecture::MineRoi(c) => probabilities(&MineRoiNet::new(c.clone())?, &self.params, &scaled, exec),
            Architecture::Lstm(c) => probabilities(&LstmNet::new(c.clone())?, &self.params, &scaled, exec),
        }
    }
}

/// Evaluation-mode class probabilities for already-scaled windows.
pub fn probabilities<M: Classifier>(
    model: &M,
    params: &Params,
    windows: &[Array2<f64>],
    exec: Exec,
) -> Result<Vec<[f64; NUM_CLASSES]>> {
    exec.try_map(windows, |w| {
        let t = model.forward_sample(params, w.view(), None)?;
        Ok(softmax3(M::logits(&t)))
    })
}

pub(crate) fn softmax3(logits: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let p = super::ops::softmax(&logits);
    [p[0], p[1], p[2]]
}

/// Same as [`probabilities`] for a single borrowed window.
pub fn probability<M: Classifier>(model: &M, params: &Params, window: ArrayView2<f64>) -> Result<[f64; NUM_CLASSES]> {
    let t = model.forward_sample(params, window, None)?;
    Ok(softmax3(M::logits(&t)))
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
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
