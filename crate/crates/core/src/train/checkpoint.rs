//! Checkpoint files: a magic line, a one-line JSON header, then one base64
//! line of little-endian `f64` values per array (parameters first, then
//! Adam first and second moments when present).

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::optim::{OptimizerConfig, OptimizerState};
use crate::data::{DatasetSpec, DistanceExpansion};
use crate::error::{Error, Result};
use crate::models::{Model, ModelSpec};

const MAGIC: &str = "raggednn-checkpoint";
pub const FORMAT_VERSION: u32 = 1;
pub const SUPPORTED_VERSIONS: [u32; 1] = [FORMAT_VERSION];

/// Seeded split used by a training run, so evaluation can rebuild it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub fractions: [f64; 3],
    pub seed: u64,
    pub batch_size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelSpec,
    pub dataset: DatasetSpec,
    pub param_names: Vec<String>,
    pub params: Vec<Array2<f64>>,
    pub optimizer: OptimizerState<f64>,
    pub seed: u64,
    pub epoch: usize,
    pub split: Option<SplitInfo>,
    /// Featurization applied to records with positions before batching.
    pub expansion: Option<DistanceExpansion>,
}

#[derive(Serialize, Deserialize)]
struct ArrayHeader {
    name: String,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
struct OptimizerHeader {
    config: OptimizerConfig,
    step: u64,
    moments: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    model: ModelSpec,
    dataset: DatasetSpec,
    params: Vec<ArrayHeader>,
    optimizer: OptimizerHeader,
    seed: u64,
    epoch: usize,
    #[serde(default)]
    split: Option<SplitInfo>,
    #[serde(default)]
    expansion: Option<DistanceExpansion>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

impl Checkpoint {
    pub fn from_model(
        model: &Model<f64>,
        dataset: &DatasetSpec,
        optimizer: &OptimizerState<f64>,
        seed: u64,
        epoch: usize,
        split: Option<SplitInfo>,
    ) -> Self {
        Self {
            model: model.spec().clone(),
            dataset: dataset.clone(),
            param_names: model.params().iter().map(|p| p.name.clone()).collect(),
            params: model.params().values(),
            optimizer: optimizer.clone(),
            seed,
            epoch,
            split,
            expansion: None,
        }
    }

    /// Rebuilds the model and loads the stored parameter values.
    pub fn to_model(&self) -> Result<Model<f64>> {
        let mut model = Model::new(self.model.clone())?;
        let names: Vec<&str> = model.params().iter().map(|p| p.name.as_str()).collect();
        if names != self.param_names.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Checkpoint("stored parameters do not match the model spec".into()));
        }
        model.params_mut().set_values(self.params.clone())?;
        Ok(model)
    }
}

fn encode(a: &Array2<f64>) -> String {
    let bytes: Vec<u8> = a.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn truncated() -> Error {
    Error::Checkpoint("unexpected end of checkpoint".into())
}

fn decode(line: Option<std::io::Result<String>>, shape: [usize; 2], path: &Path) -> Result<Array2<f64>> {
    let line = line.ok_or_else(truncated)?.map_err(|e| Error::io(path, e))?;
    let bytes = STANDARD
        .decode(line.trim_end())
        .map_err(|e| Error::Checkpoint(format!("corrupt array data: {e}")))?;
    let want = shape[0] * shape[1] * 8;
    if bytes.len() < want {
        return Err(truncated());
    }
    if bytes.len() > want {
        return Err(Error::Checkpoint(format!("array holds {} bytes, expected {want}", bytes.len())));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec((shape[0], shape[1]), values).unwrap())
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let moments = !ckpt.optimizer.first_moment.is_empty();
    let header = Header {
        format_version: FORMAT_VERSION,
        model: ckpt.model.clone(),
        dataset: ckpt.dataset.clone(),
        params: ckpt
            .param_names
            .iter()
            .zip(&ckpt.params)
            .map(|(name, a)| ArrayHeader {
                name: name.clone(),
                shape: [a.nrows(), a.ncols()],
            })
            .collect(),
        optimizer: OptimizerHeader {
            config: ckpt.optimizer.config,
            step: ckpt.optimizer.step,
            moments,
        },
        seed: ckpt.seed,
        epoch: ckpt.epoch,
        split: ckpt.split,
        expansion: ckpt.expansion.clone(),
    };
    let mut out = format!("{MAGIC}\n");
    out.push_str(&serde_json::to_string(&header).map_err(|e| Error::Checkpoint(e.to_string()))?);
    out.push('\n');
    let arrays = ckpt.params.iter().chain(&ckpt.optimizer.first_moment).chain(&ckpt.optimizer.second_moment);
    for a in arrays {
        out.push_str(&encode(a));
        out.push('\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    // Every complete file ends with a newline.
    if bytes.last() != Some(&b'\n') {
        return Err(truncated());
    }
    let mut lines = BufReader::new(bytes.as_slice()).lines();
    let magic = lines.next().ok_or_else(truncated)?.map_err(|e| Error::io(path, e))?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!("{} is not a checkpoint file", path.display())));
    }
    let text = lines.next().ok_or_else(truncated)?.map_err(|e| Error::io(path, e))?;
    let probe: VersionProbe = serde_json::from_str(&text).map_err(|e| {
        if e.is_eof() {
            truncated()
        } else {
            Error::Checkpoint(format!("corrupt header: {e}"))
        }
    })?;
    if !SUPPORTED_VERSIONS.contains(&probe.format_version) {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint format version {} (supported versions: {SUPPORTED_VERSIONS:?})",
            probe.format_version
        )));
    }
    let header: Header = serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("corrupt header: {e}")))?;

    let params = header
        .params
        .iter()
        .map(|h| decode(lines.next(), h.shape, path))
        .collect::<Result<Vec<_>>>()?;
    let mut moments = |_| -> Result<Vec<Array2<f64>>> {
        if !header.optimizer.moments {
            return Ok(Vec::new());
        }
        header.params.iter().map(|h| decode(lines.next(), h.shape, path)).collect()
    };
    let first_moment = moments(())?;
    let second_moment = moments(())?;
    Ok(Checkpoint {
        model: header.model,
        dataset: header.dataset,
        param_names: header.params.into_iter().map(|h| h.name).collect(),
        params,
        optimizer: OptimizerState {
            config: header.optimizer.config,
            step: header.optimizer.step,
            first_moment,
            second_moment,
        },
        seed: header.seed,
        epoch: header.epoch,
        split: header.split,
        expansion: header.expansion,
    })
}
