use std::path::{Path, PathBuf};

use raggednn::data::{
    expand_distances, load_citation_dataset, load_jsonl_dataset, DatasetSpec, DistanceExpansion, GraphRecord, Task,
};
use raggednn::train::{LossKind, OptimizerConfig};
use raggednn::{Error, Result};
use serde::Deserialize;

/// Where the training graphs come from.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Jsonl(PathBuf),
    Citation { nodes: PathBuf, edges: PathBuf },
}

/// `train --config` file. Relative paths resolve against the file's
/// directory.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: PathBuf,
    pub dataset: DatasetSource,
    /// Separate validation set (JSONL); replaces the validation split.
    #[serde(default)]
    pub validation: Option<PathBuf>,
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default)]
    pub target_names: Option<Vec<String>>,
    #[serde(default)]
    pub distance_expansion: Option<DistanceExpansion>,
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub loss: Option<LossKind>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_shuffle")]
    pub shuffle: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_split() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}
fn default_batch_size() -> usize {
    32
}
fn default_epochs() -> usize {
    100
}
fn default_shuffle() -> bool {
    true
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Parses the file, resolves relative paths and checks that every input
    /// path exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.model);
        match &mut cfg.dataset {
            DatasetSource::Jsonl(p) => resolve(p),
            DatasetSource::Citation { nodes, edges } => {
                resolve(nodes);
                resolve(edges);
            }
        }
        if let Some(v) = &mut cfg.validation {
            resolve(v);
        }
        resolve(&mut cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut inputs = vec![("model", &self.model)];
        match &self.dataset {
            DatasetSource::Jsonl(p) => inputs.push(("dataset.jsonl", p)),
            DatasetSource::Citation { nodes, edges } => {
                inputs.push(("dataset.citation.nodes", nodes));
                inputs.push(("dataset.citation.edges", edges));
            }
        }
        if let Some(v) = &self.validation {
            inputs.push(("validation", v));
        }
        for (field, p) in inputs {
            if !p.is_file() {
                return Err(Error::Config(format!("{field}: file {} does not exist", p.display())));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        self.optimizer.validate()
    }
}

/// Loads a dataset, applying the distance expansion to records that carry
/// positions and renaming regression targets when names are given.
pub fn load_dataset(
    source: &DatasetSource,
    expansion: Option<&DistanceExpansion>,
    target_names: Option<&[String]>,
) -> Result<(DatasetSpec, Vec<GraphRecord>)> {
    let (spec, records) = match source {
        DatasetSource::Jsonl(p) => load_jsonl_dataset(p)?,
        DatasetSource::Citation { nodes, edges } => {
            let (spec, record) = load_citation_dataset(nodes, edges)?;
            (spec, vec![record])
        }
    };
    let (mut spec, records) = match expansion {
        Some(exp) => {
            let records = records
                .iter()
                .map(|r| if r.positions.is_some() { expand_distances(r, exp) } else { Ok(r.clone()) })
                .collect::<Result<Vec<_>>>()?;
            let label_names = spec.label_names;
            let spec = DatasetSpec { label_names, ..DatasetSpec::infer(&records)? };
            (spec, records)
        }
        None => (spec, records),
    };
    if let Some(names) = target_names {
        spec = spec.with_target_names(names.to_vec())?;
    }
    Ok((spec, records))
}
