use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{DatasetSpec, Task};
use crate::error::{Error, Result};
use crate::layers::Activation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Interaction,
    Mpn,
    Schnet,
    Megnet,
    Unet,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Gcn,
        ModelKind::Interaction,
        ModelKind::Mpn,
        ModelKind::Schnet,
        ModelKind::Megnet,
        ModelKind::Unet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Interaction => "interaction",
            ModelKind::Mpn => "mpn",
            ModelKind::Schnet => "schnet",
            ModelKind::Megnet => "megnet",
            ModelKind::Unet => "unet",
        }
    }

    /// Readout used for graph tasks when the spec does not name one.
    pub fn default_readout(self) -> Readout {
        match self {
            ModelKind::Gcn | ModelKind::Megnet | ModelKind::Unet => Readout::Mean,
            ModelKind::Interaction | ModelKind::Schnet => Readout::Sum,
            ModelKind::Mpn => Readout::Set2set,
        }
    }

    fn needs_edges(self) -> bool {
        matches!(self, ModelKind::Interaction | ModelKind::Schnet | ModelKind::Megnet)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    Sum,
    Mean,
    Max,
    Set2set,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateKind {
    Gru,
    Mlp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Widths {
    pub node_in: usize,
    #[serde(default)]
    pub edge_in: usize,
    #[serde(default)]
    pub state_in: usize,
    pub out: usize,
}

/// JSON description of a model.
///
/// `layers` lists hidden widths, one per block: graph convolutions (gcn),
/// interaction or MegNet blocks, SchNet interactions, or Unet levels. The
/// mpn model takes a single width and repeats it for `steps` rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub model: ModelKind,
    pub task: Task,
    pub widths: Widths,
    pub layers: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<Readout>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_steps")]
    pub set2set_steps: usize,
    #[serde(default = "default_ratio")]
    pub pool_ratio: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_true")]
    pub shared_weights: bool,
    #[serde(default = "default_update")]
    pub update: UpdateKind,
}

fn default_steps() -> usize {
    3
}

fn default_ratio() -> f64 {
    0.5
}

fn default_activation() -> Activation {
    Activation::Relu
}

fn default_true() -> bool {
    true
}

fn default_update() -> UpdateKind {
    UpdateKind::Gru
}

impl ModelSpec {
    /// A spec with every optional field at its default.
    pub fn new(model: ModelKind, task: Task, widths: Widths, layers: Vec<usize>) -> Self {
        Self {
            model,
            task,
            widths,
            layers,
            readout: None,
            steps: default_steps(),
            set2set_steps: default_steps(),
            pool_ratio: default_ratio(),
            seed: 0,
            activation: default_activation(),
            shared_weights: true,
            update: default_update(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("model spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn readout(&self) -> Readout {
        self.readout.unwrap_or(self.model.default_readout())
    }

    /// Checks that the layer widths chain for this architecture.
    pub fn validate(&self) -> Result<()> {
        let name = self.model.name();
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.widths.node_in == 0 {
            return cfg("widths.node_in must be positive".into());
        }
        if self.widths.out == 0 {
            return cfg("widths.out must be positive".into());
        }
        if self.layers.is_empty() {
            return cfg(format!("layers: {name} needs at least one hidden width"));
        }
        if let Some(k) = self.layers.iter().position(|&w| w == 0) {
            return cfg(format!("layer {k}: width must be positive"));
        }
        if self.model.needs_edges() && self.widths.edge_in == 0 {
            return cfg(format!("widths.edge_in: {name} needs edge features"));
        }
        match self.model {
            ModelKind::Mpn if self.layers.len() != 1 => {
                return cfg(format!("layer 1: mpn takes one hidden width, got {}", self.layers.len()));
            }
            ModelKind::Schnet | ModelKind::Unet => {
                let w = self.layers[0];
                if let Some(k) = self.layers.iter().position(|&x| x != w) {
                    let why = if self.model == ModelKind::Schnet {
                        "residual interactions"
                    } else {
                        "skip connections"
                    };
                    return cfg(format!(
                        "layer {k}: width {} differs from layer 0 width {w}, {name} {why} keep one width",
                        self.layers[k]
                    ));
                }
            }
            _ => {}
        }
        if self.model == ModelKind::Mpn && self.steps == 0 {
            return cfg("steps must be at least 1".into());
        }
        if self.readout() == Readout::Set2set && !self.task.is_node_level() && self.set2set_steps == 0 {
            return cfg("set2set_steps must be at least 1".into());
        }
        if self.model == ModelKind::Unet && !(self.pool_ratio > 0.0 && self.pool_ratio <= 1.0) {
            return cfg(format!("pool_ratio {} outside (0, 1]", self.pool_ratio));
        }
        Ok(())
    }

    /// Checks the input and output widths against a dataset. Classification
    /// data may use fewer classes than the model predicts.
    pub fn check_dataset(&self, data: &DatasetSpec) -> Result<()> {
        let mismatch = |field: &str, ours: usize, theirs: usize, what: &str| {
            Err(Error::Config(format!("{field} = {ours} but the dataset has {theirs} {what}")))
        };
        if self.task != data.task {
            return Err(Error::Config(format!(
                "task {:?} does not match dataset task {:?}",
                self.task, data.task
            )));
        }
        if self.widths.node_in != data.node_width {
            return mismatch("widths.node_in", self.widths.node_in, data.node_width, "node features");
        }
        if self.widths.edge_in != data.edge_width && (self.widths.edge_in > 0 || self.model.needs_edges()) {
            return mismatch("widths.edge_in", self.widths.edge_in, data.edge_width, "edge features");
        }
        if self.widths.state_in != data.state_width && self.widths.state_in > 0 {
            return mismatch("widths.state_in", self.widths.state_in, data.state_width, "state features");
        }
        let out = data.output_width();
        if data.task == Task::GraphRegression && self.widths.out != out {
            return mismatch("widths.out", self.widths.out, out, "targets");
        }
        if data.task != Task::GraphRegression && self.widths.out < out {
            return mismatch("widths.out", self.widths.out, out, "classes");
        }
        Ok(())
    }
}
