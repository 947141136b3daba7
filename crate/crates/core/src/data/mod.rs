//! Dataset records, file formats, featurization, splitting and batching.

mod batching;
mod citation;
mod distance;
mod jsonl;
mod split;
pub mod synthetic;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use batching::{batch_graphs, batch_records, BatchTargets, LabeledBatch};
pub use citation::load_citation_dataset;
pub use distance::{expand_distances, DistanceExpansion};
pub use jsonl::{load_jsonl_dataset, parse_jsonl, write_jsonl};
pub use split::split_dataset;

use crate::error::{ensure, Error, Result};
use crate::ragged::EdgePair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    NodeClassification,
    GraphClassification,
    GraphRegression,
}

impl Task {
    pub fn is_node_level(self) -> bool {
        self == Task::NodeClassification
    }
}

/// Supervision attached to one graph.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Regression(Vec<f64>),
    GraphLabel(usize),
    NodeLabels(Vec<usize>),
}

impl Target {
    pub fn task(&self) -> Task {
        match self {
            Target::Regression(_) => Task::GraphRegression,
            Target::GraphLabel(_) => Task::GraphClassification,
            Target::NodeLabels(_) => Task::NodeClassification,
        }
    }
}

/// One graph as stored on disk. Edge pairs are `(receiver, sender)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphRecord {
    pub id: String,
    pub node_features: Array2<f64>,
    pub edge_index: Vec<EdgePair>,
    pub edge_features: Option<Array2<f64>>,
    pub positions: Option<Vec<[f64; 3]>>,
    pub state: Option<Vec<f64>>,
    pub target: Target,
}

impl GraphRecord {
    pub fn num_nodes(&self) -> usize {
        self.node_features.nrows()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_index.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        for pair in &self.edge_index {
            for &v in pair {
                ensure!(v < n, Validation, "edge index {v} ≥ {n} nodes");
            }
        }
        if let Some(e) = &self.edge_features {
            ensure!(
                e.nrows() == self.num_edges(),
                Validation,
                "{} edge feature rows for {} edges",
                e.nrows(),
                self.num_edges()
            );
        }
        if let Some(p) = &self.positions {
            ensure!(p.len() == n, Validation, "{} positions for {n} nodes", p.len());
        }
        if let Target::NodeLabels(labels) = &self.target {
            ensure!(labels.len() == n, Validation, "{} node labels for {n} nodes", labels.len());
        }
        Ok(())
    }

    /// The same graph with node `i` renamed to `perm[i]`. Edge order and
    /// edge features are unchanged.
    pub fn relabel(&self, perm: &[usize]) -> Result<GraphRecord> {
        let n = self.num_nodes();
        ensure!(perm.len() == n, Validation, "permutation of length {} for {n} nodes", perm.len());
        let mut inverse = vec![usize::MAX; n];
        for (i, &p) in perm.iter().enumerate() {
            ensure!(p < n && inverse[p] == usize::MAX, Validation, "not a permutation of 0..{n}");
            inverse[p] = i;
        }
        let node_features = self.node_features.select(ndarray::Axis(0), &inverse);
        let edge_index = self.edge_index.iter().map(|e| [perm[e[0]], perm[e[1]]]).collect();
        let positions = self.positions.as_ref().map(|p| inverse.iter().map(|&i| p[i]).collect());
        let target = match &self.target {
            Target::NodeLabels(l) => Target::NodeLabels(inverse.iter().map(|&i| l[i]).collect()),
            other => other.clone(),
        };
        Ok(GraphRecord {
            id: self.id.clone(),
            node_features,
            edge_index,
            edge_features: self.edge_features.clone(),
            positions,
            state: self.state.clone(),
            target,
        })
    }
}

/// Dataset-wide shape and task description, consistent with every record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub task: Task,
    pub target_names: Vec<String>,
    /// Class count for classification tasks, 0 for regression.
    pub num_classes: usize,
    pub num_targets: usize,
    pub node_width: usize,
    pub edge_width: usize,
    pub state_width: usize,
    /// Class label strings in class-id order, when the source had names.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub label_names: Vec<String>,
}

impl DatasetSpec {
    /// Infers the spec from records; regression targets are named
    /// `target_0, target_1, ...` until renamed with [`DatasetSpec::with_target_names`].
    pub fn infer(records: &[GraphRecord]) -> Result<Self> {
        let first = records.first().ok_or_else(|| Error::Validation("no graphs".into()))?;
        let task = first.target.task();
        let node_width = first.node_features.ncols();
        let edge_width = first.edge_features.as_ref().map_or(0, |e| e.ncols());
        let state_width = first.state.as_ref().map_or(0, Vec::len);
        let mut num_classes = 0;
        let mut num_targets = 0;
        for (k, r) in records.iter().enumerate() {
            let ctx = |msg: String| Error::Validation(format!("graph {k} ({}): {msg}", r.id));
            if r.target.task() != task {
                return Err(ctx(format!("task {:?} differs from {:?}", r.target.task(), task)));
            }
            if r.num_nodes() > 0 && r.node_features.ncols() != node_width {
                return Err(ctx(format!("node width {} differs from {node_width}", r.node_features.ncols())));
            }
            let ew = r.edge_features.as_ref().map_or(0, |e| e.ncols());
            if (r.edge_features.is_some() != first.edge_features.is_some()) || (r.num_edges() > 0 && ew != edge_width) {
                return Err(ctx(format!("edge feature width {ew} differs from {edge_width}")));
            }
            if r.state.as_ref().map_or(0, Vec::len) != state_width {
                return Err(ctx("state width differs".into()));
            }
            match &r.target {
                Target::Regression(t) => {
                    if k == 0 {
                        num_targets = t.len();
                    } else if t.len() != num_targets {
                        return Err(ctx(format!("{} targets, expected {num_targets}", t.len())));
                    }
                }
                Target::GraphLabel(l) => num_classes = num_classes.max(l + 1),
                Target::NodeLabels(ls) => {
                    num_classes = num_classes.max(ls.iter().max().map_or(0, |m| m + 1));
                }
            }
        }
        if task != Task::GraphRegression {
            num_targets = 1;
        }
        Ok(Self {
            task,
            target_names: (0..num_targets).map(|k| format!("target_{k}")).collect(),
            num_classes,
            num_targets,
            node_width,
            edge_width,
            state_width,
            label_names: Vec::new(),
        })
    }

    pub fn with_target_names(mut self, names: Vec<String>) -> Result<Self> {
        ensure!(
            names.len() == self.num_targets,
            Config,
            "{} target names for {} targets",
            names.len(),
            self.num_targets
        );
        self.target_names = names;
        Ok(self)
    }

    /// Model output width implied by the task.
    pub fn output_width(&self) -> usize {
        match self.task {
            Task::GraphRegression => self.num_targets,
            _ => self.num_classes,
        }
    }
}
