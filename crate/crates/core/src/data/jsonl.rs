use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DatasetSpec, GraphRecord, Target};
use crate::error::{Error, Result};

/// One line of the JSONL graph format.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    id: String,
    nodes: Vec<Vec<f64>>,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positions: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    targets: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_labels: Option<Vec<usize>>,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    if let Some(k) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Validation(format!(
            "{what} row {k} has width {} but row 0 has width {width}",
            rows[k].len()
        )));
    }
    Ok(Array2::from_shape_vec((rows.len(), width), rows.concat()).expect("widths checked"))
}

impl RawGraph {
    fn into_record(self) -> Result<GraphRecord> {
        let target = match (self.targets, self.label, self.node_labels) {
            (Some(t), None, None) => Target::Regression(t),
            (None, Some(l), None) => Target::GraphLabel(l),
            (None, None, Some(ls)) => Target::NodeLabels(ls),
            (None, None, None) => {
                return Err(Error::Validation(
                    "missing supervision: one of targets, label, node_labels is required".into(),
                ))
            }
            _ => {
                return Err(Error::Validation(
                    "exactly one of targets, label, node_labels may be given".into(),
                ))
            }
        };
        let record = GraphRecord {
            id: self.id,
            node_features: matrix(&self.nodes, "node")?,
            edge_index: self.edges,
            edge_features: self.edge_features.as_deref().map(|e| matrix(e, "edge feature")).transpose()?,
            positions: self.positions,
            state: self.state,
            target,
        };
        record.validate()?;
        Ok(record)
    }

    fn from_record(r: &GraphRecord) -> Self {
        let rows = |m: &Array2<f64>| m.rows().into_iter().map(|r| r.to_vec()).collect();
        let (targets, label, node_labels) = match &r.target {
            Target::Regression(t) => (Some(t.clone()), None, None),
            Target::GraphLabel(l) => (None, Some(*l), None),
            Target::NodeLabels(ls) => (None, None, Some(ls.clone())),
        };
        Self {
            id: r.id.clone(),
            nodes: rows(&r.node_features),
            edges: r.edge_index.clone(),
            edge_features: r.edge_features.as_ref().map(rows),
            positions: r.positions.clone(),
            state: r.state.clone(),
            targets,
            label,
            node_labels,
        }
    }
}

/// Parses JSONL graph records; blank lines are skipped and errors name
/// the 1-based line number.
pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<Vec<GraphRecord>> {
    let mut records = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawGraph = serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        let record = raw.into_record().map_err(|e| match e {
            Error::Validation(msg) => Error::Validation(format!("line {lineno}: {msg}")),
            other => other,
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn load_jsonl_dataset(path: impl AsRef<Path>) -> Result<(DatasetSpec, Vec<GraphRecord>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let records = parse_jsonl(std::io::BufReader::new(file))?;
    let spec = DatasetSpec::infer(&records)?;
    Ok((spec, records))
}

pub fn write_jsonl(path: impl AsRef<Path>, records: &[GraphRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        let line = serde_json::to_string(&RawGraph::from_record(r)).expect("records serialize");
        writeln!(out, "{line}").unwrap();
    }
    std::fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}
