use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GraphRecord, Target};
use crate::error::{ensure, Result};
use crate::ragged::GraphBatch;
use crate::Scalar;

/// Targets of one mini-batch, aligned with its graphs (or nodes).
#[derive(Clone, Debug, PartialEq)]
pub enum BatchTargets<T> {
    Regression(Array2<T>),
    GraphClass(Vec<usize>),
    /// Labels for every node of the batch; only nodes with `mask` set
    /// contribute to losses and metrics.
    NodeClass { labels: Vec<usize>, mask: Vec<bool> },
}

impl<T> BatchTargets<T> {
    /// Number of supervised items (graphs or masked nodes).
    pub fn count(&self) -> usize {
        match self {
            BatchTargets::Regression(t) => t.nrows(),
            BatchTargets::GraphClass(l) => l.len(),
            BatchTargets::NodeClass { mask, .. } => mask.iter().filter(|&&m| m).count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledBatch<T> {
    pub graphs: GraphBatch<T>,
    pub targets: BatchTargets<T>,
    pub ids: Vec<String>,
}

fn cast<T: Scalar>(m: &Array2<f64>) -> Array2<T> {
    m.mapv(T::of)
}

impl<T: Scalar> LabeledBatch<T> {
    pub fn from_records(records: &[&GraphRecord]) -> Result<Self> {
        let nodes: Vec<Array2<T>> = records.iter().map(|r| cast(&r.node_features)).collect();
        let edges: Vec<_> = records.iter().map(|r| r.edge_index.clone()).collect();
        let has_edge_features = records.first().is_some_and(|r| r.edge_features.is_some());
        let edge_features: Option<Vec<Array2<T>>> = if has_edge_features {
            Some(
                records
                    .iter()
                    .map(|r| r.edge_features.as_ref().map(cast).unwrap_or_else(|| Array2::zeros((r.num_edges(), 0))))
                    .collect(),
            )
        } else {
            None
        };
        let state = match records.first().and_then(|r| r.state.as_ref()) {
            Some(first) => {
                let width = first.len();
                let mut u = Array2::zeros((records.len(), width));
                for (b, r) in records.iter().enumerate() {
                    let s = r.state.as_deref().unwrap_or(&[]);
                    ensure!(s.len() == width, Validation, "graph {} has state width {}, expected {width}", r.id, s.len());
                    for (c, &v) in s.iter().enumerate() {
                        u[[b, c]] = T::of(v);
                    }
                }
                Some(u)
            }
            None => None,
        };
        let graphs = GraphBatch::from_graphs(&nodes, &edges, edge_features.as_deref(), state)?;
        let targets = match records.first().map(|r| &r.target) {
            Some(Target::Regression(first)) => {
                let width = first.len();
                let mut t = Array2::zeros((records.len(), width));
                for (b, r) in records.iter().enumerate() {
                    let Target::Regression(v) = &r.target else {
                        return Err(crate::Error::Validation(format!("graph {} is not a regression graph", r.id)));
                    };
                    ensure!(v.len() == width, Validation, "graph {} has {} targets, expected {width}", r.id, v.len());
                    for (c, &x) in v.iter().enumerate() {
                        t[[b, c]] = T::of(x);
                    }
                }
                BatchTargets::Regression(t)
            }
            Some(Target::NodeLabels(_)) => {
                let mut labels = Vec::new();
                for r in records {
                    let Target::NodeLabels(ls) = &r.target else {
                        return Err(crate::Error::Validation(format!("graph {} has no node labels", r.id)));
                    };
                    labels.extend_from_slice(ls);
                }
                let mask = vec![true; labels.len()];
                BatchTargets::NodeClass { labels, mask }
            }
            _ => BatchTargets::GraphClass(
                records
                    .iter()
                    .map(|r| match r.target {
                        Target::GraphLabel(l) => Ok(l),
                        _ => Err(crate::Error::Validation(format!("graph {} has no graph label", r.id))),
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(Self {
            graphs,
            targets,
            ids: records.iter().map(|r| r.id.clone()).collect(),
        })
    }
}

/// Packs consecutive records (after an optional seeded shuffle) into
/// batches of `batch_size`; the final partial batch is kept.
pub fn batch_records<T: Scalar>(
    records: &[GraphRecord],
    batch_size: usize,
    shuffle: bool,
    seed: u64,
) -> Result<Vec<LabeledBatch<T>>> {
    ensure!(batch_size >= 1, Config, "batch_size must be at least 1");
    let mut order: Vec<&GraphRecord> = records.iter().collect();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order.chunks(batch_size).map(LabeledBatch::from_records).collect()
}

pub fn batch_graphs<T: Scalar>(
    records: &[GraphRecord],
    batch_size: usize,
    shuffle: bool,
    seed: u64,
) -> Result<Vec<GraphBatch<T>>> {
    Ok(batch_records(records, batch_size, shuffle, seed)?
        .into_iter()
        .map(|b| b.graphs)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::mutag_like;

    #[test]
    fn batch_sizes_and_order() {
        let recs = mutag_like(5, 3);
        let batches = batch_records::<f64>(&recs, 2, false, 0).unwrap();
        let sizes: Vec<_> = batches.iter().map(|b| b.graphs.num_graphs()).collect();
        assert_eq!(sizes, [2, 2, 1]);
        let ids: Vec<_> = batches.iter().flat_map(|b| b.ids.clone()).collect();
        let expected: Vec<_> = recs.iter().map(|r| r.id.clone()).collect();
        assert_eq!(ids, expected);
    }

    #[test]
    fn unbatching_recovers_node_counts() {
        let recs = mutag_like(9, 4);
        let batches = batch_graphs::<f64>(&recs, 4, true, 17).unwrap();
        let mut counts: Vec<usize> = batches
            .iter()
            .flat_map(|b| (0..b.num_graphs()).map(move |g| b.node_count(g)))
            .collect();
        let mut expected: Vec<usize> = recs.iter().map(|r| r.num_nodes()).collect();
        counts.sort();
        expected.sort();
        assert_eq!(counts, expected);
        let total_nodes: usize = batches.iter().map(|b| b.to_disjoint().unwrap().num_nodes()).sum();
        let total_edges: usize = batches.iter().map(|b| b.to_disjoint().unwrap().num_edges()).sum();
        assert_eq!(total_nodes, recs.iter().map(|r| r.num_nodes()).sum::<usize>());
        assert_eq!(total_edges, recs.iter().map(|r| r.num_edges()).sum::<usize>());
    }

    #[test]
    fn zero_batch_size_rejected() {
        assert!(batch_graphs::<f64>(&mutag_like(2, 0), 0, false, 0).is_err());
    }
}
