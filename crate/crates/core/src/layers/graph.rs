use std::sync::Arc;

use crate::autodiff::Index;
use crate::error::Result;
use crate::ragged::{AdjacencyCsr, DisjointBatch, EdgePair, RowSplits};
use crate::Scalar;

/// Index structure of a disjoint batch, shared by every layer of a forward
/// pass. Rows of node-level tape values follow `node_graph`; rows of
/// edge-level values follow `pairs`.
#[derive(Clone, Debug)]
pub struct GraphContext {
    pub num_graphs: usize,
    pub pairs: Vec<EdgePair>,
    pub receivers: Index,
    pub senders: Index,
    pub node_graph: Index,
    pub edge_graph: Index,
}

impl GraphContext {
    pub fn new(num_graphs: usize, node_graph: Vec<usize>, pairs: Vec<EdgePair>) -> Self {
        let receivers: Index = pairs.iter().map(|p| p[0]).collect::<Vec<_>>().into();
        let senders: Index = pairs.iter().map(|p| p[1]).collect::<Vec<_>>().into();
        let edge_graph: Index = receivers.iter().map(|&r| node_graph[r]).collect::<Vec<_>>().into();
        Self {
            num_graphs,
            pairs,
            receivers,
            senders,
            node_graph: Arc::from(node_graph),
            edge_graph,
        }
    }

    pub fn from_disjoint<T: Scalar>(d: &DisjointBatch<T>) -> Self {
        Self::new(d.num_graphs(), d.node_graph_id().to_vec(), d.edge_index_global().to_vec())
    }

    pub fn num_nodes(&self) -> usize {
        self.node_graph.len()
    }

    pub fn num_edges(&self) -> usize {
        self.pairs.len()
    }

    pub fn node_splits(&self) -> RowSplits {
        RowSplits::from_lengths(crate::ragged::kernels::segment_counts(&self.node_graph, self.num_graphs))
    }

    /// Unnormalized 0/1 adjacency of this graph.
    pub fn adjacency<T: Scalar>(&self) -> Result<AdjacencyCsr<T>> {
        AdjacencyCsr::from_pairs(self.num_nodes(), &self.pairs, None)
    }
}
