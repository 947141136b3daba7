use ndarray::{s, Array2};

use super::{EdgePair, Ragged, RaggedIndex, RowSplits};
use crate::error::{ensure, Error, Result};
use crate::Scalar;

/// A mini-batch of `B` graphs in ragged form.
///
/// Edge indices are local to their graph; `edges`, when present, is aligned
/// row-for-row with `edge_index`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphBatch<T> {
    nodes: Ragged<T>,
    edge_index: RaggedIndex,
    edges: Option<Ragged<T>>,
    state: Option<Array2<T>>,
}

impl<T: Scalar> GraphBatch<T> {
    pub fn new(
        nodes: Ragged<T>,
        edge_index: RaggedIndex,
        edges: Option<Ragged<T>>,
        state: Option<Array2<T>>,
    ) -> Result<Self> {
        let b = nodes.num_rows();
        ensure!(
            edge_index.num_rows() == b,
            Validation,
            "edge_index has {} graphs but nodes has {b}",
            edge_index.num_rows()
        );
        if let Some(e) = &edges {
            ensure!(
                e.row_splits() == edge_index.row_splits(),
                Validation,
                "edge features are not aligned with edge_index"
            );
        }
        if let Some(u) = &state {
            ensure!(u.nrows() == b, Validation, "state has {} rows for {b} graphs", u.nrows());
        }
        for g in 0..b {
            let n = nodes.row_splits().len_of(g);
            for (k, pair) in edge_index.row(g).iter().enumerate() {
                ensure!(
                    pair[0] < n && pair[1] < n,
                    Validation,
                    "graph {g} edge {k} ({}, {}) out of range for {n} nodes",
                    pair[0],
                    pair[1]
                );
            }
        }
        Ok(Self {
            nodes,
            edge_index,
            edges,
            state,
        })
    }

    /// Builds a batch from per-graph parts.
    pub fn from_graphs(
        node_rows: &[Array2<T>],
        edge_rows: &[Vec<EdgePair>],
        edge_features: Option<&[Array2<T>]>,
        state: Option<Array2<T>>,
    ) -> Result<Self> {
        let nodes = Ragged::from_rows(node_rows)?;
        let edge_index = RaggedIndex::from_rows(edge_rows);
        let edges = edge_features.map(Ragged::from_rows).transpose()?;
        if let Some(e) = &edges {
            ensure!(
                e.row_splits() == edge_index.row_splits(),
                Validation,
                "edge feature row counts differ from edge counts"
            );
        }
        Self::new(nodes, edge_index, edges, state)
    }

    pub fn nodes(&self) -> &Ragged<T> {
        &self.nodes
    }

    pub fn edge_index(&self) -> &RaggedIndex {
        &self.edge_index
    }

    pub fn edges(&self) -> Option<&Ragged<T>> {
        self.edges.as_ref()
    }

    pub fn state(&self) -> Option<&Array2<T>> {
        self.state.as_ref()
    }

    pub fn num_graphs(&self) -> usize {
        self.nodes.num_rows()
    }

    pub fn node_count(&self, b: usize) -> usize {
        self.nodes.row_splits().len_of(b)
    }

    pub fn edge_count(&self, b: usize) -> usize {
        self.edge_index.row_splits().len_of(b)
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes.row_splits().total()
    }

    pub fn total_edges(&self) -> usize {
        self.edge_index.row_splits().total()
    }

    /// The single-graph batch holding graph `b`.
    pub fn graph(&self, b: usize) -> Self {
        let nodes = self.nodes.row(b).to_owned();
        let edges = self.edges.as_ref().map(|e| e.row(b).to_owned());
        let state = self.state.as_ref().map(|u| u.slice(s![b..b + 1, ..]).to_owned());
        Self::from_graphs(
            &[nodes],
            &[self.edge_index.row(b).to_vec()],
            edges.as_ref().map(std::slice::from_ref),
            state,
        )
        .expect("sub-batch of a valid batch is valid")
    }

    /// Joins the graphs into one large graph with globally offset indices.
    pub fn to_disjoint(&self) -> Result<DisjointBatch<T>> {
        let node_splits = self.nodes.row_splits();
        let mut edge_index_global = Vec::with_capacity(self.total_edges());
        let mut edge_graph_id = Vec::with_capacity(self.total_edges());
        for g in 0..self.num_graphs() {
            let offset = node_splits.as_slice()[g];
            let n = node_splits.len_of(g);
            for pair in self.edge_index.row(g) {
                ensure!(
                    pair[0] < n && pair[1] < n,
                    Validation,
                    "graph {g} edge ({}, {}) out of range for {n} nodes",
                    pair[0],
                    pair[1]
                );
                edge_index_global.push([pair[0] + offset, pair[1] + offset]);
                edge_graph_id.push(g);
            }
        }
        Ok(DisjointBatch {
            node_matrix: self.nodes.values().clone(),
            edge_index_global,
            edge_matrix: self.edges.as_ref().map(|e| e.values().clone()),
            node_graph_id: node_splits.segment_ids(),
            edge_graph_id,
            num_graphs: self.num_graphs(),
            state: self.state.clone(),
        })
    }

    pub fn from_disjoint(d: &DisjointBatch<T>) -> Result<Self> {
        d.validate()?;
        let node_splits = d.node_splits();
        let edge_splits = RowSplits::from_lengths(super::kernels::segment_counts(&d.edge_graph_id, d.num_graphs));
        let pairs = d
            .edge_index_global
            .iter()
            .zip(&d.edge_graph_id)
            .map(|(p, &g)| {
                let offset = node_splits.as_slice()[g];
                [p[0] - offset, p[1] - offset]
            })
            .collect();
        let nodes = Ragged::new(d.node_matrix.clone(), node_splits)?;
        let edge_index = RaggedIndex::new(pairs, edge_splits.clone())?;
        let edges = d
            .edge_matrix
            .clone()
            .map(|e| Ragged::new(e, edge_splits))
            .transpose()?;
        Self::new(nodes, edge_index, edges, d.state.clone())
    }
}

/// All graphs of a batch merged into one graph without cross edges.
///
/// Subgraph membership is carried separately in `node_graph_id` and
/// `edge_graph_id`, both laid out blockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct DisjointBatch<T> {
    node_matrix: Array2<T>,
    edge_index_global: Vec<EdgePair>,
    edge_matrix: Option<Array2<T>>,
    node_graph_id: Vec<usize>,
    edge_graph_id: Vec<usize>,
    num_graphs: usize,
    state: Option<Array2<T>>,
}

impl<T: Scalar> DisjointBatch<T> {
    pub fn new(
        node_matrix: Array2<T>,
        edge_index_global: Vec<EdgePair>,
        edge_matrix: Option<Array2<T>>,
        node_graph_id: Vec<usize>,
        edge_graph_id: Vec<usize>,
        num_graphs: usize,
        state: Option<Array2<T>>,
    ) -> Result<Self> {
        let d = Self {
            node_matrix,
            edge_index_global,
            edge_matrix,
            node_graph_id,
            edge_graph_id,
            num_graphs,
            state,
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        let n = self.node_matrix.nrows();
        let m = self.edge_index_global.len();
        ensure!(self.node_graph_id.len() == n, Validation, "node_graph_id has {} entries for {n} nodes", self.node_graph_id.len());
        ensure!(self.edge_graph_id.len() == m, Validation, "edge_graph_id has {} entries for {m} edges", self.edge_graph_id.len());
        if let Some(e) = &self.edge_matrix {
            ensure!(e.nrows() == m, Validation, "edge_matrix has {} rows for {m} edges", e.nrows());
        }
        if let Some(u) = &self.state {
            ensure!(u.nrows() == self.num_graphs, Validation, "state has {} rows for {} graphs", u.nrows(), self.num_graphs);
        }
        for ids in [&self.node_graph_id, &self.edge_graph_id] {
            if let Some(k) = ids.windows(2).position(|w| w[1] < w[0]) {
                return Err(Error::Validation(format!(
                    "graph ids are not blockwise at position {}",
                    k + 1
                )));
            }
            if let Some(&g) = ids.iter().find(|&&g| g >= self.num_graphs) {
                return Err(Error::Validation(format!("graph id {g} >= num_graphs {}", self.num_graphs)));
            }
        }
        for (k, (pair, &g)) in self.edge_index_global.iter().zip(&self.edge_graph_id).enumerate() {
            for &v in pair {
                ensure!(
                    v < n && self.node_graph_id[v] == g,
                    Validation,
                    "edge {k} endpoint {v} does not belong to graph {g}"
                );
            }
        }
        Ok(())
    }

    pub fn node_matrix(&self) -> &Array2<T> {
        &self.node_matrix
    }

    pub fn edge_index_global(&self) -> &[EdgePair] {
        &self.edge_index_global
    }

    pub fn edge_matrix(&self) -> Option<&Array2<T>> {
        self.edge_matrix.as_ref()
    }

    pub fn node_graph_id(&self) -> &[usize] {
        &self.node_graph_id
    }

    pub fn edge_graph_id(&self) -> &[usize] {
        &self.edge_graph_id
    }

    pub fn num_graphs(&self) -> usize {
        self.num_graphs
    }

    pub fn num_nodes(&self) -> usize {
        self.node_matrix.nrows()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_index_global.len()
    }

    pub fn state(&self) -> Option<&Array2<T>> {
        self.state.as_ref()
    }

    pub fn receivers(&self) -> Vec<usize> {
        self.edge_index_global.iter().map(|p| p[0]).collect()
    }

    pub fn senders(&self) -> Vec<usize> {
        self.edge_index_global.iter().map(|p| p[1]).collect()
    }

    /// Node-count offsets per graph, recovered from `node_graph_id`.
    pub fn node_splits(&self) -> RowSplits {
        RowSplits::from_lengths(super::kernels::segment_counts(&self.node_graph_id, self.num_graphs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    pub(crate) fn two_graphs() -> GraphBatch<f64> {
        GraphBatch::from_graphs(
            &[array![[0.0], [1.0]], array![[2.0], [3.0], [4.0]]],
            &[vec![[0, 1]], vec![[0, 1], [2, 0]]],
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn disjoint_offsets_follow_cumulative_counts() {
        let d = two_graphs().to_disjoint().unwrap();
        assert_eq!(d.edge_index_global(), &[[0, 1], [2, 3], [4, 2]]);
        assert_eq!(d.node_graph_id(), &[0, 0, 1, 1, 1]);
        assert_eq!(d.edge_graph_id(), &[0, 1, 1]);
    }

    #[test]
    fn single_graph_has_zero_offset() {
        let g = two_graphs().graph(1);
        let d = g.to_disjoint().unwrap();
        assert_eq!(d.edge_index_global(), g.edge_index().pairs());
    }

    #[test]
    fn edgeless_graph_contributes_only_nodes() {
        let g = GraphBatch::from_graphs(
            &[array![[1.0]], array![[2.0], [3.0]]],
            &[vec![], vec![[1, 0]]],
            None,
            None,
        )
        .unwrap();
        let d = g.to_disjoint().unwrap();
        assert_eq!(d.edge_index_global(), &[[2, 1]]);
        assert_eq!(d.num_nodes(), 3);
        assert_eq!(GraphBatch::from_disjoint(&d).unwrap(), g);
    }

    #[test]
    fn round_trip_examples() {
        let g = two_graphs();
        assert_eq!(GraphBatch::from_disjoint(&g.to_disjoint().unwrap()).unwrap(), g);
        let single = g.graph(0);
        assert_eq!(GraphBatch::from_disjoint(&single.to_disjoint().unwrap()).unwrap(), single);
        let empty = GraphBatch::<f64>::from_graphs(&[], &[], None, None).unwrap();
        let d = empty.to_disjoint().unwrap();
        assert_eq!(d.num_graphs(), 0);
        assert_eq!(GraphBatch::from_disjoint(&d).unwrap(), empty);
    }

    #[test]
    fn out_of_range_edge_rejected() {
        let err = GraphBatch::from_graphs(&[array![[0.0], [1.0]]], &[vec![[0, 5]]], None, None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn non_blockwise_ids_rejected() {
        let err = DisjointBatch::new(
            array![[0.0], [1.0], [2.0]],
            vec![],
            None,
            vec![0, 1, 0],
            vec![],
            2,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn cross_graph_edge_rejected() {
        let err = DisjointBatch::new(
            array![[0.0], [1.0]],
            vec![[0, 1]],
            None,
            vec![0, 1],
            vec![0],
            2,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }
}
