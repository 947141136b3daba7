use ndarray::Array2;

use super::{DisjointBatch, EdgePair};
use crate::error::{ensure, Error, Result};
use crate::Scalar;

/// Compressed sparse row adjacency. Row = receiver, column = sender.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyCsr<T> {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> AdjacencyCsr<T> {
    /// Builds from `(receiver, sender)` pairs; duplicate pairs are rejected.
    pub fn from_pairs(num_nodes: usize, pairs: &[EdgePair], values: Option<&[T]>) -> Result<Self> {
        if let Some(v) = values {
            ensure!(
                v.len() == pairs.len(),
                Dimension,
                "{} edge values for {} edges",
                v.len(),
                pairs.len()
            );
        }
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        for (k, p) in pairs.iter().enumerate() {
            ensure!(
                p[0] < num_nodes && p[1] < num_nodes,
                Validation,
                "edge {k} ({}, {}) out of range for {num_nodes} nodes",
                p[0],
                p[1]
            );
        }
        order.sort_by_key(|&k| pairs[k]);
        if let Some(w) = order.windows(2).find(|w| pairs[w[0]] == pairs[w[1]]) {
            let p = pairs[w[0]];
            return Err(Error::Validation(format!(
                "duplicate edge (receiver {}, sender {})",
                p[0], p[1]
            )));
        }
        let mut row_ptr = vec![0; num_nodes + 1];
        for p in pairs {
            row_ptr[p[0] + 1] += 1;
        }
        for i in 0..num_nodes {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = order.iter().map(|&k| pairs[k][1]).collect();
        let values = order
            .iter()
            .map(|&k| values.map_or(T::one(), |v| v[k]))
            .collect();
        Ok(Self {
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Row (receiver) of every stored entry.
    pub fn row_ids(&self) -> Vec<usize> {
        let mut rows = Vec::with_capacity(self.nnz());
        for (i, w) in self.row_ptr.windows(2).enumerate() {
            rows.extend(std::iter::repeat_n(i, w[1] - w[0]));
        }
        rows
    }

    /// Stored entries as `(row, col, value)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.row_ids()
            .into_iter()
            .zip(self.col_idx.iter().copied())
            .zip(self.values.iter().copied())
            .map(|((r, c), v)| (r, c, v))
    }

    pub fn to_dense(&self) -> Array2<T> {
        let n = self.num_nodes();
        let mut a = Array2::zeros((n, n));
        for (r, c, v) in self.entries() {
            a[[r, c]] = v;
        }
        a
    }
}

pub fn adjacency_from_edges<T: Scalar>(
    d: &DisjointBatch<T>,
    edge_values: Option<&[T]>,
) -> Result<AdjacencyCsr<T>> {
    AdjacencyCsr::from_pairs(d.num_nodes(), d.edge_index_global(), edge_values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ragged::GraphBatch;
    use ndarray::array;

    #[test]
    fn symmetric_pair() {
        let a = AdjacencyCsr::<f64>::from_pairs(2, &[[0, 1], [1, 0]], None).unwrap();
        assert_eq!(a.row_ptr(), &[0, 1, 2]);
        assert_eq!(a.col_idx(), &[1, 0]);
        assert_eq!(a.to_dense(), array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn edgeless_rows_are_empty() {
        let a = AdjacencyCsr::<f64>::from_pairs(3, &[], None).unwrap();
        assert_eq!(a.row_ptr(), &[0, 0, 0, 0]);
    }

    #[test]
    fn columns_sorted_within_rows() {
        let a = AdjacencyCsr::from_pairs(3, &[[0, 2], [0, 1], [2, 0]], Some(&[5.0, 7.0, 1.0])).unwrap();
        assert_eq!(a.col_idx(), &[1, 2, 0]);
        assert_eq!(a.values(), &[7.0, 5.0, 1.0]);
    }

    #[test]
    fn duplicates_rejected() {
        let err = AdjacencyCsr::<f64>::from_pairs(2, &[[0, 1], [0, 1]], None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn disjoint_adjacency_is_block_diagonal() {
        let g = GraphBatch::from_graphs(
            &[array![[0.0], [1.0]], array![[2.0], [3.0], [4.0]]],
            &[vec![[0, 1]], vec![[0, 1], [2, 0]]],
            None,
            None,
        )
        .unwrap();
        let d = g.to_disjoint().unwrap();
        let a = adjacency_from_edges(&d, None).unwrap().to_dense();
        // Brute-force dense assembly from the local edge lists.
        let mut oracle = Array2::<f64>::zeros((5, 5));
        let offsets = [0, 2];
        for (b, edges) in [vec![[0, 1]], vec![[0, 1], [2, 0]]].iter().enumerate() {
            for e in edges {
                oracle[[e[0] + offsets[b], e[1] + offsets[b]]] = 1.0;
            }
        }
        assert_eq!(a, oracle);
        for i in 0..5 {
            for j in 0..5 {
                if d.node_graph_id()[i] != d.node_graph_id()[j] {
                    assert_eq!(a[[i, j]], 0.0);
                }
            }
        }
    }
}
