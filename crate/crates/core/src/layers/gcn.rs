use std::sync::Arc;

use ndarray::Array2;

use super::dense::Dense;
use crate::autodiff::{Index, Tape, Var};
use crate::error::{ensure, Error, Result};
use crate::ragged::AdjacencyCsr;
use crate::Scalar;

/// Renormalized adjacency `D̃^{-1/2} (A + I) D̃^{-1/2}` where `D̃` holds the
/// row sums of `A + I`. The input must not contain self-loops.
pub fn gcn_normalize<T: Scalar>(a: &AdjacencyCsr<T>, num_nodes: usize) -> Result<AdjacencyCsr<T>> {
    ensure!(
        a.num_nodes() == num_nodes,
        Dimension,
        "adjacency has {} nodes, expected {num_nodes}",
        a.num_nodes()
    );
    let mut pairs = Vec::with_capacity(a.nnz() + num_nodes);
    let mut weights = Vec::with_capacity(a.nnz() + num_nodes);
    let mut degree = vec![T::one(); num_nodes];
    for (r, c, v) in a.entries() {
        if r == c {
            return Err(Error::Validation(format!("node {r} already has a self-loop")));
        }
        pairs.push([r, c]);
        weights.push(v);
        degree[r] += v;
    }
    for i in 0..num_nodes {
        pairs.push([i, i]);
        weights.push(T::one());
    }
    for (w, p) in weights.iter_mut().zip(&pairs) {
        *w /= (degree[p[0]] * degree[p[1]]).sqrt();
    }
    AdjacencyCsr::from_pairs(num_nodes, &pairs, Some(&weights))
}

/// `activation(Â h W + b)`, with `Â h` evaluated as a gather of sender rows
/// scaled by the entry value and summed per receiver.
pub fn gcn_conv<T: Scalar>(tape: &mut Tape<T>, h: Var, a_norm: &AdjacencyCsr<T>, layer: &Dense) -> Result<Var> {
    let n = a_norm.num_nodes();
    ensure!(
        tape.shape(h).0 == n,
        Dimension,
        "gcn_conv: {} node rows for a {n}-node adjacency",
        tape.shape(h).0
    );
    let rows: Index = Arc::from(a_norm.row_ids());
    let cols: Index = Arc::from(a_norm.col_idx());
    let weights = tape.constant(Array2::from_shape_vec((a_norm.nnz(), 1), a_norm.values().to_vec()).unwrap());
    let hw = layer.linear(tape, h)?;
    let gathered = tape.gather_rows(hw, &cols)?;
    let scaled = tape.mul_col(gathered, weights)?;
    let mixed = tape.segment_sum(scaled, &rows, n)?;
    layer.finish(tape, mixed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamStore;
    use crate::layers::Activation;
    use ndarray::array;

    #[test]
    fn two_node_pair_normalizes_to_half() {
        let a = AdjacencyCsr::<f64>::from_pairs(2, &[[0, 1], [1, 0]], None).unwrap();
        let norm = gcn_normalize(&a, 2).unwrap();
        assert_eq!(norm.to_dense(), array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn isolated_node_keeps_unit_self_loop() {
        let a = AdjacencyCsr::<f64>::from_pairs(3, &[[0, 1], [1, 0]], None).unwrap();
        let norm = gcn_normalize(&a, 3).unwrap().to_dense();
        assert_eq!(norm[[2, 2]], 1.0);
    }

    #[test]
    fn existing_self_loop_rejected() {
        let a = AdjacencyCsr::<f64>::from_pairs(2, &[[1, 1]], None).unwrap();
        assert!(matches!(gcn_normalize(&a, 2), Err(Error::Validation(_))));
    }

    fn identity_layer(store: &mut ParamStore<f64>, width: usize) -> Dense {
        Dense {
            weight: store.register("w", Array2::eye(width)),
            bias: store.zeros("b", 1, width),
            activation: Activation::Linear,
            in_width: width,
            out_width: width,
        }
    }

    #[test]
    fn conv_averages_pair() {
        let mut store = ParamStore::new();
        let layer = identity_layer(&mut store, 1);
        let a = AdjacencyCsr::<f64>::from_pairs(2, &[[0, 1], [1, 0]], None).unwrap();
        let norm = gcn_normalize(&a, 2).unwrap();
        let mut t = Tape::with_params(&store);
        let h = t.constant(array![[1.0], [3.0]]);
        let out = gcn_conv(&mut t, h, &norm, &layer).unwrap();
        assert_eq!(t.value(out), &array![[2.0], [2.0]]);
    }

    #[test]
    fn self_loops_only_is_identity() {
        let mut store = ParamStore::new();
        let layer = identity_layer(&mut store, 2);
        let a = AdjacencyCsr::<f64>::from_pairs(3, &[], None).unwrap();
        let norm = gcn_normalize(&a, 3).unwrap();
        let mut t = Tape::with_params(&store);
        let hv = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let h = t.constant(hv.clone());
        let out = gcn_conv(&mut t, h, &norm, &layer).unwrap();
        assert_eq!(t.value(out), &hv);
    }
}
