use ndarray::Array2;
use proptest::prelude::*;
use raggednn::data::{GraphRecord, LabeledBatch, Target};
use raggednn::ragged::kernels::segment_sum;
use raggednn::ragged::{AdjacencyCsr, EdgePair, GraphBatch, PaddedBatch, Ragged};

fn arb_graph() -> impl Strategy<Value = (Array2<f64>, Vec<EdgePair>, Array2<f64>)> {
    (0usize..8, 1usize..4).prop_flat_map(|(n, f)| {
        let feats = proptest::collection::vec(-1e3f64..1e3, n * f)
            .prop_map(move |v| Array2::from_shape_vec((n, f), v).unwrap());
        let edges = if n == 0 {
            Just(vec![]).boxed()
        } else {
            proptest::collection::vec((0..n, 0..n).prop_map(|(a, b)| [a, b]), 0..12).boxed()
        };
        (feats, edges).prop_flat_map(|(x, e)| {
            let m = e.len();
            let ef = proptest::collection::vec(-1e3f64..1e3, m * 2)
                .prop_map(move |v| Array2::from_shape_vec((m, 2), v).unwrap());
            (Just(x), Just(e), ef)
        })
    })
}

fn arb_batch() -> impl Strategy<Value = GraphBatch<f64>> {
    (1usize..4)
        .prop_flat_map(|f| {
            proptest::collection::vec(arb_graph(), 0..6).prop_map(move |gs| {
                let nodes: Vec<_> = gs
                    .iter()
                    .map(|(x, _, _)| {
                        let mut y = Array2::zeros((x.nrows(), f));
                        for ((i, j), v) in y.indexed_iter_mut() {
                            *v = x[[i, j % x.ncols()]] + j as f64;
                        }
                        y
                    })
                    .collect();
                let edges: Vec<_> = gs.iter().map(|(_, e, _)| e.clone()).collect();
                let feats: Vec<_> = gs.iter().map(|(_, _, ef)| ef.clone()).collect();
                GraphBatch::from_graphs(&nodes, &edges, Some(&feats), None).unwrap()
            })
        })
}

proptest! {
    #[test]
    fn disjoint_round_trip_is_exact(batch in arb_batch()) {
        let back = GraphBatch::from_disjoint(&batch.to_disjoint().unwrap()).unwrap();
        prop_assert_eq!(back, batch);
    }

    #[test]
    fn padded_round_trip_is_exact(batch in arb_batch(), pad in -5.0f64..5.0) {
        let padded = PaddedBatch::to_padded(batch.nodes(), pad);
        prop_assert_eq!(&padded.to_ragged(), batch.nodes());
        let max = batch.nodes().row_splits().max_len();
        prop_assert_eq!(padded.mask().dim(), (batch.num_graphs(), max));
        prop_assert_eq!(padded.mask().iter().filter(|m| **m).count(), batch.total_nodes());
        for ((b, i, _), v) in padded.dense().indexed_iter() {
            if !padded.mask()[[b, i]] {
                prop_assert_eq!(v.to_bits(), pad.to_bits());
            }
        }
    }

    #[test]
    fn global_indices_offset_by_cumulative_node_counts(batch in arb_batch()) {
        let d = batch.to_disjoint().unwrap();
        let mut expected = Vec::new();
        let mut offset = 0;
        for g in 0..batch.num_graphs() {
            for p in batch.edge_index().row(g) {
                expected.push([p[0] + offset, p[1] + offset]);
            }
            offset += batch.node_count(g);
        }
        prop_assert_eq!(d.edge_index_global(), &expected[..]);
        for (k, e) in d.edge_index_global().iter().enumerate() {
            prop_assert_eq!(d.node_graph_id()[e[0]], d.edge_graph_id()[k]);
            prop_assert_eq!(d.node_graph_id()[e[1]], d.edge_graph_id()[k]);
        }
    }

    #[test]
    fn adjacency_product_matches_segment_sum(
        (x, mut edges, _) in arb_graph(),
        weights in proptest::collection::vec(0.1f64..2.0, 12),
    ) {
        edges.sort();
        edges.dedup();
        let n = x.nrows();
        let w = &weights[..edges.len()];
        let a = AdjacencyCsr::from_pairs(n, &edges, Some(w)).unwrap();
        let dense = a.to_dense().dot(&x);
        let mut scaled = Array2::zeros((edges.len(), x.ncols()));
        for (k, e) in edges.iter().enumerate() {
            scaled.row_mut(k).assign(&(&x.row(e[1]) * w[k]));
        }
        let receivers: Vec<usize> = edges.iter().map(|e| e[0]).collect();
        let sum = segment_sum(scaled.view(), &receivers, n).unwrap();
        for (p, q) in dense.iter().zip(sum.iter()) {
            prop_assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs()));
        }
    }
}

#[test]
fn two_graph_disjoint_layout() {
    let a = Array2::from_shape_vec((3, 1), vec![1.0, 2.0, 3.0]).unwrap();
    let b = Array2::from_shape_vec((2, 1), vec![4.0, 5.0]).unwrap();
    let batch = GraphBatch::from_graphs(&[a, b], &[vec![[0, 1], [1, 2], [2, 0]], vec![[0, 1], [1, 0]]], None, None).unwrap();
    let d = batch.to_disjoint().unwrap();
    assert_eq!(d.edge_index_global(), &[[0, 1], [1, 2], [2, 0], [3, 4], [4, 3]]);
    assert_eq!(d.node_graph_id(), &[0, 0, 0, 1, 1]);
    assert_eq!(d.edge_graph_id(), &[0, 0, 0, 1, 1]);
    assert_eq!(d.node_matrix().column(0).to_vec(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    assert!(d.edge_matrix().is_none());
}

#[test]
fn padded_layout_of_sizes_two_and_three() {
    let r = Ragged::from_rows(&[Array2::ones((2, 4)), Array2::ones((3, 4))]).unwrap();
    let p = PaddedBatch::to_padded(&r, 0.0);
    assert_eq!(p.dense().dim(), (2, 3, 4));
    assert_eq!(p.mask().iter().filter(|m| **m).count(), 5);
    assert!(!p.mask()[[0, 2]]);
}

#[test]
fn labeled_batch_carries_records_in_order() {
    let record = |id: &str, n: usize, label: usize| GraphRecord {
        id: id.into(),
        node_features: Array2::from_elem((n, 1), n as f64),
        edge_index: vec![],
        edge_features: None,
        positions: None,
        state: None,
        target: Target::GraphLabel(label),
    };
    let (a, b) = (record("a", 1, 1), record("b", 2, 0));
    let batch = LabeledBatch::<f64>::from_records(&[&a, &b]).unwrap();
    assert_eq!(batch.graphs.nodes().row_splits().as_slice(), &[0, 1, 3]);
    assert_eq!(batch.targets.count(), 2);
}
