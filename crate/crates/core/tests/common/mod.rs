#![allow(dead_code)]

use ndarray::{concatenate, Array2, Axis};
use raggednn::data::synthetic::{random_graphs, RandomGraphs};
use raggednn::data::{GraphRecord, LabeledBatch, Task};
use raggednn::layers::Activation;
use raggednn::models::{Model, ModelKind, ModelSpec, Widths};

pub const NODE_IN: usize = 3;
pub const EDGE_IN: usize = 2;
pub const STATE_IN: usize = 2;
pub const OUT: usize = 2;

pub fn shape(max_nodes: usize, max_edges: usize, task: Task) -> RandomGraphs {
    RandomGraphs {
        min_nodes: 1,
        max_nodes,
        max_edges,
        node_width: NODE_IN,
        edge_width: EDGE_IN,
        state_width: STATE_IN,
        targets: OUT,
        task,
    }
}

pub fn graphs(count: usize, max_nodes: usize, max_edges: usize, task: Task, seed: u64) -> Vec<GraphRecord> {
    random_graphs(count, shape(max_nodes, max_edges, task), seed)
}

pub fn model(kind: ModelKind, task: Task, seed: u64) -> Model<f64> {
    let widths = Widths {
        node_in: NODE_IN,
        edge_in: EDGE_IN,
        state_in: if kind == ModelKind::Megnet { STATE_IN } else { 0 },
        out: OUT,
    };
    let layers = match kind {
        ModelKind::Mpn => vec![6],
        _ => vec![6, 6],
    };
    let mut spec = ModelSpec::new(kind, task, widths, layers);
    spec.seed = seed;
    spec.activation = Activation::Tanh;
    Model::new(spec).unwrap()
}

pub fn predict(model: &Model<f64>, records: &[GraphRecord]) -> Array2<f64> {
    let refs: Vec<_> = records.iter().collect();
    let batch = LabeledBatch::<f64>::from_records(&refs).unwrap();
    model.predict(&batch.graphs.to_disjoint().unwrap()).unwrap()
}

/// Per-graph predictions stacked in batch order.
pub fn predict_each(model: &Model<f64>, records: &[GraphRecord]) -> Array2<f64> {
    let parts: Vec<_> = records.iter().map(|r| predict(model, std::slice::from_ref(r))).collect();
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    concatenate(Axis(0), &views).unwrap()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
