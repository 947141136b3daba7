use std::collections::BTreeMap;

use ndarray::Array2;

use crate::data::{BatchTargets, DatasetSpec, LabeledBatch, Task};
use crate::error::{ensure, Result};
use crate::models::Model;
use crate::Scalar;

/// Metric name to value, e.g. `accuracy` or `mae.homo`.
pub type Metrics = BTreeMap<String, f64>;

/// Running totals for accuracy (classification) or per-target MAE.
#[derive(Clone, Debug)]
pub struct MetricAccumulator {
    task: Task,
    target_names: Vec<String>,
    abs_error: Vec<f64>,
    correct: usize,
    count: usize,
}

impl MetricAccumulator {
    pub fn new(spec: &DatasetSpec) -> Self {
        Self {
            task: spec.task,
            target_names: spec.target_names.clone(),
            abs_error: vec![0.0; spec.target_names.len()],
            correct: 0,
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn add<T: Scalar>(&mut self, pred: &Array2<T>, targets: &BatchTargets<T>) -> Result<()> {
        match targets {
            BatchTargets::Regression(t) => {
                ensure!(pred.dim() == t.dim(), Dimension, "predictions {:?} vs targets {:?}", pred.dim(), t.dim());
                ensure!(
                    t.ncols() == self.abs_error.len(),
                    Dimension,
                    "{} targets but {} target names",
                    t.ncols(),
                    self.abs_error.len()
                );
                for (p, y) in pred.rows().into_iter().zip(t.rows()) {
                    for (c, (a, b)) in p.iter().zip(y).enumerate() {
                        self.abs_error[c] += (*a - *b).abs().as_f64();
                    }
                }
                self.count += t.nrows();
            }
            BatchTargets::GraphClass(labels) => {
                ensure!(pred.nrows() == labels.len(), Dimension, "{} predictions for {} labels", pred.nrows(), labels.len());
                for (i, &l) in labels.iter().enumerate() {
                    self.correct += usize::from(argmax(pred, i) == l);
                }
                self.count += labels.len();
            }
            BatchTargets::NodeClass { labels, mask } => {
                ensure!(pred.nrows() == labels.len(), Dimension, "{} predictions for {} nodes", pred.nrows(), labels.len());
                for (i, &l) in labels.iter().enumerate().filter(|&(i, _)| mask[i]) {
                    self.correct += usize::from(argmax(pred, i) == l);
                    self.count += 1;
                }
            }
        }
        Ok(())
    }

    /// Final metrics; all zero when nothing was added.
    pub fn finish(&self) -> Metrics {
        let n = self.count.max(1) as f64;
        match self.task {
            Task::GraphRegression => self
                .target_names
                .iter()
                .zip(&self.abs_error)
                .map(|(name, e)| (format!("mae.{name}"), e / n))
                .collect(),
            _ => BTreeMap::from([("accuracy".to_string(), self.correct as f64 / n)]),
        }
    }
}

/// Index of the largest entry in row `i`, lowest index on ties.
fn argmax<T: Scalar>(pred: &Array2<T>, i: usize) -> usize {
    let row = pred.row(i);
    let mut best = 0;
    for (c, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = c;
        }
    }
    best
}

/// Accuracy or per-target MAE of `model` over `batches`.
pub fn evaluate<T: Scalar>(model: &Model<T>, batches: &[LabeledBatch<T>], spec: &DatasetSpec) -> Result<Metrics> {
    let mut acc = MetricAccumulator::new(spec);
    for b in batches {
        let pred = model.predict(&b.graphs.to_disjoint()?)?;
        acc.add(&pred, &b.targets)?;
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn spec(task: Task, names: &[&str]) -> DatasetSpec {
        DatasetSpec {
            task,
            target_names: names.iter().map(|s| s.to_string()).collect(),
            num_classes: if task == Task::GraphRegression { 0 } else { 2 },
            num_targets: names.len(),
            node_width: 1,
            edge_width: 0,
            state_width: 0,
            label_names: Vec::new(),
        }
    }

    #[test]
    fn perfect_regression() {
        let mut acc = MetricAccumulator::new(&spec(Task::GraphRegression, &["homo", "lumo", "gap"]));
        let t = array![[-6.0, 0.5, 6.5], [-7.0, 1.0, 8.0]];
        acc.add(&t, &BatchTargets::Regression(t.clone())).unwrap();
        let m = acc.finish();
        assert_eq!(m.keys().collect::<Vec<_>>(), ["mae.gap", "mae.homo", "mae.lumo"]);
        assert!(m.values().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_predictor() {
        let mut acc = MetricAccumulator::new(&spec(Task::GraphRegression, &["y"]));
        acc.add(&array![[1.0], [1.0]], &BatchTargets::Regression(array![[0.0], [2.0]])).unwrap();
        assert_eq!(acc.finish()["mae.y"], 1.0);
    }

    #[test]
    fn majority_accuracy() {
        let mut acc = MetricAccumulator::new(&spec(Task::GraphClassification, &["label"]));
        let labels = vec![0, 0, 0, 0, 0, 0, 0, 1, 1, 1];
        let pred = Array2::from_shape_fn((10, 2), |(_, c)| if c == 0 { 1.0 } else { 0.0 });
        acc.add(&pred, &BatchTargets::GraphClass(labels)).unwrap();
        assert_eq!(acc.finish()["accuracy"], 0.7);
    }

    #[test]
    fn ties_pick_lowest_class() {
        assert_eq!(argmax(&array![[0.5, 0.5, 0.1]], 0), 0);
    }
}
