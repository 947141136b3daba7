use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::data::{BatchTargets, Task};
use crate::error::{ensure, Error, Result};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mae,
    Mse,
    SoftmaxCe,
}

impl LossKind {
    pub fn default_for(task: Task) -> Self {
        match task {
            Task::GraphRegression => LossKind::Mae,
            _ => LossKind::SoftmaxCe,
        }
    }
}

/// Mean loss over the supervised items of a batch, recorded on `tape`.
///
/// Regression losses average over every `(graph, target)` entry; cross
/// entropy averages over graphs, or over masked nodes for node targets.
pub fn compute_loss<T: Scalar>(tape: &mut Tape<T>, kind: LossKind, pred: Var, targets: &BatchTargets<T>) -> Result<Var> {
    match (kind, targets) {
        (LossKind::Mae | LossKind::Mse, BatchTargets::Regression(t)) => {
            ensure!(
                tape.shape(pred) == t.dim(),
                Dimension,
                "prediction shape {:?} does not match targets {:?}",
                tape.shape(pred),
                t.dim()
            );
            let target = tape.constant(t.clone());
            let diff = tape.sub(pred, target)?;
            let err = if kind == LossKind::Mae {
                tape.abs(diff)
            } else {
                tape.square(diff)
            };
            Ok(tape.mean_all(err))
        }
        (LossKind::SoftmaxCe, BatchTargets::GraphClass(labels)) => cross_entropy(tape, pred, labels),
        (LossKind::SoftmaxCe, BatchTargets::NodeClass { labels, mask }) => {
            ensure!(
                labels.len() == tape.shape(pred).0,
                Dimension,
                "{} node labels for {} predicted rows",
                labels.len(),
                tape.shape(pred).0
            );
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| mask[i]).collect();
            let picked: Vec<usize> = rows.iter().map(|&i| labels[i]).collect();
            let selected = tape.gather_rows(pred, &Arc::from(rows))?;
            cross_entropy(tape, selected, &picked)
        }
        (kind, _) => Err(Error::Config(format!("loss {kind:?} does not fit these targets"))),
    }
}

fn cross_entropy<T: Scalar>(tape: &mut Tape<T>, logits: Var, labels: &[usize]) -> Result<Var> {
    let (rows, classes) = tape.shape(logits);
    ensure!(rows == labels.len(), Dimension, "{} labels for {rows} rows", labels.len());
    ensure!(rows > 0, Contract, "cross entropy over an empty batch");
    let mut onehot = Array2::zeros((rows, classes));
    for (i, &c) in labels.iter().enumerate() {
        ensure!(c < classes, Dimension, "class {c} outside {classes} outputs");
        onehot[[i, c]] = T::one();
    }
    let logp = tape.log_softmax_rows(logits);
    let onehot = tape.constant(onehot);
    let picked = tape.mul(logp, onehot)?;
    let total = tape.sum_all(picked);
    Ok(tape.scale(total, -T::one() / T::of(rows as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn eval(kind: LossKind, pred: Array2<f64>, targets: BatchTargets<f64>) -> f64 {
        let mut t = Tape::new();
        let p = t.leaf(pred);
        let l = compute_loss(&mut t, kind, p, &targets).unwrap();
        t.scalar(l)
    }

    #[test]
    fn examples() {
        let mae = eval(LossKind::Mae, array![[1.0], [2.0]], BatchTargets::Regression(array![[1.0], [4.0]]));
        assert_eq!(mae, 1.0);
        let x = array![[0.3, -1.0]];
        assert_eq!(eval(LossKind::Mse, x.clone(), BatchTargets::Regression(x)), 0.0);
        let ce = eval(LossKind::SoftmaxCe, array![[0.0, 0.0]], BatchTargets::GraphClass(vec![0]));
        assert!((ce - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn masked_nodes_only() {
        let targets = BatchTargets::NodeClass {
            labels: vec![0, 1, 1],
            mask: vec![true, false, false],
        };
        let ce = eval(LossKind::SoftmaxCe, array![[0.0, 0.0], [9.0, -9.0], [5.0, 1.0]], targets);
        assert!((ce - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mismatches_rejected() {
        let mut t = Tape::<f64>::new();
        let p = t.leaf(array![[1.0, 2.0]]);
        assert!(matches!(
            compute_loss(&mut t, LossKind::Mae, p, &BatchTargets::Regression(array![[1.0]])),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            compute_loss(&mut t, LossKind::Mae, p, &BatchTargets::GraphClass(vec![0])),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn mae_subgradient_at_zero() {
        let mut t = Tape::new();
        let p = t.leaf(array![[2.0]]);
        let l = compute_loss(&mut t, LossKind::Mae, p, &BatchTargets::Regression(array![[2.0]])).unwrap();
        assert_eq!(t.backward(l).unwrap().get(p).unwrap()[[0, 0]], 0.0);
    }
}
