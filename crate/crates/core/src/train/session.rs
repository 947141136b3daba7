use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, SplitInfo};
use super::loss::{compute_loss, LossKind};
use super::metrics::{evaluate, MetricAccumulator, Metrics};
use super::optim::{OptimizerConfig, OptimizerState};
use crate::autodiff::Tape;
use crate::data::{batch_records, split_dataset, BatchTargets, DatasetSpec, GraphRecord, LabeledBatch, Task};
use crate::error::{ensure, Result};
use crate::models::Model;
use crate::Scalar;

/// Mean loss and task metric of one pass.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub loss: f64,
    pub metric: Metrics,
}

/// One line of `metrics.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub metric: Metrics,
}

/// One optimizer step per batch. The loss is averaged over supervised
/// items and the metric is taken from the pre-update predictions.
pub fn train_epoch<T: Scalar>(
    model: &mut Model<T>,
    batches: &[LabeledBatch<T>],
    loss: LossKind,
    optimizer: &mut OptimizerState<T>,
    dataset: &DatasetSpec,
) -> Result<EpochStats> {
    let mut acc = MetricAccumulator::new(dataset);
    let (mut total, mut count) = (0.0, 0usize);
    for b in batches {
        let items = b.targets.count();
        if items == 0 {
            continue;
        }
        let disjoint = b.graphs.to_disjoint()?;
        let mut tape = Tape::with_params(model.params());
        let pred = model.forward(&mut tape, &disjoint)?;
        let l = compute_loss(&mut tape, loss, pred, &b.targets)?;
        let grads = tape.backward(l)?;
        acc.add(tape.value(pred), &b.targets)?;
        total += tape.scalar(l).as_f64() * items as f64;
        count += items;
        let params = model.params_mut();
        params.zero_grad();
        params.accumulate(&tape.param_grads(&grads))?;
        optimizer.step(params)?;
    }
    Ok(EpochStats {
        loss: total / count.max(1) as f64,
        metric: acc.finish(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossKind,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub split: [f64; 3],
    pub shuffle: bool,
}

impl TrainSettings {
    pub fn new(dataset: &DatasetSpec) -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            loss: LossKind::default_for(dataset.task),
            optimizer: OptimizerConfig::default(),
            seed: 0,
            split: [0.8, 0.1, 0.1],
            shuffle: true,
        }
    }
}

/// Splits records by graph, or by node for node-level tasks.
pub fn split_batches<T: Scalar>(
    records: &[GraphRecord],
    dataset: &DatasetSpec,
    fractions: [f64; 3],
    seed: u64,
    batch_size: usize,
) -> Result<[Vec<LabeledBatch<T>>; 3]> {
    if dataset.task.is_node_level() {
        let full = batch_records::<T>(records, batch_size, false, seed)?;
        let total: usize = full.iter().map(|b| b.targets.count()).sum();
        let nodes: Vec<usize> = (0..total).collect();
        let (a, b, c) = split_dataset(&nodes, fractions, seed)?;
        Ok([a, b, c].map(|part| {
            let mut member = vec![false; total];
            for i in part {
                member[i] = true;
            }
            let mut offset = 0;
            full.iter()
                .map(|batch| {
                    let mut batch = batch.clone();
                    if let BatchTargets::NodeClass { labels, mask } = &mut batch.targets {
                        *mask = member[offset..offset + labels.len()].to_vec();
                        offset += labels.len();
                    }
                    batch
                })
                .collect()
        }))
    } else {
        let (a, b, c) = split_dataset(records, fractions, seed)?;
        Ok([
            batch_records(&a, batch_size, false, seed)?,
            batch_records(&b, batch_size, false, seed)?,
            batch_records(&c, batch_size, false, seed)?,
        ])
    }
}

/// A model, its optimizer and the data split of one training run.
pub struct Session<T> {
    model: Model<T>,
    optimizer: OptimizerState<T>,
    dataset: DatasetSpec,
    settings: TrainSettings,
    train_records: Vec<GraphRecord>,
    batches: [Vec<LabeledBatch<T>>; 3],
    epoch: usize,
}

impl<T: Scalar> Session<T> {
    /// Splits `records` with the settings' fractions and seed. A separate
    /// validation set, when given, replaces the validation split.
    pub fn new(
        model: Model<T>,
        dataset: DatasetSpec,
        records: Vec<GraphRecord>,
        validation: Option<Vec<GraphRecord>>,
        settings: TrainSettings,
    ) -> Result<Self> {
        ensure!(!records.is_empty(), Validation, "no graphs");
        ensure!(settings.batch_size >= 1, Config, "batch_size must be at least 1");
        settings.optimizer.validate()?;
        model.spec().check_dataset(&dataset)?;
        let fits = match dataset.task {
            Task::GraphRegression => settings.loss != LossKind::SoftmaxCe,
            _ => settings.loss == LossKind::SoftmaxCe,
        };
        ensure!(fits, Config, "loss {:?} does not fit task {:?}", settings.loss, dataset.task);
        let node_level = dataset.task.is_node_level();
        let mut batches = split_batches(&records, &dataset, settings.split, settings.seed, settings.batch_size)?;
        let train_records = if node_level {
            records
        } else {
            split_dataset(&records, settings.split, settings.seed)?.0
        };
        if let Some(val) = validation {
            batches[1] = batch_records(&val, settings.batch_size, false, settings.seed)?;
        }
        let optimizer = OptimizerState::new(settings.optimizer, model.params());
        Ok(Self {
            model,
            optimizer,
            dataset,
            settings,
            train_records,
            batches,
            epoch: 0,
        })
    }

    pub fn model(&self) -> &Model<T> {
        &self.model
    }

    pub fn dataset(&self) -> &DatasetSpec {
        &self.dataset
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn settings(&self) -> &TrainSettings {
        &self.settings
    }

    pub fn optimizer(&self) -> &OptimizerState<T> {
        &self.optimizer
    }

    pub fn batches(&self, split: Split) -> &[LabeledBatch<T>] {
        &self.batches[split as usize]
    }

    pub fn evaluate(&self, split: Split) -> Result<Metrics> {
        evaluate(&self.model, self.batches(split), &self.dataset)
    }

    /// Trains one epoch. The reported metric is on the validation split,
    /// or on the training split after the update when there is none.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        self.epoch += 1;
        let train = if self.dataset.task.is_node_level() || !self.settings.shuffle {
            self.batches[0].clone()
        } else {
            let seed = self.settings.seed.wrapping_add(self.epoch as u64);
            batch_records(&self.train_records, self.settings.batch_size, true, seed)?
        };
        let stats = train_epoch(&mut self.model, &train, self.settings.loss, &mut self.optimizer, &self.dataset)?;
        let has_val = self.batches[1].iter().any(|b| b.targets.count() > 0);
        let metric = self.evaluate(if has_val { Split::Val } else { Split::Train })?;
        Ok(EpochRecord {
            epoch: self.epoch,
            loss: stats.loss,
            metric,
        })
    }
}

impl Session<f64> {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_model(
            &self.model,
            &self.dataset,
            &self.optimizer,
            self.settings.seed,
            self.epoch,
            Some(SplitInfo {
                fractions: self.settings.split,
                seed: self.settings.seed,
                batch_size: self.settings.batch_size,
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::mutag_like;
    use crate::models::{ModelKind, ModelSpec, Widths};

    fn session(lr: f64, seed: u64) -> Session<f64> {
        let records = mutag_like(12, 2);
        let dataset = DatasetSpec::infer(&records).unwrap();
        let mut spec = ModelSpec::new(
            ModelKind::Mpn,
            dataset.task,
            Widths {
                node_in: 7,
                edge_in: 4,
                state_in: 0,
                out: 2,
            },
            vec![8],
        );
        spec.seed = seed;
        let mut settings = TrainSettings::new(&dataset);
        settings.batch_size = 4;
        settings.optimizer.lr = lr;
        settings.seed = seed;
        Session::new(Model::new(spec).unwrap(), dataset, records, None, settings).unwrap()
    }

    #[test]
    fn zero_lr_keeps_loss() {
        let mut s = session(0.0, 1);
        s.settings.shuffle = false;
        let a = s.run_epoch().unwrap();
        let b = s.run_epoch().unwrap();
        assert_eq!(a.loss, b.loss);
    }

    #[test]
    fn runs_are_deterministic() {
        let mut a = session(1e-2, 5);
        let mut b = session(1e-2, 5);
        for _ in 0..3 {
            assert_eq!(a.run_epoch().unwrap(), b.run_epoch().unwrap());
        }
        assert_eq!(a.checkpoint(), b.checkpoint());
    }

    #[test]
    fn node_split_masks_partition_nodes() {
        let g = crate::data::synthetic::stochastic_block_model(30, 0.2, 0.02, 0.3, 0);
        let dataset = DatasetSpec::infer(std::slice::from_ref(&g)).unwrap();
        let parts = split_batches::<f64>(&[g], &dataset, [0.1, 0.2, 0.7], 3, 8).unwrap();
        let counts: Vec<usize> = parts.iter().map(|p| p.iter().map(|b| b.targets.count()).sum()).collect();
        assert_eq!(counts, [3, 6, 21]);
    }
}
