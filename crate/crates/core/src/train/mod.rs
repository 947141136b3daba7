//! Losses, metrics, optimizers, the training loop and checkpoints.

mod checkpoint;
mod loss;
mod metrics;
mod optim;
mod session;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, SplitInfo, FORMAT_VERSION, SUPPORTED_VERSIONS};
pub use loss::{compute_loss, LossKind};
pub use metrics::{evaluate, MetricAccumulator, Metrics};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use session::{split_batches, train_epoch, EpochRecord, EpochStats, Session, Split, TrainSettings};
