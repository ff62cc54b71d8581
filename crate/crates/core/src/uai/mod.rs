//! Embedding transformation by unsupervised adversarial invariance and its
//! group-label extensions.
//!
//! The encoder maps an input embedding `x` to `(e1, e2)`. The primary
//! branch predicts the speaker from `e1` and reconstructs `x` from `e2` and a
//! dropout-perturbed `e1`; the secondary branch tries to predict each code
//! from the other. An optional group discriminator reads `e1` and is trained
//! either with the primary branch (group-aware `e1`) or against the encoder
//! (group-invariant `e1`). After training, `e1` is the new embedding.

mod config;
mod mode;
mod model;
mod sweep;
mod train;

pub use config::{ArchConfig, TrainConfig};
pub use mode::{Mode, ModeActivity, Placement};
pub use model::{Batch, ConfusionTargets, ForwardPass, LossReport, ModuleGrads, ModuleId, ModuleSubset, UaiModel, NUM_GROUPS};
pub use sweep::{delta_sweep, evaluate_transformed, select_best, write_sweep_csv, SweepOutcome, SweepRow, DEFAULT_DELTAS};
pub use train::{
    load_checkpoint, probe_accuracy, save_checkpoint, train, transform, write_history_csv, EpochRecord,
    GroupAccuracySource, LabeledSet, ProbeReport, TrainOutcome, Trainer, PROBE_STEPS,
};
