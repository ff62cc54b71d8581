use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::model::{Batch, ConfusionTargets, LossReport, ModuleId, UaiModel, NUM_GROUPS};
use crate::data::{format_real, DatasetSplit};
use crate::nn::{accuracy, dropout_mask_with, AdamConfig, AdamState};
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Embeddings with integer speaker and group labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub x: Array2<f64>,
    pub speakers: Vec<usize>,
    pub groups: Vec<usize>,
    pub n_speakers: usize,
}

impl LabeledSet {
    /// Speakers are numbered in sorted id order.
    pub fn from_split(split: &DatasetSplit) -> Result<(Self, Vec<String>)> {
        if split.is_empty() {
            return Err(Error::Empty("embedding set"));
        }
        let names: Vec<String> = split.speaker_index().keys().cloned().collect();
        let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut x = Array2::zeros((split.len(), split.dim()));
        let mut speakers = Vec::with_capacity(split.len());
        let mut groups = Vec::with_capacity(split.len());
        for (mut row, r) in x.outer_iter_mut().zip(split.records()) {
            row.assign(&ndarray::ArrayView1::from(&r.vector));
            speakers.push(index[r.speaker_id.as_str()]);
            groups.push(r.group.index());
        }
        let set = Self {
            x,
            speakers,
            groups,
            n_speakers: names.len(),
        };
        Ok((set, names))
    }

    pub fn len(&self) -> usize {
        self.speakers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speakers.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), idx),
            speakers: idx.iter().map(|&i| self.speakers[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
            n_speakers: self.n_speakers,
        }
    }

    pub fn batch(&self, idx: &[usize]) -> Result<Batch> {
        let s = self.select(idx);
        Batch::new(s.x, s.speakers, s.groups)
    }

    pub fn all(&self) -> Result<Batch> {
        Batch::new(self.x.clone(), self.speakers.clone(), self.groups.clone())
    }

    /// Fraction of rows in each group.
    pub fn group_distribution(&self) -> [f64; NUM_GROUPS] {
        let mut counts = [0usize; NUM_GROUPS];
        for &g in &self.groups {
            counts[g] += 1;
        }
        counts.map(|c| c as f64 / self.len().max(1) as f64)
    }

    /// Share of the most frequent group.
    pub fn majority_rate(&self) -> f64 {
        self.group_distribution().into_iter().fold(0.0, f64::max)
    }

    /// Holds out `fraction` of each speaker's rows (rounded, leaving at least
    /// one row for training). Returns `(train, held_out)`.
    pub fn holdout_split(&self, fraction: f64, seed: u64) -> (Self, Self) {
        let mut by_speaker: Vec<Vec<usize>> = vec![Vec::new(); self.n_speakers];
        for (i, &s) in self.speakers.iter().enumerate() {
            by_speaker[s].push(i);
        }
        let (mut train, mut held) = (Vec::new(), Vec::new());
        for (s, mut rows) in by_speaker.into_iter().enumerate() {
            rows.shuffle(&mut rng::derive(seed, rng::stream::SPLIT, s as u64));
            let k = ((fraction * rows.len() as f64).round() as usize).min(rows.len().saturating_sub(1));
            held.extend_from_slice(&rows[..k]);
            train.extend_from_slice(&rows[k..]);
        }
        train.sort_unstable();
        held.sort_unstable();
        (self.select(&train), self.select(&held))
    }

    fn validate_against(&self, model: &UaiModel) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Empty("training set"));
        }
        if self.x.ncols() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim(),
                actual: self.x.ncols(),
            });
        }
        if self.n_speakers != model.n_speakers() {
            return Err(Error::InvalidData(format!(
                "model predicts {} speakers, data has {}",
                model.n_speakers(),
                self.n_speakers
            )));
        }
        if self.speakers.iter().any(|&s| s >= self.n_speakers) || self.groups.iter().any(|&g| g >= NUM_GROUPS) {
            return Err(Error::InvalidData("label out of range".into()));
        }
        let distinct: std::collections::BTreeSet<usize> = self.speakers.iter().copied().collect();
        if distinct.len() < 2 {
            return Err(Error::Insufficient("training data has a single speaker".into()));
        }
        Ok(())
    }
}

/// A model with the two optimizers that train it. The encoder has separate
/// Adam moments in each branch.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: UaiModel,
    config: TrainConfig,
    primary: Vec<(ModuleId, AdamState)>,
    secondary: Vec<(ModuleId, AdamState)>,
    group_distribution: [f64; NUM_GROUPS],
    dropout_rng: Rng,
    label_rng: Rng,
}

impl Trainer {
    /// `group_distribution` is the empirical group frequency that
    /// adversarial labels are resampled from.
    pub fn new(model: UaiModel, config: &TrainConfig, group_distribution: [f64; NUM_GROUPS]) -> Result<Self> {
        config.validate()?;
        if model.mode() != config.mode {
            return Err(Error::param(format!(
                "model built for {} but config says {}",
                model.mode(),
                config.mode
            )));
        }
        let optimizers = |ids: Vec<ModuleId>, lr: f64| {
            ids.into_iter()
                .filter_map(|id| {
                    let net = model.module(id)?;
                    Some((id, AdamState::new(net, AdamConfig::new(lr, config.weight_decay))))
                })
                .collect::<Vec<_>>()
        };
        let primary = optimizers(model.primary_modules(), config.lr_primary);
        let secondary = optimizers(model.secondary_modules(), config.lr_secondary);
        Ok(Self {
            primary,
            secondary,
            group_distribution,
            dropout_rng: rng::seeded(config.seed, rng::stream::DROPOUT),
            label_rng: rng::seeded(config.seed, rng::stream::LABELS),
            config: config.clone(),
            model,
        })
    }

    pub fn model(&self) -> &UaiModel {
        &self.model
    }

    pub fn into_model(self) -> UaiModel {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    fn apply(model: &mut UaiModel, optimizers: &mut [(ModuleId, AdamState)], grads: &super::ModuleGrads) -> Result<()> {
        for (id, adam) in optimizers {
            if let (Some(g), Some(net)) = (grads.get(*id), model.module_mut(*id)) {
                adam.step(net, g)?;
            }
        }
        Ok(())
    }

    /// One Adam step on the primary branch with a fresh dropout mask.
    pub fn primary_step(&mut self, batch: &Batch) -> Result<LossReport> {
        let mask = if self.model.module(ModuleId::Decoder).is_some() {
            Some(dropout_mask_with(
                &mut self.dropout_rng,
                (batch.len(), self.model.dim_e1()),
                self.config.p_drop,
            )?)
        } else {
            None
        };
        let (report, grads) = self.model.primary_gradients(batch, mask.as_ref(), &self.config)?;
        Self::apply(&mut self.model, &mut self.primary, &grads)?;
        Ok(report)
    }

    /// Group labels drawn i.i.d. from the training distribution.
    pub fn resample_groups(&mut self, n: usize) -> Vec<usize> {
        let p_g1 = self.group_distribution[0];
        (0..n)
            .map(|_| if self.label_rng.random::<f64>() < p_g1 { 0 } else { 1 })
            .collect()
    }

    /// One Adam step on the secondary branch and the encoder.
    pub fn secondary_step(&mut self, batch: &Batch) -> Result<LossReport> {
        if !self.model.mode().has_secondary() {
            return Err(Error::param(format!("mode {} has no secondary branch", self.model.mode())));
        }
        let mut permutation: Vec<usize> = (0..batch.len()).collect();
        permutation.shuffle(&mut self.label_rng);
        let groups = self.resample_groups(batch.len());
        let targets: ConfusionTargets = self.model.confusion_targets(batch, &permutation, groups)?;
        let (report, grads) = self.model.secondary_gradients(batch, &targets, &self.config)?;
        Self::apply(&mut self.model, &mut self.secondary, &grads)?;
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_pred: f64,
    pub l_recon: f64,
    pub l_dis1: f64,
    pub l_dis2: f64,
    pub l_bias: f64,
    pub val_speaker_acc: f64,
    /// Discriminator accuracy on the validation rows, when there is one.
    pub val_group_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation speaker accuracy.
    pub model: UaiModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Endless stream of minibatch indices: reshuffles after each pass.
struct BatchStream {
    order: Vec<usize>,
    pos: usize,
    rng: Rng,
}

impl BatchStream {
    fn new(n: usize, rng: Rng) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n,
            rng,
        }
    }

    fn next(&mut self, size: usize) -> Vec<usize> {
        let size = size.min(self.order.len());
        if self.pos + size > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let out = self.order[self.pos..self.pos + size].to_vec();
        self.pos += size;
        out
    }
}

#[derive(Default)]
struct Mean {
    sum: LossReport,
    count: usize,
}

impl Mean {
    fn add(&mut self, r: &LossReport) {
        let s = &mut self.sum;
        s.l_pred += r.l_pred;
        s.l_recon += r.l_recon;
        s.l_dis1 += r.l_dis1;
        s.l_dis2 += r.l_dis2;
        s.l_bias += r.l_bias;
        self.count += 1;
    }

    fn get(&self, f: impl Fn(&LossReport) -> f64) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            f(&self.sum) / self.count as f64
        }
    }
}

fn speaker_accuracy(model: &UaiModel, set: &LabeledSet) -> Result<f64> {
    let e1 = model.transform(set.x.view())?;
    let logits = model.module(ModuleId::Predictor).expect("predictor always exists").predict(e1.view())?;
    Ok(accuracy(logits.view(), &set.speakers))
}

fn discriminator_accuracy(model: &UaiModel, set: &LabeledSet) -> Result<Option<f64>> {
    let Some(disc) = model.module(ModuleId::Discriminator) else {
        return Ok(None);
    };
    let e1 = model.transform(set.x.view())?;
    Ok(Some(accuracy(disc.predict(e1.view())?.view(), &set.groups)))
}

/// Alternating training with early stopping on held-out speaker accuracy.
///
/// `config.val_fraction` of each speaker's rows are held out. Every
/// minibatch gets one primary step followed by
/// `config.secondary_steps_per_primary` secondary steps on further
/// minibatches drawn from a separate shuffled stream (none for modes
/// without a secondary branch).
pub fn train(model: UaiModel, data: &LabeledSet, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    data.validate_against(&model)?;
    let (train_set, val_set) = data.holdout_split(config.val_fraction, config.seed);
    let val_set = if val_set.is_empty() { train_set.clone() } else { val_set };

    let secondary = model.mode().has_secondary();
    let mut trainer = Trainer::new(model, config, train_set.group_distribution())?;
    let mut order_rng = rng::seeded(config.seed, rng::stream::BATCHES);
    let mut stream = BatchStream::new(train_set.len(), rng::derive(config.seed, rng::stream::BATCHES, 1));

    let mut history = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0, trainer.model().clone());
    let mut since_best = 0;
    for epoch in 1..=config.max_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut order_rng);
        let (mut prim, mut sec) = (Mean::default(), Mean::default());
        for chunk in order.chunks(config.batch) {
            prim.add(&trainer.primary_step(&train_set.batch(chunk)?)?);
            if secondary {
                for _ in 0..config.secondary_steps_per_primary {
                    sec.add(&trainer.secondary_step(&train_set.batch(&stream.next(config.batch))?)?);
                }
            }
        }
        let val_speaker_acc = speaker_accuracy(trainer.model(), &val_set)?;
        let placement_secondary = trainer.model().mode().activity().placement == super::Placement::SecondaryBranch;
        let bias_source = if placement_secondary { &sec } else { &prim };
        let dis_source = if secondary { &sec } else { &prim };
        history.push(EpochRecord {
            epoch,
            l_pred: prim.get(|r| r.l_pred),
            l_recon: prim.get(|r| r.l_recon),
            l_dis1: dis_source.get(|r| r.l_dis1),
            l_dis2: dis_source.get(|r| r.l_dis2),
            l_bias: bias_source.get(|r| r.l_bias),
            val_speaker_acc,
            val_group_acc: discriminator_accuracy(trainer.model(), &val_set)?,
        });
        if val_speaker_acc > best.0 {
            best = (val_speaker_acc, epoch, trainer.model().clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model: best.2,
        history,
        best_epoch: best.1,
    })
}

pub fn write_history_csv(history: &[EpochRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "epoch,l_pred,l_recon,l_dis1,l_dis2,l_bias,val_speaker_acc,val_group_acc").map_err(io)?;
    for h in history {
        let group = h.val_group_acc.map(format_real).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            h.epoch,
            format_real(h.l_pred),
            format_real(h.l_recon),
            format_real(h.l_dis1),
            format_real(h.l_dis2),
            format_real(h.l_bias),
            format_real(h.val_speaker_acc),
            group
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Replaces every vector of `split` with its e1.
pub fn transform(model: &UaiModel, split: &DatasetSplit) -> Result<DatasetSplit> {
    if split.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: split.dim(),
        });
    }
    if split.is_empty() {
        return DatasetSplit::empty(model.dim_e1());
    }
    let (set, _) = LabeledSet::from_split(split)?;
    let e1 = model.transform(set.x.view())?;
    let vectors = e1.outer_iter().map(|r| r.to_vec()).collect();
    split.with_vectors(model.dim_e1(), vectors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupAccuracySource {
    /// The model's own discriminator, trained with the true labels.
    Discriminator,
    /// A fresh classifier fitted on frozen e1.
    Probe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub speaker_acc: f64,
    pub group_acc: f64,
    pub majority_rate: f64,
    pub group_source: GroupAccuracySource,
}

/// Minibatch updates used to fit a probe.
pub const PROBE_STEPS: usize = 1500;

/// Speaker accuracy of the predictor and group accuracy on `held_out`.
///
/// When the discriminator is trained with the true labels as part of the
/// primary branch its accuracy is reported directly. Otherwise (no
/// discriminator, or an adversarial one that the encoder was trained to
/// fool) a fresh network of the discriminator's shape is fitted on frozen e1
/// (standardized with `probe_train` statistics) of `probe_train`, so the figure measures how much group information e1
/// still carries.
pub fn probe_accuracy(model: &UaiModel, probe_train: &LabeledSet, held_out: &LabeledSet, seed: u64) -> Result<ProbeReport> {
    if held_out.is_empty() {
        return Err(Error::Empty("held-out set"));
    }
    let speaker_acc = speaker_accuracy(model, held_out)?;
    let majority_rate = held_out.majority_rate();
    if model.mode().activity().placement == super::Placement::PrimaryBranch {
        let group_acc = discriminator_accuracy(model, held_out)?.expect("primary placement has a discriminator");
        return Ok(ProbeReport {
            speaker_acc,
            group_acc,
            majority_rate,
            group_source: GroupAccuracySource::Discriminator,
        });
    }
    if probe_train.is_empty() {
        return Err(Error::Empty("probe training set"));
    }
    let train_e1 = model.transform(probe_train.x.view())?;
    let mean = train_e1.mean_axis(Axis(0)).expect("non-empty");
    let sd = train_e1.std_axis(Axis(0), 0.0).mapv(|v| if v > 1e-12 { v } else { 1.0 });
    let standardize = |e: Array2<f64>| (e - &mean) / &sd;
    let train_z = standardize(train_e1);
    let mut probe = crate::nn::DenseNet::mlp(
        model.dim_e1(),
        &model.arch().discriminator_hidden,
        NUM_GROUPS,
        &mut rng::seeded(seed, rng::stream::PROBE),
    );
    let mut adam = AdamState::new(&probe, AdamConfig::new(1e-3, 0.0));
    let mut stream = BatchStream::new(probe_train.len(), rng::derive(seed, rng::stream::PROBE, 1));
    for _ in 0..PROBE_STEPS {
        let chunk = stream.next(128);
        let x = train_z.select(Axis(0), &chunk);
        let labels: Vec<usize> = chunk.iter().map(|&i| probe_train.groups[i]).collect();
        let fwd = probe.forward(x.view())?;
        let (_, g) = crate::nn::softmax_xent(fwd.output.view(), &labels)?;
        let (grads, _) = probe.backward(&fwd, g.view());
        adam.step(&mut probe, &grads)?;
    }
    let held_e1 = standardize(model.transform(held_out.x.view())?);
    let group_acc = accuracy(probe.predict(held_e1.view())?.view(), &held_out.groups);
    Ok(ProbeReport {
        speaker_acc,
        group_acc,
        majority_rate,
        group_source: GroupAccuracySource::Probe,
    })
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: UaiModel,
}

const CHECKPOINT_FORMAT: &str = "fairsv-uai";
const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(model: &UaiModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        model: model.clone(),
    };
    let json = serde_json::to_string(&ck)?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<UaiModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text)?;
    if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
        return Err(Error::InvalidData(format!(
            "{}: unsupported checkpoint {} v{}",
            path.display(),
            ck.format,
            ck.version
        )));
    }
    Ok(ck.model)
}
