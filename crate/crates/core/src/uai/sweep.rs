use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::model::UaiModel;
use super::train::{probe_accuracy, train, transform, EpochRecord, LabeledSet};
use crate::data::{format_real, DatasetSplit, Trial};
use crate::metrics::{au_fadr, eer, fadr_curve, FadrParams};
use crate::scoring::{partition_scores, score_trials};
use crate::{Error, Result};

pub const DEFAULT_DELTAS: [f64; 7] = [10.0, 30.0, 50.0, 70.0, 100.0, 150.0, 200.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub speaker_acc: f64,
    pub group_acc: f64,
    pub eer: f64,
    pub au_fadr: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Index into `rows` of the selected delta.
    pub selected: usize,
    pub model: UaiModel,
    pub history: Vec<EpochRecord>,
}

/// Highest auFaDR wins; ties go to the smaller delta.
pub fn select_best(rows: &[SweepRow]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let cur = &rows[b];
                if r.au_fadr > cur.au_fadr || (r.au_fadr == cur.au_fadr && r.delta < cur.delta) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Scores `trials` on the e1 embeddings of `split`; returns `(eer, au_fadr)`.
pub fn evaluate_transformed(
    model: &UaiModel,
    split: &DatasetSplit,
    trials: &[Trial],
    params: FadrParams,
    far_grid_percent: &[f64],
) -> Result<(f64, f64)> {
    let transformed = transform(model, split)?;
    let scored = score_trials(&transformed, trials)?;
    let p = partition_scores(&scored)?;
    let e = eer(&p.pooled_genuine, &p.pooled_impostor)?.eer;
    let a = au_fadr(&fadr_curve(&p, params, far_grid_percent)?)?;
    Ok((e, a))
}

/// Trains one model per delta on `train_split` and evaluates each on the
/// development trials. Every run starts from the template's seed, so runs
/// differ only in delta.
pub fn delta_sweep(
    train_split: &DatasetSplit,
    dev_split: &DatasetSplit,
    dev_trials: &[Trial],
    template: &TrainConfig,
    deltas: &[f64],
    params: FadrParams,
    far_grid_percent: &[f64],
) -> Result<SweepOutcome> {
    if deltas.is_empty() {
        return Err(Error::param("delta list is empty"));
    }
    let (data, _) = LabeledSet::from_split(train_split)?;
    let (probe_train, held_out) = data.holdout_split(template.val_fraction, template.seed);
    let held_out = if held_out.is_empty() { probe_train.clone() } else { held_out };

    let mut rows = Vec::with_capacity(deltas.len());
    let mut runs = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let config = TrainConfig {
            delta,
            ..template.clone()
        };
        config.validate()?;
        let model = UaiModel::new(config.mode, data.x.ncols(), data.n_speakers, &config.arch, config.seed)?;
        let outcome = train(model, &data, &config)?;
        let probe = probe_accuracy(&outcome.model, &probe_train, &held_out, config.seed)?;
        let (eer, au) = evaluate_transformed(&outcome.model, dev_split, dev_trials, params, far_grid_percent)?;
        rows.push(SweepRow {
            delta,
            speaker_acc: probe.speaker_acc,
            group_acc: probe.group_acc,
            eer,
            au_fadr: au,
        });
        runs.push((outcome.model, outcome.history));
    }
    let selected = select_best(&rows).expect("rows is non-empty");
    let (model, history) = runs.swap_remove(selected);
    Ok(SweepOutcome {
        rows,
        selected,
        model,
        history,
    })
}

pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "delta,speaker_acc,group_acc,eer,au_fadr").map_err(io)?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            format_real(r.delta),
            format_real(r.speaker_acc),
            format_real(r.group_acc),
            format_real(r.eer),
            format_real(r.au_fadr)
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}
