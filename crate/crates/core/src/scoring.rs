//! Cosine scoring of trials and the split of scores by group and label.

use crate::data::{DatasetSplit, GroupTag, Label, ScoredTrial, Trial};
use crate::{Error, Result};

/// Cosine similarity `<a/|a|, b/|b|>`, clamped to `[-1, 1]`.
pub fn cosine_score(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| (x / na) * (y / nb)).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

/// Scores every trial against `split`, preserving input order.
pub fn score_trials(split: &DatasetSplit, trials: &[Trial]) -> Result<Vec<ScoredTrial>> {
    trials
        .iter()
        .map(|t| {
            let a = split
                .get(&t.enrol_utt)
                .ok_or_else(|| Error::UnknownUtterance(t.enrol_utt.clone()))?;
            let b = split
                .get(&t.test_utt)
                .ok_or_else(|| Error::UnknownUtterance(t.test_utt.clone()))?;
            Ok(ScoredTrial {
                trial: t.clone(),
                score: cosine_score(&a.vector, &b.vector)?,
            })
        })
        .collect()
}

/// Scores split into the four (group, label) cells, each sorted ascending,
/// plus the group-agnostic pools.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScorePartition {
    pub genuine_g1: Vec<f64>,
    pub genuine_g2: Vec<f64>,
    pub impostor_g1: Vec<f64>,
    pub impostor_g2: Vec<f64>,
    pub pooled_genuine: Vec<f64>,
    pub pooled_impostor: Vec<f64>,
}

impl ScorePartition {
    /// Builds a partition from raw per-cell scores (sorted here).
    pub fn from_cells(
        mut genuine_g1: Vec<f64>,
        mut genuine_g2: Vec<f64>,
        mut impostor_g1: Vec<f64>,
        mut impostor_g2: Vec<f64>,
    ) -> Self {
        for cell in [&mut genuine_g1, &mut genuine_g2, &mut impostor_g1, &mut impostor_g2] {
            cell.sort_by(f64::total_cmp);
        }
        let pooled_genuine = merge_sorted(&genuine_g1, &genuine_g2);
        let pooled_impostor = merge_sorted(&impostor_g1, &impostor_g2);
        Self {
            genuine_g1,
            genuine_g2,
            impostor_g1,
            impostor_g2,
            pooled_genuine,
            pooled_impostor,
        }
    }

    pub fn len(&self) -> usize {
        self.pooled_genuine.len() + self.pooled_impostor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same scores with the group labels exchanged.
    pub fn swap_groups(&self) -> Self {
        Self {
            genuine_g1: self.genuine_g2.clone(),
            genuine_g2: self.genuine_g1.clone(),
            impostor_g1: self.impostor_g2.clone(),
            impostor_g2: self.impostor_g1.clone(),
            pooled_genuine: self.pooled_genuine.clone(),
            pooled_impostor: self.pooled_impostor.clone(),
        }
    }
}

fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if b[j].total_cmp(&a[i]).is_lt() {
            out.push(b[j]);
            j += 1;
        } else {
            out.push(a[i]);
            i += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Splits scored trials into (group, label) cells. Cross-group trials are
/// rejected.
pub fn partition_scores(scored: &[ScoredTrial]) -> Result<ScorePartition> {
    let mut cells: [Vec<f64>; 4] = Default::default();
    for s in scored {
        let slot = match (s.trial.group_tag, s.trial.label) {
            (GroupTag::G1, Label::Genuine) => 0,
            (GroupTag::G2, Label::Genuine) => 1,
            (GroupTag::G1, Label::Impostor) => 2,
            (GroupTag::G2, Label::Impostor) => 3,
            (GroupTag::Cross, _) => {
                return Err(Error::CrossTrial {
                    enrol: s.trial.enrol_utt.clone(),
                    test: s.trial.test_utt.clone(),
                })
            }
        };
        cells[slot].push(s.score);
    }
    let [gg1, gg2, ig1, ig2] = cells;
    Ok(ScorePartition::from_cells(gg1, gg2, ig1, ig2))
}
