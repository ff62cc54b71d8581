//! Paired permutation tests between two systems scored on the same trials.
//!
//! Under the null hypothesis the two systems are exchangeable on every
//! trial, so each permutation swaps the pair of scores of a trial with
//! probability 1/2 and recomputes the statistic. The p-value is two-sided
//! with add-one smoothing:
//!
//! ```text
//! p = (1 + #{ |null| >= |observed| }) / (n + 1)
//! ```

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{GroupTag, Label, ScoredTrial};
use crate::metrics::{au_fadr, eer, fadr_curve, FadrParams};
use crate::rng;
use crate::scoring::ScorePartition;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    /// auFaDR(B) - auFaDR(A)
    AuFadr,
    /// EER(B) - EER(A)
    Eer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermTestReport {
    pub statistic: Statistic,
    pub observed_stat: f64,
    pub p_value: f64,
    pub n_permutations: usize,
    pub seed: u64,
    /// Trials the statistic was computed on (after subsampling).
    pub n_trials: usize,
    pub null_stats: Vec<f64>,
}

/// Two systems' scores on one trial list, aligned by index.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedScores {
    pub cells: Vec<(GroupTag, Label)>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl AlignedScores {
    /// Pairs up two scored lists. Both must list the same trials in the same
    /// order.
    pub fn new(sys_a: &[ScoredTrial], sys_b: &[ScoredTrial]) -> Result<Self> {
        if sys_a.len() != sys_b.len() {
            return Err(Error::Misaligned(format!(
                "{} trials vs {} trials",
                sys_a.len(),
                sys_b.len()
            )));
        }
        let mut cells = Vec::with_capacity(sys_a.len());
        for (i, (x, y)) in sys_a.iter().zip(sys_b).enumerate() {
            if x.trial != y.trial {
                return Err(Error::Misaligned(format!(
                    "trial {i} differs: {} / {} vs {} / {}",
                    x.trial.enrol_utt, x.trial.test_utt, y.trial.enrol_utt, y.trial.test_utt
                )));
            }
            cells.push((x.trial.group_tag, x.trial.label));
        }
        Ok(Self {
            cells,
            a: sys_a.iter().map(|s| s.score).collect(),
            b: sys_b.iter().map(|s| s.score).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    fn select(&self, idx: &[usize]) -> Self {
        Self {
            cells: idx.iter().map(|&i| self.cells[i]).collect(),
            a: idx.iter().map(|&i| self.a[i]).collect(),
            b: idx.iter().map(|&i| self.b[i]).collect(),
        }
    }
}

/// Runs the paired swap test for an arbitrary statistic of the form
/// `f(cells, scores_b) - f(cells, scores_a)`.
///
/// Permutation `i` draws its swap mask from its own generator derived from
/// `(seed, i)`, so the null distribution does not depend on evaluation
/// order.
pub fn paired_permutation_test<F>(
    scores: &AlignedScores,
    n_permutations: usize,
    seed: u64,
    metric: F,
) -> Result<(f64, Vec<f64>, f64)>
where
    F: Fn(&[(GroupTag, Label)], &[f64]) -> Result<f64>,
{
    if n_permutations == 0 {
        return Err(Error::param("at least one permutation is required"));
    }
    let observed = metric(&scores.cells, &scores.b)? - metric(&scores.cells, &scores.a)?;

    let mut swapped_a = scores.a.clone();
    let mut swapped_b = scores.b.clone();
    let mut null = Vec::with_capacity(n_permutations);
    for i in 0..n_permutations {
        let mut rng = rng::derive(seed, rng::stream::PERMUTATION, i as u64);
        for k in 0..scores.len() {
            let (x, y) = if rng.random::<bool>() {
                (scores.b[k], scores.a[k])
            } else {
                (scores.a[k], scores.b[k])
            };
            swapped_a[k] = x;
            swapped_b[k] = y;
        }
        null.push(metric(&scores.cells, &swapped_b)? - metric(&scores.cells, &swapped_a)?);
    }
    let extreme = null.iter().filter(|v| v.abs() >= observed.abs()).count();
    let p = (1 + extreme) as f64 / (n_permutations + 1) as f64;
    Ok((observed, null, p))
}

fn partition_of(cells: &[(GroupTag, Label)], scores: &[f64]) -> Result<ScorePartition> {
    let mut parts: [Vec<f64>; 4] = Default::default();
    for (&(tag, label), &s) in cells.iter().zip(scores) {
        let slot = match (tag, label) {
            (GroupTag::G1, Label::Genuine) => 0,
            (GroupTag::G2, Label::Genuine) => 1,
            (GroupTag::G1, Label::Impostor) => 2,
            (GroupTag::G2, Label::Impostor) => 3,
            (GroupTag::Cross, _) => {
                return Err(Error::InvalidData("cross-group trial in a fairness test".into()))
            }
        };
        parts[slot].push(s);
    }
    let [a, b, c, d] = parts;
    Ok(ScorePartition::from_cells(a, b, c, d))
}

fn eer_of(cells: &[(GroupTag, Label)], scores: &[f64]) -> Result<f64> {
    let (mut gen, mut imp) = (Vec::new(), Vec::new());
    for (&(_, label), &s) in cells.iter().zip(scores) {
        match label {
            Label::Genuine => gen.push(s),
            Label::Impostor => imp.push(s),
        }
    }
    Ok(eer(&gen, &imp)?.eer)
}

/// Tests auFaDR(B) - auFaDR(A) on a seeded subsample of at most `subsample`
/// trials.
pub fn perm_test_aufadr(
    sys_a: &[ScoredTrial],
    sys_b: &[ScoredTrial],
    params: FadrParams,
    far_grid_percent: &[f64],
    n_permutations: usize,
    subsample: usize,
    seed: u64,
) -> Result<PermTestReport> {
    let all = AlignedScores::new(sys_a, sys_b)?;
    let scores = if subsample < all.len() {
        let mut rng = rng::seeded(seed, rng::stream::SUBSAMPLE);
        let mut idx = sample(&mut rng, all.len(), subsample).into_vec();
        idx.sort_unstable();
        all.select(&idx)
    } else {
        all
    };
    let metric = |cells: &[(GroupTag, Label)], s: &[f64]| {
        au_fadr(&fadr_curve(&partition_of(cells, s)?, params, far_grid_percent)?)
    };
    let (observed, null, p) = paired_permutation_test(&scores, n_permutations, seed, metric)?;
    Ok(PermTestReport {
        statistic: Statistic::AuFadr,
        observed_stat: observed,
        p_value: p,
        n_permutations,
        seed,
        n_trials: scores.len(),
        null_stats: null,
    })
}

/// Tests EER(B) - EER(A) on all trials.
pub fn perm_test_eer(
    sys_a: &[ScoredTrial],
    sys_b: &[ScoredTrial],
    n_permutations: usize,
    seed: u64,
) -> Result<PermTestReport> {
    let scores = AlignedScores::new(sys_a, sys_b)?;
    let (observed, null, p) = paired_permutation_test(&scores, n_permutations, seed, eer_of)?;
    Ok(PermTestReport {
        statistic: Statistic::Eer,
        observed_stat: observed,
        p_value: p,
        n_permutations,
        seed,
        n_trials: scores.len(),
        null_stats: null,
    })
}
