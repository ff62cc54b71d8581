use std::path::PathBuf;

use fairsv::stats::Statistic;
use fairsv::synth::SynthConfig;
use fairsv::uai::TrainConfig;
use serde::{Deserialize, Serialize};

/// Score split analysed by the `kde` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSplit {
    Genuine,
    Impostor,
}

impl ScoreSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreSplit::Genuine => "genuine",
            ScoreSplit::Impostor => "impostor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

/// Everything a command needs to run, with every default and config file
/// already folded in. Stored in the run manifest and replayed by `rerun`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case")]
pub enum Plan {
    Synth(SynthConfig),
    Trials {
        data: PathBuf,
        max_per_category: usize,
        seed: u64,
    },
    Score {
        data: PathBuf,
        trials: PathBuf,
    },
    Train {
        data: PathBuf,
        train: TrainConfig,
    },
    Transform {
        checkpoint: PathBuf,
        data: PathBuf,
    },
    Eval {
        scores_a: PathBuf,
        scores_b: Option<PathBuf>,
        omegas: Vec<f64>,
        far_grid: FarGrid,
    },
    Permtest {
        scores_a: PathBuf,
        scores_b: PathBuf,
        stat: Statistic,
        n: usize,
        subsample: usize,
        omega: f64,
        far_grid: FarGrid,
        seed: u64,
    },
    Kde {
        scores: PathBuf,
        split: ScoreSplit,
        grid_size: usize,
    },
    SweepDelta {
        train_data: PathBuf,
        dev_data: PathBuf,
        dev_trials: PathBuf,
        deltas: Vec<f64>,
        omega: f64,
        far_grid: FarGrid,
        train: TrainConfig,
    },
}

impl Plan {
    pub fn name(&self) -> &'static str {
        match self {
            Plan::Synth(_) => "synth",
            Plan::Trials { .. } => "trials",
            Plan::Score { .. } => "score",
            Plan::Train { .. } => "train",
            Plan::Transform { .. } => "transform",
            Plan::Eval { .. } => "eval",
            Plan::Permtest { .. } => "permtest",
            Plan::Kde { .. } => "kde",
            Plan::SweepDelta { .. } => "sweep-delta",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Plan::Synth(c) => Some(c.seed),
            Plan::Trials { seed, .. } | Plan::Permtest { seed, .. } => Some(*seed),
            Plan::Train { train, .. } | Plan::SweepDelta { train, .. } => Some(train.seed),
            _ => None,
        }
    }

    pub fn inputs(&self) -> Vec<PathBuf> {
        match self {
            Plan::Synth(_) => vec![],
            Plan::Trials { data, .. } | Plan::Train { data, .. } => vec![data.clone()],
            Plan::Score { data, trials } => vec![data.clone(), trials.clone()],
            Plan::Transform { checkpoint, data } => vec![checkpoint.clone(), data.clone()],
            Plan::Eval { scores_a, scores_b, .. } => std::iter::once(scores_a.clone()).chain(scores_b.clone()).collect(),
            Plan::Permtest { scores_a, scores_b, .. } => vec![scores_a.clone(), scores_b.clone()],
            Plan::Kde { scores, .. } => vec![scores.clone()],
            Plan::SweepDelta {
                train_data,
                dev_data,
                dev_trials,
                ..
            } => vec![train_data.clone(), dev_data.clone(), dev_trials.clone()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    #[serde(flatten)]
    pub plan: Plan,
    pub seed: Option<u64>,
    pub threads: usize,
    pub inputs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    /// Files written to `out_dir`, excluding the manifest itself.
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";
