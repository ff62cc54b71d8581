use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use fairsv::data::{generate_trials, load_embeddings, load_scores, load_trials, save_embeddings, save_scores, save_trials};
use fairsv::metrics::{
    au_fadr, eer, fadr_curve, far_grid, group_error_curves, write_fadr_curve_csv, write_group_curves_csv, FadrParams,
};
use fairsv::scoring::{partition_scores, score_trials, ScorePartition};
use fairsv::stats::{kde, overlap_percent, perm_test_aufadr, perm_test_eer, write_kde_pair_csv, Statistic};
use fairsv::synth::generate;
use fairsv::uai::{
    delta_sweep, load_checkpoint, save_checkpoint, train, transform, write_history_csv, write_sweep_csv, LabeledSet,
    UaiModel,
};
use serde::Serialize;

use crate::plan::{FarGrid, Plan, ScoreSplit};

/// Executes a resolved plan, writing into `out`. Returns the written file
/// names in a fixed order.
pub fn execute(plan: &Plan, out: &Path) -> Result<Vec<String>> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    let mut file = |name: String| {
        let path = out.join(&name);
        written.push(name);
        path
    };
    match plan {
        Plan::Synth(config) => {
            let split = generate(config)?;
            save_embeddings(&split, file("embeddings.csv".into()))?;
        }
        Plan::Trials {
            data,
            max_per_category,
            seed,
        } => {
            let split = load_embeddings(data)?;
            let trials = generate_trials(&split, *max_per_category, *seed)?;
            save_trials(&trials, file("trials.csv".into()))?;
        }
        Plan::Score { data, trials } => {
            let split = load_embeddings(data)?;
            let trials = load_trials(trials)?;
            save_scores(&score_trials(&split, &trials)?, file("scores.csv".into()))?;
        }
        Plan::Train { data, train: config } => {
            let split = load_embeddings(data)?;
            let (set, _) = LabeledSet::from_split(&split)?;
            let model = UaiModel::new(config.mode, set.x.ncols(), set.n_speakers, &config.arch, config.seed)?;
            let outcome = train(model, &set, config)?;
            save_checkpoint(&outcome.model, file("checkpoint.json".into()))?;
            write_history_csv(&outcome.history, file("history.csv".into()))?;
        }
        Plan::Transform { checkpoint, data } => {
            let model = load_checkpoint(checkpoint)?;
            let split = load_embeddings(data)?;
            save_embeddings(&transform(&model, &split)?, file("embeddings.csv".into()))?;
        }
        Plan::Eval {
            scores_a,
            scores_b,
            omegas,
            far_grid: g,
        } => {
            let grid = grid_of(g)?;
            let mut systems = BTreeMap::new();
            for (tag, path) in std::iter::once(("a", scores_a)).chain(scores_b.iter().map(|p| ("b", p))) {
                let partition = partition_scores(&load_scores(path)?)?;
                let e = eer(&partition.pooled_genuine, &partition.pooled_impostor)?;
                let mut per_omega = Vec::new();
                for &omega in omegas {
                    let curve = fadr_curve(&partition, FadrParams::new(omega)?, &grid)?;
                    write_fadr_curve_csv(&curve, file(format!("fadr_{tag}_omega{omega:.2}.csv")))?;
                    per_omega.push(OmegaArea {
                        omega,
                        au_fadr: au_fadr(&curve)?,
                    });
                }
                write_group_curves_csv(&group_error_curves(&partition, &grid)?, file(format!("groups_{tag}.csv")))?;
                systems.insert(
                    tag,
                    SystemMetrics {
                        n_trials: partition.len(),
                        eer: e.eer,
                        eer_threshold: e.tau,
                        au_fadr: per_omega,
                    },
                );
            }
            write_json(&EvalReport { far_grid: *g, systems }, file("metrics.json".into()))?;
        }
        Plan::Permtest {
            scores_a,
            scores_b,
            stat,
            n,
            subsample,
            omega,
            far_grid: g,
            seed,
        } => {
            let a = load_scores(scores_a)?;
            let b = load_scores(scores_b)?;
            let report = match stat {
                Statistic::AuFadr => {
                    perm_test_aufadr(&a, &b, FadrParams::new(*omega)?, &grid_of(g)?, *n, *subsample, *seed)?
                }
                Statistic::Eer => perm_test_eer(&a, &b, *n, *seed)?,
            };
            write_json(&report, file("permtest.json".into()))?;
        }
        Plan::Kde {
            scores,
            split,
            grid_size,
        } => {
            let partition = partition_scores(&load_scores(scores)?)?;
            let (g1, g2) = cells(&partition, *split);
            let k1 = kde(g1, *grid_size)?;
            let k2 = kde(g2, *grid_size)?;
            write_kde_pair_csv(&k1, &k2, file(format!("kde_{}.csv", split.as_str())))?;
            let report = OverlapReport {
                split: *split,
                overlap_percent: overlap_percent(&k1, &k2),
                n_g1: g1.len(),
                n_g2: g2.len(),
                bandwidth_g1: k1.bandwidth,
                bandwidth_g2: k2.bandwidth,
            };
            write_json(&report, file(format!("overlap_{}.json", split.as_str())))?;
        }
        Plan::SweepDelta {
            train_data,
            dev_data,
            dev_trials,
            deltas,
            omega,
            far_grid: g,
            train: config,
        } => {
            let train_split = load_embeddings(train_data)?;
            let dev_split = load_embeddings(dev_data)?;
            let trials = load_trials(dev_trials)?;
            let outcome = delta_sweep(
                &train_split,
                &dev_split,
                &trials,
                config,
                deltas,
                FadrParams::new(*omega)?,
                &grid_of(g)?,
            )?;
            write_sweep_csv(&outcome.rows, file("sweep.csv".into()))?;
            save_checkpoint(&outcome.model, file("checkpoint.json".into()))?;
            write_history_csv(&outcome.history, file("history.csv".into()))?;
            write_json(&outcome.rows[outcome.selected], file("selected.json".into()))?;
        }
    }
    Ok(written)
}

fn grid_of(g: &FarGrid) -> Result<Vec<f64>> {
    Ok(far_grid(g.min, g.max, g.step)?)
}

fn cells(p: &ScorePartition, split: ScoreSplit) -> (&[f64], &[f64]) {
    match split {
        ScoreSplit::Genuine => (&p.genuine_g1, &p.genuine_g2),
        ScoreSplit::Impostor => (&p.impostor_g1, &p.impostor_g2),
    }
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct OmegaArea {
    omega: f64,
    au_fadr: f64,
}

#[derive(Serialize)]
struct SystemMetrics {
    n_trials: usize,
    eer: f64,
    eer_threshold: f64,
    au_fadr: Vec<OmegaArea>,
}

#[derive(Serialize)]
struct EvalReport {
    far_grid: FarGrid,
    systems: BTreeMap<&'static str, SystemMetrics>,
}

#[derive(Serialize)]
struct OverlapReport {
    split: ScoreSplit,
    overlap_percent: f64,
    n_g1: usize,
    n_g2: usize,
    bandwidth_g1: f64,
    bandwidth_g2: f64,
}
