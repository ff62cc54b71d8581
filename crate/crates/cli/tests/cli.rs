use std::path::Path;
use std::process::{Command, Output};

use fairsv::data::{load_embeddings, load_scores};
use fairsv::metrics::{au_fadr, default_far_grid, eer, fadr_curve, FadrParams, DEFAULT_OMEGAS};
use fairsv::scoring::partition_scores;
use serde_json::Value;

fn fairsv(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairsv"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) {
    let out = fairsv(args, cwd);
    assert!(
        out.status.success(),
        "fairsv {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_synth(cwd: &Path, out: &str, rho_g1: &str) {
    ok(
        &[
            "synth", "--dim", "12", "--speakers-g1", "10", "--speakers-g2", "10", "--utts-per-speaker", "5",
            "--rho-g1", rho_g1, "--rho-g2", "0", "--noise-sigma", "0.3", "--speaker-rank", "0", "--out", out,
        ],
        cwd,
    );
}

fn scored_synth(cwd: &Path, rho_g1: &str) {
    small_synth(cwd, "synth", rho_g1);
    ok(&["trials", "--data", "synth/embeddings.csv", "--max-per-category", "400", "--out", "trials"], cwd);
    ok(&["score", "--data", "synth/embeddings.csv", "--trials", "trials/trials.csv", "--out", "score"], cwd);
}

/// Scores where G2 repeats G1's values exactly.
fn symmetric_scores(path: &Path) {
    let mut text = String::from("enrol_utt,test_utt,label,group_tag,score\n");
    for (group, prefix) in [("g1", "a"), ("g2", "b")] {
        for i in 0..60 {
            let s = 0.5 + 0.5 * ((i * 37) % 60) as f64 / 60.0;
            text += &format!("{prefix}g{i},{prefix}h{i},genuine,{group},{s}\n");
        }
        for i in 0..400 {
            let s = 0.6 * ((i * 151) % 400) as f64 / 400.0;
            text += &format!("{prefix}i{i},{prefix}j{i},impostor,{group},{s}\n");
        }
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn bad_invocations_exit_with_usage_or_data_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(fairsv(&["synth"], dir).status.code(), Some(2));
    assert_eq!(fairsv(&["train", "--data", "x.csv", "--mode", "foo", "--out", "o"], dir).status.code(), Some(2));
    assert_eq!(fairsv(&["synth", "--rho-g1", "1.5", "--out", "o"], dir).status.code(), Some(2));
    assert_eq!(fairsv(&["--threads", "0", "synth", "--out", "o"], dir).status.code(), Some(2));

    std::fs::write(dir.join("bad.csv"), "enrol_utt,test_utt,label,group_tag,score\na,b,genuine,g1,nope\n").unwrap();
    assert_eq!(fairsv(&["eval", "--scores-a", "bad.csv", "--out", "e"], dir).status.code(), Some(1));
    assert_eq!(fairsv(&["kde", "--scores", "missing.csv", "--split", "genuine", "--out", "k"], dir).status.code(), Some(1));
}

#[test]
fn synth_is_loadable_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_synth(dir, "one", "0.4");
    small_synth(dir, "two", "0.4");
    let a = std::fs::read(dir.join("one/embeddings.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.join("two/embeddings.csv")).unwrap());

    let split = load_embeddings(dir.join("one/embeddings.csv")).unwrap();
    assert_eq!(split.len(), 100);
    assert_eq!(split.dim(), 12);

    let manifest = json(dir.join("one/manifest.json"));
    assert_eq!(manifest["command"], "synth");
    assert_eq!(manifest["config"]["rho_g1"], 0.4);
    assert_eq!(manifest["outputs"], serde_json::json!(["embeddings.csv"]));
}

#[test]
fn train_writes_checkpoint_history_and_resolved_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_synth(dir, "synth", "0.4");
    ok(&["train", "--data", "synth/embeddings.csv", "--mode", "nldr", "--arch", "compact", "--max-epochs", "2", "--out", "nldr"], dir);
    assert!(dir.join("nldr/checkpoint.json").is_file());
    let history = std::fs::read_to_string(dir.join("nldr/history.csv")).unwrap();
    assert!(history.lines().count() >= 2);

    ok(&["train", "--data", "synth/embeddings.csv", "--mode", "uai-at", "--delta", "70", "--arch", "compact", "--max-epochs", "1", "--out", "at"], dir);
    let manifest = json(dir.join("at/manifest.json"));
    assert_eq!(manifest["config"]["train"]["delta"], 70.0);
    assert_eq!(manifest["config"]["train"]["mode"], "uai-at");

    ok(&["transform", "--checkpoint", "at/checkpoint.json", "--data", "synth/embeddings.csv", "--out", "e1"], dir);
    assert_eq!(load_embeddings(dir.join("e1/embeddings.csv")).unwrap().dim(), 64);
}

#[test]
fn train_config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_synth(dir, "synth", "0.4");
    std::fs::write(dir.join("cfg.json"), r#"{"mode": "mtl", "delta": 3.0, "max_epochs": 1, "batch": 32}"#).unwrap();
    ok(&["train", "--data", "synth/embeddings.csv", "--config", "cfg.json", "--delta", "9", "--arch", "compact", "--out", "t"], dir);
    let train = &json(dir.join("t/manifest.json"))["config"]["train"];
    assert_eq!(train["mode"], "mtl");
    assert_eq!(train["delta"], 9.0);
    assert_eq!(train["batch"], 32);

    std::fs::write(dir.join("broken.json"), "{ not json").unwrap();
    let out = fairsv(&["train", "--data", "synth/embeddings.csv", "--config", "broken.json", "--out", "u"], dir);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_of_identical_groups_is_perfectly_fair() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    symmetric_scores(&dir.join("sym.csv"));
    ok(&["eval", "--scores-a", "sym.csv", "--out", "eval"], dir);
    let metrics = json(dir.join("eval/metrics.json"));
    let areas = metrics["systems"]["a"]["au_fadr"].as_array().unwrap();
    assert_eq!(areas.len(), DEFAULT_OMEGAS.len());
    for (entry, omega) in areas.iter().zip(DEFAULT_OMEGAS) {
        assert_eq!(entry["omega"].as_f64().unwrap(), omega);
        assert!((entry["au_fadr"].as_f64().unwrap() - 900.0).abs() < 1e-9);
        assert!(dir.join(format!("eval/fadr_a_omega{omega:.2}.csv")).is_file());
    }
    assert!(dir.join("eval/groups_a.csv").is_file());
    assert!(metrics["systems"].get("b").is_none());
}

#[test]
fn eval_matches_the_library() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    scored_synth(dir, "0.5");
    ok(&["eval", "--scores-a", "score/scores.csv", "--scores-b", "score/scores.csv", "--omega", "1,0.5", "--out", "eval"], dir);
    let metrics = json(dir.join("eval/metrics.json"));

    let partition = partition_scores(&load_scores(dir.join("score/scores.csv")).unwrap()).unwrap();
    let e = eer(&partition.pooled_genuine, &partition.pooled_impostor).unwrap();
    for tag in ["a", "b"] {
        let sys = &metrics["systems"][tag];
        assert_eq!(sys["eer"].as_f64().unwrap(), e.eer);
        assert_eq!(sys["n_trials"].as_u64().unwrap() as usize, partition.len());
        for (entry, omega) in sys["au_fadr"].as_array().unwrap().iter().zip([1.0, 0.5]) {
            let curve = fadr_curve(&partition, FadrParams::new(omega).unwrap(), &default_far_grid()).unwrap();
            assert_eq!(entry["au_fadr"].as_f64().unwrap(), au_fadr(&curve).unwrap());
        }
    }
    let csv = std::fs::read_to_string(dir.join("eval/fadr_a_omega0.50.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + default_far_grid().len());
}

#[test]
fn permtest_of_a_system_against_itself() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    scored_synth(dir, "0.5");
    for (out, stat) in [("p1", "aufadr"), ("p2", "aufadr"), ("p3", "eer")] {
        ok(&["permtest", "--scores-a", "score/scores.csv", "--scores-b", "score/scores.csv", "--stat", stat, "--n", "50", "--seed", "4", "--out", out], dir);
    }
    for out in ["p1", "p3"] {
        let report = json(dir.join(out).join("permtest.json"));
        assert_eq!(report["p_value"], 1.0);
        assert_eq!(report["observed_stat"], 0.0);
        assert_eq!(report["n_permutations"], 50);
    }
    assert_eq!(
        std::fs::read(dir.join("p1/permtest.json")).unwrap(),
        std::fs::read(dir.join("p2/permtest.json")).unwrap()
    );
}

#[test]
fn kde_overlap_reflects_group_skew() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    symmetric_scores(&dir.join("sym.csv"));
    ok(&["kde", "--scores", "sym.csv", "--split", "impostor", "--out", "sym"], dir);
    let csv = std::fs::read_to_string(dir.join("sym/kde_impostor.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,density_g1,density_g2"));
    assert_eq!(csv.lines().count(), 1 + 512);
    assert!(json(dir.join("sym/overlap_impostor.json"))["overlap_percent"].as_f64().unwrap() > 90.0);

    scored_synth(dir, "0.6");
    ok(&["kde", "--scores", "score/scores.csv", "--split", "impostor", "--grid-size", "256", "--out", "imp"], dir);
    ok(&["kde", "--scores", "score/scores.csv", "--split", "genuine", "--grid-size", "256", "--out", "gen"], dir);
    let imp = json(dir.join("imp/overlap_impostor.json"))["overlap_percent"].as_f64().unwrap();
    let gen = json(dir.join("gen/overlap_genuine.json"))["overlap_percent"].as_f64().unwrap();
    assert!(imp < gen, "impostor overlap {imp} vs genuine {gen}");
}

#[test]
fn sweep_with_one_delta_selects_it() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_synth(dir, "train", "0.4");
    ok(&["synth", "--dim", "12", "--speakers-g1", "5", "--speakers-g2", "5", "--utts-per-speaker", "4", "--speaker-rank", "0", "--seed", "3", "--out", "dev"], dir);
    ok(&["trials", "--data", "dev/embeddings.csv", "--out", "dev-trials"], dir);
    ok(
        &[
            "sweep-delta", "--data", "train/embeddings.csv", "--dev-data", "dev/embeddings.csv", "--dev-trials",
            "dev-trials/trials.csv", "--deltas", "25", "--arch", "compact", "--max-epochs", "1", "--out", "sweep",
        ],
        dir,
    );
    let csv = std::fs::read_to_string(dir.join("sweep/sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("delta,speaker_acc,group_acc,eer,au_fadr"));
    assert_eq!(lines.count(), 1);
    assert_eq!(json(dir.join("sweep/selected.json"))["delta"], 25.0);
    assert!(dir.join("sweep/checkpoint.json").is_file());
}
