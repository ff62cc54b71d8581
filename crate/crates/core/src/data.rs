//! Embeddings, trial lists and score files.
//!
//! Three CSV formats are used throughout the toolkit:
//!
//! * embeddings: `utt_id,speaker_id,group,e0,...,e{D-1}`
//! * trials: `enrol_utt,test_utt,label,group_tag`
//! * scores: the trial columns followed by `score`
//!
//! Reals are written with 17 significant digits so that a save/load cycle
//! reproduces every finite `f64` bit for bit.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    G1,
    G2,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::G1, Group::G2];

    pub fn index(self) -> usize {
        match self {
            Group::G1 => 0,
            Group::G2 => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Group> {
        match i {
            0 => Some(Group::G1),
            1 => Some(Group::G2),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::G1 => "g1",
            Group::G2 => "g2",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "g1" => Ok(Group::G1),
            "g2" => Ok(Group::G2),
            other => Err(format!("unknown group `{other}` (expected g1 or g2)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Genuine,
    Impostor,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Genuine => "genuine",
            Label::Impostor => "impostor",
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "genuine" => Ok(Label::Genuine),
            "impostor" => Ok(Label::Impostor),
            other => Err(format!("unknown label `{other}` (expected genuine or impostor)")),
        }
    }
}

/// Group membership of a trial. `Cross` trials pair utterances of different
/// groups and are excluded from every per-group computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupTag {
    G1,
    G2,
    Cross,
}

impl GroupTag {
    pub fn of(a: Group, b: Group) -> GroupTag {
        match (a, b) {
            (Group::G1, Group::G1) => GroupTag::G1,
            (Group::G2, Group::G2) => GroupTag::G2,
            _ => GroupTag::Cross,
        }
    }

    pub fn group(self) -> Option<Group> {
        match self {
            GroupTag::G1 => Some(Group::G1),
            GroupTag::G2 => Some(Group::G2),
            GroupTag::Cross => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GroupTag::G1 => "g1",
            GroupTag::G2 => "g2",
            GroupTag::Cross => "cross",
        }
    }
}

impl From<Group> for GroupTag {
    fn from(g: Group) -> Self {
        match g {
            Group::G1 => GroupTag::G1,
            Group::G2 => GroupTag::G2,
        }
    }
}

impl FromStr for GroupTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "g1" => Ok(GroupTag::G1),
            "g2" => Ok(GroupTag::G2),
            "cross" => Ok(GroupTag::Cross),
            other => Err(format!("unknown group tag `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub utt_id: String,
    pub speaker_id: String,
    pub group: Group,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trial {
    pub enrol_utt: String,
    pub test_utt: String,
    pub label: Label,
    pub group_tag: GroupTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTrial {
    pub trial: Trial,
    pub score: f64,
}

/// A validated collection of embeddings with speaker and group indices.
///
/// Records keep their insertion order. The indices are rebuilt from the
/// records on construction, so they always agree with them.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    dim: usize,
    records: Vec<EmbeddingRecord>,
    utt_index: HashMap<String, usize>,
    speaker_index: BTreeMap<String, Vec<String>>,
    group_index: BTreeMap<Group, Vec<String>>,
}

impl DatasetSplit {
    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new())
    }

    /// Validates `records` and builds the indices.
    ///
    /// Fails on a dimension other than `dim`, non-finite values, duplicate
    /// utterance ids, or a speaker listed under both groups.
    pub fn new(dim: usize, records: Vec<EmbeddingRecord>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidData("embedding dimension must be at least 1".into()));
        }
        let mut utt_index = HashMap::with_capacity(records.len());
        let mut speaker_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut speaker_group: HashMap<&str, Group> = HashMap::new();
        let mut group_index: BTreeMap<Group, Vec<String>> = BTreeMap::new();

        for (i, rec) in records.iter().enumerate() {
            check_record(rec, dim)?;
            if utt_index.insert(rec.utt_id.clone(), i).is_some() {
                return Err(Error::InvalidData(format!("duplicate utt_id `{}`", rec.utt_id)));
            }
            match speaker_group.get(rec.speaker_id.as_str()) {
                Some(&g) if g != rec.group => {
                    return Err(Error::InvalidData(format!(
                        "speaker `{}` appears in both groups",
                        rec.speaker_id
                    )))
                }
                Some(_) => {}
                None => {
                    speaker_group.insert(&rec.speaker_id, rec.group);
                    group_index.entry(rec.group).or_default().push(rec.speaker_id.clone());
                }
            }
            speaker_index.entry(rec.speaker_id.clone()).or_default().push(rec.utt_id.clone());
        }
        for speakers in group_index.values_mut() {
            speakers.sort();
        }

        Ok(Self {
            dim,
            records,
            utt_index,
            speaker_index,
            group_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<EmbeddingRecord> {
        self.records
    }

    pub fn get(&self, utt_id: &str) -> Option<&EmbeddingRecord> {
        self.utt_index.get(utt_id).map(|&i| &self.records[i])
    }

    /// Speaker id → utterance ids, in record order.
    pub fn speaker_index(&self) -> &BTreeMap<String, Vec<String>> {
        &self.speaker_index
    }

    /// Group → speaker ids, sorted.
    pub fn group_index(&self) -> &BTreeMap<Group, Vec<String>> {
        &self.group_index
    }

    pub fn speakers_in(&self, group: Group) -> &[String] {
        self.group_index.get(&group).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn num_speakers(&self) -> usize {
        self.speaker_index.len()
    }

    /// Keeps only the records of the given speakers.
    pub fn filter_speakers(&self, keep: &HashSet<&str>) -> Result<DatasetSplit> {
        let records = self
            .records
            .iter()
            .filter(|r| keep.contains(r.speaker_id.as_str()))
            .cloned()
            .collect();
        DatasetSplit::new(self.dim, records)
    }

    /// Same utterances with replacement vectors of a possibly different
    /// dimension, e.g. after an embedding transform.
    pub fn with_vectors(&self, dim: usize, vectors: Vec<Vec<f64>>) -> Result<DatasetSplit> {
        if vectors.len() != self.records.len() {
            return Err(Error::DimensionMismatch {
                expected: self.records.len(),
                actual: vectors.len(),
            });
        }
        let records = self
            .records
            .iter()
            .zip(vectors)
            .map(|(r, vector)| EmbeddingRecord {
                vector,
                ..r.clone()
            })
            .collect();
        DatasetSplit::new(dim, records)
    }

    /// Checks that a trial resolves in this split and that its label and
    /// group tag agree with the speakers and groups of its utterances.
    pub fn check_trial(&self, trial: &Trial) -> Result<()> {
        let a = self
            .get(&trial.enrol_utt)
            .ok_or_else(|| Error::UnknownUtterance(trial.enrol_utt.clone()))?;
        let b = self
            .get(&trial.test_utt)
            .ok_or_else(|| Error::UnknownUtterance(trial.test_utt.clone()))?;
        let same = a.speaker_id == b.speaker_id;
        let expected_label = if same { Label::Genuine } else { Label::Impostor };
        if trial.label != expected_label {
            return Err(Error::InvalidData(format!(
                "trial {} / {} is labelled {} but the speakers say {}",
                trial.enrol_utt,
                trial.test_utt,
                trial.label.as_str(),
                expected_label.as_str()
            )));
        }
        let tag = GroupTag::of(a.group, b.group);
        if trial.group_tag != tag {
            return Err(Error::InvalidData(format!(
                "trial {} / {} is tagged {} but the utterances say {}",
                trial.enrol_utt,
                trial.test_utt,
                trial.group_tag.as_str(),
                tag.as_str()
            )));
        }
        Ok(())
    }
}

fn check_record(rec: &EmbeddingRecord, dim: usize) -> Result<()> {
    if rec.vector.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: rec.vector.len(),
        });
    }
    if let Some(v) = rec.vector.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidData(format!(
            "utterance `{}` has non-finite value {v}",
            rec.utt_id
        )));
    }
    if rec.utt_id.is_empty() || rec.speaker_id.is_empty() {
        return Err(Error::InvalidData("empty utt_id or speaker_id".into()));
    }
    Ok(())
}

/// Formats a real with 17 significant digits.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().from_writer(file))
}

fn parse_real(path: &Path, line: u64, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_err(path, line, format!("`{field}` is not a real number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value `{field}`")));
    }
    Ok(v)
}

/// Reads an embedding CSV. The dimension is the number of header columns
/// after `group`; every row must match it.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<DatasetSplit> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let fixed = ["utt_id", "speaker_id", "group"];
    if header.len() < 4 || header.iter().take(3).ne(fixed.iter().copied()) {
        return Err(parse_err(
            path,
            1,
            "header must be utt_id,speaker_id,group,e0,...,e{D-1}",
        ));
    }
    let dim = header.len() - 3;

    let mut records = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != dim + 3 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} columns, found {}", dim + 3, row.len()),
            ));
        }
        let utt_id = row[0].to_string();
        if let Some(first) = seen.insert(utt_id.clone(), line) {
            return Err(parse_err(
                path,
                line,
                format!("duplicate utt_id `{utt_id}` (first seen on line {first})"),
            ));
        }
        let group = row[2].parse::<Group>().map_err(|m| parse_err(path, line, m))?;
        let vector = row
            .iter()
            .skip(3)
            .map(|f| parse_real(path, line, f))
            .collect::<Result<Vec<_>>>()?;
        records.push(EmbeddingRecord {
            utt_id,
            speaker_id: row[1].to_string(),
            group,
            vector,
        });
    }
    DatasetSplit::new(dim, records)
}

pub fn save_embeddings(split: &DatasetSplit, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    let mut header = vec!["utt_id".to_string(), "speaker_id".into(), "group".into()];
    header.extend((0..split.dim()).map(|i| format!("e{i}")));
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for rec in split.records() {
        let mut row = vec![rec.utt_id.clone(), rec.speaker_id.clone(), rec.group.to_string()];
        row.extend(rec.vector.iter().map(|&v| format_real(v)));
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_trial(path: &Path, line: u64, row: &csv::StringRecord) -> Result<Trial> {
    Ok(Trial {
        enrol_utt: row[0].to_string(),
        test_utt: row[1].to_string(),
        label: row[2].parse().map_err(|m: String| parse_err(path, line, m))?,
        group_tag: row[3].parse().map_err(|m: String| parse_err(path, line, m))?,
    })
}

fn trial_fields(t: &Trial) -> [&str; 4] {
    [&t.enrol_utt, &t.test_utt, t.label.as_str(), t.group_tag.as_str()]
}

const TRIAL_HEADER: [&str; 4] = ["enrol_utt", "test_utt", "label", "group_tag"];

pub fn load_trials(path: impl AsRef<Path>) -> Result<Vec<Trial>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    if header.iter().ne(TRIAL_HEADER.iter().copied()) {
        return Err(parse_err(path, 1, "header must be enrol_utt,test_utt,label,group_tag"));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 4 {
            return Err(parse_err(path, line, format!("expected 4 columns, found {}", row.len())));
        }
        out.push(parse_trial(path, line, &row)?);
    }
    Ok(out)
}

pub fn save_trials(trials: &[Trial], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(TRIAL_HEADER).map_err(|e| Error::csv(path, e))?;
    for t in trials {
        w.write_record(trial_fields(t)).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<Vec<ScoredTrial>> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let expected = TRIAL_HEADER.iter().copied().chain(["score"]);
    if header.iter().ne(expected) {
        return Err(parse_err(
            path,
            1,
            "header must be enrol_utt,test_utt,label,group_tag,score",
        ));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 5 {
            return Err(parse_err(path, line, format!("expected 5 columns, found {}", row.len())));
        }
        out.push(ScoredTrial {
            trial: parse_trial(path, line, &row)?,
            score: parse_real(path, line, &row[4])?,
        });
    }
    Ok(out)
}

pub fn save_scores(scored: &[ScoredTrial], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(TRIAL_HEADER.iter().copied().chain(["score"]))
        .map_err(|e| Error::csv(path, e))?;
    for s in scored {
        let score = format_real(s.score);
        let [a, b, c, d] = trial_fields(&s.trial);
        w.write_record([a, b, c, d, score.as_str()])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Builds same-group genuine and impostor trials.
///
/// For each group, genuine candidates are all unordered pairs of distinct
/// utterances of one speaker and impostor candidates are all unordered pairs
/// of utterances from two different speakers of that group. Cross-group
/// pairs are never produced. When a (group, label) cell has more than
/// `max_per_category` candidates, a seeded uniform subset of that size is
/// kept. Output order: G1 genuine, G1 impostor, G2 genuine, G2 impostor,
/// each cell in canonical pair order.
pub fn generate_trials(split: &DatasetSplit, max_per_category: usize, seed: u64) -> Result<Vec<Trial>> {
    let mut trials = Vec::new();
    for (cell, group) in Group::ALL.into_iter().enumerate() {
        // (speaker index, utterance id) for every utterance of the group
        let speakers = split.speakers_in(group);
        let utts: Vec<(usize, &str)> = speakers
            .iter()
            .enumerate()
            .flat_map(|(si, spk)| {
                split.speaker_index()[spk].iter().map(move |u| (si, u.as_str()))
            })
            .collect();

        let genuine_total: u64 = speakers
            .iter()
            .map(|s| choose2(split.speaker_index()[s].len() as u64))
            .sum();
        let impostor_total = choose2(utts.len() as u64) - genuine_total;
        if genuine_total == 0 {
            return Err(Error::Insufficient(format!(
                "group {group} has no speaker with two or more utterances for genuine trials"
            )));
        }
        if impostor_total == 0 {
            return Err(Error::Insufficient(format!(
                "group {group} needs at least two speakers for impostor trials"
            )));
        }

        for (k, label) in [Label::Genuine, Label::Impostor].into_iter().enumerate() {
            let total = if label == Label::Genuine { genuine_total } else { impostor_total };
            let mut rng = rng::derive(seed, rng::stream::TRIALS, (cell * 2 + k) as u64);
            let pairs = select_pairs(&utts, label, total, max_per_category, &mut rng);
            trials.extend(pairs.into_iter().map(|(i, j)| Trial {
                enrol_utt: utts[i].1.to_string(),
                test_utt: utts[j].1.to_string(),
                label,
                group_tag: group.into(),
            }));
        }
    }
    Ok(trials)
}

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Picks up to `max` unordered pairs `(i, j)`, `i < j`, of the requested
/// label. Small candidate sets are enumerated and subsampled by index;
/// large ones are rejection sampled, which stays cheap when `max` is far
/// below the number of candidates.
fn select_pairs(
    utts: &[(usize, &str)],
    label: Label,
    total: u64,
    max: usize,
    rng: &mut rng::Rng,
) -> Vec<(usize, usize)> {
    let wanted = |i: usize, j: usize| (utts[i].0 == utts[j].0) == (label == Label::Genuine);
    let n = utts.len();

    if total <= (max as u64).saturating_mul(4) || total <= 1 << 16 {
        let all: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| wanted(i, j))
            .collect();
        if all.len() <= max {
            return all;
        }
        let mut idx = sample(rng, all.len(), max).into_vec();
        idx.sort_unstable();
        return idx.into_iter().map(|k| all[k]).collect();
    }

    use rand::Rng;
    let mut chosen = HashSet::with_capacity(max);
    while chosen.len() < max {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j || !wanted(i, j) {
            continue;
        }
        chosen.insert((i.min(j), i.max(j)));
    }
    let mut out: Vec<_> = chosen.into_iter().collect();
    out.sort_unstable();
    out
}

/// Splits speakers into two disjoint sets, taking `second_fraction` of each
/// group's speakers (rounded) for the second set. Returns `(first, second)`.
pub fn split_speakers(split: &DatasetSplit, second_fraction: f64, seed: u64) -> Result<(DatasetSplit, DatasetSplit)> {
    if !(0.0..=1.0).contains(&second_fraction) {
        return Err(Error::param(format!("fraction {second_fraction} outside [0, 1]")));
    }
    let (mut first, mut second) = (HashSet::new(), HashSet::new());
    for group in Group::ALL {
        let speakers = split.speakers_in(group);
        let k = (second_fraction * speakers.len() as f64).round() as usize;
        let mut rng = rng::derive(seed, rng::stream::SPLIT, 1 << 32 | group.index() as u64);
        let picked: HashSet<usize> = sample(&mut rng, speakers.len(), k).into_iter().collect();
        for (i, s) in speakers.iter().enumerate() {
            if picked.contains(&i) {
                second.insert(s.as_str());
            } else {
                first.insert(s.as_str());
            }
        }
    }
    Ok((split.filter_speakers(&first)?, split.filter_speakers(&second)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(utt: &str, spk: &str, group: Group, vector: Vec<f64>) -> EmbeddingRecord {
        EmbeddingRecord {
            utt_id: utt.into(),
            speaker_id: spk.into(),
            group,
            vector,
        }
    }

    fn toy_split(speakers_per_group: usize, utts_per_speaker: usize) -> DatasetSplit {
        let mut records = Vec::new();
        for g in Group::ALL {
            for s in 0..speakers_per_group {
                for u in 0..utts_per_speaker {
                    records.push(rec(
                        &format!("{g}-s{s}-u{u}"),
                        &format!("{g}-s{s}"),
                        g,
                        vec![s as f64 + 1.0, u as f64],
                    ));
                }
            }
        }
        DatasetSplit::new(2, records).unwrap()
    }

    #[test]
    fn load_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.csv");
        std::fs::write(
            &path,
            "utt_id,speaker_id,group,e0,e1\na,s1,g1,1.0,2.0\nb,s1,g1,0.5,0.25\nc,s2,g2,-1,3e-3\n",
        )
        .unwrap();
        let split = load_embeddings(&path).unwrap();
        assert_eq!(split.len(), 3);
        assert_eq!(split.dim(), 2);
        assert_eq!(split.num_speakers(), 2);
        assert_eq!(split.speaker_index()["s1"], vec!["a", "b"]);
        assert_eq!(split.speakers_in(Group::G2), ["s2"]);
    }

    #[test]
    fn short_row_reports_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.csv");
        std::fs::write(&path, "utt_id,speaker_id,group,e0,e1\na,s1,g1,1,2\nb,s1,g1,1\n").unwrap();
        match load_embeddings(&path).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn duplicate_utt_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.csv");
        std::fs::write(&path, "utt_id,speaker_id,group,e0\na,s1,g1,1\na,s2,g1,2\n").unwrap();
        let err = load_embeddings(&path).unwrap_err();
        assert!(err.to_string().contains("duplicate utt_id"), "{err}");
    }

    #[test]
    fn non_finite_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.csv");
        std::fs::write(&path, "utt_id,speaker_id,group,e0\na,s1,g1,NaN\n").unwrap();
        assert!(matches!(load_embeddings(&path), Err(Error::Parse { line: 2, .. })));
        let err = DatasetSplit::new(1, vec![rec("a", "s", Group::G1, vec![f64::INFINITY])]);
        assert!(err.is_err());
    }

    #[test]
    fn speaker_in_two_groups_rejected() {
        let err = DatasetSplit::new(
            1,
            vec![rec("a", "s", Group::G1, vec![1.0]), rec("b", "s", Group::G2, vec![1.0])],
        );
        assert!(err.is_err());
    }

    #[test]
    fn empty_split_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.csv");
        save_embeddings(&DatasetSplit::empty(3).unwrap(), &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "utt_id,speaker_id,group,e0,e1,e2\n");
        let back = load_embeddings(&path).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.dim(), 3);
    }

    #[test]
    fn hundred_rows_of_dim_64() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.csv");
        let records = (0..100)
            .map(|i| {
                rec(
                    &format!("u{i}"),
                    &format!("s{}", i % 7),
                    if i % 7 < 3 { Group::G1 } else { Group::G2 },
                    (0..64).map(|k| (i * 64 + k) as f64 / 3.0).collect(),
                )
            })
            .collect();
        save_embeddings(&DatasetSplit::new(64, records).unwrap(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 101);
    }

    #[test]
    fn trials_for_two_speakers_two_utts() {
        let split = toy_split(2, 2);
        let trials = generate_trials(&split, 100, 0).unwrap();
        // Hand enumeration per group: each speaker contributes C(2,2) = 1
        // genuine pair; 2 x 2 cross-speaker utterance pairs are impostors.
        for g in [GroupTag::G1, GroupTag::G2] {
            let genuine = trials.iter().filter(|t| t.group_tag == g && t.label == Label::Genuine);
            let impostor = trials.iter().filter(|t| t.group_tag == g && t.label == Label::Impostor);
            assert_eq!(genuine.count(), 2);
            assert_eq!(impostor.count(), 4);
        }
        assert_eq!(trials.len(), 12);
        assert!(trials.iter().all(|t| t.group_tag != GroupTag::Cross));
        for t in &trials {
            split.check_trial(t).unwrap();
            assert_ne!(t.enrol_utt, t.test_utt);
        }
    }

    #[test]
    fn single_utterance_speaker_cannot_give_genuine_trials() {
        let split = DatasetSplit::new(
            1,
            vec![
                rec("a", "s1", Group::G1, vec![1.0]),
                rec("b", "s2", Group::G2, vec![1.0]),
                rec("c", "s2", Group::G2, vec![1.0]),
            ],
        )
        .unwrap();
        assert!(matches!(generate_trials(&split, 10, 0), Err(Error::Insufficient(_))));
    }

    #[test]
    fn trials_are_seed_deterministic_and_capped() {
        let split = toy_split(6, 5);
        let a = generate_trials(&split, 7, 42).unwrap();
        let b = generate_trials(&split, 7, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4 * 7);
        let c = generate_trials(&split, 7, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn large_cells_use_rejection_sampling() {
        let split = toy_split(60, 10);
        let trials = generate_trials(&split, 500, 3).unwrap();
        assert_eq!(trials.len(), 2000);
        let unique: HashSet<_> = trials.iter().collect();
        assert_eq!(unique.len(), trials.len());
        for t in &trials {
            split.check_trial(t).unwrap();
        }
    }

    #[test]
    fn scores_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let scored = vec![
            ScoredTrial {
                trial: Trial {
                    enrol_utt: "a".into(),
                    test_utt: "b".into(),
                    label: Label::Genuine,
                    group_tag: GroupTag::G1,
                },
                score: 0.1 + 0.2,
            },
            ScoredTrial {
                trial: Trial {
                    enrol_utt: "c".into(),
                    test_utt: "d".into(),
                    label: Label::Impostor,
                    group_tag: GroupTag::G2,
                },
                score: -1.0 / 3.0,
            },
        ];
        save_scores(&scored, &path).unwrap();
        assert_eq!(load_scores(&path).unwrap(), scored);
    }
}
