//! Training pairs for the two generator tasks and the schedule manifest that
//! tells a trainer how to alternate between them.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{inject_markers, Corpus, MarkerScheme, REInstance, Role};
use crate::pattern::{match_targets, MatchConfig, PatternIndex};
use crate::restructure::{restructure, RuleSet};
use crate::seed::keyed_rng;

#[derive(Debug, Error)]
pub enum PairgenError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PairgenError + '_ {
    move |source| PairgenError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Restructure,
    Approximate,
}

/// One seq2seq training example.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub task: Task,
    pub source_text: String,
    pub hint: Option<String>,
    pub target_text: String,
    pub relation: String,
    pub source_id: String,
    pub target_id: String,
    pub pattern_distance: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationPairCounts {
    pub restructure: usize,
    pub approximate: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    /// Restructuring pairs (one per training sentence).
    pub restructure_count: usize,
    /// Pattern-approximation pairs.
    pub approximate_count: usize,
    pub per_relation: BTreeMap<String, RelationPairCounts>,
}

impl PairStats {
    fn from_records(records: &[PairRecord]) -> Self {
        let mut stats = PairStats::default();
        for r in records {
            let slot = stats.per_relation.entry(r.relation.clone()).or_default();
            match r.task {
                Task::Restructure => {
                    stats.restructure_count += 1;
                    slot.restructure += 1;
                }
                Task::Approximate => {
                    stats.approximate_count += 1;
                    slot.approximate += 1;
                }
            }
        }
        stats
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairSet {
    pub records: Vec<PairRecord>,
    pub stats: PairStats,
}

impl PairSet {
    pub fn new(records: Vec<PairRecord>) -> Self {
        let stats = PairStats::from_records(&records);
        PairSet { records, stats }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn merge(mut self, other: PairSet) -> PairSet {
        self.records.extend(other.records);
        PairSet::new(self.records)
    }

    pub fn task(&self, task: Task) -> impl Iterator<Item = &PairRecord> {
        self.records.iter().filter(move |r| r.task == task)
    }
}

/// How the entity hint is drawn from the target sentence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HintPolicy {
    /// Subject or object with equal probability, seeded per pair.
    #[default]
    Uniform,
    Subject,
    Object,
}

impl FromStr for HintPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(HintPolicy::Uniform),
            "subject" => Ok(HintPolicy::Subject),
            "object" => Ok(HintPolicy::Object),
            other => Err(format!("unknown hint policy `{other}`")),
        }
    }
}

fn merge_key(r: &PairRecord) -> (&str, &str, &str) {
    (&r.relation, &r.source_id, &r.target_id)
}

/// One restructuring pair per instance: the marked sentence and its
/// reordered permutation.
pub fn build_restructure_pairs(corpus: &Corpus, rules: &RuleSet, scheme: &MarkerScheme) -> PairSet {
    let mut records: Vec<PairRecord> = corpus
        .instances
        .par_iter()
        .map(|inst| PairRecord {
            task: Task::Restructure,
            source_text: inject_markers(inst, scheme),
            hint: None,
            target_text: inject_markers(&restructure(inst, rules), scheme),
            relation: inst.relation.clone(),
            source_id: inst.id.clone(),
            target_id: inst.id.clone(),
            pattern_distance: None,
        })
        .collect();
    records.sort_by(|a, b| merge_key(a).cmp(&merge_key(b)));
    PairSet::new(records)
}

fn pick_hint(target: &REInstance, policy: HintPolicy, seed: u64, source_id: &str) -> String {
    let role = match policy {
        HintPolicy::Subject => Role::Subject,
        HintPolicy::Object => Role::Object,
        HintPolicy::Uniform => {
            let mut rng = keyed_rng(seed, &["hint", source_id, &target.id]);
            if rng.gen_bool(0.5) {
                Role::Subject
            } else {
                Role::Object
            }
        }
    };
    target.surface(target.span(role))
}

/// One approximation pair per `(source, target)` returned by
/// [`match_targets`], with an entity hint taken from the target.
pub fn build_approx_pairs(
    corpus: &Corpus,
    index: &PatternIndex,
    cfg: &MatchConfig,
    hint_policy: HintPolicy,
    seed: u64,
    scheme: &MarkerScheme,
) -> PairSet {
    let mut records: Vec<PairRecord> = corpus
        .instances
        .par_iter()
        .flat_map_iter(|source| {
            let targets = match_targets(&source.id, index, cfg).unwrap_or_default();
            let source_text = inject_markers(source, scheme);
            targets.into_iter().map(move |(target_id, distance)| {
                let target = corpus.get(&target_id).expect("index built from this corpus");
                PairRecord {
                    task: Task::Approximate,
                    source_text: source_text.clone(),
                    hint: Some(pick_hint(target, hint_policy, seed, &source.id)),
                    target_text: inject_markers(target, scheme),
                    relation: source.relation.clone(),
                    source_id: source.id.clone(),
                    target_id,
                    pattern_distance: Some(distance),
                }
            })
        })
        .collect();
    records.sort_by(|a, b| merge_key(a).cmp(&merge_key(b)));
    PairSet::new(records)
}

/// How a trainer should alternate the two tasks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleManifest {
    pub iterations: usize,
    pub epochs_per_task: usize,
    pub task_order: Vec<Task>,
    /// Pair file names, relative to the manifest's directory.
    pub restructure_pairs: String,
    pub approximate_pairs: String,
    pub lambda: usize,
    pub seed: u64,
    pub hint_injection: String,
    pub markers: MarkerScheme,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Default for ScheduleManifest {
    fn default() -> Self {
        ScheduleManifest {
            iterations: 1,
            epochs_per_task: 5,
            task_order: vec![Task::Restructure, Task::Approximate],
            restructure_pairs: "restructure.jsonl".into(),
            approximate_pairs: "approximate.jsonl".into(),
            lambda: MatchConfig::default().lambda,
            seed: 0,
            hint_injection: "prepend".into(),
            markers: MarkerScheme::default(),
        }
    }
}

impl ScheduleManifest {
    pub fn validate(&self) -> Result<(), PairgenError> {
        if self.iterations < 1 {
            return Err(PairgenError::Invalid("iterations must be at least 1".into()));
        }
        if self.epochs_per_task < 1 {
            return Err(PairgenError::Invalid("epochs_per_task must be at least 1".into()));
        }
        Ok(())
    }

    fn pair_file(&self, task: Task) -> &str {
        match task {
            Task::Restructure => &self.restructure_pairs,
            Task::Approximate => &self.approximate_pairs,
        }
    }
}

fn write_jsonl<'a>(path: &Path, records: impl Iterator<Item = &'a PairRecord>) -> Result<(), PairgenError> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("records serialize");
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(io_err(path))
}

/// Writes both pair files and the manifest into `out_dir`.
pub fn emit(pairs: &PairSet, manifest: &ScheduleManifest, out_dir: &Path) -> Result<(), PairgenError> {
    manifest.validate()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for task in [Task::Restructure, Task::Approximate] {
        write_jsonl(&out_dir.join(manifest.pair_file(task)), pairs.task(task))?;
    }
    let path = out_dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::File::create(&path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(io_err(&path))
}

/// Reads back a directory written by [`emit`].
pub fn read_emitted(dir: &Path) -> Result<(PairSet, ScheduleManifest), PairgenError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: ScheduleManifest = serde_json::from_str(&text).map_err(|source| PairgenError::Json {
        path: path.clone(),
        line: source.line(),
        source,
    })?;
    manifest.validate()?;

    let mut records = Vec::new();
    for task in [Task::Restructure, Task::Approximate] {
        let path = dir.join(manifest.pair_file(task));
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: PairRecord = serde_json::from_str(line).map_err(|source| PairgenError::Json {
                path: path.clone(),
                line: i + 1,
                source,
            })?;
            if record.task != task {
                return Err(PairgenError::Invalid(format!(
                    "{}:{}: {:?} record in the {:?} pair file",
                    path.display(),
                    i + 1,
                    record.task,
                    task
                )));
            }
            records.push(record);
        }
    }
    Ok((PairSet::new(records), manifest))
}
