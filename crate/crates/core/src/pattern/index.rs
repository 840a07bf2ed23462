use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{extract_pattern, lev_distance, Pattern};
use crate::corpus::Corpus;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("instance `{0}` is not in the pattern index")]
    UnknownId(String),
}

/// Threshold settings for pattern matching.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Candidates must be strictly closer than this.
    pub lambda: usize,
    pub exclude_self: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            lambda: 3,
            exclude_self: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexEntry {
    pub id: String,
    pub pattern: Pattern,
}

/// Patterns grouped by relation, bucketed by element count.
#[derive(Clone, Debug, Default)]
pub struct PatternIndex {
    groups: BTreeMap<String, Vec<IndexEntry>>,
    /// relation -> pattern length -> positions in the group.
    buckets: BTreeMap<String, BTreeMap<usize, Vec<usize>>>,
    lookup: HashMap<String, (String, usize)>,
}

impl PatternIndex {
    pub fn build(corpus: &Corpus) -> Self {
        Self::from_patterns(
            corpus
                .instances
                .iter()
                .map(|inst| (inst.id.clone(), inst.relation.clone(), extract_pattern(inst))),
        )
    }

    /// Builds an index from precomputed `(id, relation, pattern)` triples.
    pub fn from_patterns(items: impl IntoIterator<Item = (String, String, Pattern)>) -> Self {
        let mut groups: BTreeMap<String, Vec<IndexEntry>> = BTreeMap::new();
        for (id, relation, pattern) in items {
            groups
                .entry(relation)
                .or_default()
                .push(IndexEntry { id, pattern });
        }
        let mut buckets = BTreeMap::new();
        let mut lookup = HashMap::new();
        for (relation, entries) in groups.iter_mut() {
            entries.sort_by(|a, b| a.id.cmp(&b.id));
            let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (pos, e) in entries.iter().enumerate() {
                by_len.entry(e.pattern.len()).or_default().push(pos);
                lookup.insert(e.id.clone(), (relation.clone(), pos));
            }
            buckets.insert(relation.clone(), by_len);
        }
        PatternIndex {
            groups,
            buckets,
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.lookup.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lookup.is_empty()
    }

    /// Relation groups in label order; entries within a group ordered by id.
    pub fn groups(&self) -> impl Iterator<Item = (&str, &[IndexEntry])> {
        self.groups.iter().map(|(r, e)| (r.as_str(), e.as_slice()))
    }

    pub fn group(&self, relation: &str) -> Option<&[IndexEntry]> {
        self.groups.get(relation).map(Vec::as_slice)
    }

    pub fn pattern(&self, id: &str) -> Option<&Pattern> {
        self.entry(id).map(|(_, e)| &e.pattern)
    }

    pub fn relation(&self, id: &str) -> Option<&str> {
        self.entry(id).map(|(r, _)| r)
    }

    /// Bucket sizes per pattern length for one relation.
    pub fn bucket_sizes(&self, relation: &str) -> BTreeMap<usize, usize> {
        self.buckets
            .get(relation)
            .map(|b| b.iter().map(|(len, v)| (*len, v.len())).collect())
            .unwrap_or_default()
    }

    fn entry(&self, id: &str) -> Option<(&str, &IndexEntry)> {
        let (relation, pos) = self.lookup.get(id)?;
        Some((relation.as_str(), &self.groups[relation][*pos]))
    }
}

/// Same-relation instances whose pattern lies strictly within `cfg.lambda`
/// of the source's, sorted by `(distance, id)`.
pub fn match_targets(
    source_id: &str,
    index: &PatternIndex,
    cfg: &MatchConfig,
) -> Result<Vec<(String, usize)>, PatternError> {
    let (relation, source) = index
        .entry(source_id)
        .ok_or_else(|| PatternError::UnknownId(source_id.to_string()))?;
    if cfg.lambda == 0 {
        return Ok(Vec::new());
    }
    let group = &index.groups[relation];
    let len = source.pattern.len();
    // A length gap of at least lambda forces a distance of at least lambda.
    let lo = len.saturating_sub(cfg.lambda - 1);
    let hi = len + (cfg.lambda - 1);

    let mut out = Vec::new();
    for positions in index.buckets[relation].range(lo..=hi).map(|(_, v)| v) {
        for &pos in positions {
            let cand = &group[pos];
            if cfg.exclude_self && cand.id == source.id {
                continue;
            }
            let d = lev_distance(&source.pattern, &cand.pattern);
            if d < cfg.lambda {
                out.push((cand.id.clone(), d));
            }
        }
    }
    out.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}
