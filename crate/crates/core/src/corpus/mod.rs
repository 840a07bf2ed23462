//! Relation-extraction corpora: validated instances, CoNLL-U-plus reading and
//! writing, and the entity-marker text form.

mod conllu;
mod markers;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conllu::{ingest, ingest_str, write_instance, write_instances, Format, IngestOptions};
pub use markers::{inject_markers, parse_marked, MarkedSentence, MarkerError, MarkerScheme};

/// Errors raised while reading or validating a corpus.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("instance `{id}`: invalid dependency tree: {message}")]
    Tree { id: String, message: String },

    #[error("instance `{id}`: invalid entity span: {message}")]
    Span { id: String, message: String },

    #[error("instance `{id}`: unknown relation `{relation}`")]
    UnknownRelation { id: String, relation: String },

    #[error("duplicate instance id `{0}`")]
    DuplicateId(String),

    #[error("invalid marker scheme: {0}")]
    Scheme(String),
}

/// One token of a parsed sentence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    /// Index of the governor, `0` for the root.
    pub head: usize,
    pub deprel: String,
    pub upos: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Subject,
    Object,
}

/// An inclusive, 1-based token range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub role: Role,
}

impl Span {
    pub fn new(start: usize, end: usize, role: Role) -> Self {
        Span { start, end, role }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// A sentence with its dependency parse, two entity spans and a relation label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct REInstance {
    pub id: String,
    pub tokens: Vec<Token>,
    pub subject: Span,
    pub object: Span,
    pub relation: String,
}

impl REInstance {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token at a 1-based index.
    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index - 1]
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }

    pub fn span(&self, role: Role) -> Span {
        match role {
            Role::Subject => self.subject,
            Role::Object => self.object,
        }
    }

    /// Surface string of a span, tokens joined by single spaces.
    pub fn surface(&self, span: Span) -> String {
        self.tokens[span.start - 1..span.end]
            .iter()
            .map(|t| t.form.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Checks every structural invariant: token numbering, tree shape and spans.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let tree_err = |message: String| CorpusError::Tree {
            id: self.id.clone(),
            message,
        };
        let n = self.tokens.len();
        if n == 0 {
            return Err(tree_err("sentence has no tokens".into()));
        }

        let mut root = None;
        for (pos, token) in self.tokens.iter().enumerate() {
            if token.index != pos + 1 {
                return Err(tree_err(format!(
                    "token at position {} has index {}",
                    pos + 1,
                    token.index
                )));
            }
            if token.form.is_empty() || token.form.chars().any(char::is_whitespace) {
                return Err(tree_err(format!(
                    "token {} has an empty or whitespace-bearing form",
                    token.index
                )));
            }
            if token.head > n {
                return Err(tree_err(format!(
                    "token {} has head {} beyond sentence length {}",
                    token.index, token.head, n
                )));
            }
            if token.head == token.index {
                return Err(tree_err(format!("token {} is its own head", token.index)));
            }
            if token.head == 0 {
                if let Some(r) = root {
                    return Err(tree_err(format!(
                        "multiple roots (tokens {} and {})",
                        r, token.index
                    )));
                }
                root = Some(token.index);
            }
        }
        if root.is_none() {
            return Err(tree_err("no root token".into()));
        }

        // Walk each head chain; a chain longer than n revisits a node.
        for token in &self.tokens {
            let mut cur = token.index;
            let mut steps = 0;
            while cur != 0 {
                cur = self.tokens[cur - 1].head;
                steps += 1;
                if steps > n {
                    return Err(tree_err(format!("cycle reachable from token {}", token.index)));
                }
            }
        }

        let span_err = |message: String| CorpusError::Span {
            id: self.id.clone(),
            message,
        };
        for span in [self.subject, self.object] {
            if span.start < 1 || span.start > span.end || span.end > n {
                return Err(span_err(format!(
                    "{:?} span {} out of bounds for {} tokens",
                    span.role, span, n
                )));
            }
        }
        if self.subject.role != Role::Subject || self.object.role != Role::Object {
            return Err(span_err("span roles are mislabelled".into()));
        }
        if self.subject.overlaps(&self.object) {
            return Err(span_err(format!(
                "subject {} overlaps object {}",
                self.subject, self.object
            )));
        }
        Ok(())
    }
}

/// A validated collection of instances.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub instances: Vec<REInstance>,
    pub relations: BTreeSet<String>,
    /// Instance ids per relation, in corpus order.
    pub by_relation: BTreeMap<String, Vec<String>>,
    positions: BTreeMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, validating every instance and id uniqueness.
    pub fn new(instances: Vec<REInstance>) -> Result<Self, CorpusError> {
        let mut relations = BTreeSet::new();
        let mut by_relation: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut positions = BTreeMap::new();
        for (pos, inst) in instances.iter().enumerate() {
            inst.validate()?;
            if positions.insert(inst.id.clone(), pos).is_some() {
                return Err(CorpusError::DuplicateId(inst.id.clone()));
            }
            relations.insert(inst.relation.clone());
            by_relation
                .entry(inst.relation.clone())
                .or_default()
                .push(inst.id.clone());
        }
        Ok(Corpus {
            instances,
            relations,
            by_relation,
            positions,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&REInstance> {
        self.positions.get(id).map(|&pos| &self.instances[pos])
    }

    /// Instances carrying `relation`, in corpus order.
    pub fn relation_instances<'a>(&'a self, relation: &str) -> impl Iterator<Item = &'a REInstance> + 'a {
        self.by_relation
            .get(relation)
            .into_iter()
            .flatten()
            .filter_map(move |id| self.get(id))
    }
}
