//! Toolkit for relation-extraction data augmentation.
//!
//! The pipeline reads a dependency-parsed corpus with entity spans
//! ([`corpus`]), extracts the dependency path between the two entities
//! ([`pattern`]), builds seq2seq training pairs for sentence restructuring
//! and pattern approximation ([`restructure`], [`pairgen`]), drives a
//! generator backend to produce marked pseudo sentences ([`augment`]) and
//! measures path diversity ([`metrics`]).

pub mod augment;
pub mod corpus;
pub mod metrics;
pub mod pairgen;
pub mod pattern;
pub mod restructure;
mod seed;

pub use corpus::{
    ingest, inject_markers, parse_marked, Corpus, CorpusError, Format, IngestOptions, MarkerScheme,
    REInstance, Role, Span, Token,
};
pub use pattern::{
    extract_pattern, lev_distance, match_targets, MatchConfig, Pattern, PatternElement, PatternIndex,
};
pub use seed::keyed_rng;
