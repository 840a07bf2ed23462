//! Intrinsic diversity measures over dependency-path patterns.
//!
//! Type-token ratios are kept as exact rationals and only rendered to a
//! one-decimal percentage at output time.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};

use num_rational::{BigRational, Ratio};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::AugmentedInstance;
use crate::corpus::REInstance;
use crate::pairgen::PairStats;
use crate::pattern::{extract_pattern, Pattern};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("instance `{0}` has no dependency parse")]
    NoParse(String),
    #[error("perplexity scorer failed: {0}")]
    ScorerFailure(String),
    #[error("perplexity scorer returned {got} lines for {expected} texts")]
    LineCountMismatch { expected: usize, got: usize },
}

/// Anything that can be measured: an id, a relation, and maybe a pattern.
pub trait PatternSource {
    fn id(&self) -> &str;
    fn relation(&self) -> &str;
    /// `None` when the item carries no dependency parse.
    fn pattern(&self) -> Option<Pattern>;
}

impl PatternSource for REInstance {
    fn id(&self) -> &str {
        &self.id
    }

    fn relation(&self) -> &str {
        &self.relation
    }

    fn pattern(&self) -> Option<Pattern> {
        Some(extract_pattern(self))
    }
}

impl PatternSource for AugmentedInstance {
    fn id(&self) -> &str {
        &self.id
    }

    fn relation(&self) -> &str {
        &self.relation
    }

    fn pattern(&self) -> Option<Pattern> {
        None
    }
}

fn patterns_by_relation<T: PatternSource>(
    items: &[T],
) -> Result<BTreeMap<String, Vec<Pattern>>, MetricsError> {
    let mut out: BTreeMap<String, Vec<Pattern>> = BTreeMap::new();
    for item in items {
        let p = item
            .pattern()
            .ok_or_else(|| MetricsError::NoParse(item.id().to_string()))?;
        out.entry(item.relation().to_string()).or_default().push(p);
    }
    Ok(out)
}

/// Type-token ratio over the path words of one relation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ttr {
    pub distinct_words: u64,
    pub total_words: u64,
    /// Set when the relation's patterns contain no words; the ratio is then 1.
    pub no_words: bool,
}

impl Ttr {
    pub fn ratio(&self) -> Ratio<u64> {
        if self.total_words == 0 {
            Ratio::from_integer(1)
        } else {
            Ratio::new(self.distinct_words, self.total_words)
        }
    }

    pub fn percent(&self) -> String {
        let r = self.ratio();
        percent(&BigRational::new((*r.numer()).into(), (*r.denom()).into()))
    }
}

/// Renders a ratio as a percentage with one decimal, rounding half away from zero.
pub fn percent(r: &BigRational) -> String {
    let tenths = (r * BigRational::from_integer(1000.into())).round().to_integer();
    format!("{}.{}", &tenths / 10u32, &tenths % 10u32)
}

/// Per-relation TTR: distinct path words over total path words.
pub fn ttr<T: PatternSource>(items: &[T]) -> Result<BTreeMap<String, Ttr>, MetricsError> {
    Ok(patterns_by_relation(items)?
        .into_iter()
        .map(|(relation, patterns)| {
            let words: Vec<&str> = patterns.iter().flat_map(Pattern::words).collect();
            let mut distinct = words.clone();
            distinct.sort_unstable();
            distinct.dedup();
            let t = Ttr {
                distinct_words: distinct.len() as u64,
                total_words: words.len() as u64,
                no_words: words.is_empty(),
            };
            (relation, t)
        })
        .collect())
}

/// Unweighted mean of per-relation ratios.
pub fn macro_ttr(per_relation: &BTreeMap<String, Ttr>) -> BigRational {
    if per_relation.is_empty() {
        return BigRational::from_integer(0.into());
    }
    let sum = per_relation
        .values()
        .map(|t| {
            let r = t.ratio();
            BigRational::new((*r.numer()).into(), (*r.denom()).into())
        })
        .fold(BigRational::from_integer(0.into()), |acc, r| acc + r);
    sum / BigRational::from_integer(per_relation.len().into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternDiversity {
    /// Pattern text form to count.
    pub histogram: BTreeMap<String, usize>,
    pub instances: usize,
    /// Shannon entropy of the histogram divided by the log of the number of
    /// distinct patterns: 0 for a single pattern, 1 for a uniform spread.
    pub entropy: f64,
}

pub fn pattern_diversity<T: PatternSource>(
    items: &[T],
) -> Result<BTreeMap<String, PatternDiversity>, MetricsError> {
    Ok(patterns_by_relation(items)?
        .into_iter()
        .map(|(relation, patterns)| {
            let mut histogram: BTreeMap<String, usize> = BTreeMap::new();
            for p in &patterns {
                *histogram.entry(p.to_string()).or_default() += 1;
            }
            let n = patterns.len() as f64;
            let k = histogram.len();
            let entropy = if k <= 1 {
                0.0
            } else {
                let h: f64 = histogram
                    .values()
                    .map(|&c| {
                        let p = c as f64 / n;
                        -p * p.ln()
                    })
                    .sum();
                (h / (k as f64).ln()).clamp(0.0, 1.0)
            };
            (
                relation,
                PatternDiversity {
                    histogram,
                    instances: patterns.len(),
                    entropy,
                },
            )
        })
        .collect())
}

/// External program that reads one text per line and prints one perplexity
/// per line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScorerCommand {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl ScorerCommand {
    /// Splits a command line on whitespace: program first, then arguments.
    pub fn parse(cmd: &str) -> Option<Self> {
        let mut parts = cmd.split_whitespace();
        let program = PathBuf::from(parts.next()?);
        Some(ScorerCommand {
            program,
            args: parts.map(str::to_string).collect(),
        })
    }
}

/// Mean perplexity reported by `scorer` over `texts`.
pub fn perplexity(texts: &[String], scorer: &ScorerCommand) -> Result<f64, MetricsError> {
    if texts.is_empty() {
        return Err(MetricsError::ScorerFailure("no texts to score".into()));
    }
    let fail = |e: std::io::Error| MetricsError::ScorerFailure(format!("{}: {e}", scorer.program.display()));
    let mut child = Command::new(&scorer.program)
        .args(&scorer.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(fail)?;

    let mut input = String::new();
    for t in texts {
        input.push_str(&t.replace('\n', " "));
        input.push('\n');
    }
    let mut stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    let lines = std::thread::scope(|s| {
        s.spawn(move || {
            let _ = stdin.write_all(input.as_bytes());
        });
        BufReader::new(stdout).lines().collect::<Result<Vec<_>, _>>()
    })
    .map_err(fail)?;
    let status = child.wait().map_err(fail)?;
    if !status.success() {
        return Err(MetricsError::ScorerFailure(format!(
            "{} exited with {status}",
            scorer.program.display()
        )));
    }

    let values: Vec<&str> = lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty()).collect();
    if values.len() != texts.len() {
        return Err(MetricsError::LineCountMismatch {
            expected: texts.len(),
            got: values.len(),
        });
    }
    let mut sum = 0.0;
    for v in values {
        let x: f64 = v
            .parse()
            .map_err(|_| MetricsError::ScorerFailure(format!("not a number: `{v}`")))?;
        if !x.is_finite() {
            return Err(MetricsError::ScorerFailure(format!("non-finite value `{v}`")));
        }
        sum += x;
    }
    Ok(sum / texts.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioValue {
    pub numerator: String,
    pub denominator: String,
    pub percent: String,
}

impl From<&BigRational> for RatioValue {
    fn from(r: &BigRational) -> Self {
        RatioValue {
            numerator: r.numer().to_string(),
            denominator: r.denom().to_string(),
            percent: percent(r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_relation_ttr: BTreeMap<String, Ttr>,
    pub macro_ttr: RatioValue,
    pub pattern_diversity: BTreeMap<String, PatternDiversity>,
    pub pair_stats: Option<PairStats>,
    pub perplexity: Option<f64>,
}

impl MetricsReport {
    pub fn build<T: PatternSource>(
        items: &[T],
        pair_stats: Option<PairStats>,
        perplexity: Option<f64>,
    ) -> Result<Self, MetricsError> {
        let per_relation_ttr = ttr(items)?;
        Ok(MetricsReport {
            macro_ttr: RatioValue::from(&macro_ttr(&per_relation_ttr)),
            pattern_diversity: pattern_diversity(items)?,
            per_relation_ttr,
            pair_stats,
            perplexity,
        })
    }

    /// Aligned plain-text rendering.
    pub fn to_table(&self) -> String {
        let header = [
            "relation",
            "instances",
            "TTR (%)",
            "patterns",
            "entropy",
            "restr.",
            "approx.",
        ];
        let mut rows: Vec<[String; 7]> = Vec::new();
        for (rel, t) in &self.per_relation_ttr {
            let div = &self.pattern_diversity[rel];
            let counts = self
                .pair_stats
                .as_ref()
                .and_then(|s| s.per_relation.get(rel).copied())
                .unwrap_or_default();
            let ttr = if t.no_words {
                format!("{}*", t.percent())
            } else {
                t.percent()
            };
            rows.push([
                rel.clone(),
                div.instances.to_string(),
                ttr,
                div.histogram.len().to_string(),
                format!("{:.3}", div.entropy),
                counts.restructure.to_string(),
                counts.approximate.to_string(),
            ]);
        }
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[&str]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            out.push_str(parts.join("  ").trim_end());
            out.push('\n');
        };
        line(&mut out, &header);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        line(&mut out, &rule.iter().map(String::as_str).collect::<Vec<_>>());
        for row in &rows {
            line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
        }
        let _ = writeln!(out, "\nmacro TTR (%): {}", self.macro_ttr.percent);
        if self.per_relation_ttr.values().any(|t| t.no_words) {
            out.push_str("* relation has no path words; TTR reported as 100.0\n");
        }
        if let Some(s) = &self.pair_stats {
            let _ = writeln!(
                out,
                "pairs: {} restructuring, {} approximation",
                s.restructure_count, s.approximate_count
            );
        }
        if let Some(p) = self.perplexity {
            let _ = writeln!(out, "mean perplexity (lower is better): {p:.2}");
        }
        out
    }
}
