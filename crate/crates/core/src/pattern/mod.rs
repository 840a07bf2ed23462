//! Dependency-path patterns between the two entities of an instance.

mod index;
mod lev;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{REInstance, Span};

pub use index::{match_targets, IndexEntry, MatchConfig, PatternError, PatternIndex};
pub use lev::{lev_distance, levenshtein};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternElement {
    /// Uppercased dependency label of a traversed edge.
    Edge(String),
    /// Lowercased form of an intermediate word.
    Node(String),
}

impl PatternElement {
    pub fn as_str(&self) -> &str {
        match self {
            PatternElement::Edge(s) | PatternElement::Node(s) => s,
        }
    }
}

/// Alternating edge/node sequence between two entity heads, endpoints excluded.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pattern {
    pub elements: Vec<PatternElement>,
}

impl Pattern {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Intermediate word forms along the path.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.elements.iter().filter_map(|e| match e {
            PatternElement::Node(w) => Some(w.as_str()),
            PatternElement::Edge(_) => None,
        })
    }

    /// Builds a pattern from its `-`-joined text form, reading even
    /// positions as edges and odd ones as nodes.
    ///
    /// Labels containing `-` cannot be represented this way.
    pub fn parse(text: &str) -> Pattern {
        if text.is_empty() {
            return Pattern::default();
        }
        let elements = text
            .split('-')
            .enumerate()
            .map(|(i, s)| {
                if i % 2 == 0 {
                    PatternElement::Edge(s.to_uppercase())
                } else {
                    PatternElement::Node(s.to_lowercase())
                }
            })
            .collect();
        Pattern { elements }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.elements.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            f.write_str(e.as_str())?;
        }
        Ok(())
    }
}

/// The leftmost span token whose governor lies outside the span.
pub fn entity_head(instance: &REInstance, span: Span) -> usize {
    (span.start..=span.end)
        .find(|&i| {
            let head = instance.token(i).head;
            head == 0 || !span.contains(head)
        })
        .unwrap_or(span.start)
}

/// Chain of token indices from `from` up to the root, inclusive.
fn ancestors(instance: &REInstance, from: usize) -> Vec<usize> {
    let mut chain = vec![from];
    let mut cur = from;
    while instance.token(cur).head != 0 {
        cur = instance.token(cur).head;
        chain.push(cur);
    }
    chain
}

/// Tree path from the subject head to the object head.
pub fn extract_pattern(instance: &REInstance) -> Pattern {
    let from = entity_head(instance, instance.subject);
    let to = entity_head(instance, instance.object);
    if from == to {
        return Pattern::default();
    }

    let up = ancestors(instance, from);
    let down = ancestors(instance, to);
    // Lowest common ancestor: first node on `up` that is also on `down`.
    let (ui, di) = up
        .iter()
        .enumerate()
        .find_map(|(ui, n)| down.iter().position(|m| m == n).map(|di| (ui, di)))
        .expect("validated trees share a root");

    let mut nodes: Vec<usize> = up[..=ui].to_vec();
    nodes.extend(down[..di].iter().rev());

    let mut elements = Vec::with_capacity(2 * nodes.len() - 3);
    for (k, pair) in nodes.windows(2).enumerate() {
        if k > 0 {
            elements.push(PatternElement::Node(instance.token(pair[0]).form.to_lowercase()));
        }
        let (a, b) = (pair[0], pair[1]);
        let child = if instance.token(a).head == b { a } else { b };
        elements.push(PatternElement::Edge(instance.token(child).deprel.to_uppercase()));
    }
    Pattern { elements }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testing::{instance, surgeon};
    use crate::corpus::{Role, Span};

    #[test]
    fn surgeon_pattern() {
        let p = extract_pattern(&surgeon());
        assert_eq!(p.to_string(), "NSUBJ-applies-DOBJ");
        assert_eq!(p, Pattern::parse("NSUBJ-applies-DOBJ"));
        assert_eq!(p.words().collect::<Vec<_>>(), ["applies"]);
    }

    #[test]
    fn single_token_head() {
        assert_eq!(entity_head(&surgeon(), Span::new(6, 6, Role::Object)), 6);
    }

    #[test]
    fn determiner_span_head() {
        // "the splints": token 5 is governed by 6, and 6 by 4 (outside).
        assert_eq!(entity_head(&surgeon(), Span::new(5, 6, Role::Object)), 6);
    }

    #[test]
    fn two_outward_heads_take_leftmost() {
        // Span 2..=4: token 2 -> 1 (outside), token 3 -> 2 (inside),
        // token 4 -> 5 (outside). Outward-governed tokens are {2, 4}.
        let inst = instance(
            "t",
            "r",
            &[
                ("a", 0, "root"),
                ("b", 1, "x"),
                ("c", 2, "x"),
                ("d", 5, "x"),
                ("e", 1, "x"),
            ],
            (2, 4),
            (5, 5),
        );
        assert_eq!(entity_head(&inst, inst.subject), 2);
    }

    #[test]
    fn coincident_heads_give_empty_pattern() {
        // Only reachable on an unvalidated instance: valid spans are disjoint.
        let inst = instance(
            "c",
            "r",
            &[("the", 2, "det"), ("dog", 3, "nsubj"), ("barks", 0, "root")],
            (1, 2),
            (2, 2),
        );
        assert!(extract_pattern(&inst).is_empty());
    }

    #[test]
    fn adjacent_heads_give_single_edge() {
        let inst = instance(
            "a",
            "r",
            &[("the", 2, "det"), ("dog", 3, "nsubj"), ("barks", 0, "root")],
            (1, 1),
            (2, 2),
        );
        assert_eq!(extract_pattern(&inst).to_string(), "DET");
    }

    #[test]
    fn object_above_subject() {
        // Object head is an ancestor of the subject head.
        let inst = instance(
            "u",
            "r",
            &[("x", 2, "amod"), ("y", 3, "nmod"), ("z", 0, "root")],
            (1, 1),
            (3, 3),
        );
        assert_eq!(extract_pattern(&inst).to_string(), "AMOD-y-NMOD");
    }
}
