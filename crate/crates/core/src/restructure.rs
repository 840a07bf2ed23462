//! Rule-driven reordering of dependency subtrees.
//!
//! A rule names a dependent label (optionally restricted to a head POS) and a
//! move. Moves always carry a whole, contiguous subtree, so the output is a
//! permutation of the input words with every subtree that was contiguous
//! before still contiguous after. Applications that would split an entity
//! mention, or that find a non-contiguous subtree, are skipped.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{REInstance, Span, Token};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReorderAction {
    /// Place the dependent's subtree immediately before its head word.
    MoveBeforeHead,
    /// Place the dependent's subtree immediately after its head word.
    MoveAfterHead,
    /// Swap the dependent's subtree with the adjacent following sibling subtree.
    SwapWithNextSibling,
}

impl FromStr for ReorderAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "").as_str() {
            "movebeforehead" => Ok(ReorderAction::MoveBeforeHead),
            "moveafterhead" => Ok(ReorderAction::MoveAfterHead),
            "swapwithnextsibling" => Ok(ReorderAction::SwapWithNextSibling),
            _ => Err(format!("unknown reorder action `{s}`")),
        }
    }
}

impl fmt::Display for ReorderAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReorderRule {
    /// `None` matches any head.
    pub head_upos: Option<String>,
    pub child_deprel: String,
    pub action: ReorderAction,
}

impl ReorderRule {
    pub fn new(head_upos: Option<&str>, child_deprel: &str, action: ReorderAction) -> Self {
        ReorderRule {
            head_upos: head_upos.map(str::to_string),
            child_deprel: child_deprel.to_string(),
            action,
        }
    }

    /// Labels match exactly or on their base before `:`, case-insensitively,
    /// so `obl` also covers `obl:tmod`.
    fn matches(&self, head: &Token, child: &Token) -> bool {
        let want = self.child_deprel.as_str();
        let got = child.deprel.as_str();
        let base = got.split(':').next().unwrap_or(got);
        let label_ok = got.eq_ignore_ascii_case(want) || base.eq_ignore_ascii_case(want);
        let head_ok = match &self.head_upos {
            None => true,
            Some(u) => head.upos.as_deref().is_some_and(|h| h.eq_ignore_ascii_case(u)),
        };
        label_ok && head_ok
    }
}

#[derive(Debug, Error)]
pub enum RuleParseError {
    #[error("rule file line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<ReorderRule>,
    /// Total applied moves allowed per sentence.
    pub max_applications: usize,
}

pub const DEFAULT_MAX_APPLICATIONS: usize = 8;

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet {
            rules: vec![
                ReorderRule::new(None, "obl", ReorderAction::MoveBeforeHead),
                ReorderRule::new(None, "advmod", ReorderAction::MoveAfterHead),
                ReorderRule::new(None, "nmod", ReorderAction::MoveBeforeHead),
            ],
            max_applications: DEFAULT_MAX_APPLICATIONS,
        }
    }
}

impl RuleSet {
    pub fn empty() -> Self {
        RuleSet {
            rules: Vec::new(),
            max_applications: DEFAULT_MAX_APPLICATIONS,
        }
    }

    /// Parses `HEAD_UPOS<TAB>DEPREL<TAB>ACTION` lines; `*` is the wildcard
    /// head. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, RuleParseError> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: String| RuleParseError::Line { line: i + 1, message };
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [upos, deprel, action] = cols[..] else {
                return Err(err(format!(
                    "expected 3 tab-separated fields, found {}",
                    cols.len()
                )));
            };
            if deprel.is_empty() {
                return Err(err("empty dependency label".into()));
            }
            let head_upos = match upos {
                "*" => None,
                "" => return Err(err("empty head POS (use `*` for any)".into())),
                u => Some(u.to_string()),
            };
            rules.push(ReorderRule {
                head_upos,
                child_deprel: deprel.to_string(),
                action: action.parse().map_err(err)?,
            });
        }
        Ok(RuleSet {
            rules,
            max_applications: DEFAULT_MAX_APPLICATIONS,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RuleParseError> {
        let text = std::fs::read_to_string(path).map_err(|source| RuleParseError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        self.rules
            .iter()
            .map(|r| {
                format!(
                    "{}\t{}\t{}\n",
                    r.head_upos.as_deref().unwrap_or("*"),
                    r.child_deprel,
                    r.action
                )
            })
            .collect()
    }
}

/// Working state: the current linear order of original token indices.
struct Reorder<'a> {
    inst: &'a REInstance,
    children: Vec<Vec<usize>>,
    order: Vec<usize>,
    entities: [BTreeSet<usize>; 2],
}

impl<'a> Reorder<'a> {
    fn new(inst: &'a REInstance) -> Self {
        let n = inst.len();
        let mut children = vec![Vec::new(); n + 1];
        for t in &inst.tokens {
            children[t.head].push(t.index);
        }
        let members = |s: Span| (s.start..=s.end).collect::<BTreeSet<_>>();
        Reorder {
            inst,
            children,
            order: (1..=n).collect(),
            entities: [members(inst.subject), members(inst.object)],
        }
    }

    fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len() + 1];
        for (p, &tok) in self.order.iter().enumerate() {
            pos[tok] = p;
        }
        pos
    }

    fn subtree(&self, node: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            out.insert(n);
            stack.extend(&self.children[n]);
        }
        out
    }

    /// Current position range of a subtree, if it is contiguous.
    fn block(&self, nodes: &BTreeSet<usize>, pos: &[usize]) -> Option<(usize, usize)> {
        let lo = nodes.iter().map(|&n| pos[n]).min()?;
        let hi = nodes.iter().map(|&n| pos[n]).max()?;
        (hi - lo + 1 == nodes.len()).then_some((lo, hi))
    }

    /// A moved unit must contain each entity whole or not touch it.
    fn respects_entities(&self, nodes: &BTreeSet<usize>) -> bool {
        self.entities
            .iter()
            .all(|e| e.is_disjoint(nodes) || e.is_subset(nodes))
    }

    /// True when the gap before `order[q]` falls strictly inside an entity.
    fn gap_splits_entity(&self, order: &[usize], q: usize) -> bool {
        if q == 0 || q >= order.len() {
            return false;
        }
        let (l, r) = (order[q - 1], order[q]);
        self.entities.iter().any(|e| e.contains(&l) && e.contains(&r))
    }

    /// (head, child) pairs matching `rule`, heads visited breadth-first from
    /// the root and dependents in current linear order.
    fn candidates(&self, rule: &ReorderRule) -> Vec<(usize, usize)> {
        let pos = self.positions();
        let mut out = Vec::new();
        let mut queue: VecDeque<usize> = self.children[0].iter().copied().collect();
        while let Some(h) = queue.pop_front() {
            let mut kids = self.children[h].clone();
            kids.sort_by_key(|&k| pos[k]);
            for &c in &kids {
                if rule.matches(self.inst.token(h), self.inst.token(c)) {
                    out.push((h, c));
                }
            }
            queue.extend(kids);
        }
        out
    }

    fn apply(&mut self, action: ReorderAction, head: usize, child: usize) -> bool {
        let pos = self.positions();
        let nodes = self.subtree(child);
        let Some((lo, hi)) = self.block(&nodes, &pos) else {
            return false;
        };
        if !self.respects_entities(&nodes) {
            return false;
        }
        match action {
            ReorderAction::MoveBeforeHead | ReorderAction::MoveAfterHead => {
                let before = action == ReorderAction::MoveBeforeHead;
                // Only moves that cross the head change anything.
                if before != (lo > pos[head]) {
                    return false;
                }
                let moved: Vec<usize> = self.order[lo..=hi].to_vec();
                let mut rest: Vec<usize> = self.order[..lo].to_vec();
                rest.extend_from_slice(&self.order[hi + 1..]);
                let h = rest
                    .iter()
                    .position(|&t| t == head)
                    .expect("head outside subtree");
                let q = if before { h } else { h + 1 };
                if self.gap_splits_entity(&rest, q) {
                    return false;
                }
                rest.splice(q..q, moved);
                self.order = rest;
                true
            }
            ReorderAction::SwapWithNextSibling => {
                let Some(&next_tok) = self.order.get(hi + 1) else {
                    return false;
                };
                // Climb from the token after the block to a dependent of `head`.
                let mut sib = next_tok;
                while self.inst.token(sib).head != head {
                    sib = self.inst.token(sib).head;
                    if sib == 0 {
                        return false;
                    }
                }
                if sib == head {
                    return false;
                }
                let sib_nodes = self.subtree(sib);
                let Some((slo, shi)) = self.block(&sib_nodes, &pos) else {
                    return false;
                };
                if slo != hi + 1 || !self.respects_entities(&sib_nodes) {
                    return false;
                }
                let mut order = self.order[..lo].to_vec();
                order.extend_from_slice(&self.order[slo..=shi]);
                order.extend_from_slice(&self.order[lo..=hi]);
                order.extend_from_slice(&self.order[shi + 1..]);
                self.order = order;
                true
            }
        }
    }

    fn finish(self) -> REInstance {
        let pos = self.positions();
        let new_index = |orig: usize| if orig == 0 { 0 } else { pos[orig] + 1 };
        let tokens = self
            .order
            .iter()
            .enumerate()
            .map(|(p, &orig)| {
                let t = self.inst.token(orig);
                Token {
                    index: p + 1,
                    form: t.form.clone(),
                    head: new_index(t.head),
                    deprel: t.deprel.clone(),
                    upos: t.upos.clone(),
                }
            })
            .collect();
        let remap = |s: Span| {
            let idx = (s.start..=s.end).map(new_index);
            let start = idx.clone().min().expect("non-empty span");
            let end = idx.max().expect("non-empty span");
            debug_assert_eq!(end + 1 - start, s.len());
            Span::new(start, end, s.role)
        };
        REInstance {
            id: self.inst.id.clone(),
            tokens,
            subject: remap(self.inst.subject),
            object: remap(self.inst.object),
            relation: self.inst.relation.clone(),
        }
    }
}

/// Permutes an instance's words by moving whole dependency subtrees.
///
/// Rules are tried in list order; each rule's matches are visited top-down
/// and applied one after another, stopping once `max_applications` moves
/// have been made.
pub fn restructure(instance: &REInstance, rules: &RuleSet) -> REInstance {
    let mut state = Reorder::new(instance);
    let mut applied = 0;
    'rules: for rule in &rules.rules {
        for (head, child) in state.candidates(rule) {
            if applied >= rules.max_applications {
                break 'rules;
            }
            if state.apply(rule.action, head, child) {
                applied += 1;
            }
        }
    }
    state.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testing::{instance, surgeon};
    use crate::corpus::Role;

    fn text(inst: &REInstance) -> String {
        inst.forms().collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn empty_rules_are_identity() {
        assert_eq!(restructure(&surgeon(), &RuleSet::empty()), surgeon());
    }

    #[test]
    fn oblique_before_head() {
        let rules = RuleSet {
            rules: vec![ReorderRule::new(None, "obl", ReorderAction::MoveBeforeHead)],
            max_applications: 8,
        };
        let out = restructure(&surgeon(), &rules);
        assert_eq!(
            text(&out),
            "A surgeon carefully to the forearm applies the splints ."
        );
        assert_eq!(out.subject, Span::new(2, 2, Role::Subject));
        assert_eq!(out.object, Span::new(9, 9, Role::Object));
        // "forearm" now sits at 6, its dependents still point at it
        assert_eq!(out.token(4).head, 6);
        assert_eq!(out.token(6).head, 7);
        out.validate().unwrap();
    }

    #[test]
    fn default_rules_on_surgeon() {
        let out = restructure(&surgeon(), &RuleSet::default());
        assert_eq!(
            text(&out),
            "A surgeon to the forearm applies carefully the splints ."
        );
        out.validate().unwrap();
    }

    #[test]
    fn cap_limits_applications() {
        let mut rules = RuleSet {
            max_applications: 1,
            ..RuleSet::default()
        };
        let out = restructure(&surgeon(), &rules);
        assert_eq!(
            text(&out),
            "A surgeon carefully to the forearm applies the splints ."
        );
        rules.max_applications = 0;
        assert_eq!(restructure(&surgeon(), &rules), surgeon());
    }

    #[test]
    fn entity_straddling_subtree_is_not_moved() {
        // Object span "the forearm" (8,9) lies inside the obl subtree but
        // subject "to" (7,7) also does: both whole, so the move happens.
        let mut inst = surgeon();
        inst.subject = Span::new(7, 7, Role::Subject);
        inst.object = Span::new(8, 9, Role::Object);
        let rules = RuleSet {
            rules: vec![ReorderRule::new(None, "obl", ReorderAction::MoveBeforeHead)],
            max_applications: 8,
        };
        let out = restructure(&inst, &rules);
        assert_eq!(out.subject, Span::new(4, 4, Role::Subject));
        assert_eq!(out.object, Span::new(5, 6, Role::Object));

        // Object "forearm ." (9,10) partially overlaps the obl subtree.
        let mut inst = surgeon();
        inst.object = Span::new(9, 10, Role::Object);
        assert_eq!(restructure(&inst, &rules), inst);
    }

    #[test]
    fn insertion_inside_entity_is_skipped() {
        // Head "applies" is the second token of the object span "now applies",
        // so inserting right before it would split the entity.
        let inst = instance(
            "g",
            "r",
            &[
                ("she", 3, "nsubj"),
                ("now", 3, "advmod"),
                ("applies", 0, "root"),
                ("paint", 3, "obj"),
                ("outside", 3, "obl"),
            ],
            (1, 1),
            (2, 3),
        );
        let rules = RuleSet {
            rules: vec![ReorderRule::new(None, "obl", ReorderAction::MoveBeforeHead)],
            max_applications: 8,
        };
        assert_eq!(restructure(&inst, &rules), inst);
    }

    #[test]
    fn swap_with_next_sibling() {
        let inst = instance(
            "w",
            "r",
            &[
                ("he", 2, "nsubj"),
                ("gave", 0, "root"),
                ("her", 2, "iobj"),
                ("the", 5, "det"),
                ("book", 2, "obj"),
            ],
            (1, 1),
            (5, 5),
        );
        let rules = RuleSet {
            rules: vec![ReorderRule::new(None, "iobj", ReorderAction::SwapWithNextSibling)],
            max_applications: 8,
        };
        let out = restructure(&inst, &rules);
        assert_eq!(text(&out), "he gave the book her");
        assert_eq!(out.object, Span::new(4, 4, Role::Object));
        assert_eq!(out.token(3).head, 4);
        out.validate().unwrap();
    }

    #[test]
    fn head_pos_restriction() {
        let mut inst = surgeon();
        inst.tokens[3].upos = Some("VERB".into());
        let noun_only = RuleSet {
            rules: vec![ReorderRule::new(
                Some("NOUN"),
                "obl",
                ReorderAction::MoveBeforeHead,
            )],
            max_applications: 8,
        };
        assert_eq!(restructure(&inst, &noun_only), inst);
        let verb = RuleSet {
            rules: vec![ReorderRule::new(
                Some("verb"),
                "obl",
                ReorderAction::MoveBeforeHead,
            )],
            max_applications: 8,
        };
        assert_ne!(restructure(&inst, &verb), inst);
    }

    #[test]
    fn subtype_labels_match_base_rule() {
        let mut inst = surgeon();
        inst.tokens[8].deprel = "obl:to".into();
        let out = restructure(&inst, &RuleSet::default());
        assert_eq!(
            text(&out),
            "A surgeon to the forearm applies carefully the splints ."
        );
    }

    #[test]
    fn rule_file_round_trip() {
        let text = "# comment\n*\tobl\tMoveBeforeHead\n\nVERB\tadvmod\tMoveAfterHead\nNOUN\tamod\tSwapWithNextSibling\n";
        let rules = RuleSet::parse(text).unwrap();
        assert_eq!(rules.rules.len(), 3);
        assert_eq!(rules.rules[0].head_upos, None);
        assert_eq!(rules.rules[2].action, ReorderAction::SwapWithNextSibling);
        assert_eq!(RuleSet::parse(&rules.to_text()).unwrap(), rules);
        assert_eq!(
            RuleSet::parse(&RuleSet::default().to_text()).unwrap(),
            RuleSet::default()
        );
    }

    #[test]
    fn rule_file_errors() {
        assert!(matches!(
            RuleSet::parse("*\tobl\n"),
            Err(RuleParseError::Line { line: 1, .. })
        ));
        assert!(matches!(
            RuleSet::parse("*\tobl\tMoveBeforeHead\n*\tobl\tJump\n"),
            Err(RuleParseError::Line { line: 2, .. })
        ));
    }
}
