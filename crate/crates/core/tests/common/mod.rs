//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use relaug_core::{ingest, Corpus, Format, IngestOptions, REInstance, Role, Span, Token};

pub fn fixture_path() -> PathBuf {
    // Resolves from either the core or the cli crate.
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/toy.conllu")
}

pub fn toy_corpus() -> Corpus {
    ingest(&fixture_path(), Format::ConlluPlus, &IngestOptions::default()).expect("toy fixture ingests")
}

/// Textbook exponential recursion over whole symbols.
pub fn naive_lev<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let cost = usize::from(a[0] != b[0]);
    (naive_lev(&a[1..], b) + 1)
        .min(naive_lev(a, &b[1..]) + 1)
        .min(naive_lev(&a[1..], &b[1..]) + cost)
}

/// Head-finding by brute force: among span tokens governed from outside the
/// span, the leftmost; otherwise the span start.
fn head_of(inst: &REInstance, span: Span) -> usize {
    let mut outward: Vec<usize> = (span.start..=span.end)
        .filter(|&i| {
            let h = inst.tokens[i - 1].head;
            h == 0 || h < span.start || h > span.end
        })
        .collect();
    outward.sort();
    outward.first().copied().unwrap_or(span.start)
}

/// Path text form from a breadth-first search over the undirected tree.
pub fn bfs_pattern(inst: &REInstance) -> String {
    let n = inst.tokens.len();
    let from = head_of(inst, inst.subject);
    let to = head_of(inst, inst.object);
    if from == to {
        return String::new();
    }
    let mut adj = vec![Vec::new(); n + 1];
    for t in &inst.tokens {
        if t.head != 0 {
            adj[t.index].push((t.head, t.deprel.clone()));
            adj[t.head].push((t.index, t.deprel.clone()));
        }
    }
    let mut prev: Vec<Option<(usize, String)>> = vec![None; n + 1];
    let mut seen = vec![false; n + 1];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for (v, label) in &adj[u] {
            if !seen[*v] {
                seen[*v] = true;
                prev[*v] = Some((u, label.clone()));
                queue.push_back(*v);
            }
        }
    }
    // Walk back from the object head.
    let mut parts = Vec::new();
    let mut cur = to;
    while cur != from {
        let (p, label) = prev[cur].clone().expect("tree is connected");
        parts.push(label.to_uppercase());
        if p != from {
            parts.push(inst.tokens[p - 1].form.to_lowercase());
        }
        cur = p;
    }
    parts.reverse();
    parts.join("-")
}

/// All ordered same-relation pairs with distance below `lambda`, computed
/// without any index.
pub fn brute_force_pairs(
    items: &[(String, String, Vec<String>)],
    lambda: usize,
) -> BTreeSet<(String, String, usize)> {
    let mut out = BTreeSet::new();
    for (ia, ra, pa) in items {
        for (ib, rb, pb) in items {
            if ia == ib || ra != rb {
                continue;
            }
            let d = naive_lev(pa, pb);
            if d < lambda {
                out.insert((ia.clone(), ib.clone(), d));
            }
        }
    }
    out
}

const FORMS: [&str; 8] = ["the", "cat", "sat", "on", "a", "mat", "quietly", "home"];
const LABELS: [&str; 9] = [
    "obl", "advmod", "nmod", "nsubj", "obj", "det", "amod", "case", "obl:tmod",
];

/// Random valid instance: a random rooted tree (not necessarily projective)
/// with two disjoint contiguous entity spans.
pub fn random_instance(rng: &mut impl Rng, id: usize) -> REInstance {
    let n = rng.gen_range(2..=14);
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n + 1];
    for k in 1..n {
        heads[order[k]] = order[rng.gen_range(0..k)];
    }
    // Bias toward projective trees half the time by attaching to a neighbour.
    if rng.gen_bool(0.5) {
        let root = rng.gen_range(1..=n);
        heads = vec![0; n + 1];
        for (i, h) in heads.iter_mut().enumerate().skip(1) {
            if i < root {
                *h = if rng.gen_bool(0.3) { root } else { i + 1 };
            } else if i > root {
                *h = rng.gen_range(root..i);
            }
        }
    }
    let tokens = (1..=n)
        .map(|i| Token {
            index: i,
            form: FORMS[rng.gen_range(0..FORMS.len())].to_string(),
            head: heads[i],
            deprel: if heads[i] == 0 {
                "root".to_string()
            } else {
                LABELS[rng.gen_range(0..LABELS.len())].to_string()
            },
            upos: None,
        })
        .collect();
    // Two disjoint spans: split [1, n] at a cut point.
    let cut = rng.gen_range(1..n);
    let s1 = rng.gen_range(1..=cut);
    let e1 = rng.gen_range(s1..=cut);
    let s2 = rng.gen_range(cut + 1..=n);
    let e2 = rng.gen_range(s2..=n);
    let (subj, obj) = if rng.gen_bool(0.5) {
        ((s1, e1), (s2, e2))
    } else {
        ((s2, e2), (s1, e1))
    };
    REInstance {
        id: format!("r{id:04}"),
        tokens,
        subject: Span::new(subj.0, subj.1, Role::Subject),
        object: Span::new(obj.0, obj.1, Role::Object),
        relation: "R".to_string(),
    }
}

/// Checks the restructuring contract; returns a description of the first
/// violation.
pub fn check_restructure(input: &REInstance, output: &REInstance) -> Result<(), String> {
    if input.tokens.len() != output.tokens.len() {
        return Err("length changed".into());
    }
    let mut a: Vec<&str> = input.forms().collect();
    let mut b: Vec<&str> = output.forms().collect();
    a.sort();
    b.sort();
    if a != b {
        return Err("not a permutation".into());
    }
    output.validate().map_err(|e| format!("invalid output: {e}"))?;
    for role in [Role::Subject, Role::Object] {
        let (si, so) = (input.span(role), output.span(role));
        if si.len() != so.len() {
            return Err(format!("{role:?} span not contiguous"));
        }
        if input.surface(si) != output.surface(so) {
            return Err(format!("{role:?} entity changed"));
        }
    }
    if (input.id.as_str(), input.relation.as_str()) != (output.id.as_str(), output.relation.as_str()) {
        return Err("id or relation changed".into());
    }
    // Tree preserved: each word keeps its governor's word and label.
    let key = |inst: &REInstance, t: &Token| {
        let head_form = if t.head == 0 {
            "<root>".to_string()
        } else {
            inst.tokens[t.head - 1].form.clone()
        };
        (t.form.clone(), head_form, t.deprel.clone())
    };
    let mut ka: Vec<_> = input.tokens.iter().map(|t| key(input, t)).collect();
    let mut kb: Vec<_> = output.tokens.iter().map(|t| key(output, t)).collect();
    ka.sort();
    kb.sort();
    if ka != kb {
        return Err("dependency relations changed".into());
    }
    Ok(())
}
