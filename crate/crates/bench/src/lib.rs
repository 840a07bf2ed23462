//! Synthetic workloads for the benchmarks.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use relaug_core::{Corpus, Pattern, PatternElement, PatternIndex, REInstance, Role, Span, Token};

const EDGES: [&str; 6] = ["NSUBJ", "OBJ", "OBL", "NMOD", "ADVCL", "ACL"];
const NODES: [&str; 8] = [
    "applies", "chosen", "made", "part", "used", "comes", "cut", "frame",
];

/// A well-formed pattern with `steps` edges.
pub fn random_pattern(rng: &mut impl Rng, steps: usize) -> Pattern {
    let mut elements = Vec::with_capacity(2 * steps);
    for k in 0..steps {
        if k > 0 {
            elements.push(PatternElement::Node(NODES[rng.gen_range(0..NODES.len())].into()));
        }
        elements.push(PatternElement::Edge(EDGES[rng.gen_range(0..EDGES.len())].into()));
    }
    Pattern { elements }
}

/// `n` patterns spread over `relations` relations, with 1 to 4 edges each.
pub fn pattern_index(n: usize, relations: usize, seed: u64) -> PatternIndex {
    let mut rng = StdRng::seed_from_u64(seed);
    PatternIndex::from_patterns((0..n).map(|i| {
        let steps = rng.gen_range(1..=4);
        (
            format!("i{i:06}"),
            format!("R{}", i % relations),
            random_pattern(&mut rng, steps),
        )
    }))
}

/// A right-branching chain of `len` tokens with entities at both ends, so
/// the path between them spans the whole sentence.
pub fn chain_instance(len: usize) -> REInstance {
    let tokens = (1..=len)
        .map(|i| Token {
            index: i,
            form: format!("w{i}"),
            head: if i == 1 { 0 } else { i - 1 },
            deprel: if i == 1 { "root".into() } else { "obl".into() },
            upos: None,
        })
        .collect();
    REInstance {
        id: format!("chain{len}"),
        tokens,
        subject: Span::new(1, 1, Role::Subject),
        object: Span::new(len, len, Role::Object),
        relation: "R".into(),
    }
}

/// A corpus of chains of varying length.
pub fn chain_corpus(n: usize) -> Corpus {
    let instances = (0..n)
        .map(|i| {
            let mut inst = chain_instance(3 + i % 20);
            inst.id = format!("c{i:06}");
            inst.relation = format!("R{}", i % 5);
            inst
        })
        .collect();
    Corpus::new(instances).expect("chains are valid")
}
