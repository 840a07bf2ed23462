use std::cmp;

use super::Pattern;

/// Edit distance between two symbol sequences with unit-cost insertion,
/// deletion and substitution.
pub fn levenshtein<T: PartialEq>(source: &[T], target: &[T]) -> usize {
    if source.is_empty() {
        return target.len();
    }
    if target.is_empty() {
        return source.len();
    }

    // Single row of the DP table; `diag` holds d[i-1][j-1].
    let mut row: Vec<usize> = (0..=target.len()).collect();
    for (i, s) in source.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, t) in target.iter().enumerate() {
            let substitution = diag + usize::from(s != t);
            diag = row[j + 1];
            row[j + 1] = cmp::min(cmp::min(row[j], row[j + 1]) + 1, substitution);
        }
    }
    row[target.len()]
}

/// Element-level edit distance between two patterns.
pub fn lev_distance(a: &Pattern, b: &Pattern) -> usize {
    levenshtein(&a.elements, &b.elements)
}
