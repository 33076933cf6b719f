//! Fixed-sequence testing over a pre-ordered hypothesis grid.

/// Start indices of `num_chains` chains equally spaced over `len` hypotheses.
pub fn chain_starts(len: usize, num_chains: usize) -> Vec<usize> {
    (0..num_chains).map(|i| i * len / num_chains).collect()
}

/// Indices of the rejected nulls (the valid set), ascending.
///
/// Each chain walks forward from its start, accepting every hypothesis with
/// `p <= delta / num_chains` and stopping at the first one above that level.
pub fn fixed_sequence_test(p_values: &[f64], delta: f64, num_chains: usize) -> Vec<usize> {
    if p_values.is_empty() || num_chains == 0 {
        return Vec::new();
    }
    let level = delta / num_chains as f64;
    let mut accepted = vec![false; p_values.len()];
    for start in chain_starts(p_values.len(), num_chains) {
        for (j, &p) in p_values.iter().enumerate().skip(start) {
            if p > level {
                break;
            }
            accepted[j] = true;
        }
    }
    accepted
        .iter()
        .enumerate()
        .filter_map(|(j, &a)| a.then_some(j))
        .collect()
}
