//! Shannon entropy (base 2) and information gain over class-count vectors.

use crate::error::{Error, Result};

/// Entropy in bits of the distribution given by `counts`.
pub fn entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    entropy_with_total(counts, total)
}

#[inline]
pub(crate) fn entropy_with_total(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// `H(parent) − (|L|/|P|·H(L) + |R|/|P|·H(R))` for per-class counts.
///
/// `left[c] + right[c]` must equal `parent[c]` for every class.
pub fn information_gain(parent: &[usize], left: &[usize], right: &[usize]) -> Result<f64> {
    let total: usize = parent.iter().sum();
    if total == 0 {
        return Err(Error::validation("information gain of an empty parent"));
    }
    if parent.len() != left.len()
        || parent.len() != right.len()
        || parent
            .iter()
            .zip(left.iter().zip(right))
            .any(|(&p, (&l, &r))| l + r != p)
    {
        return Err(Error::validation(
            "child class counts do not partition the parent",
        ));
    }
    let gain = gain_unchecked(parent, total, left, right);
    // clamp rounding noise; the decomposition is bounded by H(parent)
    Ok(gain.clamp(0.0, entropy_with_total(parent, total)))
}

#[inline]
pub(crate) fn gain_unchecked(parent: &[usize], total: usize, left: &[usize], right: &[usize]) -> f64 {
    entropy_with_total(parent, total) - children_entropy(left, right, total)
}

/// Size-weighted mean entropy of the two children.
#[inline]
pub(crate) fn children_entropy(left: &[usize], right: &[usize], total: usize) -> f64 {
    let nl: usize = left.iter().sum();
    let nr = total - nl;
    let n = total as f64;
    (nl as f64 / n) * entropy_with_total(left, nl) + (nr as f64 / n) * entropy_with_total(right, nr)
}

/// Index of the largest count, lowest index on ties.
pub(crate) fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in counts.iter().enumerate() {
        if v > counts[best] {
            best = c;
        }
    }
    best
}
