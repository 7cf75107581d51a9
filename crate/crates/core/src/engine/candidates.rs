//! Candidate generation for dimensions >= 2.

use std::collections::HashSet;

use itertools::Itertools;
use rand::Rng;

use super::{LearnerSpec, SwagError};

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub specs: Vec<LearnerSpec>,
    pub exhaustive: bool,
}

/// Builds up to `m` distinct specs of size `dimension` from `s_star`.
///
/// When all `C(|s_star|, dimension)` subsets fit within `m` they are returned
/// in lexicographic order. Otherwise specs are grown from uniformly drawn
/// parents by one uniformly drawn extra attribute of `s_star`, until `m`
/// distinct specs exist or `m * attempts_factor` draws have been made.
pub fn generate_candidates<R: Rng + ?Sized>(
    s_star: &[usize],
    parents: &[LearnerSpec],
    dimension: usize,
    m: usize,
    attempts_factor: usize,
    rng: &mut R,
) -> Result<Generated, SwagError> {
    if dimension > s_star.len() {
        return Err(SwagError::ImpossibleDimension {
            dimension,
            available: s_star.len(),
        });
    }
    if binomial(s_star.len(), dimension) <= m as u128 {
        let specs = s_star
            .iter()
            .copied()
            .combinations(dimension)
            .map(|c| LearnerSpec::new(c).expect("distinct attributes"))
            .collect();
        return Ok(Generated {
            specs,
            exhaustive: true,
        });
    }
    if parents.is_empty() {
        return Err(SwagError::NoParents { dimension });
    }
    if let Some(bad) = parents.iter().find(|p| {
        p.len() + 1 != dimension || p.indices().iter().any(|a| s_star.binary_search(a).is_err())
    }) {
        return Err(SwagError::InvalidParent {
            dimension,
            parent: bad.clone(),
        });
    }

    let mut seen: HashSet<LearnerSpec> = HashSet::with_capacity(m);
    let mut specs = Vec::with_capacity(m);
    let max_attempts = m.saturating_mul(attempts_factor);
    let mut complement: Vec<usize> = Vec::with_capacity(s_star.len());
    let mut attempts = 0usize;
    while specs.len() < m && attempts < max_attempts {
        attempts += 1;
        let parent = &parents[rng.gen_range(0..parents.len())];
        complement.clear();
        complement.extend(s_star.iter().copied().filter(|&a| !parent.contains(a)));
        let extra = complement[rng.gen_range(0..complement.len())];
        let child = parent.extended(extra).expect("extra attribute is new");
        if seen.insert(child.clone()) {
            specs.push(child);
        }
    }
    if specs.len() < m {
        log::warn!(
            "dimension {dimension}: generated {} distinct candidates of {m} requested after {attempts} draws",
            specs.len()
        );
    }
    Ok(Generated {
        specs,
        exhaustive: false,
    })
}
