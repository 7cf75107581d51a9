use serde::{Deserialize, Serialize};

use super::FinalLibrary;
use crate::engine::LearnerSpec;

/// `|a ∩ b| / |a ∪ b|`.
pub fn jaccard(a: &LearnerSpec, b: &LearnerSpec) -> f64 {
    let (a, b) = (a.indices(), b.indices());
    let (mut i, mut j, mut shared) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    shared as f64 / (a.len() + b.len() - shared) as f64
}

/// Sparsity and diversity of a final library. Jaccard fields are absent
/// with fewer than two learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversitySummary {
    pub learners: usize,
    pub dim_range: (usize, usize),
    pub median_jaccard: Option<f64>,
    pub jaccard_range: Option<(f64, f64)>,
}

pub fn diversity_summary(final_library: &FinalLibrary) -> DiversitySummary {
    let specs: Vec<&LearnerSpec> = final_library
        .learners
        .iter()
        .map(|l| &l.attributes)
        .collect();
    let dims = specs.iter().map(|s| s.len());
    let dim_range = (dims.clone().min().unwrap_or(0), dims.max().unwrap_or(0));
    let mut values = Vec::with_capacity(specs.len() * specs.len().saturating_sub(1) / 2);
    for (i, a) in specs.iter().enumerate() {
        for b in &specs[i + 1..] {
            values.push(jaccard(a, b));
        }
    }
    let (median_jaccard, jaccard_range) = if values.is_empty() {
        (None, None)
    } else {
        values.sort_unstable_by(f64::total_cmp);
        (
            Some(values[(values.len() - 1) / 2]),
            Some((values[0], values[values.len() - 1])),
        )
    };
    DiversitySummary {
        learners: specs.len(),
        dim_range,
        median_jaccard,
        jaccard_range,
    }
}
