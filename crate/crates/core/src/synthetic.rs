//! Seeded synthetic classification data with planted signal.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataset::Dataset;
use crate::seed;

/// A balanced binary dataset and the columns carrying signal.
#[derive(Debug, Clone)]
pub struct Planted {
    pub dataset: Dataset,
    /// Sorted indices of the informative columns.
    pub informative: Vec<usize>,
}

/// `n` rows, `p` standard-normal columns, of which `informative` randomly
/// placed ones have their class-`pos` mean shifted by `separation` standard
/// deviations. Rows alternate `neg`, `pos`. Attributes are named `x0..`.
pub fn planted(
    n: usize,
    p: usize,
    informative: usize,
    separation: f64,
    seed_value: u64,
) -> Planted {
    assert!(informative <= p, "more informative columns than columns");
    let mut rng = seed::rng(seed_value);
    let mut cols = sample(&mut rng, p, informative).into_vec();
    cols.sort_unstable();
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let mut x = Array2::<f64>::zeros((n, p));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        if labels[i] == 1 {
            for &j in &cols {
                row[j] += separation;
            }
        }
    }
    let names = (0..p).map(|j| format!("x{j}")).collect();
    let dataset = Dataset::from_codes(x, labels, vec!["neg".into(), "pos".into()], names)
        .expect("valid synthetic shape");
    Planted {
        dataset,
        informative: cols,
    }
}
