use ndarray::{Array2, ArrayView2};

use super::Standardizer;

/// k-nearest-neighbour vote on standardized columns.
///
/// Neighbours are ranked by (squared Euclidean distance, training row index);
/// the vote goes to the most frequent class, lowest class code on ties.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k_neighbors: usize,
    pub n_classes: usize,
    pub standardizer: Standardizer,
    pub train: Array2<f64>,
    pub labels: Vec<usize>,
}

impl KnnModel {
    pub(crate) fn fit(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        n_classes: usize,
        k_neighbors: usize,
    ) -> Self {
        let standardizer = Standardizer::fit(x);
        let train = standardizer.transform(x);
        KnnModel {
            k_neighbors,
            n_classes,
            standardizer,
            train,
            labels: y.to_vec(),
        }
    }

    pub(crate) fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<usize> {
        let k = self.k_neighbors.min(self.labels.len());
        let mut z = vec![0.0; self.standardizer.width()];
        let mut ranked: Vec<(f64, usize)> = Vec::with_capacity(self.labels.len());
        let mut votes = vec![0usize; self.n_classes];
        x.rows()
            .into_iter()
            .map(|row| {
                self.standardizer.transform_row(row, &mut z);
                ranked.clear();
                ranked.extend(self.train.rows().into_iter().enumerate().map(|(i, t)| {
                    let d2: f64 = t.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d2, i)
                }));
                ranked.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                votes.iter_mut().for_each(|v| *v = 0);
                for &(_, i) in &ranked[..k] {
                    votes[self.labels[i]] += 1;
                }
                // first maximum = lowest code among tied classes
                let mut best = 0;
                for c in 1..votes.len() {
                    if votes[c] > votes[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}
