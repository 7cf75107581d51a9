//! Linear SVM: full-batch subgradient descent on the regularized hinge loss
//!
//! ```text
//! f(w, b) = 1/n Σ max(0, 1 - y_i (w·z_i + b)) + lambda/2 ‖w‖²
//! ```
//!
//! with step size `1 / (lambda · t)` at epoch `t = 1, 2, …`. The intercept
//! is not penalized.

use ndarray::ArrayView2;

pub(crate) fn train(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    lambda: f64,
    epochs: usize,
) -> (Vec<f64>, f64) {
    let n = x.nrows() as f64;
    let d = x.ncols();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut sum_yx = vec![0.0; d];
    for t in 1..=epochs {
        sum_yx.iter_mut().for_each(|v| *v = 0.0);
        let mut sum_y = 0.0;
        for (row, &yi) in x.rows().into_iter().zip(y) {
            let s = row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b;
            if yi * s < 1.0 {
                for (acc, xv) in sum_yx.iter_mut().zip(row) {
                    *acc += yi * xv;
                }
                sum_y += yi;
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        for j in 0..d {
            let g = lambda * w[j] - sum_yx[j] / n;
            w[j] -= eta * g;
        }
        b += eta * sum_y / n;
    }
    (w, b)
}

/// Regularized average hinge loss, for diagnostics and tests.
pub fn objective(x: ArrayView2<'_, f64>, y: &[f64], lambda: f64, w: &[f64], b: f64) -> f64 {
    let n = x.nrows() as f64;
    let hinge: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, &yi)| {
            let s = row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b;
            (1.0 - yi * s).max(0.0)
        })
        .sum();
    hinge / n + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}
