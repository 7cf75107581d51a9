//! L2-regularized logistic regression trained by full-batch gradient descent
//! with Armijo backtracking.
//!
//! The objective over rows `z_i` with signed targets `y_i ∈ {-1, +1}` is
//!
//! ```text
//! f(w, b) = 1/n Σ log(1 + exp(-y_i (w·z_i + b))) + lambda/2 ‖w‖²
//! ```
//!
//! The intercept is not penalized.

use ndarray::{ArrayView1, ArrayView2};

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn score(row: ArrayView1<'_, f64>, w: &[f64], b: f64) -> f64 {
    row.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() + b
}

/// Regularized average logistic loss.
pub fn objective(x: ArrayView2<'_, f64>, y: &[f64], lambda: f64, w: &[f64], b: f64) -> f64 {
    let n = x.nrows() as f64;
    let data: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, &yi)| softplus(-yi * score(row, w, b)))
        .sum();
    data / n + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

/// Analytic gradient of [`objective`], returned as `(dw, db)`.
pub fn gradient(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    lambda: f64,
    w: &[f64],
    b: f64,
) -> (Vec<f64>, f64) {
    let n = x.nrows() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (row, &yi) in x.rows().into_iter().zip(y) {
        let coef = -yi * sigmoid(-yi * score(row, w, b));
        for (g, xv) in gw.iter_mut().zip(row) {
            *g += coef * xv;
        }
        gb += coef;
    }
    for (g, wj) in gw.iter_mut().zip(w) {
        *g = *g / n + lambda * wj;
    }
    (gw, gb / n)
}

/// Minimizes [`objective`] from the origin.
pub(crate) fn train(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    lambda: f64,
    max_iters: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let d = x.ncols();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut f = objective(x, y, lambda, &w, b);
    let mut step = 1.0;
    let mut trial_w = vec![0.0; d];
    for _ in 0..max_iters {
        let (gw, gb) = gradient(x, y, lambda, &w, b);
        let gnorm2 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        if gnorm2.sqrt() <= tol {
            break;
        }
        let mut t = step;
        let accepted = loop {
            for j in 0..d {
                trial_w[j] = w[j] - t * gw[j];
            }
            let trial_b = b - t * gb;
            let trial_f = objective(x, y, lambda, &trial_w, trial_b);
            if trial_f <= f - 0.5 * t * gnorm2 {
                break Some((trial_b, trial_f));
            }
            t *= 0.5;
            if t < 1e-16 {
                break None;
            }
        };
        match accepted {
            Some((trial_b, trial_f)) => {
                w.copy_from_slice(&trial_w);
                b = trial_b;
                f = trial_f;
                step = (t * 2.0).min(1e4);
            }
            // no descent possible at machine precision
            None => break,
        }
    }
    (w, b)
}
