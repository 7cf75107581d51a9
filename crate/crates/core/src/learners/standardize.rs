use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

/// Per-column centering and scaling fitted on a training split.
///
/// Constant columns keep scale 1 so they map to zero instead of NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.axis_iter(Axis(1)) {
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean.push(m);
            scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Standardizer { mean, scale }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = x.to_owned();
        for mut row in z.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        z
    }

    pub fn transform_row(&self, row: ArrayView1<'_, f64>, out: &mut [f64]) {
        for (j, v) in row.iter().enumerate() {
            out[j] = (v - self.mean[j]) / self.scale[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_mean_unit_variance() {
        let x = array![[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]];
        let s = Standardizer::fit(x.view());
        let z = s.transform(x.view());
        for j in 0..2 {
            let col = z.column(j);
            assert!(col.sum().abs() < 1e-12);
        }
        let var0 = z.column(0).iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!((var0 - 1.0).abs() < 1e-12);
        // constant column
        assert_eq!(s.scale[1], 1.0);
        assert!(z.column(1).iter().all(|&v| v == 0.0));
    }
}
