use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

/// Per-feature centering and scaling learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    /// Population standard deviations; 1 for constant features.
    pub scales: Vec<f64>,
}

impl Standardization {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let means: Vec<f64> = x
            .mean_axis(Axis(0))
            .map_or_else(|| vec![0.0; x.ncols()], |m| m.to_vec());
        let scales = x
            .std_axis(Axis(0), 0.0)
            .iter()
            .map(|&s| if s > 1e-12 * (1.0 + s.abs()) && s.is_finite() { s } else { 1.0 })
            .collect();
        Self { means, scales }
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.to_owned();
        for (mut col, (&m, &s)) in z.axis_iter_mut(Axis(1)).zip(self.means.iter().zip(&self.scales)) {
            col.mapv_inplace(|v| (v - m) / s);
        }
        z
    }

    pub fn transform_row(&self, x: ArrayView1<f64>) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }
}
