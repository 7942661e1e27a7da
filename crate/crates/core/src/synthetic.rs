//! Synthetic labelled data for smoke tests and demos.

use ndarray::Array2;
use rand_distr::{Distribution, Normal};

use crate::ingest::{EncodedDataset, Provenance};
use crate::rng::seeded;

/// Two isotropic Gaussian clusters: normals around `normal_center`, anomalies
/// around `anomaly_center` (same value on every axis).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianClusters {
    pub rows: usize,
    pub anomaly_fraction: f64,
    pub dim: usize,
    pub sigma: f64,
    pub normal_center: f64,
    pub anomaly_center: f64,
    pub seed: u64,
}

impl Default for GaussianClusters {
    fn default() -> Self {
        Self {
            rows: 2000,
            anomaly_fraction: 0.1,
            dim: 2,
            sigma: 0.1,
            normal_center: 0.0,
            anomaly_center: 1.0,
            seed: 0,
        }
    }
}

impl GaussianClusters {
    /// Normals first, then anomalies. Features are raw (not normalized).
    pub fn generate(&self) -> EncodedDataset {
        let anomalies = (self.rows as f64 * self.anomaly_fraction).round() as usize;
        let normals = self.rows - anomalies;
        let noise = Normal::new(0.0, self.sigma).expect("sigma must be finite and >= 0");
        let mut rng = seeded(self.seed);
        let mut features = Array2::zeros((self.rows, self.dim));
        for (i, mut row) in features.rows_mut().into_iter().enumerate() {
            let center = if i < normals {
                self.normal_center
            } else {
                self.anomaly_center
            };
            for v in row.iter_mut() {
                *v = center + noise.sample(&mut rng);
            }
        }
        EncodedDataset {
            features,
            is_anomaly: (0..self.rows).map(|i| i >= normals).collect(),
            label_values: (0..self.rows)
                .map(|i| if i >= normals { "anomaly" } else { "normal" }.to_string())
                .collect(),
            feature_names: (0..self.dim).map(|j| format!("x{j}")).collect(),
            provenance: Provenance {
                sources: vec![format!("synthetic:gaussian:seed={}", self.seed)],
                schema_hash: String::new(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_sizes_and_centres() {
        let d = GaussianClusters::default().generate();
        assert_eq!(d.n_rows(), 2000);
        assert_eq!(d.anomaly_rows().len(), 200);
        let mean_anom: f64 =
            d.anomaly_rows().iter().map(|&i| d.features[[i, 0]]).sum::<f64>() / 200.0;
        assert!((mean_anom - 1.0).abs() < 0.05);
    }
}
