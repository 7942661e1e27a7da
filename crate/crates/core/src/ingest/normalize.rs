use serde::{Deserialize, Serialize};

use super::EncodedDataset;
use crate::error::{Error, Result};
use crate::FeatureMatrix;

/// Per-feature minimum and maximum observed on the fitting rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationStats {
    pub fn fit(features: &FeatureMatrix) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::Empty("cannot fit normalization on zero rows"));
        }
        let n = features.ncols();
        let mut min = vec![f64::INFINITY; n];
        let mut max = vec![f64::NEG_INFINITY; n];
        for (i, row) in features.rows().into_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, feature: j });
                }
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// `(x - MIN) / (MAX - MIN)`, clamped to `[0, 1]`; constant features map to 0.
    pub fn transform(&self, features: &mut FeatureMatrix) -> Result<()> {
        if features.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: features.ncols(),
            });
        }
        for (i, mut row) in features.rows_mut().into_iter().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, feature: j });
                }
                *v = self.scale(j, *v);
            }
        }
        Ok(())
    }

    fn scale(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[j], self.max[j]);
        if hi > lo {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Fit min-max statistics on `dataset` and return the normalized copy.
pub fn fit_normalize(dataset: &EncodedDataset) -> Result<(EncodedDataset, NormalizationStats)> {
    let stats = NormalizationStats::fit(&dataset.features)?;
    let out = apply_normalize(dataset, &stats)?;
    Ok((out, stats))
}

/// Normalize held-out rows with statistics fitted elsewhere.
pub fn apply_normalize(dataset: &EncodedDataset, stats: &NormalizationStats) -> Result<EncodedDataset> {
    let mut out = dataset.clone();
    stats.transform(&mut out.features)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn stats(min: f64, max: f64) -> NormalizationStats {
        NormalizationStats {
            min: vec![min],
            max: vec![max],
        }
    }

    fn col(values: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_shape_vec((values.len(), 1), values.to_vec()).unwrap()
    }

    fn fit_col(values: &[f64]) -> Vec<f64> {
        let mut m = col(values);
        NormalizationStats::fit(&m).unwrap().transform(&mut m).unwrap();
        m.column(0).to_vec()
    }

    #[test]
    fn fitted_columns() {
        assert_eq!(fit_col(&[2.0, 4.0, 6.0]), [0.0, 0.5, 1.0]);
        assert_eq!(fit_col(&[7.0, 7.0, 7.0]), [0.0, 0.0, 0.0]);
        // (2 - 1) / (10 - 1)
        assert_eq!(fit_col(&[1.0, 2.0, 10.0]), [0.0, 1.0 / 9.0, 1.0]);
    }

    #[test]
    fn held_out_values_clamp() {
        let s = stats(0.0, 10.0);
        let mut m = col(&[5.0, 12.0, -2.0]);
        s.transform(&mut m).unwrap();
        assert_eq!(m.column(0).to_vec(), [0.5, 1.0, 0.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            NormalizationStats::fit(&FeatureMatrix::zeros((0, 2))),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            NormalizationStats::fit(&array![[1.0, f64::NAN]]),
            Err(Error::NonFinite { row: 0, feature: 1 })
        ));
        let mut m = array![[1.0, 2.0]];
        assert!(matches!(
            stats(0.0, 1.0).transform(&mut m),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
