//! Raw table ingestion: column roles, categorical encoding and min-max
//! normalization into a dense `[0, 1]` feature matrix.

mod encode;
mod extract;
mod normalize;
mod schema;
mod table;

use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::FeatureMatrix;

pub use encode::encode;
pub use extract::{extract_subset, ExtractSummary};
pub use normalize::{apply_normalize, fit_normalize, NormalizationStats};
pub use schema::{ColumnRole, ColumnSpec, FeatureSchema, UnlistedColumns};
pub use table::{load_table, load_tables, Cell, RawColumn, RawTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sources: Vec<String>,
    pub schema_hash: String,
}

/// Encoded records with their ground truth held apart from the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedDataset {
    pub features: FeatureMatrix,
    pub is_anomaly: Vec<bool>,
    /// Raw label text per row (attack family for most benchmarks).
    pub label_values: Vec<String>,
    pub feature_names: Vec<String>,
    pub provenance: Provenance,
}

impl EncodedDataset {
    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn anomaly_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.is_anomaly[i]).collect()
    }

    pub fn normal_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| !self.is_anomaly[i]).collect()
    }

    /// New dataset holding `rows` in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> EncodedDataset {
        EncodedDataset {
            features: self.features.select(Axis(0), rows),
            is_anomaly: rows.iter().map(|&i| self.is_anomaly[i]).collect(),
            label_values: rows.iter().map(|&i| self.label_values[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        bincode::serialize_into(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(bincode::deserialize_from(BufReader::new(file))?)
    }

    /// CSV dump: feature columns, then `label` (0/1) and `label_value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = self.feature_names.clone();
        header.push("label".into());
        header.push("label_value".into());
        w.write_record(&header).map_err(csv_err)?;
        for (i, row) in self.features.rows().into_iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(u8::from(self.is_anomaly[i]).to_string());
            rec.push(self.label_values[i].clone());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn empty_matrix(cols: usize) -> FeatureMatrix {
    Array2::zeros((0, cols))
}
