//! Built-in dataset descriptions. Schemas and SampleSet sizes are data files
//! compiled into the binary; raw tables are looked up under a data directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{encode, load_tables, EncodedDataset, FeatureSchema};
use crate::sampling::SampleSetSpec;

pub const BUILTIN_DATASETS: [&str; 3] = ["nslkdd", "cicids2018", "toniot"];

const SCHEMAS: [(&str, &str); 3] = [
    ("nslkdd", include_str!("../../configs/schemas/nslkdd.toml")),
    ("cicids2018", include_str!("../../configs/schemas/cicids2018.toml")),
    ("toniot", include_str!("../../configs/schemas/toniot.toml")),
];

const DATASETS: [(&str, &str); 3] = [
    ("nslkdd", include_str!("../../configs/datasets/nslkdd.toml")),
    ("cicids2018", include_str!("../../configs/datasets/cicids2018.toml")),
    ("toniot", include_str!("../../configs/datasets/toniot.toml")),
];

pub fn builtin_schema(name: &str) -> Result<FeatureSchema> {
    let (_, text) = SCHEMAS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::InvalidConfig(format!("no built-in schema named `{name}`")))?;
    FeatureSchema::from_toml_str(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub id: String,
    /// Built-in schema name, or a path to a schema file.
    pub schema: String,
    /// Raw tables, relative to the data directory.
    pub files: Vec<PathBuf>,
    /// Largest SampleSet the experiments draw (labelled count is the reservation).
    pub sample_set: SampleSetSpec,
}

impl DatasetConfig {
    pub fn builtin(id: &str) -> Result<Self> {
        let (_, text) = DATASETS.iter().find(|(n, _)| *n == id).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "unknown dataset `{id}` (expected one of {})",
                BUILTIN_DATASETS.join(", ")
            ))
        })?;
        Self::from_toml_str(text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: DatasetConfig = toml::from_str(text)?;
        cfg.sample_set.validate()?;
        Ok(cfg)
    }

    pub fn schema(&self) -> Result<FeatureSchema> {
        if self.schema.ends_with(".toml") {
            FeatureSchema::from_file(Path::new(&self.schema))
        } else {
            builtin_schema(&self.schema)
        }
    }

    pub fn paths(&self, data_dir: &Path) -> Vec<PathBuf> {
        self.files.iter().map(|f| data_dir.join(f)).collect()
    }

    /// Load and encode the raw tables (not normalized).
    pub fn load(&self, data_dir: &Path) -> Result<EncodedDataset> {
        let paths = self.paths(data_dir);
        if let Some(missing) = paths.iter().find(|p| !p.exists()) {
            return Err(Error::MissingFile(missing.clone()));
        }
        let schema = self.schema()?;
        let table = load_tables(&paths, &schema)?;
        encode(&table, &schema)
    }
}
