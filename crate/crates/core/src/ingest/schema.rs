use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// How a column is turned into features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum ColumnRole {
    Numeric,
    /// Ranked categories; the value at 0-based rank `r` encodes to `r`.
    OrdinalCategorical { values: Vec<String> },
    /// Unordered categories; expands to one binary feature per declared value.
    OnehotCategorical { values: Vec<String> },
    Label,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub role: ColumnRole,
}

/// What to do with header columns the schema does not mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnlistedColumns {
    #[default]
    Error,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    /// Headerless files (e.g. the raw NSL-KDD text files) are read in schema order.
    #[serde(default = "default_true")]
    pub has_header: bool,
    #[serde(default)]
    pub unlisted_columns: UnlistedColumns,
    /// Treat `inf`/`NaN` numeric cells as missing (imputed to 0).
    #[serde(default)]
    pub nonfinite_as_missing: bool,
    /// Label values mapped to anomaly = 1. When empty, everything outside
    /// `label_normal_values` is an anomaly.
    #[serde(default)]
    pub label_positive_values: Vec<String>,
    /// Label values mapped to normal = 0. When empty, everything outside
    /// `label_positive_values` is normal.
    #[serde(default)]
    pub label_normal_values: Vec<String>,
    pub columns: Vec<ColumnSpec>,
}

fn default_true() -> bool {
    true
}

impl FeatureSchema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: FeatureSchema = toml::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for col in &self.columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", col.name)));
            }
            match &col.role {
                ColumnRole::OrdinalCategorical { values } | ColumnRole::OnehotCategorical { values } => {
                    if values.is_empty() {
                        return Err(Error::Schema(format!(
                            "categorical column `{}` declares no values",
                            col.name
                        )));
                    }
                    let distinct: HashSet<_> = values.iter().collect();
                    if distinct.len() != values.len() {
                        return Err(Error::Schema(format!(
                            "categorical column `{}` repeats a value",
                            col.name
                        )));
                    }
                }
                _ => {}
            }
        }
        let labels = self
            .columns
            .iter()
            .filter(|c| c.role == ColumnRole::Label)
            .count();
        if labels != 1 {
            return Err(Error::Schema(format!(
                "exactly one label column required, found {labels}"
            )));
        }
        if self.label_positive_values.is_empty() && self.label_normal_values.is_empty() {
            return Err(Error::Schema(
                "one of label_positive_values / label_normal_values must be non-empty".into(),
            ));
        }
        if let Some(v) = self
            .label_positive_values
            .iter()
            .find(|v| self.label_normal_values.contains(v))
        {
            return Err(Error::Schema(format!(
                "label value {v:?} is both normal and anomalous"
            )));
        }
        if !self.has_header && self.unlisted_columns != UnlistedColumns::Error {
            return Err(Error::Schema(
                "headerless files cannot carry unlisted columns".into(),
            ));
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn label_column(&self) -> &str {
        self.columns
            .iter()
            .find(|c| c.role == ColumnRole::Label)
            .map(|c| c.name.as_str())
            .expect("validated schema has a label column")
    }

    /// Classify a raw label cell; `None` when the value is in neither set and
    /// both sets are declared.
    pub fn classify_label(&self, value: &str) -> Option<bool> {
        if self.label_positive_values.iter().any(|v| v == value) {
            Some(true)
        } else if self.label_normal_values.iter().any(|v| v == value) {
            Some(false)
        } else if self.label_positive_values.is_empty() {
            Some(true)
        } else if self.label_normal_values.is_empty() {
            Some(false)
        } else {
            None
        }
    }

    /// Hex SHA-256 of the canonical JSON form; recorded as dataset provenance.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schema serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
name = "toy"
label_normal_values = ["normal"]

[[columns]]
name = "x"
role = "numeric"

[[columns]]
name = "flag"
role = "onehot_categorical"
values = ["S0", "SF", "REJ"]

[[columns]]
name = "severity"
role = "ordinal_categorical"
values = ["low", "med", "high"]

[[columns]]
name = "label"
role = "label"
"#;

    #[test]
    fn parses_toml_roles() {
        let s = FeatureSchema::from_toml_str(SMALL).unwrap();
        assert!(s.has_header);
        assert_eq!(s.label_column(), "label");
        assert_eq!(
            s.column("flag").unwrap().role,
            ColumnRole::OnehotCategorical {
                values: vec!["S0".into(), "SF".into(), "REJ".into()]
            }
        );
    }

    #[test]
    fn rejects_duplicate_and_missing_label() {
        let dup = SMALL.replace("name = \"severity\"", "name = \"x\"");
        assert!(matches!(FeatureSchema::from_toml_str(&dup), Err(Error::Schema(_))));
        let no_label = SMALL.replace("role = \"label\"", "role = \"drop\"");
        assert!(matches!(FeatureSchema::from_toml_str(&no_label), Err(Error::Schema(_))));
    }

    #[test]
    fn label_classification_complement_rules() {
        let s = FeatureSchema::from_toml_str(SMALL).unwrap();
        assert_eq!(s.classify_label("normal"), Some(false));
        assert_eq!(s.classify_label("neptune"), Some(true));

        let mut both = s.clone();
        both.label_positive_values = vec!["attack".into()];
        assert_eq!(both.classify_label("attack"), Some(true));
        assert_eq!(both.classify_label("other"), None);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = FeatureSchema::from_toml_str(SMALL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.columns[0].role = ColumnRole::Drop;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
