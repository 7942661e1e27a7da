use ndarray::Array2;

use super::schema::{ColumnRole, FeatureSchema};
use super::table::{Cell, RawTable};
use super::{empty_matrix, EncodedDataset, Provenance};
use crate::error::{Error, Result};

enum Slot<'a> {
    Numeric,
    Ordinal(&'a [String]),
    Onehot(&'a [String]),
    Label,
}

/// Encode a raw table into real-valued features (not yet normalized).
///
/// One-hot columns expand to one feature per declared value named
/// `column=value`; ordinal columns map to their 0-based rank; the label column
/// becomes `is_anomaly` and never appears among the features.
pub fn encode(table: &RawTable, schema: &FeatureSchema) -> Result<EncodedDataset> {
    let mut slots = Vec::with_capacity(table.columns.len());
    let mut feature_names = Vec::new();
    for col in &table.columns {
        let slot = match &col.role {
            ColumnRole::Numeric => {
                feature_names.push(col.name.clone());
                Slot::Numeric
            }
            ColumnRole::OrdinalCategorical { values } => {
                feature_names.push(col.name.clone());
                Slot::Ordinal(values)
            }
            ColumnRole::OnehotCategorical { values } => {
                feature_names.extend(values.iter().map(|v| format!("{}={v}", col.name)));
                Slot::Onehot(values)
            }
            ColumnRole::Label => Slot::Label,
            ColumnRole::Drop => continue,
        };
        slots.push((col.name.as_str(), slot));
    }

    let n_features = feature_names.len();
    let n_rows = table.rows.len();
    let mut features = if n_rows == 0 {
        empty_matrix(n_features)
    } else {
        Array2::zeros((n_rows, n_features))
    };
    let mut is_anomaly = Vec::with_capacity(n_rows);
    let mut label_values = Vec::with_capacity(n_rows);

    for (r, row) in table.rows.iter().enumerate() {
        let mut out = features.row_mut(r);
        let mut j = 0;
        for ((name, slot), cell) in slots.iter().zip(row) {
            match (slot, cell) {
                (Slot::Numeric, Cell::Number(v)) => {
                    out[j] = *v;
                    j += 1;
                }
                (Slot::Ordinal(values), Cell::Text(t)) => {
                    out[j] = rank_of(values, t, r, name)? as f64;
                    j += 1;
                }
                (Slot::Onehot(values), Cell::Text(t)) => {
                    out[j + rank_of(values, t, r, name)?] = 1.0;
                    j += values.len();
                }
                (Slot::Label, Cell::Text(t)) => {
                    let label = schema
                        .classify_label(t)
                        .ok_or_else(|| Error::UnclassifiableLabel {
                            row: r,
                            value: t.clone(),
                        })?;
                    is_anomaly.push(label);
                    label_values.push(t.clone());
                }
                (_, cell) => {
                    return Err(Error::Schema(format!(
                        "column `{name}` holds an unexpected cell {cell:?}"
                    )))
                }
            }
        }
    }

    Ok(EncodedDataset {
        features,
        is_anomaly,
        label_values,
        feature_names,
        provenance: Provenance {
            sources: table.sources.clone(),
            schema_hash: schema.fingerprint(),
        },
    })
}

fn rank_of(values: &[String], value: &str, row: usize, column: &str) -> Result<usize> {
    values
        .iter()
        .position(|v| v == value)
        .ok_or_else(|| Error::UndeclaredCategory {
            row,
            column: column.to_string(),
            value: value.to_string(),
        })
}
