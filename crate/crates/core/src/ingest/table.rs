use std::collections::HashMap;
use std::path::Path;

use super::schema::{ColumnRole, FeatureSchema, UnlistedColumns};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub role: ColumnRole,
}

/// Typed rows with dropped columns removed. Column order is schema order,
/// followed by any unlisted header columns in the order they appear.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<RawColumn>,
    pub rows: Vec<Vec<Cell>>,
    pub sources: Vec<String>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Append `other`, matching columns by name.
    pub fn append(&mut self, other: RawTable) -> Result<()> {
        if other.columns.len() != self.columns.len() {
            return Err(Error::HeaderMismatch(format!(
                "{} has {} retained columns, expected {}",
                other.sources.join(","),
                other.columns.len(),
                self.columns.len()
            )));
        }
        let mut order = Vec::with_capacity(self.columns.len());
        for col in &self.columns {
            let idx = other.column_index(&col.name).ok_or_else(|| {
                Error::HeaderMismatch(format!(
                    "{} lacks column `{}`",
                    other.sources.join(","),
                    col.name
                ))
            })?;
            order.push(idx);
        }
        for mut row in other.rows {
            let reordered = order
                .iter()
                .map(|&i| std::mem::replace(&mut row[i], Cell::Number(0.0)))
                .collect();
            self.rows.push(reordered);
        }
        self.sources.extend(other.sources);
        Ok(())
    }
}

/// Read one CSV file under `schema`.
///
/// Empty numeric cells become 0. With `nonfinite_as_missing`, `inf`/`NaN`
/// spellings are treated the same way. Rows that repeat the header verbatim
/// (seen in concatenated CICFlowMeter exports) are skipped.
pub fn load_table(path: &Path, schema: &FeatureSchema) -> Result<RawTable> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let mut records = reader.records();

    let header: Vec<String> = if schema.has_header {
        match records.next() {
            Some(rec) => rec
                .map_err(csv_err)?
                .iter()
                .map(|h| h.trim_start_matches('\u{feff}').trim().to_string())
                .collect(),
            None => return Err(Error::HeaderMismatch(format!("{} is empty", path.display()))),
        }
    } else {
        schema.columns.iter().map(|c| c.name.clone()).collect()
    };

    let plan = resolve_columns(&header, schema)?;

    let mut rows = Vec::new();
    for (line, rec) in records.enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != header.len() {
            return Err(Error::HeaderMismatch(format!(
                "{} row {line}: {} fields, header has {}",
                path.display(),
                rec.len(),
                header.len()
            )));
        }
        if schema.has_header && rec.iter().zip(&header).all(|(a, b)| a == b) {
            continue;
        }
        let mut row = Vec::with_capacity(plan.len());
        for (col, pos) in &plan {
            let raw = &rec[*pos];
            let cell = match col.role {
                ColumnRole::Numeric => {
                    Cell::Number(parse_numeric(raw, schema.nonfinite_as_missing).ok_or_else(|| {
                        Error::UnparseableNumber {
                            row: line,
                            column: col.name.clone(),
                            value: raw.to_string(),
                        }
                    })?)
                }
                _ => Cell::Text(raw.to_string()),
            };
            row.push(cell);
        }
        rows.push(row);
    }

    Ok(RawTable {
        columns: plan.into_iter().map(|(c, _)| c).collect(),
        rows,
        sources: vec![path.display().to_string()],
    })
}

/// Read and concatenate several files sharing one schema.
pub fn load_tables<P: AsRef<Path>>(paths: &[P], schema: &FeatureSchema) -> Result<RawTable> {
    let mut iter = paths.iter();
    let first = iter.next().ok_or(Error::Empty("no input files"))?;
    let mut table = load_table(first.as_ref(), schema)?;
    for p in iter {
        table.append(load_table(p.as_ref(), schema)?)?;
    }
    Ok(table)
}

fn resolve_columns(header: &[String], schema: &FeatureSchema) -> Result<Vec<(RawColumn, usize)>> {
    let mut positions: HashMap<&str, usize> = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        if positions.insert(name.as_str(), i).is_some() {
            return Err(Error::HeaderMismatch(format!("duplicate header `{name}`")));
        }
    }

    let mut plan = Vec::new();
    for col in &schema.columns {
        match (positions.get(col.name.as_str()), &col.role) {
            (_, ColumnRole::Drop) => {}
            (Some(&pos), role) => plan.push((
                RawColumn {
                    name: col.name.clone(),
                    role: role.clone(),
                },
                pos,
            )),
            (None, _) => {
                return Err(Error::HeaderMismatch(format!(
                    "schema column `{}` is absent from the header",
                    col.name
                )))
            }
        }
    }
    for (pos, name) in header.iter().enumerate() {
        if schema.column(name).is_some() {
            continue;
        }
        match schema.unlisted_columns {
            UnlistedColumns::Numeric => plan.push((
                RawColumn {
                    name: name.clone(),
                    role: ColumnRole::Numeric,
                },
                pos,
            )),
            UnlistedColumns::Error => {
                return Err(Error::HeaderMismatch(format!(
                    "header column `{name}` is not in schema `{}`",
                    schema.name
                )))
            }
        }
    }
    Ok(plan)
}

fn parse_numeric(raw: &str, nonfinite_as_missing: bool) -> Option<f64> {
    if raw.is_empty() {
        return Some(0.0);
    }
    let value: f64 = raw.parse().ok()?;
    if !value.is_finite() && nonfinite_as_missing {
        Some(0.0)
    } else {
        Some(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn schema() -> FeatureSchema {
        FeatureSchema::from_toml_str(
            r#"
name = "t"
label_normal_values = ["normal"]
[[columns]]
name = "timestamp"
role = "drop"
[[columns]]
name = "bytes"
role = "numeric"
[[columns]]
name = "flag"
role = "onehot_categorical"
values = ["S0", "SF"]
[[columns]]
name = "label"
role = "label"
"#,
        )
        .unwrap()
    }

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn drops_timestamp_and_imputes_missing() {
        let f = write("label,flag,timestamp,bytes\nnormal,SF,2018-02-14 10:00,\nsmurf,S0,2018-02-14 10:01,12.5\n");
        let t = load_table(f.path(), &schema()).unwrap();
        let names: Vec<_> = t.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["bytes", "flag", "label"]);
        assert_eq!(t.rows[0][0], Cell::Number(0.0));
        assert_eq!(t.rows[1][0], Cell::Number(12.5));
        assert_eq!(t.rows[1][1], Cell::Text("S0".into()));
    }

    #[test]
    fn empty_body_is_zero_rows() {
        let f = write("timestamp,bytes,flag,label\n");
        let t = load_table(f.path(), &schema()).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.columns.len(), 3);
    }

    #[test]
    fn header_mismatch_and_missing_file() {
        let f = write("bytes,flag,label,extra\n1,SF,normal,3\n");
        assert!(matches!(load_table(f.path(), &schema()), Err(Error::HeaderMismatch(_))));
        let f = write("bytes,label\n1,normal\n");
        assert!(matches!(load_table(f.path(), &schema()), Err(Error::HeaderMismatch(_))));
        assert!(matches!(
            load_table(Path::new("/nonexistent/file.csv"), &schema()),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn unparseable_numeric_is_an_error() {
        let f = write("bytes,flag,label\nabc,SF,normal\n");
        assert!(matches!(
            load_table(f.path(), &schema()),
            Err(Error::UnparseableNumber { .. })
        ));
    }

    #[test]
    fn repeated_header_rows_and_nonfinite() {
        let mut s = schema();
        s.nonfinite_as_missing = true;
        let f = write("bytes,flag,label\nInfinity,SF,normal\nbytes,flag,label\nNaN,S0,normal\n");
        let t = load_table(f.path(), &s).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.rows[0][0], Cell::Number(0.0));
        assert_eq!(t.rows[1][0], Cell::Number(0.0));
    }

    #[test]
    fn unlisted_numeric_columns_are_appended() {
        let mut s = schema();
        s.unlisted_columns = UnlistedColumns::Numeric;
        let f = write("cpu,bytes,flag,label\n0.5,1,SF,normal\n");
        let t = load_table(f.path(), &s).unwrap();
        assert_eq!(t.columns.last().unwrap().name, "cpu");
        assert_eq!(t.rows[0][3], Cell::Number(0.5));
    }

    #[test]
    fn concatenation_matches_by_name() {
        let mut s = schema();
        s.unlisted_columns = UnlistedColumns::Numeric;
        let a = write("a,b,bytes,flag,label\n1,2,3,SF,normal\n");
        let b = write("b,a,bytes,flag,label\n20,10,30,S0,x\n");
        let t = load_tables(&[a.path(), b.path()], &s).unwrap();
        assert_eq!(t.len(), 2);
        let ia = t.column_index("a").unwrap();
        assert_eq!(t.rows[1][ia], Cell::Number(10.0));
    }

    #[test]
    fn headerless_uses_schema_order() {
        let mut s = schema();
        s.has_header = false;
        let f = write("ts,5,SF,normal\n");
        let t = load_table(f.path(), &s).unwrap();
        assert_eq!(t.rows[0][0], Cell::Number(5.0));
    }
}
