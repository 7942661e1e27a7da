use std::path::Path;

use rand::Rng;
use serde::Serialize;

use super::schema::{ColumnRole, FeatureSchema};
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExtractSummary {
    pub normal_seen: usize,
    pub anomaly_seen: usize,
    pub normal_kept: usize,
    pub anomaly_kept: usize,
}

/// Fixed-size uniform sample of a stream (Algorithm R).
struct Reservoir {
    capacity: usize,
    seen: usize,
    items: Vec<Vec<String>>,
}

impl Reservoir {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            seen: 0,
            items: Vec::new(),
        }
    }

    fn offer<R: Rng>(&mut self, item: Vec<String>, rng: &mut R) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            let j = rng.random_range(0..=self.seen);
            if j < self.capacity {
                self.items[j] = item;
            }
        }
        self.seen += 1;
    }
}

/// Stream large headed CSVs and keep a uniform random subset of
/// `normal_count` normal and `anomaly_count` anomalous rows. The output holds
/// the schema's non-dropped columns in schema order; source files may differ
/// in column order and extra columns.
pub fn extract_subset<P: AsRef<Path>>(
    inputs: &[P],
    schema: &FeatureSchema,
    normal_count: usize,
    anomaly_count: usize,
    seed: u64,
    output: &Path,
) -> Result<ExtractSummary> {
    if !schema.has_header {
        return Err(Error::Schema("subset extraction needs headed files".into()));
    }
    let kept: Vec<&str> = schema
        .columns
        .iter()
        .filter(|c| c.role != ColumnRole::Drop)
        .map(|c| c.name.as_str())
        .collect();
    let label = schema.label_column();
    let label_pos = kept.iter().position(|c| *c == label).expect("label is kept");

    let mut rng = seeded(seed);
    let mut normals = Reservoir::new(normal_count);
    let mut anomalies = Reservoir::new(anomaly_count);

    for input in inputs {
        let path = input.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(csv_err)?;
        let mut records = reader.records();
        let header: Vec<String> = match records.next() {
            Some(rec) => rec
                .map_err(csv_err)?
                .iter()
                .map(|h| h.trim_start_matches('\u{feff}').to_string())
                .collect(),
            None => continue,
        };
        let positions: Vec<usize> = kept
            .iter()
            .map(|name| {
                header.iter().position(|h| h == name).ok_or_else(|| {
                    Error::HeaderMismatch(format!("{} lacks column `{name}`", path.display()))
                })
            })
            .collect::<Result<_>>()?;

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
            if rec.iter().zip(&header).all(|(a, b)| a == b) {
                continue;
            }
            let row: Vec<String> = positions.iter().map(|&p| rec[p].to_string()).collect();
            match schema.classify_label(&row[label_pos]) {
                Some(true) => anomalies.offer(row, &mut rng),
                Some(false) => normals.offer(row, &mut rng),
                None => {
                    return Err(Error::UnclassifiableLabel {
                        row: line,
                        value: row[label_pos].clone(),
                    })
                }
            }
        }
    }

    let csv_err = |source| Error::Csv {
        path: output.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(output).map_err(csv_err)?;
    w.write_record(&kept).map_err(csv_err)?;
    for row in normals.items.iter().chain(&anomalies.items) {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(output, e))?;

    Ok(ExtractSummary {
        normal_seen: normals.seen,
        anomaly_seen: anomalies.seen,
        normal_kept: normals.items.len(),
        anomaly_kept: anomalies.items.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &str = r#"
name = "t"
label_normal_values = ["Benign"]
columns = [
  { name = "a", role = "numeric" },
  { name = "Timestamp", role = "drop" },
  { name = "Label", role = "label" },
]
"#;

    #[test]
    fn keeps_requested_counts_and_reorders_columns() {
        let dir = tempfile::tempdir().unwrap();
        let f1 = dir.path().join("d1.csv");
        let f2 = dir.path().join("d2.csv");
        let mut t1 = String::from("Timestamp,a,Label\n");
        for i in 0..50 {
            t1.push_str(&format!("x,{i},Benign\n"));
        }
        t1.push_str("Timestamp,a,Label\n");
        for i in 0..20 {
            t1.push_str(&format!("x,{i},DoS\n"));
        }
        std::fs::write(&f1, t1).unwrap();
        std::fs::write(&f2, "Label,Extra,a,Timestamp\nBot,9,1,y\nBenign,9,2,y\n").unwrap();

        let schema = FeatureSchema::from_toml_str(SCHEMA).unwrap();
        let out = dir.path().join("subset.csv");
        let s = extract_subset(&[&f1, &f2], &schema, 10, 5, 1, &out).unwrap();
        assert_eq!(
            s,
            ExtractSummary {
                normal_seen: 51,
                anomaly_seen: 21,
                normal_kept: 10,
                anomaly_kept: 5
            }
        );
        let text = std::fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "a,Label");
        assert_eq!(lines.len(), 16);
        assert_eq!(lines[1..11].iter().filter(|l| l.ends_with(",Benign")).count(), 10);

        let again = dir.path().join("again.csv");
        extract_subset(&[&f1, &f2], &schema, 10, 5, 1, &again).unwrap();
        assert_eq!(text, std::fs::read_to_string(&again).unwrap());
    }
}
