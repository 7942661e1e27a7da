//! Flat key-value config file plus flag overrides, with the origin of every
//! resolved value recorded for printing.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Raised for bad flags, unreadable config files and invalid values.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "jobs",
    "data_dir",
    "dataset",
    "experiment_id",
    "methods",
    "method",
    "labelled_anomaly_counts",
    "anomaly_percents",
    "fixed_labelled",
    "fixed_percent",
    "sample_set_count",
    "labelled",
    "normal_count",
    "anomaly_total",
    "labelled_count",
    "anomaly_percent",
    "epochs",
    "steps_per_epoch",
    "batch_size",
    "learning_rate",
    "optimizer",
    "rmsprop_decay",
    "rmsprop_epsilon",
    "lambda",
    "hidden_sizes",
    "batch_composition",
    "gap",
    "repetitions",
    "threshold",
    "test_fraction",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    File,
    Flag,
}

impl Source {
    fn as_str(self) -> &'static str {
        match self {
            Source::Default => "default",
            Source::File => "file",
            Source::Flag => "flag",
        }
    }
}

pub struct Resolver {
    file: toml::Table,
    entries: Vec<(String, String, Source)>,
}

impl Resolver {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let file = match path {
            None => toml::Table::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
                let table: toml::Table = toml::from_str(&text)
                    .map_err(|e| usage(format!("cannot parse config {}: {e}", p.display())))?;
                for (key, value) in &table {
                    if value.is_table() {
                        return Err(usage(format!("config key `{key}`: nested tables are not supported")));
                    }
                    if !KNOWN_KEYS.contains(&key.as_str()) {
                        return Err(usage(format!(
                            "unknown config key `{key}` in {}",
                            p.display()
                        )));
                    }
                }
                table
            }
        };
        Ok(Self {
            file,
            entries: Vec::new(),
        })
    }

    fn from_file<T: DeserializeOwned>(&self, key: &str) -> anyhow::Result<Option<T>> {
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .clone()
                .try_into()
                .map(Some)
                .map_err(|e| usage(format!("config key `{key}`: {e}"))),
        }
    }

    fn record<T: Serialize>(&mut self, key: &str, value: &T, source: Source) {
        let shown = serde_json::to_string(value).unwrap_or_else(|_| "?".into());
        self.entries.push((key.to_string(), shown, source));
    }

    /// Flag, then file, then default.
    pub fn value<T: DeserializeOwned + Serialize>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> anyhow::Result<T> {
        let (value, source) = match flag {
            Some(v) => (v, Source::Flag),
            None => match self.from_file(key)? {
                Some(v) => (v, Source::File),
                None => (default, Source::Default),
            },
        };
        self.record(key, &value, source);
        Ok(value)
    }

    /// Like [`Self::value`] without a default; `None` is recorded as `null`.
    pub fn optional<T: DeserializeOwned + Serialize>(
        &mut self,
        key: &str,
        flag: Option<T>,
    ) -> anyhow::Result<Option<T>> {
        let (value, source) = match flag {
            Some(v) => (Some(v), Source::Flag),
            None => match self.from_file(key)? {
                Some(v) => (Some(v), Source::File),
                None => (None, Source::Default),
            },
        };
        self.record(key, &value, source);
        Ok(value)
    }

    /// Resolved values as `key = value  # source`, one per line.
    pub fn render(&self) -> String {
        let width = self.entries.iter().map(|e| e.0.len()).max().unwrap_or(0);
        let mut out = String::from("resolved config:\n");
        for (key, value, source) in &self.entries {
            out.push_str(&format!("  {key:width$} = {value}  # {}\n", source.as_str()));
        }
        out
    }

    pub fn as_json(&self) -> serde_json::Value {
        self.entries
            .iter()
            .map(|(k, v, s)| {
                (
                    k.clone(),
                    serde_json::json!({
                        "value": serde_json::from_str::<serde_json::Value>(v).unwrap_or(serde_json::Value::Null),
                        "source": s.as_str(),
                    }),
                )
            })
            .collect::<serde_json::Map<_, _>>()
            .into()
    }
}
