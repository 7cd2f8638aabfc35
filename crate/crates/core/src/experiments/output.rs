//! CSV tables and the JSON run manifest.

use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ExperimentSpec, GapRow, ResultRow};

pub const RESULT_COLUMNS: &[&str] = &[
    "experiment", "batch_size", "lambda_e", "lambda_r", "load", "buffer", "policy", "mean", "ci95", "drop_rate", "n",
    "replications", "seed_digest",
];

pub const GAP_COLUMNS: &[&str] = &[
    "experiment", "batch_size", "lambda_e", "lambda_r", "load", "buffer", "minuend", "subtrahend", "mean", "ci95",
    "replications", "seed_digest",
];

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("serializing manifest: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), OutputError> {
    let csv_err = |source| OutputError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
}

/// Header row written even when `rows` is empty.
pub fn write_csv_with_header<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), OutputError> {
    if rows.is_empty() {
        return write_text(path, &format!("{}\n", header.join(",")));
    }
    write_csv(path, rows)
}

pub fn write_results(dir: &Path, rows: &[ResultRow], gaps: &[GapRow]) -> Result<(), OutputError> {
    write_csv_with_header(&dir.join("results.csv"), RESULT_COLUMNS, rows)?;
    write_csv_with_header(&dir.join("gaps.csv"), GAP_COLUMNS, gaps)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), OutputError> {
    fs::write(path, text).map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
}

pub fn ensure_dir(dir: &Path) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.to_path_buf(), source })
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub file: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub spec: &'a ExperimentSpec,
    pub seeds: Vec<u64>,
    pub seed_digest: String,
    pub files: Vec<FileEntry>,
}

impl<'a> Manifest<'a> {
    pub fn new(spec: &'a ExperimentSpec) -> Self {
        let seeds = spec.seeds();
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed_digest: super::seed_digest(&seeds),
            seeds,
            spec,
            files: vec![
                FileEntry { file: "results.csv".into(), columns: to_owned(RESULT_COLUMNS) },
                FileEntry { file: "gaps.csv".into(), columns: to_owned(GAP_COLUMNS) },
            ],
        }
    }

    pub fn with_file(mut self, file: &str, columns: &[&str]) -> Self {
        self.files.push(FileEntry { file: file.into(), columns: to_owned(columns) });
        self
    }

    pub fn write(&self, dir: &Path) -> Result<(), OutputError> {
        write_text(&dir.join("manifest.json"), &serde_json::to_string_pretty(self)?)
    }
}

fn to_owned(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}
