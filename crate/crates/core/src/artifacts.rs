//! CSV tables and JSON run manifests consumed by plotting scripts.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `rows` as CSV with a header taken from the field names.
pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(io_error(path))?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(io_error(path))?;
    Ok(())
}

/// Serialises `rows` as CSV into a string.
pub fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidParams(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Figure family a CSV feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactKind {
    PathBand,
    SweepCurves,
    ErrorPanel,
    HistogramPrefix,
    FundPath,
    TauSamples,
}

/// Everything needed to rerun and label one artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub kind: ArtifactKind,
    pub tool: &'static str,
    pub version: &'static str,
    pub csv: PathBuf,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub life_table: Option<String>,
    pub parameters: serde_json::Value,
}

impl Manifest {
    pub fn new(kind: ArtifactKind, csv: impl Into<PathBuf>, parameters: serde_json::Value) -> Self {
        Self {
            kind,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            csv: csv.into(),
            seed: None,
            replications: None,
            life_table: None,
            parameters,
        }
    }

    /// `<csv path>.json`, next to the CSV.
    pub fn default_path(&self) -> PathBuf {
        let mut name = self.csv.clone().into_os_string();
        name.push(".json");
        PathBuf::from(name)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidParams(format!("manifest: {e}")))?;
        std::fs::write(path, json + "\n").map_err(io_error(path))
    }
}
