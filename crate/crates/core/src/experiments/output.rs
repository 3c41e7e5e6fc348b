//! CSV rows and the append-only writer.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version tag of the CSV layout, recorded in the metadata sidecar.
pub const SCHEMA_VERSION: &str = "homog-results/1";

/// Column order of every results file.
pub const COLUMNS: [&str; 11] = [
    "mode", "r", "k", "lambda", "seed", "iter", "h1_error", "rel_error", "rho", "converged", "wall_ms",
];

/// One line of a results file. Empty cells are `None`.
///
/// `mode` names the row kind: the bare mode (`run`, `sweep-r`, ...) marks a
/// per-iteration row, `<mode>/summary` a per-run summary, and `<mode>/mean`,
/// `<mode>/std`, `<mode>/exp-mean`, `<mode>/predicted` aggregate rows whose
/// value sits in `rho`. RVE rows (`rve/a11`, `rve/mean-a11`,
/// `rve/analytic-a11`, ...) carry a matrix entry in `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub mode: String,
    pub r: usize,
    pub k: u32,
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub iter: Option<usize>,
    pub h1_error: Option<f64>,
    pub rel_error: Option<f64>,
    pub rho: Option<f64>,
    pub converged: Option<bool>,
    pub wall_ms: f64,
}

impl ResultRow {
    pub(crate) fn new(mode: impl Into<String>, r: usize, k: u32) -> Self {
        ResultRow {
            mode: mode.into(),
            r,
            k,
            lambda: None,
            seed: None,
            iter: None,
            h1_error: None,
            rel_error: None,
            rho: None,
            converged: None,
            wall_ms: 0.0,
        }
    }
}

/// Serializes rows to a file as they are produced, flushing after each batch.
pub struct CsvSink {
    writer: csv::Writer<File>,
    path: PathBuf,
}

impl CsvSink {
    /// Creates (truncating) `path` and writes the header.
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        writer.write_record(COLUMNS)?;
        Ok(CsvSink {
            writer,
            path: path.to_path_buf(),
        })
    }

    pub fn write_rows(&mut self, rows: &[ResultRow]) -> Result<()> {
        for row in rows {
            self.writer.serialize(row)?;
        }
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// Reads a results file back.
pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != COLUMNS {
        return Err(Error::Format {
            what: "results CSV",
            detail: format!("unexpected header {header:?}"),
        });
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Path of the JSON metadata written next to a results file.
pub fn metadata_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub(crate) fn write_metadata(csv: &Path, meta: &impl Serialize) -> Result<()> {
    let path = metadata_path(csv);
    let mut file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(&mut file, meta)?;
    writeln!(file).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_empty_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/out.csv");
        let mut row = ResultRow::new("run", 10, 3);
        row.lambda = Some(0.1);
        row.seed = Some(4);
        row.iter = Some(1);
        row.h1_error = Some(0.25);
        row.rel_error = Some(1.0);
        row.converged = Some(false);
        row.wall_ms = 1.5;
        let mut summary = ResultRow::new("run/mean", 10, 3);
        summary.rho = Some(-2.5);
        let mut sink = CsvSink::create(&path).unwrap();
        sink.write_rows(&[row.clone(), summary.clone()]).unwrap();
        drop(sink);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "mode,r,k,lambda,seed,iter,h1_error,rel_error,rho,converged,wall_ms\n\
             run,10,3,0.1,4,1,0.25,1.0,,false,1.5\n\
             run/mean,10,3,,,,,,-2.5,,0.0\n"
        );
        assert_eq!(read_rows(&path).unwrap(), vec![row, summary]);
        assert_eq!(metadata_path(&path), dir.path().join("sub/out.csv.meta.json"));
    }

    #[test]
    fn rejects_foreign_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_rows(&path).is_err());
    }
}
