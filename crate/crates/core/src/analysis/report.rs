use std::fs::File;
use std::path::Path;

use serde::Serialize;

use crate::error::{ExamError, Result};

/// One row of `estimates.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub metric: String,
    pub cell: String,
    pub trials: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn write_estimates_csv(path: &Path, rows: &[EstimateRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| ExamError::Io(e.to_string()))?;
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| ExamError::Io(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_summary_json<T: Serialize>(path: &Path, summary: &T) -> Result<()> {
    let file = File::create(path)?;
    serde_json::to_writer_pretty(file, summary).map_err(|e| ExamError::Io(e.to_string()))
}
