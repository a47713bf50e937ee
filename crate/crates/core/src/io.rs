//! CSV ingestion and emission in stable, documented formats.
//!
//! Input is comma-separated with a mandatory header row; decimal points,
//! no quoting. Data errors carry one-based data-row numbers and column
//! names. Numeric output is rendered with 17 significant digits, so every
//! emitted file round-trips bit-exactly through read and write.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::continuity::CorrectionEvent;
use crate::engine::PcaStepResult;
use crate::error::{Error, Result};

/// A fully materialized rectangular dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub variable_names: Vec<String>,
    pub rows: Array2<f64>,
}

/// One emitted record per pushed sample.
///
/// Field names are part of the output format and must not change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub eigenvalues: Vec<f64>,
    pub explained: Vec<f64>,
    pub frob_ref: Option<f64>,
    pub corrections: Vec<CorrectionEvent>,
}

impl DiagnosticsRecord {
    /// Summarize one push. `frob_ref` stays as the caller left it on the
    /// step result.
    pub fn from_step(result: &PcaStepResult) -> Self {
        let total: f64 = result.eigenvalues.sum();
        let explained = if total > 0.0 {
            result.eigenvalues.iter().map(|&v| v / total).collect()
        } else {
            vec![0.0; result.eigenvalues.len()]
        };
        DiagnosticsRecord {
            step: result.step,
            eigenvalues: result.eigenvalues.to_vec(),
            explained,
            frob_ref: result.q_frobenius_to_reference,
            corrections: result.corrections.clone(),
        }
    }
}

/// Streaming CSV reader that holds one data row in memory at a time,
/// keeping end-to-end memory independent of stream length.
pub struct RowReader<R: BufRead> {
    reader: R,
    names: Vec<String>,
    next_row: usize,
    buffer: String,
}

impl<R: BufRead> RowReader<R> {
    /// Read the header row and prepare to stream data rows. Blank leading
    /// lines are skipped; pure end-of-input is a missing header.
    pub fn new(mut reader: R) -> Result<Self> {
        let mut buffer = String::new();
        loop {
            buffer.clear();
            if reader.read_line(&mut buffer)? == 0 {
                return Err(Error::MissingHeader);
            }
            if !buffer.trim().is_empty() {
                break;
            }
        }
        let names = buffer
            .trim_end_matches(['\r', '\n'])
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        Ok(RowReader {
            reader,
            names,
            next_row: 1,
            buffer: String::new(),
        })
    }

    pub fn variable_names(&self) -> &[String] {
        &self.names
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Parse the next data row; `None` at end of input. Blank lines are
    /// skipped and do not advance the row counter.
    #[allow(clippy::should_implement_trait)]
    pub fn next_row(&mut self) -> Option<Result<Vec<f64>>> {
        loop {
            self.buffer.clear();
            match self.reader.read_line(&mut self.buffer) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            if self.buffer.trim().is_empty() {
                continue;
            }
            let row = self.next_row;
            self.next_row += 1;
            let line = self.buffer.trim_end_matches(['\r', '\n']);
            return Some(parse_row(line, &self.names, row));
        }
    }
}

fn parse_row(line: &str, names: &[String], row: usize) -> Result<Vec<f64>> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != names.len() {
        return Err(Error::RaggedRow {
            row,
            expected: names.len(),
            actual: fields.len(),
        });
    }
    let mut values = Vec::with_capacity(fields.len());
    for (field, name) in fields.iter().zip(names) {
        let content = field.trim();
        let value: f64 = content.parse().map_err(|_| Error::ParseCell {
            row,
            column: name.clone(),
            content: content.to_string(),
        })?;
        if !value.is_finite() {
            return Err(Error::NonFiniteCell {
                row,
                column: name.clone(),
            });
        }
        values.push(value);
    }
    Ok(values)
}

/// Read an entire CSV stream into a dataset.
pub fn read_csv<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut rows = RowReader::new(reader)?;
    let m = rows.dim();
    let mut flat = Vec::new();
    let mut n = 0;
    while let Some(row) = rows.next_row() {
        flat.extend_from_slice(&row?);
        n += 1;
    }
    let data = Array2::from_shape_vec((n, m), flat).expect("rows validated rectangular");
    Ok(Dataset {
        variable_names: rows.names,
        rows: data,
    })
}

/// Read a CSV file into a dataset.
pub fn read_csv_file(path: &Path) -> Result<Dataset> {
    read_csv(BufReader::new(std::fs::File::open(path)?))
}

/// Write a dataset as CSV with lossless numeric rendering.
pub fn write_dataset<W: Write>(
    names: &[String],
    rows: ArrayView2<'_, f64>,
    mut writer: W,
) -> Result<()> {
    writeln!(writer, "{}", names.join(","))?;
    for row in rows.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                write!(writer, ",")?;
            }
            write!(writer, "{v:.16e}")?;
        }
        writeln!(writer)?;
    }
    writer.flush()?;
    Ok(())
}

/// Write per-step PC values as CSV with columns `step,pc1..pcm`.
///
/// An empty result list produces a header-only file.
pub fn write_pc_series<W: Write>(results: &[PcaStepResult], mut writer: W) -> Result<()> {
    let m = results.first().map_or(0, |r| r.pcs.len());
    write!(writer, "step")?;
    for j in 1..=m {
        write!(writer, ",pc{j}")?;
    }
    writeln!(writer)?;
    for result in results {
        write!(writer, "{}", result.step)?;
        for v in result.pcs.iter() {
            write!(writer, ",{v:.16e}")?;
        }
        writeln!(writer)?;
    }
    writer.flush()?;
    Ok(())
}

/// Write diagnostics as line-delimited JSON, one record per line.
pub fn write_diagnostics<W: Write>(records: &[DiagnosticsRecord], mut writer: W) -> Result<()> {
    for record in records {
        write_diagnostics_record(record, &mut writer)?;
    }
    writer.flush()?;
    Ok(())
}

/// Write a single diagnostics record and terminate the line. Streaming
/// callers flush after each record themselves.
pub fn write_diagnostics_record<W: Write>(
    record: &DiagnosticsRecord,
    writer: &mut W,
) -> Result<()> {
    let line = serde_json::to_string(record).expect("record serialization cannot fail");
    writeln!(writer, "{line}")?;
    Ok(())
}

/// Read line-delimited diagnostics records.
pub fn read_diagnostics<R: BufRead>(reader: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| Error::Diagnostics {
            line: index + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}
