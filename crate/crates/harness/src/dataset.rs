//! Dataset ingestion and shaping.
//!
//! A CSV file is parsed into a [`Table`] of raw rows, scaled into `[0, 1]`,
//! and then shaped to an `n x d` [`DatasetMatrix`]: surplus rows and columns
//! are dropped, missing rows are recycled cyclically and missing columns are
//! zero-padded. Every adjustment is recorded in the provenance notes.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use vecshuffle_core::rng::RngSeed;
use vecshuffle_core::InputVector;

use crate::error::{HarnessError, Result};

/// How raw values are mapped into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalize {
    /// Values must already lie in `[0, 1]`.
    #[default]
    None,
    Clamp,
    /// Global min-max scaling over every retained value.
    MinMax,
}

impl fmt::Display for Normalize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalize::None => "none",
            Normalize::Clamp => "clamp",
            Normalize::MinMax => "minmax",
        })
    }
}

impl FromStr for Normalize {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalize::None),
            "clamp" => Ok(Normalize::Clamp),
            "minmax" => Ok(Normalize::MinMax),
            other => Err(HarnessError::Usage(format!(
                "unknown normalization {other:?}; expected clamp or minmax"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestOptions {
    /// Drop the last column of every row.
    pub drop_label: bool,
    pub normalize: Normalize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub normalization: Normalize,
    pub notes: Vec<String>,
}

/// Rectangular table of values in `[0, 1]`, before shaping.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rows: Vec<Vec<f64>>,
    columns: usize,
    provenance: Provenance,
}

/// `n` users, each holding a vector of dimension `d` in `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMatrix {
    pub rows: Vec<InputVector>,
    pub provenance: Provenance,
}

impl DatasetMatrix {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, InputVector::dim)
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Out-of-range value at a 0-based `(row, column)`.
struct OutOfRange(usize, usize, f64);

/// Maps `rows` into `[0, 1]` in place, recording what was done in `notes`.
fn scale(
    rows: &mut [Vec<f64>],
    normalize: Normalize,
    notes: &mut Vec<String>,
) -> std::result::Result<(), OutOfRange> {
    match normalize {
        Normalize::None => {
            for (r, row) in rows.iter().enumerate() {
                if let Some(c) = row.iter().position(|v| !(0.0..=1.0).contains(v)) {
                    return Err(OutOfRange(r, c, row[c]));
                }
            }
        }
        Normalize::Clamp => {
            let mut clamped = 0usize;
            for v in rows.iter_mut().flatten() {
                if !(0.0..=1.0).contains(v) {
                    clamped += 1;
                    *v = v.clamp(0.0, 1.0);
                }
            }
            notes.push(format!("clamped {clamped} values into [0, 1]"));
        }
        Normalize::MinMax => {
            let (lo, hi) = rows
                .iter()
                .flatten()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            let span = hi - lo;
            for v in rows.iter_mut().flatten() {
                *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
            }
            notes.push(format!("min-max scaled from [{lo}, {hi}]"));
        }
    }
    Ok(())
}

fn out_of_range(path: &Path, row: usize, column: usize, value: f64) -> HarnessError {
    HarnessError::Cell {
        path: path.to_path_buf(),
        row,
        column,
        message: format!("value {value} outside [0, 1]; pass a normalization"),
    }
}

impl Table {
    /// Reads a CSV of reals with an optional header row.
    ///
    /// A first row in which no cell parses as a number is taken as a header.
    /// Rows must all have the same length. Cell errors carry 1-based file
    /// line and column numbers.
    pub fn read_csv(path: &Path, options: IngestOptions) -> Result<Table> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| HarnessError::csv(path, e))?;
        let mut notes = Vec::new();
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for (index, record) in reader.records().enumerate() {
            let record = record.map_err(|e| HarnessError::csv(path, e))?;
            let line = record.position().map_or(index as u64 + 1, |p| p.line()) as usize;
            if index == 0 && record.iter().all(|c| parse_cell(c).is_none()) {
                notes.push("skipped header row".to_string());
                continue;
            }
            let mut row = record
                .iter()
                .enumerate()
                .map(|(column, cell)| {
                    parse_cell(cell).ok_or_else(|| HarnessError::Cell {
                        path: path.to_path_buf(),
                        row: line,
                        column: column + 1,
                        message: format!("cannot parse {cell:?} as a real number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if options.drop_label {
                row.pop();
            }
            rows.push(row);
            lines.push(line);
        }
        let columns = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || columns == 0 {
            return Err(HarnessError::EmptyDataset(path.to_path_buf()));
        }
        if options.drop_label {
            notes.push("dropped trailing label column".to_string());
        }
        scale(&mut rows, options.normalize, &mut notes)
            .map_err(|OutOfRange(r, c, v)| out_of_range(path, lines[r], c + 1, v))?;
        Ok(Table {
            rows,
            columns,
            provenance: Provenance {
                source: path.display().to_string(),
                normalization: options.normalize,
                notes,
            },
        })
    }

    /// Builds a table from equal-length in-memory rows. Cell errors carry
    /// 1-based positions within `rows`.
    pub fn from_rows(
        mut rows: Vec<Vec<f64>>,
        source: String,
        normalize: Normalize,
        mut notes: Vec<String>,
    ) -> Result<Table> {
        let columns = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || columns == 0 {
            return Err(HarnessError::EmptyDataset(source.into()));
        }
        if let Some(r) = rows.iter().position(|row| row.len() != columns) {
            return Err(HarnessError::Usage(format!(
                "row {} has {} values, expected {columns}",
                r + 1,
                rows[r].len()
            )));
        }
        scale(&mut rows, normalize, &mut notes)
            .map_err(|OutOfRange(r, c, v)| out_of_range(Path::new(&source), r + 1, c + 1, v))?;
        Ok(Table {
            rows,
            columns,
            provenance: Provenance {
                source,
                normalization: normalize,
                notes,
            },
        })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// `n x d` matrix built from this table.
    pub fn shape(&self, n: usize, d: usize) -> Result<DatasetMatrix> {
        if n == 0 || d == 0 {
            return Err(HarnessError::Usage(format!(
                "cannot shape a dataset to n={n}, d={d}"
            )));
        }
        let mut provenance = self.provenance.clone();
        let available = self.rows.len();
        if n < available {
            provenance
                .notes
                .push(format!("kept first {n} of {available} rows"));
        } else if n > available {
            provenance.notes.push(format!(
                "recycled {available} rows cyclically to reach {n} users"
            ));
        }
        if d < self.columns {
            provenance
                .notes
                .push(format!("kept first {d} of {} columns", self.columns));
        } else if d > self.columns {
            provenance.notes.push(format!(
                "zero-padded {} columns to dimension {d}",
                self.columns
            ));
        }
        let rows = (0..n)
            .map(|i| {
                let src = &self.rows[i % available];
                let mut values = vec![0.0; d];
                let keep = d.min(src.len());
                values[..keep].copy_from_slice(&src[..keep]);
                InputVector::new(values).map_err(HarnessError::from)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DatasetMatrix { rows, provenance })
    }
}

/// Reads `path` and shapes it to `n x d`.
pub fn ingest_csv(
    path: &Path,
    options: IngestOptions,
    n: usize,
    d: usize,
) -> Result<DatasetMatrix> {
    Table::read_csv(path, options)?.shape(n, d)
}

/// Feature columns of a heartbeat record.
pub const ECG_FEATURES: usize = 187;

/// Synthetic heartbeat-like records: `ECG_FEATURES` samples in `[0, 1]`
/// followed by a class label in `{0, ..., 4}`.
///
/// Each record is one beat resampled to a fixed rate: a P wave, a sharp QRS
/// complex and a T wave on a slowly drifting baseline, normalized so the
/// beat's maximum is 1 and its minimum 0, and zero-padded after the beat
/// ends.
pub fn synthetic_ecg(rows: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = RngSeed(seed).rng();
    (0..rows)
        .map(|_| {
            let label = rng.gen_range(0..5u32);
            let length = rng.gen_range(90..=170);
            let bump = |x: f64, centre: f64, width: f64, height: f64| {
                height * (-((x - centre) / width).powi(2) / 2.0).exp()
            };
            let p = (rng.gen_range(0.1..0.2), rng.gen_range(0.1..0.3));
            let r = (rng.gen_range(0.25..0.35), 1.0 + 0.3 * label as f64 / 4.0);
            let tw = (rng.gen_range(0.55..0.7), rng.gen_range(0.2..0.5));
            let drift = rng.gen_range(-0.1..0.1);
            let raw: Vec<f64> = (0..length)
                .map(|i| {
                    let x = i as f64 / length as f64;
                    bump(x, p.0, 0.03, p.1)
                        + bump(x, r.0 - 0.02, 0.008, -0.15)
                        + bump(x, r.0, 0.012, r.1)
                        + bump(x, r.0 + 0.025, 0.01, -0.25)
                        + bump(x, tw.0, 0.05, tw.1)
                        + drift * x
                        + 0.02 * (rng.gen::<f64>() - 0.5)
                })
                .collect();
            let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut row: Vec<f64> = raw.iter().map(|v| (v - lo) / (hi - lo)).collect();
            row.resize(ECG_FEATURES, 0.0);
            row.push(label as f64);
            row
        })
        .collect()
}

/// Table of [`synthetic_ecg`] records with the label dropped.
pub fn synthetic_ecg_table(rows: usize, seed: u64) -> Table {
    let data = synthetic_ecg(rows, seed)
        .into_iter()
        .map(|mut row| {
            row.pop();
            row
        })
        .collect();
    Table::from_rows(
        data,
        format!("synthetic-ecg(rows={rows}, seed={seed})"),
        Normalize::None,
        vec!["generated heartbeat-like records".to_string()],
    )
    .expect("synthetic records lie in [0, 1]")
}

/// Writes [`synthetic_ecg`] records as a headerless CSV.
pub fn write_synthetic_ecg(path: &Path, rows: usize, seed: u64) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    for row in synthetic_ecg(rows, seed) {
        writer
            .write_record(row.iter().map(f64::to_string))
            .map_err(|e| HarnessError::csv(path, e))?;
    }
    writer.flush().map_err(|e| HarnessError::io(path, e))
}
