use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{ObservationValue, ObservationVector};

/// Full observation vectors with no hypothesis labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationDataset {
    n_obs: usize,
    rows: Vec<ObservationVector>,
}

impl ObservationDataset {
    pub fn new(n_obs: usize, rows: Vec<ObservationVector>) -> Result<Self> {
        for row in &rows {
            if row.len() != n_obs {
                return Err(Error::LengthMismatch {
                    expected: n_obs,
                    got: row.len(),
                });
            }
            row.require_full()?;
        }
        Ok(Self { n_obs, rows })
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn rows(&self) -> &[ObservationVector] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: ObservationDataset) -> Result<()> {
        if other.n_obs != self.n_obs {
            return Err(Error::LengthMismatch {
                expected: self.n_obs,
                got: other.n_obs,
            });
        }
        self.rows.extend(other.rows);
        Ok(())
    }

    /// One row per line, `N` comma-separated `0`/`1` values.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in &self.rows {
            let mut line = String::with_capacity(2 * row.len());
            for (i, v) in row.values().iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push(if *v == ObservationValue::One { '1' } else { '0' });
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_csv(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Parses the CSV form; the row width is taken from the first row.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut rows = Vec::new();
        let mut n_obs = None;
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                what: "observation dataset",
                line: lineno + 1,
                msg: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut bits = Vec::new();
            for field in line.split(',') {
                bits.push(match field.trim() {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::Parse {
                            what: "observation dataset",
                            line: lineno + 1,
                            msg: format!("expected 0 or 1, found {other:?}"),
                        })
                    }
                });
            }
            let width = *n_obs.get_or_insert(bits.len());
            if bits.len() != width {
                return Err(Error::Parse {
                    what: "observation dataset",
                    line: lineno + 1,
                    msg: format!("expected {width} values, found {}", bits.len()),
                });
            }
            rows.push(ObservationVector::from_bits(&bits));
        }
        Self::new(n_obs.unwrap_or(0), rows)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(BufReader::new(file))
    }
}
