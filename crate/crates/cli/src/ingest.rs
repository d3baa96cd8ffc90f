//! CSV ingestion.
//!
//! Data files hold one observation per row. Lines starting with `#` are
//! comments, and a first row in which no field parses as a number is taken
//! as a header. Errors carry the 1-based line number in the file.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rejaug::stiefel::StiefelMatrix;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub path: PathBuf,
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
    /// File line of each row.
    pub lines: Vec<u64>,
}

impl NumericTable {
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    fn error(&self, row: usize, message: impl Into<String>) -> CliError {
        CliError::Ingest {
            path: self.path.clone(),
            line: self.lines[row],
            message: message.into(),
        }
    }

    /// Per-column `(min, max)`.
    pub fn column_ranges(&self) -> Vec<(f64, f64)> {
        (0..self.width())
            .map(|j| {
                self.rows
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                        (lo.min(r[j]), hi.max(r[j]))
                    })
            })
            .collect()
    }
}

/// Reads a rectangular table of finite numbers, optionally checking its width.
pub fn read_numeric_csv(path: &Path, width: Option<usize>) -> Result<NumericTable> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut table = NumericTable {
        path: path.to_path_buf(),
        header: None,
        rows: Vec::new(),
        lines: Vec::new(),
    };
    let mut expected = width;
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let ingest = |message: String| CliError::Ingest {
            path: path.to_path_buf(),
            line,
            message,
        };
        let record = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(trimmed.as_bytes())
            .records()
            .next()
            .transpose()
            .map_err(|e| ingest(e.to_string()))?
            .unwrap_or_default();
        if table.rows.is_empty() && table.header.is_none() && record.iter().all(|f| f.parse::<f64>().is_err()) {
            table.header = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let n = *expected.get_or_insert(record.len());
        if record.len() != n {
            return Err(ingest(format!("expected {n} fields, found {}", record.len())));
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(ingest(format!("field {} is not finite: {field:?}", j + 1))),
                Err(_) => Err(ingest(format!("field {} is not numeric: {field:?}", j + 1))),
            })
            .collect::<Result<Vec<f64>>>()?;
        table.rows.push(row);
        table.lines.push(line);
    }
    if table.rows.is_empty() {
        return Err(CliError::Ingest {
            path: path.to_path_buf(),
            line: 0,
            message: "no data rows".into(),
        });
    }
    Ok(table)
}

/// Rows of `d·p` values, each a column-major point on the Stiefel manifold.
pub fn stiefel_rows(table: &NumericTable, d: usize, p: usize) -> Result<Vec<StiefelMatrix>> {
    if table.width() != d * p {
        return Err(table.error(
            0,
            format!("expected {} fields for d={d}, p={p}, found {}", d * p, table.width()),
        ));
    }
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| StiefelMatrix::from_column_major(d, p, r).map_err(|e| table.error(i, e.to_string())))
        .collect()
}

pub fn vector_rows(table: &NumericTable) -> Vec<DVector<f64>> {
    table.rows.iter().map(|r| DVector::from_row_slice(r)).collect()
}

/// A single column of atom indices below `atoms`.
pub fn atom_rows(table: &NumericTable, atoms: usize) -> Result<Vec<usize>> {
    if table.width() != 1 {
        return Err(table.error(
            0,
            format!("expected one column of atom indices, found {}", table.width()),
        ));
    }
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let v = r[0];
            if v >= 0.0 && v.fract() == 0.0 && (v as usize) < atoms {
                Ok(v as usize)
            } else {
                Err(table.error(i, format!("{v} is not an atom index below {atoms}")))
            }
        })
        .collect()
}

/// Bounds for unit-box normalization: the data range, widened to unit length
/// along constant coordinates.
pub fn data_box(table: &NumericTable) -> (Vec<f64>, Vec<f64>) {
    table
        .column_ranges()
        .into_iter()
        .map(|(lo, hi)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn header_comments_and_blank_lines() {
        let f = file("# comment\nx,y\n1,2\n\n3, 4\n");
        let t = read_numeric_csv(f.path(), None).unwrap();
        assert_eq!(t.header, Some(vec!["x".into(), "y".into()]));
        assert_eq!(t.rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(t.lines, vec![3, 5]);
    }

    #[test]
    fn errors_report_line_numbers() {
        let f = file("1,2\n3,4\n5\n");
        let e = read_numeric_csv(f.path(), None).unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("expected 2 fields"), "{e}");
        let f = file("1,2\n3,abc\n");
        let e = read_numeric_csv(f.path(), None).unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("not numeric"), "{e}");
        let f = file("1,2\n");
        assert!(read_numeric_csv(f.path(), Some(3)).is_err());
    }

    #[test]
    fn stiefel_rows_are_checked() {
        let f = file("1,0,0,0,1,0\n1,0,0,1,0,0\n");
        let t = read_numeric_csv(f.path(), None).unwrap();
        let e = stiefel_rows(&t, 3, 2).unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
    }

    #[test]
    fn atoms_and_box() {
        let f = file("0\n1\n1\n");
        let t = read_numeric_csv(f.path(), None).unwrap();
        assert_eq!(atom_rows(&t, 2).unwrap(), vec![0, 1, 1]);
        assert!(atom_rows(&t, 1).is_err());
        assert_eq!(data_box(&t), (vec![0.0], vec![1.0]));
    }
}
