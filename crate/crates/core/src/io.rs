//! CSV reading and writing for the numeric artifacts: one record per row,
//! one header line, values rendered with Rust's shortest round-trip float
//! formatting so identical runs produce identical bytes.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Writes a numeric matrix as CSV with the given header.
pub fn write_matrix_csv<P: AsRef<Path>, T: Display>(
    path: P,
    header: &[&str],
    rows: &[Vec<T>],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let mut first = true;
        for value in row {
            if !first {
                write!(out, ",")?;
            }
            write!(out, "{value}")?;
            first = false;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes rows of already formatted fields as CSV.
pub fn write_record_csv<P: AsRef<Path>>(
    path: P,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a numeric CSV produced by [`write_matrix_csv`]: returns the header
/// fields and the rows. Ragged rows or unparseable numbers are parse errors.
pub fn read_matrix_csv<P: AsRef<Path>>(path: P) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let display = path.as_ref().display().to_string();
    let reader = BufReader::new(File::open(&path)?);
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Parse {
            path: display.clone(),
            message: "empty file".into(),
        })?;
    let header: Vec<String> = header_line.split(',').map(|s| s.trim().to_string()).collect();
    let width = header.len();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(width);
        for field in line.split(',') {
            let value = field.trim().parse::<f64>().map_err(|e| Error::Parse {
                path: display.clone(),
                message: format!("line {}: {e}", lineno + 2),
            })?;
            row.push(value);
        }
        if row.len() != width {
            return Err(Error::Parse {
                path: display,
                message: format!("line {}: expected {} fields", lineno + 2, width),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let dir = std::env::temp_dir().join(format!("popmc-io-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.csv");
        let rows = vec![vec![1.5f64, -2.25], vec![0.1, 1e-12]];
        write_matrix_csv(&path, &["a", "b"], &rows).unwrap();
        let (header, back) = read_matrix_csv(&path).unwrap();
        assert_eq!(header, vec!["a", "b"]);
        assert_eq!(back, rows);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn rejects_ragged_and_non_numeric_rows() {
        let dir = std::env::temp_dir().join(format!("popmc-io-test2-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let ragged = dir.join("ragged.csv");
        std::fs::write(&ragged, "a,b\n1.0\n").unwrap();
        assert!(matches!(
            read_matrix_csv(&ragged),
            Err(Error::Parse { .. })
        ));
        let words = dir.join("words.csv");
        std::fs::write(&words, "a\nhello\n").unwrap();
        assert!(matches!(read_matrix_csv(&words), Err(Error::Parse { .. })));
        std::fs::remove_dir_all(&dir).ok();
    }
}
