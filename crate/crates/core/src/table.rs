//! Column-oriented numeric CSV files: a header row, then one row per sample,
//! every value written with 17 significant digits.

use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::fmt_f64;

pub fn write_columns<W: std::io::Write>(writer: W, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    if headers.len() != columns.len() {
        return Err(Error::DimensionMismatch {
            expected: headers.len(),
            got: columns.len(),
        });
    }
    let rows = columns.first().map_or(0, |c| c.len());
    if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
        return Err(Error::DimensionMismatch {
            expected: rows,
            got: bad.len(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(headers)?;
    for r in 0..rows {
        w.write_record(columns.iter().map(|c| fmt_f64(c[r])))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_columns_to(path: &Path, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    write_columns(std::fs::File::create(path)?, headers, columns)
}

/// Reads a numeric CSV back into `(headers, columns)`.
pub fn read_columns<R: std::io::Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(reader);
    let headers: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut columns = vec![Vec::new(); headers.len()];
    for record in r.records() {
        let record = record?;
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            col.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("not a number: `{field}`")))?,
            );
        }
    }
    Ok((headers, columns))
}

pub fn read_columns_from(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    read_columns(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let a = [0.1, -1.0 / 3.0, 2.5e-12];
        let b = [1.0, 2.0, 3.0];
        let mut buf = Vec::new();
        write_columns(&mut buf, &["lag", "value"], &[&a, &b]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("lag,value\n"));
        assert!(text.lines().skip(1).all(|l| !l.contains('e')));
        let (h, cols) = read_columns(&buf[..]).unwrap();
        assert_eq!(h, vec!["lag", "value"]);
        assert_eq!(cols[0], a);
        assert_eq!(cols[1], b);
    }

    #[test]
    fn ragged_columns_rejected() {
        let mut buf = Vec::new();
        assert!(write_columns(&mut buf, &["a", "b"], &[&[1.0], &[1.0, 2.0]]).is_err());
    }
}
