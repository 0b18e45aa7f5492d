use std::fs::File;
use std::path::Path;

use ndarray::Array2;

use super::SeriesFrame;
use crate::error::{Error, Result};

/// Loads a benchmark-style CSV: a header row, a date column first, numeric
/// columns after it. Row numbers in errors are 1-based file lines.
pub fn load_csv(path: impl AsRef<Path>) -> Result<SeriesFrame> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::MissingHeader {
            path: path.to_path_buf(),
        });
    }
    if header.len() < 2 {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: "need a date column and at least one value column".into(),
        });
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let d = columns.len();

    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row: line,
                expected: header.len(),
                got: record.len(),
            });
        }
        timestamps.push(record[0].to_string());
        for (c, cell) in record.iter().skip(1).enumerate() {
            if cell.is_empty() {
                return Err(Error::EmptyCell {
                    path: path.to_path_buf(),
                    row: line,
                    column: columns[c].clone(),
                });
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::NonNumeric {
                        path: path.to_path_buf(),
                        row: line,
                        column: columns[c].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
    }
    let t = timestamps.len();
    let values = Array2::from_shape_vec((t, d), values).expect("row-major fill");
    SeriesFrame::new(timestamps, values, columns)
}

/// Writes a frame back in the same layout `load_csv` reads.
pub fn write_csv(frame: &SeriesFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["date".to_string()];
    header.extend(frame.columns.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (ts, row) in frame.timestamps.iter().zip(frame.values.rows()) {
        let mut rec = vec![ts.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_small_file() {
        let f =
            write_tmp("date,a,b\n2016-07-01 00:00:00,1.5,2\n2016-07-01 01:00:00,-3,4e-1\n2016-07-01 02:00:00,0,7\n");
        let frame = load_csv(f.path()).unwrap();
        assert_eq!(frame.len(), 3);
        assert_eq!(frame.channels(), 2);
        assert_eq!(frame.columns, vec!["a", "b"]);
        assert_eq!(frame.values[[1, 1]], 0.4);
        assert_eq!(frame.timestamps[2], "2016-07-01 02:00:00");
    }

    #[test]
    fn blank_cell_is_named() {
        let f = write_tmp("date,a,b\nx,1,2\ny,,3\n");
        match load_csv(f.path()).unwrap_err() {
            Error::EmptyCell { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "a");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn distinct_error_kinds() {
        let f = write_tmp("date,a\nx,abc\n");
        assert!(matches!(load_csv(f.path()), Err(Error::NonNumeric { row: 2, .. })));
        let f = write_tmp("date,a,b\nx,1\n");
        assert!(matches!(
            load_csv(f.path()),
            Err(Error::RaggedRow {
                row: 2,
                expected: 3,
                got: 2,
                ..
            })
        ));
        let f = write_tmp("");
        assert!(matches!(load_csv(f.path()), Err(Error::MissingHeader { .. })));
        let f = write_tmp("date,a\nx,NaN\n");
        assert!(matches!(load_csv(f.path()), Err(Error::NonNumeric { .. })));
        assert!(matches!(load_csv("/definitely/not/here.csv"), Err(Error::Io { .. })));
    }

    #[test]
    fn write_then_load() {
        let f = write_tmp("date,a,b\nx,1.25,2\ny,3,-4.5\n");
        let frame = load_csv(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&frame, out.path()).unwrap();
        assert_eq!(load_csv(out.path()).unwrap(), frame);
    }
}
