//! Path CSV files: header `t,x1,...,xd`, one row per knot, sorted by `t`,
//! first row at `t = 0`. Rows are read as a right-continuous step path whose
//! horizon is the last time.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::path::{CadlagPath, Partition};

pub fn read_path_csv(reader: impl Read) -> Result<CadlagPath> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let dim = headers.len().saturating_sub(1);
    if headers.get(0) != Some("t") || dim == 0 {
        return Err(Error::PathFormat("header must be `t,x1,...,xd`".into()));
    }
    for (i, h) in headers.iter().skip(1).enumerate() {
        if h != format!("x{}", i + 1) {
            return Err(Error::PathFormat(format!("unexpected column `{h}`")));
        }
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::PathFormat(format!("row {}: `{s}` is not a number", line + 1)))
        };
        let t = parse(&record[0])?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::PathFormat(format!(
                    "row {}: time {t} is not after {prev}",
                    line + 1
                )));
            }
        } else if t != 0.0 {
            return Err(Error::PathFormat(format!("first row must be at t=0, got {t}")));
        }
        times.push(t);
        for field in record.iter().skip(1) {
            values.push(parse(field)?);
        }
    }
    if times.is_empty() {
        return Err(Error::PathFormat("no rows".into()));
    }
    CadlagPath::new(Partition::new(times)?, values, dim)
}

/// Writes every knot and, when the horizon lies past the last knot, a final
/// row at the horizon so the file round-trips.
pub fn write_path_csv(path: &CadlagPath, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=path.dim()).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    let mut row = |t: f64, x: &[f64]| -> Result<()> {
        let mut rec = vec![t.to_string()];
        rec.extend(x.iter().map(f64::to_string));
        w.write_record(&rec)?;
        Ok(())
    };
    for (k, &t) in path.times().iter().enumerate() {
        row(t, path.knot(k))?;
    }
    let last = path.knot_count() - 1;
    if path.horizon() > path.times()[last] {
        row(path.horizon(), path.knot(last))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_path_file(file: impl AsRef<Path>) -> Result<CadlagPath> {
    read_path_csv(BufReader::new(File::open(file)?))
}

pub fn write_path_file(path: &CadlagPath, file: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(file)?);
    write_path_csv(path, &mut out)?;
    out.flush()?;
    Ok(())
}
