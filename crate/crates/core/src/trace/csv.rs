//! Trace CSV files: header `t,value`, uniformly spaced timestamps in seconds.

use std::io::{Read, Write};
use std::path::Path;

use super::TimeSeries;
use crate::error::{Error, Result};

const SPACING_TOL: f64 = 1e-9;

pub fn read_trace<R: Read>(reader: R, what: &str) -> Result<TimeSeries> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .trim(::csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::parse(what, e))?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "value" {
        return Err(Error::parse(what, "expected header `t,value`"));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(what, e))?;
        let field = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| Error::parse(what, format!("row {}: {e}", line + 1)))
        };
        times.push(field(0)?);
        values.push(field(1)?);
    }
    if values.is_empty() {
        return Err(Error::parse(what, "no samples"));
    }
    let t0 = times[0];
    let dt = if times.len() > 1 {
        (times[times.len() - 1] - t0) / (times.len() - 1) as f64
    } else {
        1.0
    };
    for (i, &t) in times.iter().enumerate() {
        if !t.is_finite() || (t - (t0 + i as f64 * dt)).abs() > SPACING_TOL.max(dt * 1e-9) {
            return Err(Error::parse(
                what,
                format!("non-uniform timestamp at row {}", i + 1),
            ));
        }
    }
    if times.len() > 1 && dt <= 0.0 {
        return Err(Error::parse(what, "timestamps not increasing"));
    }
    let series = TimeSeries::new(values, dt, t0).map_err(|e| Error::parse(what, e))?;
    series.check_finite(what)?;
    Ok(series)
}

pub fn write_trace<W: Write>(writer: W, series: &TimeSeries) -> Result<()> {
    let mut w = ::csv::Writer::from_writer(writer);
    let io = |e: ::csv::Error| Error::parse("trace csv", e);
    w.write_record(["t", "value"]).map_err(io)?;
    for (i, v) in series.values().iter().enumerate() {
        w.write_record([series.time(i).to_string(), v.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("trace csv", e))
}

pub fn load_trace(path: &Path) -> Result<TimeSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace(file, &path.display().to_string())
}

pub fn save_trace(path: &Path, series: &TimeSeries) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace(std::io::BufWriter::new(file), series)
}
