//! File formats: metric, stream and sweep CSV files and plain-text rasters.
//!
//! A raster file starts with a header line `nx ny Lx Ly` followed by
//! `nx · ny` cell values, row by row starting from the bottom row (`y`
//! smallest), whitespace separated.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nudgeflow_core::driver::{MetricSample, SweepRow};
use nudgeflow_core::observation::ObservationStream;
use nudgeflow_core::scenarios::Raster;
use nudgeflow_core::{NodalField, StructuredMesh};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Core(#[from] nudgeflow_core::Error),
}

type Result<T> = std::result::Result<T, FormatError>;

pub const METRICS_HEADER: [&str; 6] = ["t", "R_percent", "Rtilde_percent", "mass_residual", "range_min", "range_max"];
pub const SWEEP_HEADER: [&str; 6] = ["mu", "hbar", "plateau_percent", "interp_plateau_percent", "rate", "error"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_err(line: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        reason: reason.into(),
    }
}

fn field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<Option<f64>> {
    let s = rec.get(i).ok_or_else(|| parse_err(line, format!("missing column {i}")))?;
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| parse_err(line, format!("`{s}` is not a number")))
}

fn required(rec: &csv::StringRecord, i: usize, line: usize) -> Result<f64> {
    field(rec, i, line)?.ok_or_else(|| parse_err(line, format!("empty column {i}")))
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, want: &[&str]) -> Result<()> {
    let got = rdr.headers()?;
    if !got.iter().eq(want.iter().copied()) {
        return Err(parse_err(1, format!("expected header {}", want.join(","))));
    }
    Ok(())
}

/// Metrics file written one row at a time and flushed after each row, so a
/// run that fails part way leaves every completed level on disk.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl MetricsWriter<File> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(File::create(path)?)
    }
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(METRICS_HEADER)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn push(&mut self, s: &MetricSample) -> Result<()> {
        self.inner.write_record([
            s.t.to_string(),
            opt(s.r),
            opt(s.r_tilde),
            opt(s.mass_residual),
            s.range_min.to_string(),
            s.range_max.to_string(),
        ])?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_metrics<W: Write>(w: W, samples: &[MetricSample]) -> Result<()> {
    let mut mw = MetricsWriter::new(w)?;
    samples.iter().try_for_each(|s| mw.push(s))
}

/// One parsed metrics row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub t: f64,
    pub r: Option<f64>,
    pub r_tilde: Option<f64>,
    pub mass_residual: Option<f64>,
    pub range_min: f64,
    pub range_max: f64,
}

impl From<&MetricSample> for MetricRow {
    fn from(s: &MetricSample) -> Self {
        Self {
            t: s.t,
            r: s.r,
            r_tilde: s.r_tilde,
            mass_residual: s.mass_residual,
            range_min: s.range_min,
            range_max: s.range_max,
        }
    }
}

pub fn read_metrics<R: Read>(r: R) -> Result<Vec<MetricRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &METRICS_HEADER)?;
    rdr.records()
        .enumerate()
        .map(|(k, rec)| {
            let rec = rec?;
            let line = k + 2;
            Ok(MetricRow {
                t: required(&rec, 0, line)?,
                r: field(&rec, 1, line)?,
                r_tilde: field(&rec, 2, line)?,
                mass_residual: field(&rec, 3, line)?,
                range_min: required(&rec, 4, line)?,
                range_max: required(&rec, 5, line)?,
            })
        })
        .collect()
}

/// Observation stream: header `t,gamma_0,...,gamma_{N-1}`, one row per level.
pub fn write_stream<W: Write>(w: W, stream: &ObservationStream) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let n = stream.records().first().map_or(0, |(_, g)| g.len());
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..n).map(|i| format!("gamma_{i}")))
        .collect();
    wr.write_record(&header)?;
    for (t, gamma) in stream.records() {
        wr.write_record(std::iter::once(t.to_string()).chain(gamma.iter().map(f64::to_string)))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_stream<R: Read>(r: R) -> Result<ObservationStream> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let ok = header.get(0) == Some("t") && header.iter().skip(1).enumerate().all(|(i, h)| h == format!("gamma_{i}"));
    if !ok {
        return Err(parse_err(1, "expected header t,gamma_0,..."));
    }
    let mut stream = ObservationStream::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let vals = (0..rec.len()).map(|i| required(&rec, i, line)).collect::<Result<Vec<_>>>()?;
        stream.push(vals[0], vals[1..].to_vec())?;
    }
    Ok(stream)
}

pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SWEEP_HEADER)?;
    for r in rows {
        wr.write_record([
            r.mu.to_string(),
            r.hbar.to_string(),
            opt(r.plateau),
            opt(r.interp_plateau),
            opt(r.rate),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_sweep<R: Read>(r: R) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    check_header(&mut rdr, &SWEEP_HEADER)?;
    rdr.records()
        .enumerate()
        .map(|(k, rec)| {
            let rec = rec?;
            let line = k + 2;
            let error = rec.get(5).filter(|s| !s.is_empty()).map(str::to_string);
            Ok(SweepRow {
                mu: required(&rec, 0, line)?,
                hbar: required(&rec, 1, line)?,
                plateau: field(&rec, 2, line)?,
                interp_plateau: field(&rec, 3, line)?,
                rate: field(&rec, 4, line)?,
                error,
            })
        })
        .collect()
}

pub fn write_raster<W: Write>(w: W, raster: &Raster) -> Result<()> {
    let mut w = BufWriter::new(w);
    let (nx, ny) = raster.dims();
    let (lx, ly) = raster.extent();
    writeln!(w, "{nx} {ny} {lx} {ly}")?;
    for row in raster.values().chunks(nx) {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_raster<R: Read>(r: R) -> Result<Raster> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty raster"))??;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 {
        return Err(parse_err(1, "header must be `nx ny Lx Ly`"));
    }
    let dim = |s: &str| s.parse::<usize>().map_err(|_| parse_err(1, format!("bad dimension `{s}`")));
    let len = |s: &str| s.parse::<f64>().map_err(|_| parse_err(1, format!("bad extent `{s}`")));
    let (nx, ny, lx, ly) = (dim(h[0])?, dim(h[1])?, len(h[2])?, len(h[3])?);
    let mut values = Vec::with_capacity(nx.saturating_mul(ny));
    for (k, line) in lines.enumerate() {
        for tok in line?.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| parse_err(k + 2, format!("`{tok}` is not a number")))?;
            values.push(v);
        }
    }
    if values.len() != nx * ny {
        return Err(parse_err(0, format!("expected {} values, found {}", nx * ny, values.len())));
    }
    Ok(Raster::new(nx, ny, lx, ly, values)?)
}

pub fn read_raster_file(path: &Path) -> Result<Raster> {
    read_raster(File::open(path)?)
}

pub fn write_raster_file(path: &Path, raster: &Raster) -> Result<()> {
    write_raster(File::create(path)?, raster)
}

/// Element-centre values of a nodal field (mean of the four corners).
pub fn snapshot_raster(mesh: &StructuredMesh, theta: &NodalField) -> Result<Raster> {
    let values = mesh
        .elements()
        .map(|c| 0.25 * c.iter().map(|&v| theta.values[v]).sum::<f64>())
        .collect();
    Ok(Raster::new(mesh.nx(), mesh.ny(), mesh.lx(), mesh.ly(), values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raster_rejects_short_bodies() {
        assert!(read_raster("2 2 1 1\n1 2 3\n".as_bytes()).is_err());
        assert!(read_raster("2 2 1\n1 2 3 4\n".as_bytes()).is_err());
        assert!(read_raster("2 2 1 1\n1 x 3 4\n".as_bytes()).is_err());
    }

    #[test]
    fn metrics_header_is_checked() {
        assert!(read_metrics("a,b\n1,2\n".as_bytes()).is_err());
    }
}
