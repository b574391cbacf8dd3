//! CSV and manifest files. All files are UTF-8 with a header row and LF
//! line endings; floats use the shortest decimal that parses back exactly.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::environment::RunTrace;
use crate::error::{Error, Result};

use super::config::{fmt_f64, hex};
use super::summarize::BandRow;

pub const TRACE_HEADER: [&str; 9] = ["rep", "t", "x_norm", "reward", "gap", "regret", "beta", "gamma", "min_exceedance"];
pub const SUMMARY_HEADER: [&str; 4] = ["experiment", "rep", "statistic", "value"];
pub const BAND_HEADER: [&str; 5] = ["t", "mean", "median", "q05", "q95"];

/// One row of a trace file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceRecord {
    pub rep: u64,
    pub t: usize,
    pub x_norm: f64,
    pub reward: f64,
    pub gap: f64,
    pub regret: f64,
    pub beta: f64,
    pub gamma: f64,
    pub min_exceedance: Option<f64>,
}

/// One row of `summary.csv`. `rep` is `None` for statistics pooled over
/// replications, written as `all`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub rep: Option<u64>,
    pub statistic: String,
    pub value: f64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn trace_records(trace: &RunTrace) -> Vec<TraceRecord> {
    trace
        .rows
        .iter()
        .map(|r| TraceRecord {
            rep: trace.meta.rep,
            t: r.t,
            x_norm: r.action.norm(),
            reward: r.reward,
            gap: r.gap,
            regret: r.regret,
            beta: r.beta,
            gamma: r.gamma,
            min_exceedance: r.min_exceedance,
        })
        .collect()
}

pub fn write_traces(path: &Path, traces: &[RunTrace]) -> Result<()> {
    let rows = traces.iter().flat_map(trace_records).map(|r| {
        vec![
            r.rep.to_string(),
            r.t.to_string(),
            fmt_f64(r.x_norm),
            fmt_f64(r.reward),
            fmt_f64(r.gap),
            fmt_f64(r.regret),
            fmt_f64(r.beta),
            fmt_f64(r.gamma),
            r.min_exceedance.map(fmt_f64).unwrap_or_default(),
        ]
    });
    write_rows(path, &TRACE_HEADER, rows)
}

pub fn read_traces(path: &Path) -> Result<Vec<TraceRecord>> {
    let schema = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_err(path))?;
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(schema(format!(
            "expected header {}, found {}",
            TRACE_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = i + 2;
        let float = |k: usize| {
            rec[k]
                .parse::<f64>()
                .map_err(|_| schema(format!("row {row}, column {}: `{}` is not a number", TRACE_HEADER[k], &rec[k])))
        };
        let int = |k: usize| {
            rec[k]
                .parse::<u64>()
                .map_err(|_| schema(format!("row {row}, column {}: `{}` is not an integer", TRACE_HEADER[k], &rec[k])))
        };
        out.push(TraceRecord {
            rep: int(0)?,
            t: int(1)? as usize,
            x_norm: float(2)?,
            reward: float(3)?,
            gap: float(4)?,
            regret: float(5)?,
            beta: float(6)?,
            gamma: float(7)?,
            min_exceedance: if rec[8].is_empty() { None } else { Some(float(8)?) },
        });
    }
    Ok(out)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_rows(
        path,
        &SUMMARY_HEADER,
        rows.iter().map(|r| {
            vec![
                r.experiment.clone(),
                r.rep.map_or("all".to_string(), |x| x.to_string()),
                r.statistic.clone(),
                fmt_f64(r.value),
            ]
        }),
    )
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let schema = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(SUMMARY_HEADER.iter().copied()) {
        return Err(schema("unexpected summary header".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let rep = match &rec[1] {
            "all" => None,
            s => Some(s.parse().map_err(|_| schema(format!("bad rep `{s}`")))?),
        };
        out.push(SummaryRow {
            experiment: rec[0].to_string(),
            rep,
            statistic: rec[2].to_string(),
            value: rec[3].parse().map_err(|_| schema(format!("bad value `{}`", &rec[3])))?,
        });
    }
    Ok(out)
}

pub fn write_band(path: &Path, band: &[BandRow]) -> Result<()> {
    write_rows(
        path,
        &BAND_HEADER,
        band.iter().map(|b| {
            vec![
                b.t.to_string(),
                fmt_f64(b.mean),
                fmt_f64(b.median),
                fmt_f64(b.q05),
                fmt_f64(b.q95),
            ]
        }),
    )
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// `manifest.txt`: version, config hash, the checksum of every file written
/// next to it, and the canonical config.
pub fn write_manifest(dir: &Path, config_hash: &str, canonical: &str, files: &[&str]) -> Result<()> {
    let path = dir.join("manifest.txt");
    let mut text = format!("version = {}\nconfig_hash = {config_hash}\n", env!("CARGO_PKG_VERSION"));
    for f in files {
        text.push_str(&format!("file.{f} = {}\n", file_sha256(&dir.join(f))?));
    }
    text.push('\n');
    text.push_str(canonical);
    let mut out = File::create(&path).map_err(io_err(&path))?;
    out.write_all(text.as_bytes()).map_err(io_err(&path))
}
