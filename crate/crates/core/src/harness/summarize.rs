//! Cross-replication statistics of regret traces.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::output::{read_traces, TraceRecord};

/// `q`-quantile of sorted data with linear interpolation between order
/// statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandRow {
    pub t: usize,
    pub mean: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
}

impl BandRow {
    pub fn from_values(t: usize, values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            t,
            mean: values.iter().sum::<f64>() / values.len() as f64,
            median: quantile_sorted(&sorted, 0.5),
            q05: quantile_sorted(&sorted, 0.05),
            q95: quantile_sorted(&sorted, 0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub reps: usize,
    pub band: Vec<BandRow>,
    /// Statistics of the last-round regret.
    pub last: BandRow,
    /// Log-log slope of mean regret over the last half of rounds.
    pub slope: Option<f64>,
}

/// Band statistics from per-replication regret curves of equal length.
pub fn summarize_curves(curves: &[Vec<f64>]) -> Result<Summary> {
    let n = curves.first().map_or(0, Vec::len);
    if n == 0 || curves.iter().any(|c| c.len() != n) {
        return Err(Error::Schema {
            path: PathBuf::new(),
            message: "need at least one nonempty trace, all of the same length".into(),
        });
    }
    let band: Vec<BandRow> = (0..n)
        .map(|i| {
            let column: Vec<f64> = curves.iter().map(|c| c[i]).collect();
            BandRow::from_values(i + 1, &column)
        })
        .collect();
    let means: Vec<f64> = band.iter().map(|b| b.mean).collect();
    Ok(Summary {
        reps: curves.len(),
        last: band[n - 1],
        slope: loglog_slope(&means),
        band,
    })
}

/// Least-squares slope of `log R_t` against `log t` over
/// `t ∈ [⌈n/2⌉, n]`, where `values[t−1] = R_t`. `None` when fewer than two
/// points are available or some value in the window is not positive.
pub fn loglog_slope(values: &[f64]) -> Option<f64> {
    let n = values.len();
    let start = n.div_ceil(2).max(1);
    let pts: Vec<(f64, f64)> = (start..=n)
        .map(|t| (t as f64, values[t - 1]))
        .collect();
    if pts.len() < 2 || pts.iter().any(|(_, v)| !(*v > 0.0)) {
        return None;
    }
    let k = pts.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().map(|(t, v)| (t.ln(), v.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// Groups trace records into one regret curve per replication, checking
/// that every replication covers rounds `1..=n` in order.
pub fn curves_from_records(path: &Path, records: &[TraceRecord]) -> Result<Vec<Vec<f64>>> {
    let schema = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    let mut curves: Vec<(u64, Vec<f64>)> = Vec::new();
    for r in records {
        match curves.last_mut() {
            Some((rep, curve)) if *rep == r.rep => {
                if r.t != curve.len() + 1 {
                    return Err(schema(format!("rep {} jumps to round {} after {}", r.rep, r.t, curve.len())));
                }
                curve.push(r.regret);
            }
            _ => {
                if curves.iter().any(|(rep, _)| *rep == r.rep) {
                    return Err(schema(format!("rows of rep {} are not contiguous", r.rep)));
                }
                if r.t != 1 {
                    return Err(schema(format!("rep {} starts at round {}", r.rep, r.t)));
                }
                curves.push((r.rep, vec![r.regret]));
            }
        }
    }
    Ok(curves.into_iter().map(|(_, c)| c).collect())
}

/// Reads every trace file matching `pattern` and summarizes all
/// replications together.
pub fn summarize(pattern: &str) -> Result<Summary> {
    let paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Error::Schema {
            path: PathBuf::from(pattern),
            message: format!("bad glob: {e}"),
        })?
        .filter_map(|p| p.ok())
        .collect();
    if paths.is_empty() {
        return Err(Error::Schema {
            path: PathBuf::from(pattern),
            message: "no trace files match".into(),
        });
    }
    let mut curves = Vec::new();
    for path in &paths {
        let records = read_traces(path)?;
        curves.extend(curves_from_records(path, &records)?);
    }
    summarize_curves(&curves).map_err(|e| match e {
        Error::Schema { message, .. } => Error::Schema {
            path: PathBuf::from(pattern),
            message,
        },
        other => other,
    })
}
