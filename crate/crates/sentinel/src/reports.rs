//! Report bundle emission.
//!
//! Every table is CSV with a fixed, documented header; the companion
//! `summary.txt` is a flat `key=value` file so downstream tooling can grep a
//! metric without parsing CSV. All floats use Rust's shortest round-trip
//! formatting, so identical inputs always produce byte-identical files.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use sentinel_core::evaluation::{DurationSummary, PositionBin, UTestResult};

/// One model's prediction-quality row.
#[derive(Debug, Clone, PartialEq)]
pub struct MaeRow {
    /// Model id.
    pub id: u64,
    /// Predicted signal name.
    pub signal: String,
    /// Samples evaluated.
    pub n: usize,
    /// MAE in the scaled (normalised) range.
    pub mae_scaled: f64,
    /// MAE in original units.
    pub mae_raw: f64,
}

/// Writes `mae_per_model.csv`: one row per model plus a final `pooled` row
/// whose scaled MAE is computed over all residuals together.
pub fn write_mae_csv(
    path: &Path,
    rows: &[MaeRow],
    pooled_scaled: f64,
    pooled_n: usize,
) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "model_id,signal,n,mae_scaled,mae_raw")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.id, r.signal, r.n, r.mae_scaled, r.mae_raw
        )?;
    }
    writeln!(w, ",pooled,{pooled_n},{pooled_scaled},")?;
    w.flush()
}

/// Writes `utest.csv`: a single data row with the full test result.
pub fn write_utest_csv(path: &Path, result: &UTestResult) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(
        w,
        "u_statistic,p_value,mean_first,mean_second,n1,n2,exact,degenerate"
    )?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{}",
        result.u_statistic,
        result.p_value,
        result.mean_first,
        result.mean_second,
        result.n1,
        result.n2,
        result.exact,
        result.degenerate
    )?;
    w.flush()
}

/// Writes `msed_by_position.csv`: one row per normalised-position bin.
/// Quartile cells are empty for bins with no samples.
pub fn write_position_csv(path: &Path, bins: &[PositionBin]) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "position_lo,position_hi,count,mean,q1,median,q3")?;
    for b in bins {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            b.lo,
            b.hi,
            b.count,
            opt(b.mean),
            opt(b.q1),
            opt(b.median),
            opt(b.q3)
        )?;
    }
    w.flush()
}

/// Writes `durations.csv`: the histogram below the cut quantile, one row
/// per bin.
pub fn write_durations_csv(path: &Path, summary: &DurationSummary) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "duration_lo_us,duration_hi_us,count")?;
    for b in &summary.bins {
        writeln!(w, "{},{},{}", b.lo, b.hi, b.count)?;
    }
    w.flush()
}

/// Writes (or rewrites) the `summary.txt` metric file: `key=value` lines in
/// the order given.
pub fn write_summary(path: &Path, entries: &[(String, String)]) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (k, v) in entries {
        writeln!(w, "{k}={v}")?;
    }
    w.flush()
}

/// The duration metrics as summary entries.
pub fn duration_summary_entries(summary: &DurationSummary) -> Vec<(String, String)> {
    vec![
        ("durations.mean_us".into(), summary.mean_us.to_string()),
        ("durations.median_us".into(), summary.median_us.to_string()),
        ("durations.p95_us".into(), summary.p95_us.to_string()),
        (
            "durations.rate_per_second".into(),
            summary.rate_per_second.to_string(),
        ),
        ("durations.included".into(), summary.included.to_string()),
        ("durations.total".into(), summary.total.to_string()),
    ]
}
