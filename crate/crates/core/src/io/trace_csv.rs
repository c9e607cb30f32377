//! Plot-ready CSV traces, solution vectors and partition files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::partition::BlockPartition;
use crate::scalar::Scalar;
use crate::solver::Trace;

pub const TRACE_HEADER: &str = "epoch,inner_iter,time_ms,objective,gap,max_staleness";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    /// All columns, including wall-clock time.
    #[default]
    Csv,
    /// `time_ms` left empty so reruns are byte-identical.
    CsvStable,
}

impl std::str::FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "csv-stable" | "stable" => Ok(TraceFormat::CsvStable),
            other => Err(Error::Unsupported(format!("trace format `{other}`"))),
        }
    }
}

/// Formats a number with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders the trace. `meta` lines become leading `# key=value` comments;
/// the gap column is filled only when `f_star` is given.
pub fn render_trace(trace: &Trace, f_star: Option<f64>, format: TraceFormat, meta: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let time = match format {
            TraceFormat::Csv => fmt_num(r.time_ms),
            TraceFormat::CsvStable => String::new(),
        };
        let gap = f_star.map(|f| fmt_num(r.objective - f)).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch,
            r.inner_iter,
            time,
            fmt_num(r.objective),
            gap,
            r.max_staleness
        );
    }
    out
}

pub fn write_trace(
    trace: &Trace,
    path: impl AsRef<Path>,
    f_star: Option<f64>,
    format: TraceFormat,
    meta: &[(String, String)],
) -> Result<()> {
    if trace.records.is_empty() {
        return Err(Error::InvalidData("trace has no records".into()));
    }
    fs::write(path, render_trace(trace, f_star, format, meta))?;
    Ok(())
}

/// One value per line.
pub fn write_vector<T: Scalar>(x: &[T], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(x.len() * 24);
    for v in x {
        out.push_str(&fmt_num(v.to_f64_lossy()));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_vector<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: ln + 1,
            msg: format!("invalid number `{line}`"),
        })?;
        out.push(T::of(v));
    }
    Ok(out)
}

/// One group per line, whitespace-separated 0-based coordinates.
pub fn load_partition(path: impl AsRef<Path>, n: usize) -> Result<BlockPartition> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut groups = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let group = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: ln + 1,
                    msg: format!("invalid coordinate `{t}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        groups.push(group);
    }
    BlockPartition::new(n, groups)
}
