//! Input files and the structured run record.
//!
//! * long CSV: header `subject,value`, one measurement per row; subjects may
//!   be interleaved and blank lines are skipped.
//! * summary CSV: header `m,mean`, one row per subject in index order. The
//!   within-subject sum of squares is supplied separately.
//!
//! Parse errors report the 1-based line and the 1-based CSV field.

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{summarize, GroupedSample, LmmParams, SummaryStats, TestResult};
use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    LongCsv,
    SummaryCsv,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "long-csv" | "long" => Ok(InputFormat::LongCsv),
            "summary-csv" | "summary" => Ok(InputFormat::SummaryCsv),
            _ => Err(Error::domain(format!("unknown input format {s:?} (long-csv | summary-csv)"))),
        }
    }
}

impl std::fmt::Display for InputFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InputFormat::LongCsv => "long-csv",
            InputFormat::SummaryCsv => "summary-csv",
        })
    }
}

/// Where the data come from and how to read them.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub format: InputFormat,
    pub path: std::path::PathBuf,
    /// Required for summary CSV, rejected for long CSV.
    pub sse: Option<f64>,
}

impl InputSpec {
    pub fn load(&self) -> Result<SummaryStats> {
        match (self.format, self.sse) {
            (InputFormat::LongCsv, Some(_)) => Err(Error::domain("--sse is computed from long-csv input; do not pass it")),
            (InputFormat::LongCsv, None) => summarize(&read_long_csv(open(&self.path)?)?),
            (InputFormat::SummaryCsv, None) => Err(Error::domain("summary-csv input requires --sse")),
            (InputFormat::SummaryCsv, Some(sse)) => read_summary_csv(open(&self.path)?, sse),
        }
    }
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    let (column, message) = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            (*len as usize, format!("expected {expected_len} fields, found {len}"))
        }
        csv::ErrorKind::Utf8 { err, .. } => (err.field() + 1, "invalid UTF-8".to_string()),
        _ => (0, e.to_string()),
    };
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        _ => Error::Parse { line, column, message },
    }
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Parse {
            line: 1,
            column: 1,
            message: format!(
                "missing `{name}` column (header is `{}`)",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        })
}

fn parse_field<T: FromStr>(record: &csv::StringRecord, idx: usize, what: &str) -> Result<T> {
    let line = record.position().map_or(0, |p| p.line());
    let raw = record.get(idx).ok_or_else(|| Error::Parse {
        line,
        column: idx + 1,
        message: format!("missing {what}"),
    })?;
    raw.parse().map_err(|_| Error::Parse {
        line,
        column: idx + 1,
        message: format!("cannot parse {what} from {raw:?}"),
    })
}

/// Reads `subject,value` rows.
pub fn read_long_csv<R: Read>(input: R) -> Result<GroupedSample> {
    let mut reader = csv_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let (si, vi) = (header_index(&headers, "subject")?, header_index(&headers, "value")?);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let subject: String = parse_field(&record, si, "subject")?;
        let value: f64 = parse_field(&record, vi, "value")?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line: record.position().map_or(0, |p| p.line()),
                column: vi + 1,
                message: format!("value {value} is not finite"),
            });
        }
        rows.push((subject, value));
    }
    GroupedSample::from_records(rows)
}

/// Reads `m,mean` rows and combines them with `sse`.
pub fn read_summary_csv<R: Read>(input: R, sse: f64) -> Result<SummaryStats> {
    let mut reader = csv_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let (mi, yi) = (header_index(&headers, "m")?, header_index(&headers, "mean")?);
    let mut m = Vec::new();
    let mut ybar = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        m.push(parse_field::<usize>(&record, mi, "group size m")?);
        ybar.push(parse_field::<f64>(&record, yi, "mean")?);
    }
    SummaryStats::new(m, ybar, sse)
}

/// Writes `m,mean` rows with round-trip exact numbers.
pub fn write_summary_csv<W: Write>(summary: &SummaryStats, mut out: W) -> Result<()> {
    writeln!(out, "m,mean")?;
    for (m, y) in summary.m().iter().zip(summary.ybar()) {
        writeln!(out, "{m},{y}")?;
    }
    Ok(())
}

/// Hex SHA-256 over the exact bits of `(m_i, ȳ_i)` and `sse`.
pub fn inputs_digest(summary: &SummaryStats) -> String {
    let mut h = Sha256::new();
    for (m, y) in summary.m().iter().zip(summary.ybar()) {
        h.update((*m as u64).to_le_bytes());
        h.update(y.to_bits().to_le_bytes());
    }
    h.update(summary.sse().to_bits().to_le_bytes());
    hex::encode(h.finalize())
}

/// One self-contained JSON line per command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub method: Option<String>,
    pub inputs_sha256: String,
    pub n: usize,
    pub total: usize,
    pub rho0: Option<f64>,
    pub alpha: Option<f64>,
    pub p_value: Option<f64>,
    pub ci_rho: Option<(f64, f64)>,
    pub ci_rho2: Option<(f64, f64)>,
    pub estimates: LmmParams,
    pub b: Option<usize>,
    pub seed: Option<u64>,
    pub null_variance: Option<String>,
    pub version: String,
}

impl RunRecord {
    pub fn for_test(summary: &SummaryStats, res: &TestResult, rho0: f64, alpha: f64, null_variance: Option<String>) -> Self {
        RunRecord {
            command: "test".into(),
            method: Some(res.method.label().to_string()),
            inputs_sha256: inputs_digest(summary),
            n: summary.n(),
            total: summary.total(),
            rho0: Some(rho0),
            alpha: Some(alpha),
            p_value: Some(res.p_value.value()),
            ci_rho: Some(res.ci_rho),
            ci_rho2: res.ci_rho2,
            estimates: res.estimates,
            b: res.b,
            seed: res.seed,
            null_variance,
            version: VERSION.into(),
        }
    }

    pub fn for_estimate(summary: &SummaryStats, estimates: LmmParams) -> Self {
        RunRecord {
            command: "estimate".into(),
            method: None,
            inputs_sha256: inputs_digest(summary),
            n: summary.n(),
            total: summary.total(),
            rho0: None,
            alpha: None,
            p_value: None,
            ci_rho: None,
            ci_rho2: None,
            estimates,
            b: None,
            seed: None,
            null_variance: None,
            version: VERSION.into(),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}
