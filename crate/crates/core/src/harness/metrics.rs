//! Per-episode metrics, aggregates and their CSV / JSONL persistence.
//!
//! CSV layout:
//!
//! ```text
//! # asl-metrics v1 rows=3 framework=single-shot env=scene-classification sensing=learned seed=0 timestamp=1700000000
//! episode,seed,return,total,steps,correct,quality,options
//! 0,16294208416658607535,1,1,1,1,0.98,0;0;4:1
//! ...
//! # aggregate count=3 return_mean=... return_std=... ...
//! ```
//!
//! `options` lists `index:count` pairs of the modality-0 option histogram.
//! JSONL files hold one `{"kind": "header" | "row" | "aggregate", ...}`
//! object per line in the same order. The header announces the row count,
//! so a file cut short is reported as truncated on re-read.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::MetricsFormat;
use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 8] = ["episode", "seed", "return", "total", "steps", "correct", "quality", "options"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub version: u32,
    pub rows: usize,
    pub framework: String,
    pub env: String,
    pub sensing: String,
    pub seed: u64,
    /// Unix seconds at the start of the run; the only non-deterministic
    /// field of a report.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: u64,
    pub seed: u64,
    /// Task return; for perception frameworks, the number of correct
    /// classifications.
    #[serde(rename = "return")]
    pub task_return: f64,
    /// Composite return including quality terms.
    pub total: f64,
    pub steps: usize,
    /// Fraction of correctly classified steps, where defined.
    pub correct: Option<f64>,
    pub quality: Option<f64>,
    /// `(grid index, count)` of the modality-0 options used, ascending.
    pub options: Vec<(usize, u64)>,
}

/// Mean, sample standard deviation and count of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Summary {
            mean,
            std,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    #[serde(rename = "return")]
    pub task_return: Option<Summary>,
    pub total: Option<Summary>,
    pub steps: Option<Summary>,
    pub correct: Option<Summary>,
    pub quality: Option<Summary>,
}

impl Aggregate {
    pub fn from_rows(rows: &[EpisodeRow]) -> Self {
        let column = |f: &dyn Fn(&EpisodeRow) -> Option<f64>| {
            Summary::of(&rows.iter().filter_map(f).collect::<Vec<_>>())
        };
        Aggregate {
            count: rows.len(),
            task_return: column(&|r| Some(r.task_return)),
            total: column(&|r| Some(r.total)),
            steps: column(&|r| Some(r.steps as f64)),
            correct: column(&|r| r.correct),
            quality: column(&|r| r.quality),
        }
    }

    fn columns(&self) -> [(&'static str, Option<Summary>); 5] {
        [
            ("return", self.task_return),
            ("total", self.total),
            ("steps", self.steps),
            ("correct", self.correct),
            ("quality", self.quality),
        ]
    }

    /// One-line `name_mean=... name_std=...` rendering.
    pub fn to_line(&self) -> String {
        let mut parts = vec![format!("count={}", self.count)];
        for (name, summary) in self.columns() {
            if let Some(s) = summary {
                parts.push(format!("{name}_mean={} {name}_std={} {name}_n={}", s.mean, s.std, s.count));
            }
        }
        parts.join(" ")
    }

    fn from_line(line: &str) -> std::result::Result<Self, String> {
        let mut count = None;
        let mut fields: Vec<(String, f64)> = Vec::new();
        for part in line.split_whitespace() {
            let (k, v) = part.split_once('=').ok_or_else(|| format!("bad aggregate field `{part}`"))?;
            if k == "count" {
                count = Some(v.parse::<usize>().map_err(|e| e.to_string())?);
            } else {
                fields.push((k.to_string(), v.parse::<f64>().map_err(|e| e.to_string())?));
            }
        }
        let get = |name: &str| -> Option<Summary> {
            let find = |suffix: &str| {
                fields
                    .iter()
                    .find(|(k, _)| k == &format!("{name}_{suffix}"))
                    .map(|(_, v)| *v)
            };
            Some(Summary {
                mean: find("mean")?,
                std: find("std")?,
                count: find("n")? as usize,
            })
        };
        Ok(Aggregate {
            count: count.ok_or("aggregate without count")?,
            task_return: get("return"),
            total: get("total"),
            steps: get("steps"),
            correct: get("correct"),
            quality: get("quality"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub header: ReportHeader,
    pub rows: Vec<EpisodeRow>,
    pub aggregate: Aggregate,
}

impl MetricsReport {
    pub fn new(header: ReportHeader, rows: Vec<EpisodeRow>) -> Self {
        let aggregate = Aggregate::from_rows(&rows);
        MetricsReport {
            header,
            rows,
            aggregate,
        }
    }

    /// Aggregate recomputed from the rows.
    pub fn recompute(&self) -> Aggregate {
        Aggregate::from_rows(&self.rows)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum JsonRecord {
    Header(ReportHeader),
    Row(EpisodeRow),
    Aggregate(Aggregate),
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn histogram_text(options: &[(usize, u64)]) -> String {
    options
        .iter()
        .map(|(i, c)| format!("{i}:{c}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn csv_header_line(h: &ReportHeader) -> String {
    format!(
        "# asl-metrics v{} rows={} framework={} env={} sensing={} seed={} timestamp={}",
        h.version, h.rows, h.framework, h.env, h.sensing, h.seed, h.timestamp
    )
}

/// Incremental writer: rows are appended and flushed as episodes finish.
pub struct MetricsWriter {
    path: PathBuf,
    format: MetricsFormat,
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path, format: MetricsFormat, header: &ReportHeader) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = MetricsWriter {
            path: path.to_path_buf(),
            format,
            out: BufWriter::new(file),
        };
        match format {
            MetricsFormat::Csv => {
                writer.line(&csv_header_line(header))?;
                writer.line(&CSV_COLUMNS.join(","))?;
            }
            MetricsFormat::Jsonl => writer.json(&JsonRecord::Header(header.clone()))?,
        }
        writer.flush()?;
        Ok(writer)
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.out, "{text}").map_err(|e| Error::io(&self.path, e))
    }

    fn json(&mut self, record: &JsonRecord) -> Result<()> {
        let text = serde_json::to_string(record).expect("metrics records serialize");
        self.line(&text)
    }

    fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }

    pub fn append(&mut self, row: &EpisodeRow) -> Result<()> {
        match self.format {
            MetricsFormat::Csv => {
                let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
                csv.write_record([
                    row.episode.to_string(),
                    row.seed.to_string(),
                    row.task_return.to_string(),
                    row.total.to_string(),
                    row.steps.to_string(),
                    opt(row.correct),
                    opt(row.quality),
                    histogram_text(&row.options),
                ])
                .map_err(|e| Error::io(&self.path, e.into()))?;
                let bytes = csv.into_inner().map_err(|e| Error::io(&self.path, e.into_error()))?;
                self.out.write_all(&bytes).map_err(|e| Error::io(&self.path, e))?;
            }
            MetricsFormat::Jsonl => self.json(&JsonRecord::Row(row.clone()))?,
        }
        self.flush()
    }

    pub fn finish(mut self, aggregate: &Aggregate) -> Result<()> {
        match self.format {
            MetricsFormat::Csv => self.line(&format!("# aggregate {}", aggregate.to_line()))?,
            MetricsFormat::Jsonl => self.json(&JsonRecord::Aggregate(aggregate.clone()))?,
        }
        self.flush()
    }
}

/// Write a complete report in one go.
pub fn write_report(path: &Path, format: MetricsFormat, report: &MetricsReport) -> Result<()> {
    let mut writer = MetricsWriter::create(path, format, &report.header)?;
    for row in &report.rows {
        writer.append(row)?;
    }
    writer.finish(&report.aggregate)
}

fn truncated(path: &Path, message: impl Into<String>) -> Error {
    Error::Truncated {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Read a metrics file written by [`MetricsWriter`]; the format is taken
/// from the first line.
pub fn read_report(path: &Path) -> Result<MetricsReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    let first = lines.first().ok_or_else(|| truncated(path, "empty file"))?;
    let report = if first.starts_with("# asl-metrics") {
        read_csv(path, &lines)?
    } else {
        read_jsonl(path, &lines)?
    };
    if report.rows.len() != report.header.rows {
        return Err(truncated(
            path,
            format!("header announces {} rows, found {}", report.header.rows, report.rows.len()),
        ));
    }
    Ok(report)
}

fn read_csv(path: &Path, lines: &[String]) -> Result<MetricsReport> {
    let mut header = ReportHeader {
        version: 0,
        rows: 0,
        framework: String::new(),
        env: String::new(),
        sensing: String::new(),
        seed: 0,
        timestamp: 0,
    };
    for field in lines[0].trim_start_matches("# asl-metrics").split_whitespace() {
        let bad = || parse_error(path, 1, format!("bad header field `{field}`"));
        if let Some(v) = field.strip_prefix('v') {
            header.version = v.parse().map_err(|_| bad())?;
            continue;
        }
        let (k, v) = field.split_once('=').ok_or_else(bad)?;
        match k {
            "rows" => header.rows = v.parse().map_err(|_| bad())?,
            "framework" => header.framework = v.to_string(),
            "env" => header.env = v.to_string(),
            "sensing" => header.sensing = v.to_string(),
            "seed" => header.seed = v.parse().map_err(|_| bad())?,
            "timestamp" => header.timestamp = v.parse().map_err(|_| bad())?,
            _ => return Err(bad()),
        }
    }
    if lines.get(1).map(String::as_str) != Some(CSV_COLUMNS.join(",").as_str()) {
        return Err(truncated(path, "missing column header"));
    }
    let mut rows = Vec::new();
    let mut aggregate = None;
    for (i, line) in lines.iter().enumerate().skip(2) {
        if let Some(rest) = line.strip_prefix("# aggregate ") {
            aggregate = Some(Aggregate::from_line(rest).map_err(|m| parse_error(path, i + 1, m))?);
        }
    }
    let aggregate = aggregate.ok_or_else(|| truncated(path, "missing aggregate record"))?;
    let data: Vec<(usize, &str)> = lines
        .iter()
        .enumerate()
        .skip(2)
        .filter(|(_, l)| !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.as_str()))
        .collect();
    let body = data.iter().map(|(_, l)| *l).collect::<Vec<_>>().join("\n");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(body.as_bytes());
    for (i, record) in reader.records().enumerate() {
        let line = data.get(i).map_or(0, |d| d.0);
        let record = record.map_err(|e| parse_error(path, line, e.to_string()))?;
        rows.push(parse_csv_row(&record).map_err(|m| parse_error(path, line, m))?);
    }
    Ok(MetricsReport {
        header,
        rows,
        aggregate,
    })
}

fn parse_csv_row(record: &csv::StringRecord) -> std::result::Result<EpisodeRow, String> {
    if record.len() != CSV_COLUMNS.len() {
        return Err(format!("expected {} columns, got {}", CSV_COLUMNS.len(), record.len()));
    }
    let num = |i: usize| record[i].parse::<f64>().map_err(|e| format!("{}: {e}", CSV_COLUMNS[i]));
    let opt_num = |i: usize| -> std::result::Result<Option<f64>, String> {
        if record[i].is_empty() {
            Ok(None)
        } else {
            num(i).map(Some)
        }
    };
    let options = if record[7].is_empty() {
        Vec::new()
    } else {
        record[7]
            .split(';')
            .map(|pair| {
                let (i, c) = pair.split_once(':').ok_or_else(|| format!("bad histogram entry `{pair}`"))?;
                Ok((
                    i.parse().map_err(|e| format!("options: {e}"))?,
                    c.parse().map_err(|e| format!("options: {e}"))?,
                ))
            })
            .collect::<std::result::Result<_, String>>()?
    };
    Ok(EpisodeRow {
        episode: record[0].parse().map_err(|e| format!("episode: {e}"))?,
        seed: record[1].parse().map_err(|e| format!("seed: {e}"))?,
        task_return: num(2)?,
        total: num(3)?,
        steps: record[4].parse().map_err(|e| format!("steps: {e}"))?,
        correct: opt_num(5)?,
        quality: opt_num(6)?,
        options,
    })
}

fn read_jsonl(path: &Path, lines: &[String]) -> Result<MetricsReport> {
    let mut header = None;
    let mut rows = Vec::new();
    let mut aggregate = None;
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonRecord = serde_json::from_str(line).map_err(|e| {
            if e.is_eof() {
                truncated(path, format!("line {} ends early", i + 1))
            } else {
                parse_error(path, i + 1, e.to_string())
            }
        })?;
        match record {
            JsonRecord::Header(h) if i == 0 => header = Some(h),
            JsonRecord::Header(_) => return Err(parse_error(path, i + 1, "header after the first line")),
            JsonRecord::Row(r) => rows.push(r),
            JsonRecord::Aggregate(a) => aggregate = Some(a),
        }
    }
    Ok(MetricsReport {
        header: header.ok_or_else(|| parse_error(path, 1, "missing header record"))?,
        rows,
        aggregate: aggregate.ok_or_else(|| truncated(path, "missing aggregate record"))?,
    })
}
