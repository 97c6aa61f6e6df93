//! Report files.
//!
//! * `records.csv`: `predictor,user_id,event_index,actual,offered,position`,
//!   with `offered` as space-separated app ids and `position` empty on a miss;
//! * `summary.json`: run settings plus per-predictor metric means;
//! * `timeseries.csv`: `user_id,event_index,predictor,rolling_recall`;
//! * `atpm.csv`: per user, a header row `user_id,from_app,<app names...>`
//!   followed by one row per app of the learned transition matrix.
//!
//! App ids are per-user registration indices; `atpm.csv` gives the names.
//! Each file is written to a temporary file in the output directory and
//! renamed into place only after every file has been rendered.

use std::fs;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;
use thiserror::Error;

use super::replay::{series_by_user, ReplayOutput, RunConfig, SeriesPoint};
use crate::engine::DeltaThreshold;
use crate::metrics::{DcgVariant, MetricSummary, PredictionRecord, PredictorKind};
use crate::registry::AppId;

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const ATPM_FILE: &str = "atpm.csv";

pub const SUMMARY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed records file at line {line}: {reason}")]
    Format { line: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSettings {
    pub lambda: f64,
    /// `null` when Δ is infinite.
    pub delta_ms: Option<u64>,
    pub k: usize,
    pub reward_scope: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedUser {
    pub user: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub format_version: u32,
    pub seed: Option<u64>,
    pub engine: Option<EngineSettings>,
    pub dcg_variant: String,
    pub window: usize,
    pub gated_as_miss: Option<bool>,
    pub predictors: Vec<PredictorKind>,
    pub users: usize,
    pub failed_users: Vec<FailedUser>,
    pub summaries: Vec<MetricSummary>,
}

impl SummaryReport {
    pub fn for_replay(output: &ReplayOutput, config: &RunConfig) -> Self {
        Self {
            format_version: SUMMARY_FORMAT_VERSION,
            seed: config.seed,
            engine: Some(EngineSettings {
                lambda: config.engine.lambda.get(),
                delta_ms: match config.engine.delta {
                    DeltaThreshold::Millis(ms) => Some(ms),
                    DeltaThreshold::Infinite => None,
                },
                k: config.engine.k,
                reward_scope: config.engine.reward_scope.to_string(),
            }),
            dcg_variant: config.dcg_variant.to_string(),
            window: config.window.get(),
            gated_as_miss: Some(config.gated_as_miss),
            predictors: config.predictors.clone(),
            users: output.users.len() + output.failures.len(),
            failed_users: output
                .failures
                .iter()
                .map(|f| FailedUser {
                    user: f.user.clone(),
                    error: f.error.to_string(),
                })
                .collect(),
            summaries: output.summaries.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub records: PathBuf,
    pub summary: PathBuf,
    pub timeseries: PathBuf,
    pub atpm: PathBuf,
}

pub fn emit_reports(
    output: &ReplayOutput,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<ReportFiles, ReportError> {
    let records: Vec<&PredictionRecord> = output.records().collect();
    let rendered = [
        (RECORDS_FILE, render_records(&records)?),
        (SUMMARY_FILE, render_summary(&SummaryReport::for_replay(output, config))?),
        (TIMESERIES_FILE, render_series(&output.time_series(config.window))?),
        (ATPM_FILE, render_atpm(output)?),
    ];
    let paths = write_all(out_dir, &rendered)?;
    Ok(ReportFiles {
        records: paths[0].clone(),
        summary: paths[1].clone(),
        timeseries: paths[2].clone(),
        atpm: paths[3].clone(),
    })
}

/// Re-scores an existing `records.csv`: writes `summary.json` and
/// `timeseries.csv` into `out_dir`.
pub fn emit_rescored(
    records: &[PredictionRecord],
    variant: DcgVariant,
    window: NonZeroUsize,
    out_dir: &Path,
) -> Result<SummaryReport, ReportError> {
    let summaries = crate::metrics::aggregate(records, variant).unwrap_or_default();
    let mut users: Vec<&str> = records.iter().map(|r| r.user.as_str()).collect();
    users.dedup();
    let mut predictors: Vec<PredictorKind> = records.iter().map(|r| r.predictor).collect();
    predictors.sort();
    predictors.dedup();
    let report = SummaryReport {
        format_version: SUMMARY_FORMAT_VERSION,
        seed: None,
        engine: None,
        dcg_variant: variant.to_string(),
        window: window.get(),
        gated_as_miss: None,
        predictors,
        users: users.len(),
        failed_users: Vec::new(),
        summaries,
    };
    let groups = records.chunk_by(|a, b| a.user == b.user);
    let series = series_by_user(groups, window);
    write_all(
        out_dir,
        &[
            (SUMMARY_FILE, render_summary(&report)?),
            (TIMESERIES_FILE, render_series(&series)?),
        ],
    )?;
    Ok(report)
}

fn write_all(out_dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<Vec<PathBuf>, ReportError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let mut tmp = NamedTempFile::new_in(out_dir).map_err(io_err(out_dir))?;
        tmp.write_all(bytes).map_err(io_err(tmp.path()))?;
        tmp.flush().map_err(io_err(tmp.path()))?;
        staged.push((tmp, out_dir.join(name)));
    }
    let mut paths = Vec::with_capacity(staged.len());
    for (tmp, dest) in staged {
        tmp.persist(&dest).map_err(|e| ReportError::Io {
            path: dest.clone(),
            source: e.error,
        })?;
        paths.push(dest);
    }
    Ok(paths)
}

fn join_ids(ids: &[AppId]) -> String {
    ids.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ")
}

fn render_records(records: &[&PredictionRecord]) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["predictor", "user_id", "event_index", "actual", "offered", "position"])?;
    for r in records {
        w.write_record([
            r.predictor.as_str(),
            &r.user,
            &r.event_index.to_string(),
            &r.actual.to_string(),
            &join_ids(&r.offered),
            &r.position.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    into_bytes(w)
}

fn render_summary(report: &SummaryReport) -> Result<Vec<u8>, ReportError> {
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn render_series(points: &[SeriesPoint]) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["user_id", "event_index", "predictor", "rolling_recall"])?;
    for p in points {
        w.write_record([
            p.user.as_str(),
            &p.event_index.to_string(),
            p.predictor.as_str(),
            &p.rolling_recall.to_string(),
        ])?;
    }
    into_bytes(w)
}

fn render_atpm(output: &ReplayOutput) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for u in &output.users {
        let names = u.engine.registry().names();
        if names.is_empty() {
            continue;
        }
        let mut header = vec!["user_id".to_owned(), "from_app".to_owned()];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in names.iter().zip(u.engine.rows()) {
            let mut line = vec![u.user.clone(), name.clone()];
            line.extend(row.as_slice().iter().map(|q| q.to_string()));
            w.write_record(&line)?;
        }
    }
    into_bytes(w)
}

fn into_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, ReportError> {
    w.into_inner().map_err(|e| ReportError::Io {
        path: PathBuf::from("<buffer>"),
        source: e.into_error(),
    })
}

/// Loads a `records.csv` written by [`emit_reports`].
pub fn read_records(path: &Path) -> Result<Vec<PredictionRecord>, ReportError> {
    let file = fs::File::open(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |reason: String| ReportError::Format { line, reason };
        if row.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", row.len())));
        }
        let predictor: PredictorKind = row[0].parse().map_err(bad)?;
        let int = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|e| ReportError::Format {
                    line,
                    reason: format!("{what} {s:?}: {e}"),
                })
        };
        let event_index = int(&row[2], "event_index")?;
        let actual = AppId(int(&row[3], "actual")?);
        let offered = row[4]
            .split_whitespace()
            .map(|s| int(s, "offered id").map(AppId))
            .collect::<Result<Vec<_>, _>>()?;
        let position = if row[5].is_empty() {
            None
        } else {
            let p = int(&row[5], "position")?;
            if p == 0 || offered.get(p - 1) != Some(&actual) {
                return Err(bad(format!("position {p} does not point at the actual app")));
            }
            Some(p)
        };
        out.push(PredictionRecord {
            predictor,
            user: row[1].to_owned(),
            event_index,
            offered,
            actual,
            position,
        });
    }
    Ok(out)
}
