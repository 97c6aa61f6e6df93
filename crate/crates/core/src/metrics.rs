//! Per-prediction scores and their aggregates.
//!
//! Every prediction point yields one [`PredictionRecord`] per predictor.
//! Scores for a hit at 1-based rank `p` inside the offered list:
//!
//! | metric   | hit                                   | miss |
//! |----------|---------------------------------------|------|
//! | recall@k | 1                                     | 0    |
//! | DCG      | 1 if p = 1, else 1 / log2(p)          | 0    |
//! | MRR      | 1 / p                                 | 0    |
//!
//! The default DCG discount is `1/log2(p)`, under which ranks 1 and 2 both
//! score 1. [`DcgVariant::Conventional`] uses `1/log2(p + 1)` instead.

use std::collections::BTreeMap;
use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::AppId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("cannot aggregate an empty record set")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PredictorKind {
    #[serde(rename = "FALA")]
    Fala,
    #[serde(rename = "MRU")]
    Mru,
    #[serde(rename = "MFU")]
    Mfu,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 3] = [PredictorKind::Fala, PredictorKind::Mru, PredictorKind::Mfu];

    pub fn as_str(self) -> &'static str {
        match self {
            PredictorKind::Fala => "FALA",
            PredictorKind::Mru => "MRU",
            PredictorKind::Mfu => "MFU",
        }
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fala" => Ok(PredictorKind::Fala),
            "mru" => Ok(PredictorKind::Mru),
            "mfu" => Ok(PredictorKind::Mfu),
            other => Err(format!("unknown predictor {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum DcgVariant {
    /// `1/log2(p)` with rank 1 scoring 1.
    #[default]
    Printed,
    /// `1/log2(p + 1)`.
    Conventional,
}

impl DcgVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            DcgVariant::Printed => "printed",
            DcgVariant::Conventional => "conventional",
        }
    }
}

impl fmt::Display for DcgVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DcgVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "printed" => Ok(DcgVariant::Printed),
            "conventional" => Ok(DcgVariant::Conventional),
            other => Err(format!("unknown DCG variant {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecord {
    pub predictor: PredictorKind,
    pub user: String,
    /// Index of the scored launch within its user's stream.
    pub event_index: usize,
    pub offered: Vec<AppId>,
    pub actual: AppId,
    /// 1-based rank of `actual` in `offered`.
    pub position: Option<usize>,
}

impl PredictionRecord {
    pub fn new(
        predictor: PredictorKind,
        user: impl Into<String>,
        event_index: usize,
        offered: Vec<AppId>,
        actual: AppId,
    ) -> Self {
        let position = offered.iter().position(|a| *a == actual).map(|p| p + 1);
        Self {
            predictor,
            user: user.into(),
            event_index,
            offered,
            actual,
            position,
        }
    }

    /// A record that counts as a miss whatever was offered.
    pub fn forced_miss(
        predictor: PredictorKind,
        user: impl Into<String>,
        event_index: usize,
        offered: Vec<AppId>,
        actual: AppId,
    ) -> Self {
        Self {
            position: None,
            ..Self::new(predictor, user, event_index, offered, actual)
        }
    }
}

pub fn recall_at_k(record: &PredictionRecord) -> f64 {
    if record.position.is_some() {
        1.0
    } else {
        0.0
    }
}

pub fn dcg(record: &PredictionRecord, variant: DcgVariant) -> f64 {
    match (record.position, variant) {
        (None, _) => 0.0,
        (Some(1), DcgVariant::Printed) => 1.0,
        (Some(p), DcgVariant::Printed) => 1.0 / (p as f64).log2(),
        (Some(p), DcgVariant::Conventional) => 1.0 / ((p + 1) as f64).log2(),
    }
}

pub fn mrr_term(record: &PredictionRecord) -> f64 {
    record.position.map_or(0.0, |p| 1.0 / p as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub predictor: PredictorKind,
    pub recall_at_k: f64,
    pub dcg: f64,
    pub mrr: f64,
    pub count: usize,
}

/// Mean scores per predictor, in [`PredictorKind`] order.
pub fn aggregate(
    records: &[PredictionRecord],
    variant: DcgVariant,
) -> Result<Vec<MetricSummary>, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut sums: BTreeMap<PredictorKind, (f64, f64, f64, usize)> = BTreeMap::new();
    for r in records {
        let e = sums.entry(r.predictor).or_default();
        e.0 += recall_at_k(r);
        e.1 += dcg(r, variant);
        e.2 += mrr_term(r);
        e.3 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(predictor, (recall, dcg, mrr, count))| {
            let n = count as f64;
            MetricSummary {
                predictor,
                recall_at_k: recall / n,
                dcg: dcg / n,
                mrr: mrr / n,
                count,
            }
        })
        .collect())
}

/// Rolling mean of recall over the trailing `window` records of each
/// predictor, one point per record, keyed by the record's event index.
pub fn time_series(
    records: &[PredictionRecord],
    window: NonZeroUsize,
) -> BTreeMap<PredictorKind, Vec<(usize, f64)>> {
    let mut hits: BTreeMap<PredictorKind, Vec<(usize, bool)>> = BTreeMap::new();
    for r in records {
        hits.entry(r.predictor)
            .or_default()
            .push((r.event_index, r.position.is_some()));
    }
    let w = window.get();
    hits.into_iter()
        .map(|(kind, seq)| {
            let mut in_window = 0usize;
            let series = seq
                .iter()
                .enumerate()
                .map(|(i, (event_index, hit))| {
                    in_window += usize::from(*hit);
                    if i >= w && seq[i - w].1 {
                        in_window -= 1;
                    }
                    let span = (i + 1).min(w);
                    (*event_index, in_window as f64 / span as f64)
                })
                .collect();
            (kind, series)
        })
        .collect()
}
