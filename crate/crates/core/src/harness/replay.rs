//! Per-user replay of a launch stream through the engine and both baselines.
//!
//! Every predictor is queried before any of them sees the new launch, so the
//! records at one prediction point are directly comparable. Users are
//! replayed independently (in parallel) and merged back in stream order.

use std::num::NonZeroUsize;

use rayon::prelude::*;

use super::ingest::{EventStream, UserStream};
use crate::baselines::{Baseline, FrequencyTable, RecencyList};
use crate::engine::{Engine, EngineConfig, EngineError};
use crate::metrics::{self, DcgVariant, MetricSummary, PredictionRecord, PredictorKind};

pub const DEFAULT_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub engine: EngineConfig,
    /// Trailing window for rolling recall.
    pub window: NonZeroUsize,
    pub predictors: Vec<PredictorKind>,
    /// Score Δ-gated transitions too, as automatic engine misses.
    pub gated_as_miss: bool,
    pub dcg_variant: DcgVariant,
    /// Recorded in reports; replay itself draws no random numbers.
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn new(engine: EngineConfig) -> Self {
        Self {
            engine,
            ..Self::default()
        }
    }

    pub fn with_predictors(mut self, predictors: &[PredictorKind]) -> Self {
        let mut p = predictors.to_vec();
        p.sort();
        p.dedup();
        self.predictors = p;
        self
    }

    fn runs(&self, kind: PredictorKind) -> bool {
        self.predictors.contains(&kind)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            engine: EngineConfig::default(),
            window: NonZeroUsize::new(DEFAULT_WINDOW).unwrap(),
            predictors: PredictorKind::ALL.to_vec(),
            gated_as_miss: false,
            dcg_variant: DcgVariant::Printed,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserReplay {
    pub user: String,
    pub engine: Engine,
    pub records: Vec<PredictionRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserFailure {
    pub user: String,
    pub error: EngineError,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayOutput {
    /// Successful users, in stream order.
    pub users: Vec<UserReplay>,
    pub failures: Vec<UserFailure>,
    pub summaries: Vec<MetricSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub user: String,
    pub predictor: PredictorKind,
    pub event_index: usize,
    pub rolling_recall: f64,
}

impl ReplayOutput {
    pub fn records(&self) -> impl Iterator<Item = &PredictionRecord> {
        self.users.iter().flat_map(|u| u.records.iter())
    }

    pub fn record_count(&self) -> usize {
        self.users.iter().map(|u| u.records.len()).sum()
    }

    /// Rolling recall per user and predictor.
    pub fn time_series(&self, window: NonZeroUsize) -> Vec<SeriesPoint> {
        series_by_user(self.users.iter().map(|u| u.records.as_slice()), window)
    }
}

/// Rolling recall for record groups that each belong to one user.
pub fn series_by_user<'a>(
    groups: impl Iterator<Item = &'a [PredictionRecord]>,
    window: NonZeroUsize,
) -> Vec<SeriesPoint> {
    let mut out = Vec::new();
    for records in groups {
        let Some(first) = records.first() else { continue };
        for (predictor, series) in metrics::time_series(records, window) {
            out.extend(series.into_iter().map(|(event_index, rolling_recall)| SeriesPoint {
                user: first.user.clone(),
                predictor,
                event_index,
                rolling_recall,
            }));
        }
    }
    out
}

pub fn replay(stream: &EventStream, config: &RunConfig) -> ReplayOutput {
    let results: Vec<Result<UserReplay, UserFailure>> = stream
        .users
        .par_iter()
        .map(|u| {
            replay_user(u, config).map_err(|error| UserFailure {
                user: u.user.clone(),
                error,
            })
        })
        .collect();

    let mut output = ReplayOutput::default();
    for r in results {
        match r {
            Ok(u) => output.users.push(u),
            Err(f) => output.failures.push(f),
        }
    }
    let records: Vec<PredictionRecord> = output.records().cloned().collect();
    output.summaries = metrics::aggregate(&records, config.dcg_variant).unwrap_or_default();
    output
}

pub fn replay_user(stream: &UserStream, config: &RunConfig) -> Result<UserReplay, EngineError> {
    let mut engine = Engine::new(config.engine)?;
    let mut mru = RecencyList::new();
    let mut mfu = FrequencyTable::new();
    let k = config.engine.k;
    let mut records = Vec::new();

    for (index, event) in stream.events.iter().enumerate() {
        let outcome = engine.observe_launch(event)?;
        if let Some(offered) = outcome.offered {
            if !outcome.gated || config.gated_as_miss {
                let actual = outcome.actual;
                let user = stream.user.as_str();
                for &kind in &config.predictors {
                    let record = match kind {
                        PredictorKind::Fala if outcome.gated => {
                            PredictionRecord::forced_miss(kind, user, index, offered.clone(), actual)
                        }
                        PredictorKind::Fala => {
                            PredictionRecord::new(kind, user, index, offered.clone(), actual)
                        }
                        PredictorKind::Mru => PredictionRecord::new(kind, user, index, mru.predict(k), actual),
                        PredictorKind::Mfu => PredictionRecord::new(kind, user, index, mfu.predict(k), actual),
                    };
                    records.push(record);
                }
            }
        }
        if config.runs(PredictorKind::Mru) {
            mru.observe(outcome.actual);
        }
        if config.runs(PredictorKind::Mfu) {
            mfu.observe(outcome.actual);
        }
    }

    Ok(UserReplay {
        user: stream.user.clone(),
        engine,
        records,
    })
}
