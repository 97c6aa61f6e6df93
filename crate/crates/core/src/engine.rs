//! The transition-matrix learner: one automaton per app.
//!
//! Row `i` of the bank is the automaton attached to app `i`; its action `j`
//! stands for "app `j` is launched next". The bank rows are therefore the
//! current estimate of the app transition probability matrix.
//!
//! Each launch is handled as follows:
//!
//! 1. register the app if it is new (every row grows by one action);
//! 2. if there is a previous launch, read the kTOP list from the previous
//!    app's row;
//! 3. if the gap to the previous launch is below Δ, reward the row toward
//!    the actually launched app when the reward condition holds;
//! 4. remember this launch as the previous one, gated or not.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{ActionProbabilityVector, AutomatonError, LearningRate, Response};
use crate::registry::{AppId, AppRegistry};

pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const DEFAULT_DELTA_MS: u64 = 300_000;
pub const DEFAULT_K: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid engine config: {0}")]
    Config(String),
    #[error("invalid launch event: {0}")]
    Input(String),
    #[error("out-of-order launch: timestamp {timestamp} precedes previous launch at {previous}")]
    Ordering { previous: u64, timestamp: u64 },
    #[error("unknown app: {0}")]
    UnknownApp(String),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
}

/// One app launch.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LaunchEvent {
    pub user: String,
    pub timestamp_ms: u64,
    pub app: String,
}

impl LaunchEvent {
    pub fn new(user: impl Into<String>, timestamp_ms: u64, app: impl Into<String>) -> Self {
        Self {
            user: user.into(),
            timestamp_ms,
            app: app.into(),
        }
    }
}

/// Maximum gap between two launches for them to count as a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaThreshold {
    Millis(u64),
    Infinite,
}

impl DeltaThreshold {
    /// `gap < Δ`. A zero gap is always admitted.
    pub fn admits(self, gap_ms: u64) -> bool {
        match self {
            DeltaThreshold::Millis(delta) => gap_ms < delta,
            DeltaThreshold::Infinite => true,
        }
    }
}

impl Default for DeltaThreshold {
    fn default() -> Self {
        DeltaThreshold::Millis(DEFAULT_DELTA_MS)
    }
}

impl fmt::Display for DeltaThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaThreshold::Millis(ms) => write!(f, "{ms}"),
            DeltaThreshold::Infinite => f.write_str("infinite"),
        }
    }
}

impl FromStr for DeltaThreshold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinite" | "infinity" | "none" => Ok(DeltaThreshold::Infinite),
            other => match other.parse::<u64>() {
                Ok(0) => Err("delta must be positive".into()),
                Ok(ms) => Ok(DeltaThreshold::Millis(ms)),
                Err(e) => Err(format!("invalid delta {s:?}: {e}")),
            },
        }
    }
}

/// When the previous app's automaton is rewarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum RewardScope {
    /// Reward only if the launched app was among the offered kTOP.
    #[default]
    InKtop,
    /// Reward toward the launched app on every admitted transition.
    AlwaysActual,
}

impl RewardScope {
    pub fn as_str(self) -> &'static str {
        match self {
            RewardScope::InKtop => "in-ktop",
            RewardScope::AlwaysActual => "always-actual",
        }
    }
}

impl fmt::Display for RewardScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in-ktop" => Ok(RewardScope::InKtop),
            "always-actual" => Ok(RewardScope::AlwaysActual),
            other => Err(format!("unknown reward scope {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub lambda: LearningRate,
    pub delta: DeltaThreshold,
    pub k: usize,
    pub reward_scope: RewardScope,
}

impl EngineConfig {
    pub fn new(
        lambda: f64,
        delta: DeltaThreshold,
        k: usize,
        reward_scope: RewardScope,
    ) -> Result<Self, EngineError> {
        let lambda = LearningRate::new(lambda).map_err(|e| EngineError::Config(e.to_string()))?;
        let config = Self {
            lambda,
            delta,
            k,
            reward_scope,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.k == 0 {
            return Err(EngineError::Config("k must be at least 1".into()));
        }
        if self.delta == DeltaThreshold::Millis(0) {
            return Err(EngineError::Config("delta must be positive".into()));
        }
        LearningRate::new(self.lambda.get()).map_err(|e| EngineError::Config(e.to_string()))?;
        Ok(())
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            lambda: LearningRate::new(DEFAULT_LAMBDA).expect("default lambda"),
            delta: DeltaThreshold::default(),
            k: DEFAULT_K,
            reward_scope: RewardScope::InKtop,
        }
    }
}

/// What happened on one `observe_launch` call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    /// kTOP read from the previous app's row; `None` on cold start.
    pub offered: Option<Vec<AppId>>,
    pub actual: AppId,
    /// The gap to the previous launch was not below Δ.
    pub gated: bool,
    pub rewarded: bool,
    pub prev: Option<AppId>,
}

impl StepOutcome {
    /// A transition that should be scored.
    pub fn is_prediction_point(&self) -> bool {
        self.prev.is_some() && !self.gated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LastLaunch {
    pub(crate) app: AppId,
    pub(crate) timestamp_ms: u64,
}

/// A bank of automata over a growing app vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Engine {
    pub(crate) config: EngineConfig,
    pub(crate) registry: AppRegistry,
    pub(crate) rows: Vec<ActionProbabilityVector>,
    pub(crate) last: Option<LastLaunch>,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(Self {
            config,
            registry: AppRegistry::new(),
            rows: Vec::new(),
            last: None,
        })
    }

    /// An engine whose vocabulary is known up front: every row starts
    /// uniform over all `apps`.
    pub fn with_apps<S: AsRef<str>>(config: EngineConfig, apps: &[S]) -> Result<Self, EngineError> {
        let mut engine = Self::new(config)?;
        for app in apps {
            let name = app.as_ref();
            if name.is_empty() {
                return Err(EngineError::Input("app name must be non-empty".into()));
            }
            engine.registry.intern(name);
        }
        let n = engine.registry.len();
        if n > 0 {
            engine.rows = vec![ActionProbabilityVector::uniform(n)?; n];
        }
        Ok(engine)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn registry(&self) -> &AppRegistry {
        &self.registry
    }

    pub fn app_count(&self) -> usize {
        self.registry.len()
    }

    pub fn rows(&self) -> &[ActionProbabilityVector] {
        &self.rows
    }

    pub fn row(&self, app: AppId) -> Result<&ActionProbabilityVector, EngineError> {
        self.rows
            .get(app.index())
            .ok_or_else(|| EngineError::UnknownApp(format!("id {app}")))
    }

    /// The app launched most recently, if any.
    pub fn previous_launch(&self) -> Option<(AppId, u64)> {
        self.last.map(|l| (l.app, l.timestamp_ms))
    }

    /// Idempotent. A new app grows every existing row and gets a fresh
    /// uniform row of its own.
    pub fn register_app(&mut self, name: &str) -> Result<AppId, EngineError> {
        if name.is_empty() {
            return Err(EngineError::Input("app name must be non-empty".into()));
        }
        let (id, fresh) = self.registry.intern(name);
        if fresh {
            let n = self.registry.len();
            for row in &mut self.rows {
                row.expand_actions(n)?;
            }
            self.rows.push(ActionProbabilityVector::uniform(n)?);
        }
        Ok(id)
    }

    pub fn observe_launch(&mut self, event: &LaunchEvent) -> Result<StepOutcome, EngineError> {
        if event.app.is_empty() {
            return Err(EngineError::Input("app name must be non-empty".into()));
        }
        if let Some(last) = self.last {
            if event.timestamp_ms < last.timestamp_ms {
                return Err(EngineError::Ordering {
                    previous: last.timestamp_ms,
                    timestamp: event.timestamp_ms,
                });
            }
        }
        let actual = self.register_app(&event.app)?;

        let outcome = match self.last {
            None => StepOutcome {
                offered: None,
                actual,
                gated: false,
                rewarded: false,
                prev: None,
            },
            Some(last) => {
                let row = &mut self.rows[last.app.index()];
                let offered: Vec<AppId> = row.top_k(self.config.k).into_iter().map(AppId).collect();
                let gated = !self.config.delta.admits(event.timestamp_ms - last.timestamp_ms);
                let mut rewarded = false;
                if !gated {
                    let hit = match self.config.reward_scope {
                        RewardScope::InKtop => offered.contains(&actual),
                        RewardScope::AlwaysActual => true,
                    };
                    let response = Response::from_hit(hit);
                    row.lri_update(actual.index(), response, self.config.lambda)?;
                    rewarded = hit;
                }
                StepOutcome {
                    offered: Some(offered),
                    actual,
                    gated,
                    rewarded,
                    prev: Some(last.app),
                }
            }
        };

        self.last = Some(LastLaunch {
            app: actual,
            timestamp_ms: event.timestamp_ms,
        });
        Ok(outcome)
    }

    /// kTOP for `prev` without touching any state.
    pub fn predict_next(&self, prev: AppId, k: usize) -> Result<Vec<AppId>, EngineError> {
        Ok(self.row(prev)?.top_k(k).into_iter().map(AppId).collect())
    }

    pub fn predict_next_by_name(&self, prev: &str, k: usize) -> Result<Vec<AppId>, EngineError> {
        let id = self.lookup(prev)?;
        self.predict_next(id, k)
    }

    /// Estimated probability that `to` follows `from`.
    pub fn transition_estimate(&self, from: AppId, to: AppId) -> Result<f64, EngineError> {
        self.row(from)?
            .get(to.index())
            .ok_or_else(|| EngineError::UnknownApp(format!("id {to}")))
    }

    pub fn lookup(&self, name: &str) -> Result<AppId, EngineError> {
        self.registry
            .get(name)
            .ok_or_else(|| EngineError::UnknownApp(name.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::NORMALIZATION_TOLERANCE;

    fn config(lambda: f64, k: usize, scope: RewardScope) -> EngineConfig {
        EngineConfig::new(lambda, DeltaThreshold::Millis(DEFAULT_DELTA_MS), k, scope).unwrap()
    }

    fn ev(t: u64, app: &str) -> LaunchEvent {
        LaunchEvent::new("u", t, app)
    }

    #[test]
    fn config_validation() {
        assert!(EngineConfig::new(0.99, DeltaThreshold::Infinite, 1, RewardScope::InKtop).is_ok());
        assert!(matches!(
            EngineConfig::new(1.0, DeltaThreshold::Infinite, 1, RewardScope::InKtop),
            Err(EngineError::Config(_))
        ));
        assert!(EngineConfig::new(0.1, DeltaThreshold::Infinite, 0, RewardScope::InKtop).is_err());
        assert!(EngineConfig::new(0.1, DeltaThreshold::Millis(0), 3, RewardScope::InKtop).is_err());
        let d = EngineConfig::default();
        assert_eq!(d.lambda.get(), 0.1);
        assert_eq!(d.delta, DeltaThreshold::Millis(300_000));
        assert_eq!(d.k, 6);
    }

    #[test]
    fn delta_parsing() {
        assert_eq!("inf".parse(), Ok(DeltaThreshold::Infinite));
        assert_eq!("1500".parse(), Ok(DeltaThreshold::Millis(1500)));
        assert!("0".parse::<DeltaThreshold>().is_err());
        assert!("-3".parse::<DeltaThreshold>().is_err());
    }

    #[test]
    fn empty_engine_has_nothing_to_predict() {
        let engine = Engine::new(EngineConfig::default()).unwrap();
        assert!(matches!(
            engine.predict_next_by_name("mail", 3),
            Err(EngineError::UnknownApp(_))
        ));
        assert!(engine.predict_next(AppId(0), 3).is_err());
        assert_eq!(engine.app_count(), 0);
    }

    #[test]
    fn registration() {
        let mut engine = Engine::new(EngineConfig::default()).unwrap();
        let a = engine.register_app("mail").unwrap();
        assert_eq!(engine.rows().len(), 1);
        assert_eq!(engine.rows()[0].as_slice(), &[1.0]);
        assert_eq!(engine.register_app("mail").unwrap(), a);
        engine.register_app("maps").unwrap();
        engine.register_app("camera").unwrap();
        for row in engine.rows() {
            assert_eq!(row.len(), 3);
            assert!(row.normalization_error() <= NORMALIZATION_TOLERANCE);
        }
        assert!(matches!(engine.register_app(""), Err(EngineError::Input(_))));
    }

    #[test]
    fn cold_start() {
        let mut engine = Engine::new(EngineConfig::default()).unwrap();
        let out = engine.observe_launch(&ev(10, "A")).unwrap();
        assert_eq!(
            out,
            StepOutcome {
                offered: None,
                actual: AppId(0),
                gated: false,
                rewarded: false,
                prev: None
            }
        );
    }

    #[test]
    fn miss_outside_ktop_leaves_row() {
        let mut engine = Engine::with_apps(config(0.2, 1, RewardScope::InKtop), &["A", "B"]).unwrap();
        engine.observe_launch(&ev(0, "A")).unwrap();
        let out = engine.observe_launch(&ev(1_000, "B")).unwrap();
        assert_eq!(out.offered, Some(vec![AppId(0)]));
        assert!(!out.rewarded && !out.gated);
        assert_eq!(engine.rows()[0].as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn hit_inside_ktop_rewards_actual() {
        let mut engine = Engine::with_apps(config(0.2, 2, RewardScope::InKtop), &["A", "B"]).unwrap();
        engine.observe_launch(&ev(0, "A")).unwrap();
        let out = engine.observe_launch(&ev(1_000, "B")).unwrap();
        assert!(out.rewarded);
        let row = engine.rows()[0].as_slice();
        assert!((row[0] - 0.4).abs() < 1e-12 && (row[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn gap_at_delta_is_gated() {
        let cfg = EngineConfig::new(0.3, DeltaThreshold::Millis(100), 3, RewardScope::AlwaysActual)
            .unwrap();
        let mut engine = Engine::with_apps(cfg, &["A", "B"]).unwrap();
        engine.observe_launch(&ev(0, "A")).unwrap();
        let before = engine.rows().to_vec();
        let out = engine.observe_launch(&ev(100, "B")).unwrap();
        assert!(out.gated && !out.rewarded);
        assert!(out.offered.is_some());
        assert_eq!(engine.rows(), &before[..]);
        assert_eq!(engine.previous_launch(), Some((AppId(1), 100)));
        // 99 ms later is inside the window.
        let out = engine.observe_launch(&ev(199, "A")).unwrap();
        assert!(!out.gated && out.rewarded);
    }

    #[test]
    fn same_timestamp_counts_as_transition() {
        let cfg = EngineConfig::new(0.3, DeltaThreshold::Millis(1), 3, RewardScope::AlwaysActual)
            .unwrap();
        let mut engine = Engine::new(cfg).unwrap();
        engine.observe_launch(&ev(5, "A")).unwrap();
        let out = engine.observe_launch(&ev(5, "B")).unwrap();
        assert!(!out.gated && out.rewarded);
    }

    #[test]
    fn out_of_order_is_rejected_without_side_effects() {
        let mut engine = Engine::new(EngineConfig::default()).unwrap();
        engine.observe_launch(&ev(50, "A")).unwrap();
        let snapshot = engine.clone();
        assert_eq!(
            engine.observe_launch(&ev(49, "B")),
            Err(EngineError::Ordering {
                previous: 50,
                timestamp: 49
            })
        );
        assert_eq!(engine, snapshot);
        assert!(engine.observe_launch(&ev(50, "")).is_err());
    }

    #[test]
    fn self_transitions_train_the_diagonal() {
        let cfg = config(0.5, 1, RewardScope::AlwaysActual);
        let mut engine = Engine::with_apps(cfg, &["A", "B"]).unwrap();
        engine.observe_launch(&ev(0, "A")).unwrap();
        engine.observe_launch(&ev(1, "A")).unwrap();
        assert_eq!(engine.transition_estimate(AppId(0), AppId(0)).unwrap(), 0.75);
    }

    #[test]
    fn fresh_engine_estimates_are_uniform() {
        let engine = Engine::with_apps(EngineConfig::default(), &["a", "b", "c", "d"]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(engine.transition_estimate(AppId(i), AppId(j)).unwrap(), 0.25);
            }
        }
        assert_eq!(
            engine.predict_next_by_name("c", 10).unwrap(),
            vec![AppId(0), AppId(1), AppId(2), AppId(3)]
        );
        assert!(engine.transition_estimate(AppId(0), AppId(4)).is_err());
    }

    #[test]
    fn k_one_offers_single_app() {
        let mut engine = Engine::new(config(0.1, 1, RewardScope::InKtop)).unwrap();
        for (t, app) in ["a", "b", "c", "a", "c"].iter().enumerate() {
            let out = engine.observe_launch(&ev(t as u64, app)).unwrap();
            if let Some(offered) = out.offered {
                assert_eq!(offered.len(), 1);
            }
        }
    }
}
