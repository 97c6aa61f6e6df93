//! Next-app prediction with a bank of finite action-set learning automata.
//!
//! Each app owns one automaton whose actions are "which app comes next".
//! Launches are fed in order through [`Engine::observe_launch`]; the
//! automaton of the previously launched app offers its top-k apps and is
//! reinforced with the linear reward-inaction rule. The automata rows form
//! the learned app transition probability matrix.
//!
//! The [`harness`] module replays launch logs through the engine and the
//! MRU/MFU [`baselines`], scores them with [`metrics`], and writes reports.

pub mod automaton;
pub mod baselines;
pub mod engine;
pub mod harness;
pub mod metrics;
pub mod registry;
pub mod snapshot;

pub use automaton::{ActionProbabilityVector, AutomatonError, LearningRate, Response};
pub use baselines::{Baseline, FrequencyTable, RecencyList};
pub use engine::{
    DeltaThreshold, Engine, EngineConfig, EngineError, LaunchEvent, RewardScope, StepOutcome,
};
pub use metrics::{DcgVariant, MetricSummary, PredictionRecord, PredictorKind};
pub use registry::{AppId, AppRegistry};
pub use snapshot::SnapshotError;
