//! Log ingestion, synthetic streams, replay and report emission.

pub mod ingest;
pub mod replay;
pub mod report;
pub mod synth;

pub use ingest::{parse_events, read_events, EventStream, IngestError, InputFormat, UserStream};
pub use replay::{replay, replay_user, ReplayOutput, RunConfig, SeriesPoint, UserFailure, UserReplay};
pub use report::{emit_reports, emit_rescored, read_records, ReportError, ReportFiles, SummaryReport};
pub use synth::{peaked_matrix, synth_markov, SynthError, SyntheticSpec};
