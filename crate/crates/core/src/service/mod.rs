//! Configuration, event log, experiment orchestration and the HTTP API.

mod config;
mod events;
mod experiment;
pub mod http;
mod simulate;

pub use config::ExperimentConfig;
pub use events::{parse_log, read_log, write_events, Event, EventKind, EventLog, LogHeader, LOG_FORMAT, SCHEMA_VERSION};
pub use experiment::{
    chain_summaries, export_samples, replay_log, ChainSummary, ChoiceOutcome, Clock, Experiment,
    PositionAssignment, ReplayState, Role, SessionStart, SessionView, Side, TrialView,
};
pub use simulate::{oracle_for, run_sessions, simulate, SimulationSummary};
