//! Config-driven runs: scenario files, the two architecture presets, run
//! reports and the evidence-based conformance matrix.

mod config;
mod matrix;
mod presets;
mod report;
mod run;

#[cfg(test)]
mod tests;

pub use config::{
    Action, ActorConfig, AuxChainSection, ConfigError, ConsensusSection, IncentiveSection,
    PatternParams, ScenarioConfig, SchemeSpec, ScriptedAction, SelectionKind, ShardSection,
    SPEC_VERSION,
};
pub use matrix::{conformance_matrix, Cell, CellState, ConformanceMatrix, MatrixRow};
pub use presets::{polkadot_like, preset, quorum_like, UnknownPreset, PRESETS};
pub use report::{
    ActionOutcome, ChainReport, LogEntry, NodeReport, ProposalReport, RunReport, SupplyReport,
};
pub use run::{node_name, run_scenario, ScenarioError, ScenarioRun};
