//! Configuration, persistence and the experiment campaigns.

pub mod commands;
pub mod config;
pub mod io;

pub use commands::{
    cmd_converge, cmd_dissipate, cmd_hypotheses, cmd_simulate, ConvergeReport, DissipateReport, Options,
    SimulationSummary,
};
pub use config::{InitialField, Problem, Resolved, RunConfig};
