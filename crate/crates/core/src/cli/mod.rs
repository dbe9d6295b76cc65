//! Scenario runner behind the `qrframe` binary: declarative scenario files,
//! shipped presets, structured reports and the built-in verification suite.

mod presets;
mod report;
mod runner;
mod scenario;
mod verify;

pub use presets::{preset, PRESETS};
pub use report::{
    emit_report, CheckResult, Criterion, EntropyRow, Format, Normalization, PerspectiveTable,
    Provenance, RunReport, REPORT_FORMAT,
};
pub use runner::{run, run_scenario};
pub use scenario::{
    Check, CutConfig, MeasurementConfig, ModeConfig, Overrides, RecipeConfig, Scenario,
    ScenarioConfig, StateConfig, Tolerances, FORMAT_VERSION,
};
pub use verify::{structural_suite, verify_all, VerifyEntry};

use crate::error::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// A physics check failed.
    pub const CHECK_FAILED: u8 = 1;
    /// Invalid configuration, unreadable input or unwritable output.
    pub const CONFIG: u8 = 2;
    /// The evolved state has no physical component.
    pub const DEGENERATE: u8 = 3;
}

/// Exit code for a report: degeneracy wins over failed checks.
pub fn exit_code(report: &RunReport) -> u8 {
    if report.degenerate {
        exit::DEGENERATE
    } else if report.checks.iter().all(|c| c.passed) {
        exit::OK
    } else {
        exit::CHECK_FAILED
    }
}

/// Exit code for an error raised before a report exists.
pub fn error_exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Lookup(_) | Error::Io { .. } | Error::Resource { .. } => {
            exit::CONFIG
        }
        _ => exit::CHECK_FAILED,
    }
}

/// Resolves `preset:NAME` or a path to a scenario file.
pub fn load(source: &str) -> crate::error::Result<ScenarioConfig> {
    match source.strip_prefix("preset:") {
        Some(name) => preset(name),
        None => ScenarioConfig::load(std::path::Path::new(source)),
    }
}
