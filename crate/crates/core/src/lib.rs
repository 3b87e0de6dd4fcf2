//! Declarative capacity-expansion modeling for multi-carrier energy hubs.
//!
//! A hub is described as data — units, nodes, groups, and relationships with
//! parameters assigned in named scenario layers — loaded from a flat CSV
//! dataset. Stacking layers yields an effective parameter view; the compiler
//! turns a view plus a horizon into a mixed-integer program for the bundled
//! solver (or any external one via the MPS interchange); the reporting module
//! reduces a solution to investment and operation KPIs.

pub mod compile;
pub mod dataset;
pub mod graph;
pub mod kpi;
pub mod scenario;
pub mod time;
pub mod validate;
pub mod value;

pub use compile::{compile, CompileOptions, CompiledInstance, Mode};
pub use graph::{ClassTag, EntityGraph, Layer, ParamKey, RelKind, Relationship};
pub use kpi::{KpiReport, UnitKpi};
pub use scenario::{builtin_scenarios, EffectiveView, ScenarioStack};
pub use time::Horizon;
pub use validate::{validate_graph, Diagnostic, Severity};
pub use value::{ParameterValue, TimeSeries};

/// Errors across dataset handling, scenario resolution, and compilation.
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    /// A literal (timestamp, duration, number, entity name) failed to parse.
    #[error("{0}")]
    Parse(String),
    /// A dataset row is malformed or contradicts an earlier row.
    #[error("dataset row {row}: {message}")]
    Dataset { row: usize, message: String },
    /// The requested scenario stack does not exist or names unknown layers.
    #[error("{0}")]
    Scenario(String),
    /// The effective view cannot be compiled into a program.
    #[error("{0}")]
    Compile(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
