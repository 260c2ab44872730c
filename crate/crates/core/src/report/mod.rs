//! Issues derived from summaries, their rendering, and the callee model table.

mod emit;
mod expect;
mod issues;
mod models;

pub use emit::{to_json, to_text, JSON_VERSION};
pub use expect::{check_expectations, parse_expectations, Expectation, Mismatch};
pub use issues::{default_entries, derive_issues, Issue, IssueType, TraceEntry};
pub use models::{ModelError, ModelKind, ModelTable};
