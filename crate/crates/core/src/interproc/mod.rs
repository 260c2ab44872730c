//! Bottom-up summary computation over the call graph.

mod db;
mod recursion;
mod schedule;

use std::sync::Arc;

use crate::symstate::Summary;

pub use db::{DbError, SummaryDb, DB_FORMAT_VERSION};
pub use recursion::close_cycle;
pub use schedule::{analyze_program, call_graph_sccs, AnalysisRun};

/// Answer to a summary request made while analysing a caller.
#[derive(Debug, Clone)]
pub enum SummaryResult {
    Found(Arc<Summary>),
    /// The callee is on the analysis stack.
    MutualRecursion,
    UnknownProcedure,
}
