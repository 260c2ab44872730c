//! Intra-procedural symbolic execution with bounded unrolling and lasso detection,
//! plus a concrete interpreter for checking witnesses.

mod apply;
mod concrete;
mod engine;

pub use apply::{apply_summary, CallResult};
pub use concrete::{concrete_run, ConcreteOutcome};
pub use engine::{analyze_procedure, cond_atom, eval_expr, Outcome, SummaryOracle, WidenConfig};
