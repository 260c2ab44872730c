//! Symbolic states: stack slots, a separating heap, path conditions, loop
//! snapshots and the specs that summarize a procedure.

mod spec;
mod state;
mod trace;

pub use spec::{Divergence, DivergenceKind, RecursiveCallRecord, Spec, SpecKind, Summary};
pub use state::{AbstractState, LoopSnapshot, MemError, SymHeap};
pub use trace::{Trace, TraceStep};
