pub mod cli;
pub mod exec;
pub mod frontend;
pub mod interproc;
pub mod report;
pub mod solver;
pub mod symstate;
