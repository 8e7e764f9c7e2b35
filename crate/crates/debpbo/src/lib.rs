//! Command-line resolver, external solver driver and benchmark harness on
//! top of `debpbo-core`.

pub mod backend;
pub mod bench;
pub mod cli;
pub mod external;

pub use backend::{plan_with, BackendSpec, Deadline};
pub use bench::{report, run_batch, BatchConfig, BenchReport, RunRecord, RunStatus};
pub use external::{run_external, ExternalBackend, ExternalError};
