//! Experiment plumbing: configuration, initial data, manufactured forcing,
//! adaptive stepping, convergence tables, `G` comparisons and file output.

pub mod adaptive;
pub mod compare;
pub mod config;
pub mod convergence;
pub mod initial;
pub mod manufactured;
pub mod output;
pub mod run;

pub use adaptive::{adapt_dt, AdaptDecision, AdaptiveConfig};
pub use compare::{compare_g_variants, CompareReport};
pub use config::RunConfig;
pub use convergence::{measure_convergence, ConvergenceRow, Reference};
pub use initial::{make_initial, InitialKind};
pub use manufactured::ManufacturedAc;
pub use run::{simulate, RunSummary};
