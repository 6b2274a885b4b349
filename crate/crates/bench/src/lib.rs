//! Monte Carlo experiment harness around `mdl-svm`: experiment specs,
//! replication runner, CSV output and per-cell summaries.

pub mod config;
pub mod error;
pub mod experiment;
pub mod loss_curve;
pub mod methods;
pub mod spec;
pub mod summary;

pub use config::Config;
pub use error::{BenchError, Result};
pub use experiment::{run_experiment, write_rows, ResultRow, HEADER};
pub use methods::{run_method, FitOutcome, FitSettings};
pub use spec::{Cell, ExperimentSpec, Kind, Method};
pub use summary::{summarize, summarize_with, write_summary, SummaryRow};
