//! Distributed linear SVM estimation by multi-round smoothed linear-type
//! aggregation, with plug-in inference and a simulation model.
//!
//! The numeric kernels in [`linalg`] and [`smoothing`] are generic over the
//! float type; everything downstream works in `f64` through the [`Vector`]
//! and [`Matrix`] aliases, since the wire format is bit-exact `f64`.

pub mod data;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod mdl;
pub mod normal;
pub mod protocol;
pub mod rff;
pub mod rng;
pub mod simgen;
pub mod smoothing;
pub mod solver;

pub use data::{partition, Dataset, PartitionPolicy, Shard};
pub use error::{Error, Result};
pub use mdl::{mdl_fit, mdl_fit_ce, CoefVector, MdlConfig, MdlFit, Mode, WorkerSummary};
pub use rng::{RngState, SimRng};
pub use simgen::{SimModel, TrueModel};
pub use smoothing::{required_rounds, BandwidthSchedule};
pub use solver::{naive_dc, solve_hinge, SolverOptions, SvmProblem};

pub type Vector = linalg::Vector<f64>;
pub type Matrix = linalg::Matrix<f64>;
