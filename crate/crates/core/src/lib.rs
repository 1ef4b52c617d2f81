//! Single-process federated learning simulator with elastic-net regularised
//! local updates.
//!
//! The crate covers the whole pipeline: models and data
//! ([`model`], [`data`]), client partitioning ([`partition`]), local solvers
//! ([`solver`]), the server round loop for the FedAvg/FedProx, SCAFFOLD and
//! FedDyn families ([`protocol`]), communication metering ([`meter`]),
//! executable convergence diagnostics ([`diagnostics`]) and the experiment
//! harness ([`harness`]).

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod meter;
pub mod model;
pub mod param;
pub mod partition;
pub mod protocol;
pub mod seed;
pub mod solver;

pub use data::{Batch, Dataset, Examples, Targets};
pub use error::{Error, Result};
pub use model::{ModelKind, ModelSpec};
pub use param::ParamVector;
