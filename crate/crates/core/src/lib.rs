//! Simulator for the proof-of-work backbone protocol with sleepy honest
//! parties, bounded network delay and message loss.
//!
//! An execution is driven round by round by [`execution::Executor`], which
//! activates honest parties and the adversary against a shared
//! [`oracle::OracleState`] and [`diffuse::DiffuseState`]. Recorded rounds form
//! an [`view::ExecutionView`], from which [`metrics`] extracts the per-round
//! random variables and checks the backbone properties. [`bounds`] evaluates
//! the analytic expectations and thresholds the checks compare against.

pub mod adversary;
pub mod bounds;
pub mod chain;
pub mod diffuse;
pub mod error;
pub mod execution;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod stats;
pub mod view;

pub use adversary::AdversaryConfig;
pub use chain::{BlockRef, ChainStore};
pub use error::{Error, Result};
pub use execution::{run_execution, ExecutionConfig, Executor};
pub use model::{ModelKind, ModelParams, Status};
pub use view::{ExecutionView, RoundRecord};
