//! Network Lasso for networked federated learning.
//!
//! Each node of an empirical graph holds a private local dataset and learns
//! its own linear model. Models of well-connected nodes are coupled through a
//! weighted total-variation penalty, and the resulting convex problem is
//! solved by a preconditioned primal-dual method. The same iterations run
//! either centrally ([`solver`]) or as synchronous message passing between
//! node and edge agents ([`runtime`]).
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod graph;
pub mod loss;
mod math;
pub mod metrics;
pub mod runtime;
pub mod sbm;
pub mod solver;

pub use data::{sample_training_set, synth_generate, GroundTruth, LocalDataset, NetworkedDataset, SynthSpec};
pub use error::{Error, Result};
pub use graph::{Edge, EdgeSignal, EmpiricalGraph, NodeSignal};
pub use loss::{InnerSolver, LossKind, LossModel, ProxReport};
pub use metrics::{evaluate, pooled_linear_regression, prediction_mse, weight_mse, EvalReport};
pub use runtime::{run_distributed, DistributedOutcome, InProcessTransport, MessageStats, Network, Transport};
pub use sbm::{sbm_generate, SbmGraph};
pub use solver::{
    compute_preconditioners, objective, solve, tv_norm, Preconditioners, PrimalDual, SolverConfig, SolverState,
    StopReason, TraceRecord,
};
