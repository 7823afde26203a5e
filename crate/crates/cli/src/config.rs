//! Experiment configuration: one JSON document, unknown keys rejected.

use std::path::PathBuf;

use nlasso_core::{InnerSolver, LossKind, LossModel, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    pub data: DataConfig,
    pub training: TrainingConfig,
    pub solver: SolverSection,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    pub cluster_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub n_features: usize,
    pub m_per_node: usize,
    /// One weight vector per cluster.
    pub cluster_weights: Vec<Vec<f64>>,
    pub noise_std: f64,
    pub seed: u64,
    /// Replace labels by `y ≥ 0 ⇒ 1, else 0` (for the logistic loss).
    pub binary_labels: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossConfig {
    Squared,
    Lasso { lambda_local: f64 },
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Runtime {
    #[serde(alias = "centralized")]
    Central,
    #[serde(alias = "message_passing")]
    Mp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub lambda: f64,
    pub loss: LossConfig,
    pub inner_tolerance: f64,
    pub inner_max_iterations: usize,
    pub iterations: usize,
    pub tolerance: f64,
    pub runtime: Runtime,
    pub trace_every: usize,
    /// Exit with code 3 when more prox evaluations than this soft-fail.
    pub max_soft_failures: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write `messages.jsonl` for message-passing runs.
    pub message_log: bool,
    pub message_payloads: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            cluster_sizes: vec![150, 150],
            p_in: 0.5,
            p_out: 1e-3,
            seed: 0,
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n_features: 2,
            m_per_node: 5,
            cluster_weights: vec![vec![2.0, 2.0], vec![-2.0, 2.0]],
            noise_std: 0.0,
            seed: 1,
            binary_labels: false,
        }
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { size: 30, seed: 2 }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        let inner = InnerSolver::default();
        Self {
            lambda: 1e-3,
            loss: LossConfig::Squared,
            inner_tolerance: inner.tolerance,
            inner_max_iterations: inner.max_iterations,
            iterations: 500,
            tolerance: 0.0,
            runtime: Runtime::Central,
            trace_every: 1,
            max_soft_failures: None,
        }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            message_log: false,
            message_payloads: false,
        }
    }
}

impl Default for ExperimentConfig {
    /// The two-cluster SBM experiment: 150 + 150 nodes, 30 labeled, λ = 1e-3, 500 iterations.
    fn default() -> Self {
        Self {
            graph: GraphConfig::default(),
            data: DataConfig::default(),
            training: TrainingConfig::default(),
            solver: SolverSection::default(),
            output: OutputConfig::default(),
        }
    }
}

fn invalid(msg: String) -> CliError {
    CliError::Invalid(msg)
}

impl ExperimentConfig {
    /// Graph seed `s`, data seed `s + 1`, training seed `s + 2`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.graph.seed = seed;
        self.data.seed = seed.wrapping_add(1);
        self.training.seed = seed.wrapping_add(2);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.graph;
        if g.cluster_sizes.is_empty() || g.cluster_sizes.contains(&0) {
            return Err(invalid("graph.cluster_sizes must be non-empty and positive".into()));
        }
        for (name, p) in [("p_in", g.p_in), ("p_out", g.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("graph.{name} = {p} is not a probability")));
            }
        }
        let d = &self.data;
        if d.n_features == 0 || d.m_per_node == 0 {
            return Err(invalid("data.n_features and data.m_per_node must be positive".into()));
        }
        if d.cluster_weights.len() != g.cluster_sizes.len() {
            return Err(invalid(format!(
                "data.cluster_weights has {} vectors for {} clusters",
                d.cluster_weights.len(),
                g.cluster_sizes.len()
            )));
        }
        if let Some(c) = d.cluster_weights.iter().position(|w| w.len() != d.n_features) {
            return Err(invalid(format!(
                "data.cluster_weights[{c}] does not have n_features entries"
            )));
        }
        if !(d.noise_std.is_finite() && d.noise_std >= 0.0) {
            return Err(invalid("data.noise_std must be a nonnegative real".into()));
        }
        let nodes: usize = g.cluster_sizes.iter().sum();
        if self.training.size == 0 || self.training.size > nodes {
            return Err(invalid(format!("training.size must be in 1..={nodes}")));
        }
        self.solver_config()?;
        self.loss_model()?;
        Ok(())
    }

    pub fn loss_model(&self) -> Result<LossModel> {
        let kind = match self.solver.loss {
            LossConfig::Squared => LossKind::SquaredError,
            LossConfig::Lasso { lambda_local } => LossKind::Lasso { lambda_local },
            LossConfig::Logistic => LossKind::Logistic,
        };
        let inner = InnerSolver {
            tolerance: self.solver.inner_tolerance,
            max_iterations: self.solver.inner_max_iterations,
        };
        Ok(LossModel::new(kind, inner)?)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let config = SolverConfig {
            lambda: self.solver.lambda,
            max_iterations: self.solver.iterations,
            stop_tolerance: self.solver.tolerance,
            trace_every: self.solver.trace_every,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn is_classification(&self) -> bool {
        self.solver.loss == LossConfig::Logistic
    }
}
