//! Preconditioned primal-dual iterations for the network Lasso
//!
//! ```text
//! min_w  Σ_{i∈M} L(X(i), w(i)) + λ Σ_{(i,j)∈E} A_ij ‖w(i) − w(j)‖₁
//! ```
//!
//! One iteration, starting from `w = 0`, `u = 0`:
//!
//! 1. `v(i) = w(i) − τ(i) (Dᵀu)(i)` for every node;
//! 2. labeled nodes take `w(i) ← PU_i(v(i))`, unlabeled nodes take `w(i) ← v(i)`;
//! 3. `u ← clip_{λA}(u + Σ D (2 w_new − w_old))`.
//!
//! with `σ(e) = 1/2` and `τ(i) = 1/|N_i|`.

use alloc::vec::Vec;

use crate::data::{LocalDataset, NetworkedDataset};
use crate::error::{Error, Result};
use crate::graph::{EdgeSignal, EmpiricalGraph, NodeSignal};
use crate::loss::{LossModel, ProxReport};
use crate::math;

/// Diagonal step sizes: `τ(i)` per node and `σ(e)` per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioners {
    pub tau: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// `σ(e) = 1/2`; `τ(i) = 1/|N_i|`, or 1 for isolated nodes.
pub fn compute_preconditioners(graph: &EmpiricalGraph) -> Preconditioners {
    let tau = (0..graph.node_count())
        .map(|i| match graph.degree(i).unwrap_or(0) {
            0 => 1.0,
            d => 1.0 / d as f64,
        })
        .collect();
    Preconditioners {
        tau,
        sigma: alloc::vec![0.5; graph.edge_count()],
    }
}

/// Weighted total variation `Σ_e A_e ‖w(i) − w(j)‖₁`.
pub fn tv_norm(graph: &EmpiricalGraph, w: &NodeSignal) -> Result<f64> {
    let d = graph.apply_incidence(w)?;
    Ok(graph
        .edges()
        .iter()
        .zip(d.blocks())
        .map(|(edge, diff)| edge.weight * math::norm1(diff))
        .sum())
}

/// Sum of local losses over the training set.
pub fn empirical_loss(ds: &NetworkedDataset, loss: &LossModel, w: &NodeSignal) -> Result<f64> {
    check_signal(ds, w)?;
    ds.training_set()
        .iter()
        .map(|&i| loss.eval(ds.node(i), w.block(i)))
        .sum()
}

/// The network Lasso objective: empirical loss plus `λ · TV`.
pub fn objective(ds: &NetworkedDataset, loss: &LossModel, w: &NodeSignal, lambda: f64) -> Result<f64> {
    Ok(empirical_loss(ds, loss, w)? + lambda * tv_norm(ds.graph(), w)?)
}

/// Scalar clipping onto `[−bound, bound]`.
#[inline]
pub fn clip(x: f64, bound: f64) -> f64 {
    if x > bound {
        bound
    } else if x < -bound {
        -bound
    } else {
        x
    }
}

/// Clips every coordinate of `u(e)` into `[−λA_e, λA_e]`.
pub fn clip_dual(u: &EdgeSignal, lambda: f64, graph: &EmpiricalGraph) -> Result<EdgeSignal> {
    if u.len() != graph.edge_count() {
        return Err(Error::ShapeMismatch {
            what: "edge signal length",
            expected: graph.edge_count(),
            found: u.len(),
        });
    }
    let mut out = u.clone();
    for (e, edge) in graph.edges().iter().enumerate() {
        let bound = lambda * edge.weight;
        for x in out.block_mut(e) {
            *x = clip(*x, bound);
        }
    }
    Ok(out)
}

/// Largest `|u_j(e)| − λA_e`; nonpositive exactly when `u` is dual feasible.
pub fn dual_excess(u: &EdgeSignal, lambda: f64, graph: &EmpiricalGraph) -> f64 {
    graph
        .edges()
        .iter()
        .zip(u.blocks())
        .flat_map(|(edge, block)| {
            let bound = lambda * edge.weight;
            block.iter().map(move |x| math::abs(*x) - bound)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Primal update of one node from its current weight and `(Dᵀu)(i)`.
pub(crate) fn node_update(
    loss: &LossModel,
    data: Option<&LocalDataset>,
    w: &[f64],
    incidence_sum: &[f64],
    tau: f64,
) -> Result<(Vec<f64>, Option<ProxReport>)> {
    let v: Vec<f64> = w.iter().zip(incidence_sum).map(|(w, s)| w - tau * s).collect();
    match data {
        Some(data) => {
            let report = loss.prox(data, &v, tau)?;
            Ok((report.z.clone(), Some(report)))
        }
        None => Ok((v, None)),
    }
}

/// `2 w_new − w_old`.
pub(crate) fn extrapolate(new: &[f64], old: &[f64]) -> Vec<f64> {
    new.iter().zip(old).map(|(n, o)| 2.0 * n - o).collect()
}

/// Dual update of one edge from the extrapolated endpoint weights.
pub(crate) fn edge_update(u: &[f64], sigma: f64, head: &[f64], tail: &[f64], bound: f64) -> Vec<f64> {
    u.iter()
        .zip(head.iter().zip(tail))
        .map(|(u, (a, b))| clip(u + sigma * (a - b), bound))
        .collect()
}

/// Relative iterate change `(‖Δw‖ + ‖Δu‖) / (1 + ‖w_k‖ + ‖u_k‖)`.
pub fn relative_change(dw_norm: f64, du_norm: f64, w_prev_norm: f64, u_prev_norm: f64) -> f64 {
    (dw_norm + du_norm) / (1.0 + w_prev_norm + u_prev_norm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// TV strength λ.
    pub lambda: f64,
    pub max_iterations: usize,
    /// Relative change threshold; 0 runs exactly `max_iterations` iterations.
    pub stop_tolerance: f64,
    /// Record a trace line every this many iterations (0 disables the trace).
    pub trace_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            max_iterations: 500,
            stop_tolerance: 0.0,
            trace_every: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "lambda = {} must be positive",
                self.lambda
            )));
        }
        if !(self.stop_tolerance >= 0.0) {
            return Err(Error::InvalidArgument("stop tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub empirical_loss: f64,
    pub tv: f64,
    pub dw_norm: f64,
    pub du_norm: f64,
    pub max_prox_residual: f64,
    pub soft_failures: usize,
    pub dual_excess: f64,
}

/// What one iteration changed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSummary {
    pub dw_norm: f64,
    pub du_norm: f64,
    pub relative_change: f64,
    pub max_prox_residual: f64,
    pub soft_failures: usize,
    pub dual_excess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    IterationLimit,
    Converged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub w: NodeSignal,
    pub u: EdgeSignal,
    pub iteration: usize,
    pub trace: Vec<TraceRecord>,
    /// Prox evaluations that hit their inner iteration cap.
    pub soft_failures: usize,
    /// Largest dual excess seen after any iteration so far.
    pub max_dual_excess: f64,
    pub stop_reason: Option<StopReason>,
}

impl SolverState {
    pub fn initial(node_count: usize, edge_count: usize, dim: usize) -> Self {
        Self {
            w: NodeSignal::zeros(node_count, dim),
            u: EdgeSignal::zeros(edge_count, dim),
            iteration: 0,
            trace: Vec::new(),
            soft_failures: 0,
            max_dual_excess: f64::NEG_INFINITY,
            stop_reason: None,
        }
    }
}

/// A validated primal-dual problem instance.
#[derive(Debug, Clone)]
pub struct PrimalDual<'a> {
    ds: &'a NetworkedDataset,
    loss: &'a LossModel,
    precond: Preconditioners,
    lambda: f64,
    labeled: Vec<bool>,
}

impl<'a> PrimalDual<'a> {
    /// Rejects an empty training set, a non-positive λ and labels the loss
    /// cannot handle.
    pub fn new(ds: &'a NetworkedDataset, loss: &'a LossModel, lambda: f64) -> Result<Self> {
        Self::with_preconditioners(ds, loss, lambda, compute_preconditioners(ds.graph()))
    }

    pub fn with_preconditioners(
        ds: &'a NetworkedDataset,
        loss: &'a LossModel,
        lambda: f64,
        precond: Preconditioners,
    ) -> Result<Self> {
        if ds.training_set().is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "lambda = {lambda} must be positive"
            )));
        }
        loss.check_parameters()?;
        for &i in ds.training_set() {
            loss.validate(ds.node(i)).map_err(|e| match e {
                Error::InvalidLabel { value, .. } => Error::InvalidLabel { node: Some(i), value },
                other => other,
            })?;
        }
        if precond.tau.len() != ds.graph().node_count() || precond.sigma.len() != ds.graph().edge_count() {
            return Err(Error::ShapeMismatch {
                what: "preconditioner length",
                expected: ds.graph().node_count() + ds.graph().edge_count(),
                found: precond.tau.len() + precond.sigma.len(),
            });
        }
        if precond.tau.iter().chain(&precond.sigma).any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidArgument("preconditioners must be positive".into()));
        }
        Ok(Self {
            ds,
            loss,
            precond,
            lambda,
            labeled: ds.labeled_mask(),
        })
    }

    pub fn dataset(&self) -> &'a NetworkedDataset {
        self.ds
    }

    pub fn loss(&self) -> &'a LossModel {
        self.loss
    }

    pub fn preconditioners(&self) -> &Preconditioners {
        &self.precond
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_labeled(&self, i: usize) -> bool {
        self.labeled[i]
    }

    pub fn initial_state(&self) -> SolverState {
        let g = self.ds.graph();
        SolverState::initial(g.node_count(), g.edge_count(), self.ds.n_features())
    }

    /// One full primal-dual iteration, without touching the trace.
    pub fn step(&self, state: &mut SolverState) -> Result<StepSummary> {
        let graph = self.ds.graph();
        let dim = self.ds.n_features();
        check_signal(self.ds, &state.w)?;
        if state.u.len() != graph.edge_count() || state.u.dim() != dim {
            return Err(Error::ShapeMismatch {
                what: "dual iterate length",
                expected: graph.edge_count(),
                found: state.u.len(),
            });
        }

        let transported = graph.apply_incidence_transpose(&state.u)?;
        let mut w_next = NodeSignal::zeros(graph.node_count(), dim);
        let mut max_prox_residual: f64 = 0.0;
        let mut soft_failures = 0;
        for i in 0..graph.node_count() {
            let data = self.labeled[i].then(|| self.ds.node(i));
            let (next, report) = node_update(
                self.loss,
                data,
                state.w.block(i),
                transported.block(i),
                self.precond.tau[i],
            )?;
            if let Some(report) = report {
                max_prox_residual = max_prox_residual.max(report.residual);
                soft_failures += usize::from(!report.converged);
            }
            w_next.block_mut(i).copy_from_slice(&next);
        }

        let mut extrapolated = NodeSignal::zeros(graph.node_count(), dim);
        for i in 0..graph.node_count() {
            let ext = extrapolate(w_next.block(i), state.w.block(i));
            extrapolated.block_mut(i).copy_from_slice(&ext);
        }
        let diff = graph.apply_incidence(&extrapolated)?;
        let mut u_next = EdgeSignal::zeros(graph.edge_count(), dim);
        for (e, edge) in graph.edges().iter().enumerate() {
            // Same operation order as `edge_update`.
            let sigma = self.precond.sigma[e];
            let bound = self.lambda * edge.weight;
            let next: Vec<f64> = state
                .u
                .block(e)
                .iter()
                .zip(diff.block(e))
                .map(|(u, d)| clip(u + sigma * d, bound))
                .collect();
            u_next.block_mut(e).copy_from_slice(&next);
        }

        Ok(self.commit(state, w_next, u_next, max_prox_residual, soft_failures))
    }

    /// Installs new iterates and returns the change summary.
    pub(crate) fn commit(
        &self,
        state: &mut SolverState,
        w_next: NodeSignal,
        u_next: EdgeSignal,
        max_prox_residual: f64,
        soft_failures: usize,
    ) -> StepSummary {
        let dw_norm = w_next.distance(&state.w);
        let du_norm = u_next.distance(&state.u);
        let rel = relative_change(dw_norm, du_norm, state.w.norm(), state.u.norm());
        let excess = dual_excess(&u_next, self.lambda, self.ds.graph());
        state.w = w_next;
        state.u = u_next;
        state.iteration += 1;
        state.soft_failures += soft_failures;
        state.max_dual_excess = state.max_dual_excess.max(excess);
        StepSummary {
            dw_norm,
            du_norm,
            relative_change: rel,
            max_prox_residual,
            soft_failures,
            dual_excess: excess,
        }
    }

    /// Diagnostics of the current iterate after a step.
    pub fn record(&self, state: &SolverState, summary: &StepSummary) -> Result<TraceRecord> {
        let empirical = empirical_loss(self.ds, self.loss, &state.w)?;
        let tv = tv_norm(self.ds.graph(), &state.w)?;
        Ok(TraceRecord {
            iteration: state.iteration,
            objective: empirical + self.lambda * tv,
            empirical_loss: empirical,
            tv,
            dw_norm: summary.dw_norm,
            du_norm: summary.du_norm,
            max_prox_residual: summary.max_prox_residual,
            soft_failures: summary.soft_failures,
            dual_excess: summary.dual_excess,
        })
    }

    /// `pd_iterate`: one step with the trace line appended.
    pub fn iterate(&self, mut state: SolverState) -> Result<SolverState> {
        let summary = self.step(&mut state)?;
        let record = self.record(&state, &summary)?;
        state.trace.push(record);
        Ok(state)
    }

    /// Runs until the iteration cap or the relative change threshold.
    pub fn run(&self, config: &SolverConfig) -> Result<SolverState> {
        self.run_from(self.initial_state(), config)
    }

    pub fn run_from(&self, mut state: SolverState, config: &SolverConfig) -> Result<SolverState> {
        config.validate()?;
        state.stop_reason = Some(StopReason::IterationLimit);
        while state.iteration < config.max_iterations {
            let summary = self.step(&mut state)?;
            let stop = config.stop_tolerance > 0.0 && summary.relative_change <= config.stop_tolerance;
            if should_trace(config, state.iteration, stop) {
                let record = self.record(&state, &summary)?;
                state.trace.push(record);
            }
            if stop {
                state.stop_reason = Some(StopReason::Converged);
                break;
            }
        }
        Ok(state)
    }
}

pub(crate) fn should_trace(config: &SolverConfig, iteration: usize, last: bool) -> bool {
    config.trace_every > 0
        && (iteration.is_multiple_of(config.trace_every) || last || iteration == config.max_iterations)
}

/// Solves the network Lasso with the default preconditioners.
pub fn solve(ds: &NetworkedDataset, loss: &LossModel, config: &SolverConfig) -> Result<SolverState> {
    config.validate()?;
    PrimalDual::new(ds, loss, config.lambda)?.run(config)
}

fn check_signal(ds: &NetworkedDataset, w: &NodeSignal) -> Result<()> {
    if w.len() != ds.graph().node_count() || w.dim() != ds.n_features() {
        return Err(Error::ShapeMismatch {
            what: "primal iterate (nodes × features)",
            expected: ds.graph().node_count() * ds.n_features(),
            found: w.len() * w.dim(),
        });
    }
    Ok(())
}
