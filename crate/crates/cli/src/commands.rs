//! The generate / run / baseline / sweep experiments.

use std::path::{Path, PathBuf};

use nlasso_core::data::binarize_labels;
use nlasso_core::metrics::constant_signal;
use nlasso_core::runtime::{run_distributed_with, MessageRecord};
use nlasso_core::{
    evaluate, pooled_linear_regression, sample_training_set, sbm_generate, solve, synth_generate, EvalReport,
    GroundTruth, InProcessTransport, MessageStats, NetworkedDataset, NodeSignal, SynthSpec, TraceRecord,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, Runtime};
use crate::error::{CliError, Result};
use crate::formats::{self, DatasetFile, GraphFile, TruthFile, WeightsFile};
use crate::report::{render_table, ReportFile};

pub const GRAPH_FILE: &str = "graph.json";
pub const DATASET_FILE: &str = "dataset.json";
pub const TRUTH_FILE: &str = "truth.json";

/// A dataset plus, for synthetic data, its ground truth.
#[derive(Debug, Clone)]
pub struct Problem {
    pub dataset: NetworkedDataset,
    pub truth: Option<GroundTruth>,
}

/// Builds the synthetic SBM problem described by `config`.
pub fn build_problem(config: &ExperimentConfig) -> Result<Problem> {
    config.validate()?;
    let g = &config.graph;
    let sbm = sbm_generate(&g.cluster_sizes, g.p_in, g.p_out, g.seed)?;
    let spec = SynthSpec {
        clusters: &sbm.clusters,
        cluster_weights: &config.data.cluster_weights,
        m_per_node: config.data.m_per_node,
        noise_std: config.data.noise_std,
        seed: config.data.seed,
    };
    let (mut dataset, truth) = synth_generate(&sbm.graph, &spec)?;
    if config.data.binary_labels {
        dataset = binarize_labels(&dataset)?;
    }
    let m = sample_training_set(&sbm.graph, config.training.size, config.training.seed)?;
    Ok(Problem {
        dataset: dataset.with_training_set(m)?,
        truth: Some(truth),
    })
}

pub fn load_problem(graph: &Path, dataset: &Path, truth: Option<&Path>) -> Result<Problem> {
    let g = formats::load_graph(graph)?;
    let dataset = formats::load_dataset(dataset, g)?;
    let truth = truth.map(formats::load_truth).transpose()?;
    Ok(Problem { dataset, truth })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub weights: NodeSignal,
    pub report: EvalReport,
    pub trace: Vec<TraceRecord>,
    pub iterations: usize,
    pub soft_failures: usize,
    pub max_dual_excess: f64,
    /// Message-passing runs only.
    pub messages: Option<MessageStats>,
    pub message_log: Option<Vec<MessageRecord>>,
}

/// Solves the network Lasso with the runtime selected in `config`.
pub fn run_solver(config: &ExperimentConfig, problem: &Problem) -> Result<RunOutput> {
    let loss = config.loss_model()?;
    let solver = config.solver_config()?;
    let ds = &problem.dataset;
    let output = match config.solver.runtime {
        Runtime::Central => {
            let state = solve(ds, &loss, &solver)?;
            RunOutput {
                report: evaluate(&state.w, ds, problem.truth.as_ref(), config.is_classification())?,
                weights: state.w,
                trace: state.trace,
                iterations: state.iteration,
                soft_failures: state.soft_failures,
                max_dual_excess: state.max_dual_excess,
                messages: None,
                message_log: None,
            }
        }
        Runtime::Mp => {
            let mut transport = if config.output.message_log {
                InProcessTransport::with_log(config.output.message_payloads)
            } else {
                InProcessTransport::new()
            };
            let outcome = run_distributed_with(ds, &loss, &solver, &mut transport)?;
            RunOutput {
                report: evaluate(&outcome.weights, ds, problem.truth.as_ref(), config.is_classification())?,
                weights: outcome.weights,
                trace: outcome.trace,
                iterations: outcome.rounds,
                soft_failures: outcome.soft_failures,
                max_dual_excess: outcome.max_dual_excess,
                messages: Some(outcome.stats),
                message_log: transport.take_log(),
            }
        }
    };
    Ok(output)
}

/// Pooled least squares on all labeled data, broadcast to every node.
pub fn run_baseline(config: &ExperimentConfig, problem: &Problem) -> Result<(Vec<f64>, EvalReport)> {
    let ds = &problem.dataset;
    let w = pooled_linear_regression(ds)?;
    let signal = constant_signal(ds.graph().node_count(), &w);
    let report = evaluate(&signal, ds, problem.truth.as_ref(), config.is_classification())?;
    Ok((w, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    #[value(name = "p_out")]
    POut,
    Lambda,
    Iterations,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::POut => "p_out",
            Axis::Lambda => "lambda",
            Axis::Iterations => "iterations",
        }
    }

    /// `config` with this axis set to `value`; everything else, seeds included, is kept.
    pub fn apply(self, config: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = config.clone();
        match self {
            Axis::POut => c.graph.p_out = value,
            Axis::Lambda => c.solver.lambda = value,
            Axis::Iterations => {
                if !(value >= 0.0 && value.fract() == 0.0 && value <= usize::MAX as f64) {
                    return Err(CliError::Invalid(format!(
                        "iterations value {value} is not a whole number"
                    )));
                }
                c.solver.iterations = value as usize;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub weight_mse: f64,
    pub train_prediction_mse: f64,
    pub test_prediction_mse: Option<f64>,
    pub soft_failures: usize,
}

/// One independent solver run per value.
pub fn run_sweep(config: &ExperimentConfig, axis: Axis, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::Invalid("sweep needs at least one value".into()));
    }
    values
        .iter()
        .map(|&value| {
            let row_config = axis.apply(config, value)?;
            let problem = build_problem(&row_config)?;
            let out = run_solver(&row_config, &problem)?;
            Ok(SweepRow {
                value,
                weight_mse: out.report.weight_mse.expect("synthetic problems carry ground truth"),
                train_prediction_mse: out.report.train_prediction_mse,
                test_prediction_mse: out.report.test_prediction_mse,
                soft_failures: out.soft_failures,
            })
        })
        .collect()
}

pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Invalid(format!("sweep value {s:?} is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(CliError::Invalid("--values is empty".into()));
    }
    Ok(values)
}

#[derive(Serialize)]
struct Metadata<'a, E: Serialize> {
    command: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    extra: E,
}

fn write_metadata<E: Serialize>(path: &Path, command: &'static str, config: &ExperimentConfig, extra: E) -> Result<()> {
    formats::write_json(
        path,
        &Metadata {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            extra,
        },
    )
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::parse(path, format!("{other:?}")),
    }
}

/// Writes `graph.json`, `dataset.json` and `truth.json` into `out`.
pub fn cmd_generate(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let problem = build_problem(config)?;
    let ds = &problem.dataset;
    let paths = [out.join(GRAPH_FILE), out.join(DATASET_FILE), out.join(TRUTH_FILE)];
    formats::write_json(&paths[0], &GraphFile::from_graph(ds.graph()))?;
    formats::write_json(&paths[1], &DatasetFile::from_dataset(ds))?;
    let truth = problem.truth.as_ref().expect("synthetic problems carry ground truth");
    formats::write_json(&paths[2], &TruthFile::from_truth(truth))?;
    write_metadata(&out.join("generate.meta.json"), "generate", config, ())?;
    Ok(paths.to_vec())
}

/// Input files overriding the synthetic problem of the config.
#[derive(Debug, Clone, Default)]
pub struct RunInputs {
    pub graph: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunExtra<'a> {
    inputs: Option<[Option<&'a Path>; 3]>,
    iterations: usize,
    soft_failures: usize,
    max_dual_excess: f64,
    messages: Option<usize>,
    bytes: Option<usize>,
}

/// Runs the solver and writes `report.json`, `weights.json`, `trace.csv`
/// (with `trace.meta.json`) and, if requested, `messages.jsonl`.
/// Returns the rendered report table.
pub fn cmd_run(config: &ExperimentConfig, inputs: &RunInputs, out: &Path) -> Result<(RunOutput, String)> {
    let problem = match (&inputs.graph, &inputs.dataset) {
        (Some(g), Some(d)) => {
            config.solver_config()?;
            load_problem(g, d, inputs.truth.as_deref())?
        }
        (None, None) if inputs.truth.is_none() => build_problem(config)?,
        _ => return Err(CliError::Invalid("--graph and --dataset must be given together".into())),
    };
    let output = run_solver(config, &problem)?;
    let report = ReportFile::new("network Lasso", &output.report);
    formats::write_json(&out.join("report.json"), &report)?;
    formats::write_json(&out.join("weights.json"), &WeightsFile::from_signal(&output.weights))?;

    let trace_path = out.join("trace.csv");
    let mut buffer = Vec::new();
    formats::write_trace_csv(&mut buffer, &output.trace).map_err(|e| csv_error(&trace_path, e))?;
    formats::write_file(&trace_path, &buffer)?;
    let from_files = inputs.graph.is_some();
    let extra = RunExtra {
        inputs: from_files.then_some([
            inputs.graph.as_deref(),
            inputs.dataset.as_deref(),
            inputs.truth.as_deref(),
        ]),
        iterations: output.iterations,
        soft_failures: output.soft_failures,
        max_dual_excess: output.max_dual_excess,
        messages: output.messages.map(|s| s.messages),
        bytes: output.messages.map(|s| s.bytes),
    };
    write_metadata(&out.join("trace.meta.json"), "run", config, extra)?;

    if let Some(log) = &output.message_log {
        let path = out.join("messages.jsonl");
        let mut buffer = Vec::new();
        formats::write_message_log(&mut buffer, log).map_err(|e| CliError::io(&path, e))?;
        formats::write_file(&path, &buffer)?;
    }
    check_soft_failures(config, output.soft_failures)?;
    let table = render_table(&[report]);
    Ok((output, table))
}

fn check_soft_failures(config: &ExperimentConfig, count: usize) -> Result<()> {
    match config.solver.max_soft_failures {
        Some(limit) if count > limit => Err(CliError::SoftFailures { count, limit }),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct BaselineExtra<'a> {
    pooled_weight: &'a [f64],
}

/// Writes `baseline.json`; returns the baseline report and its rendered table.
pub fn cmd_baseline(config: &ExperimentConfig, out: &Path) -> Result<(ReportFile, String)> {
    let problem = build_problem(config)?;
    let (w, report) = run_baseline(config, &problem)?;
    let report = ReportFile::new("pooled linear regression", &report);
    formats::write_json(&out.join("baseline.json"), &report)?;
    write_metadata(
        &out.join("baseline.meta.json"),
        "baseline",
        config,
        BaselineExtra { pooled_weight: &w },
    )?;
    let table = render_table(std::slice::from_ref(&report));
    Ok((report, table))
}

#[derive(Serialize)]
struct SweepExtra<'a> {
    axis: Axis,
    values: &'a [f64],
}

/// Writes `sweep_<axis>.csv` with its metadata sidecar.
pub fn cmd_sweep(config: &ExperimentConfig, axis: Axis, values: &[f64], out: &Path) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let rows = run_sweep(config, axis, values)?;
    let path = out.join(format!("sweep_{}.csv", axis.name()));
    let mut buffer = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buffer);
        let header = [axis.name(), "weight_mse", "train_prediction_mse", "test_prediction_mse"];
        w.write_record(header).map_err(|e| csv_error(&path, e))?;
        for r in &rows {
            w.write_record([
                r.value.to_string(),
                format!("{:e}", r.weight_mse),
                format!("{:e}", r.train_prediction_mse),
                r.test_prediction_mse.map_or_else(String::new, |v| format!("{v:e}")),
            ])
            .map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
    }
    formats::write_file(&path, &buffer)?;
    let meta = path.with_extension("meta.json");
    write_metadata(&meta, "sweep", config, SweepExtra { axis, values })?;
    let failures = rows.iter().map(|r| r.soft_failures).sum();
    check_soft_failures(config, failures)?;
    Ok(rows)
}
