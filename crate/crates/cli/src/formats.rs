//! JSON, JSON-lines and CSV file formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use nlasso_core::graph::NodeSignal;
use nlasso_core::runtime::MessageRecord;
use nlasso_core::{EmpiricalGraph, GroundTruth, LocalDataset, NetworkedDataset, TraceRecord};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n_nodes: usize,
    /// `[i, j, weight]` with `i < j`.
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeFile {
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub n_features: usize,
    pub nodes: Vec<NodeFile>,
    pub training_set: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    pub w_bar: Vec<Vec<f64>>,
    pub cluster: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsFile {
    pub n_features: usize,
    pub weights: Vec<Vec<f64>>,
}

impl GraphFile {
    pub fn from_graph(g: &EmpiricalGraph) -> Self {
        Self {
            n_nodes: g.node_count(),
            edges: g.edges().iter().map(|e| (e.head, e.tail, e.weight)).collect(),
        }
    }

    pub fn into_graph(self) -> Result<EmpiricalGraph> {
        if let Some((k, &(i, j, _))) = self.edges.iter().enumerate().find(|(_, (i, j, _))| i >= j) {
            return Err(CliError::Invalid(format!("edge {k} = ({i}, {j}) must satisfy i < j")));
        }
        Ok(EmpiricalGraph::new(self.n_nodes, self.edges)?)
    }
}

impl DatasetFile {
    pub fn from_dataset(ds: &NetworkedDataset) -> Self {
        let nodes = ds
            .nodes()
            .iter()
            .map(|d| NodeFile {
                x: (0..d.len()).map(|r| d.row(r)).collect(),
                y: d.labels().iter().copied().collect(),
            })
            .collect();
        Self {
            n_features: ds.n_features(),
            nodes,
            training_set: ds.training_set().to_vec(),
        }
    }

    /// Checks every node against `n_features`; errors name the offending node.
    pub fn into_dataset(self, graph: EmpiricalGraph) -> Result<NetworkedDataset> {
        if self.nodes.len() != graph.node_count() {
            return Err(CliError::Invalid(format!(
                "dataset has {} nodes but the graph has {}",
                self.nodes.len(),
                graph.node_count()
            )));
        }
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.into_iter().enumerate() {
            if node.x.len() != node.y.len() {
                return Err(CliError::Invalid(format!(
                    "node {i}: {} feature rows but {} labels",
                    node.x.len(),
                    node.y.len()
                )));
            }
            if node.x.is_empty() {
                return Err(CliError::Invalid(format!("node {i}: no data points")));
            }
            if let Some(r) = node.x.iter().position(|row| row.len() != self.n_features) {
                return Err(CliError::Invalid(format!(
                    "node {i}, row {r}: {} features, expected {}",
                    node.x[r].len(),
                    self.n_features
                )));
            }
            let data =
                LocalDataset::from_rows(&node.x, &node.y).map_err(|e| CliError::Invalid(format!("node {i}: {e}")))?;
            nodes.push(data);
        }
        Ok(NetworkedDataset::new(graph, nodes, self.training_set)?)
    }
}

impl TruthFile {
    pub fn from_truth(t: &GroundTruth) -> Self {
        Self {
            w_bar: t.weights.blocks().map(<[f64]>::to_vec).collect(),
            cluster: t.clusters.clone(),
        }
    }

    pub fn into_truth(self) -> Result<GroundTruth> {
        if self.w_bar.len() != self.cluster.len() {
            return Err(CliError::Invalid(format!(
                "truth has {} weight vectors but {} cluster labels",
                self.w_bar.len(),
                self.cluster.len()
            )));
        }
        let dim = self.w_bar.first().map_or(0, Vec::len);
        let weights = NodeSignal::from_blocks(dim, &self.w_bar)?;
        Ok(GroundTruth {
            weights,
            clusters: self.cluster,
        })
    }
}

impl WeightsFile {
    pub fn from_signal(w: &NodeSignal) -> Self {
        Self {
            n_features: w.dim(),
            weights: w.blocks().map(<[f64]>::to_vec).collect(),
        }
    }
}

pub fn from_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| CliError::parse(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    from_json(path, &text)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("in-memory values serialize");
    text.push('\n');
    text
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, to_json(value).as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn load_graph(path: &Path) -> Result<EmpiricalGraph> {
    read_json::<GraphFile>(path)?
        .into_graph()
        .map_err(|e| CliError::parse(path, e))
}

pub fn load_dataset(path: &Path, graph: EmpiricalGraph) -> Result<NetworkedDataset> {
    read_json::<DatasetFile>(path)?
        .into_dataset(graph)
        .map_err(|e| CliError::parse(path, e))
}

pub fn load_truth(path: &Path) -> Result<GroundTruth> {
    read_json::<TruthFile>(path)?
        .into_truth()
        .map_err(|e| CliError::parse(path, e))
}

pub const TRACE_HEADER: [&str; 7] = [
    "iteration",
    "objective",
    "empirical_loss",
    "tv",
    "dw_norm",
    "du_norm",
    "max_prox_residual",
];

pub fn write_trace_csv<W: Write>(out: W, trace: &[TraceRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        w.write_record([
            r.iteration.to_string(),
            format!("{:e}", r.objective),
            format!("{:e}", r.empirical_loss),
            format!("{:e}", r.tv),
            format!("{:e}", r.dw_norm),
            format!("{:e}", r.du_norm),
            format!("{:e}", r.max_prox_residual),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageLine {
    pub round: usize,
    pub sender: String,
    pub receiver: String,
    pub payload_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Vec<f64>>,
}

impl From<&MessageRecord> for MessageLine {
    fn from(r: &MessageRecord) -> Self {
        Self {
            round: r.round,
            sender: r.sender.to_string(),
            receiver: r.receiver.to_string(),
            payload_norm: r.payload_norm,
            payload: r.payload.clone(),
        }
    }
}

pub fn write_message_log<W: Write>(mut out: W, log: &[MessageRecord]) -> std::io::Result<()> {
    for r in log {
        serde_json::to_writer(&mut out, &MessageLine::from(r))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
