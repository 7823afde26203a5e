//! Local datasets, the networked dataset, and the synthetic data generator.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{EmpiricalGraph, NodeSignal};
use crate::math;

/// One node's private data: an `m × n` feature matrix and `m` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDataset {
    features: DMatrix<f64>,
    labels: DVector<f64>,
}

impl LocalDataset {
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::InvalidDataset(
                "a local dataset needs at least one data point".into(),
            ));
        }
        if features.nrows() != labels.len() {
            return Err(Error::InvalidDataset(alloc::format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.iter().chain(labels.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidDataset("non-finite entry".into()));
        }
        Ok(Self { features, labels })
    }

    /// Builds a dataset from row slices.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], labels: &[f64]) -> Result<Self> {
        let n = rows.first().map_or(0, |r| r.as_ref().len());
        if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != n) {
            return Err(Error::InvalidDataset(alloc::format!(
                "row {bad} has {} features, row 0 has {n}",
                rows[bad].as_ref().len()
            )));
        }
        let features = DMatrix::from_fn(rows.len(), n, |r, c| rows[r].as_ref()[c]);
        Self::new(features, DVector::from_column_slice(labels))
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    /// Number of data points `m_i`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.features.row(r).iter().copied().collect()
    }
}

/// The empirical graph together with one local dataset per node and the set
/// of nodes whose labels are available for training.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkedDataset {
    graph: EmpiricalGraph,
    nodes: Vec<LocalDataset>,
    training_set: Vec<usize>,
    n_features: usize,
}

impl NetworkedDataset {
    /// Validates that there is one dataset per node, a common feature dimension
    /// and that the training set indexes existing nodes. An empty training set
    /// is accepted here; the solver rejects it.
    pub fn new(graph: EmpiricalGraph, nodes: Vec<LocalDataset>, mut training_set: Vec<usize>) -> Result<Self> {
        if nodes.len() != graph.node_count() {
            return Err(Error::ShapeMismatch {
                what: "local datasets per graph node",
                expected: graph.node_count(),
                found: nodes.len(),
            });
        }
        let n_features = nodes[0].n_features();
        if let Some(bad) = nodes.iter().position(|d| d.n_features() != n_features) {
            return Err(Error::InvalidDataset(alloc::format!(
                "node {bad} has {} features, node 0 has {n_features}",
                nodes[bad].n_features()
            )));
        }
        training_set.sort_unstable();
        training_set.dedup();
        if let Some(&bad) = training_set.iter().find(|&&i| i >= graph.node_count()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: graph.node_count(),
            });
        }
        Ok(Self {
            graph,
            nodes,
            training_set,
            n_features,
        })
    }

    pub fn graph(&self) -> &EmpiricalGraph {
        &self.graph
    }

    pub fn nodes(&self) -> &[LocalDataset] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &LocalDataset {
        &self.nodes[i]
    }

    /// Sorted, duplicate-free training set `M`.
    pub fn training_set(&self) -> &[usize] {
        &self.training_set
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Membership mask for `M`.
    pub fn labeled_mask(&self) -> Vec<bool> {
        let mut mask = alloc::vec![false; self.graph.node_count()];
        for &i in &self.training_set {
            mask[i] = true;
        }
        mask
    }

    /// Nodes outside the training set, ascending.
    pub fn unlabeled_nodes(&self) -> Vec<usize> {
        let mask = self.labeled_mask();
        (0..mask.len()).filter(|&i| !mask[i]).collect()
    }

    pub fn with_training_set(mut self, training_set: Vec<usize>) -> Result<Self> {
        let nodes = core::mem::take(&mut self.nodes);
        Self::new(self.graph, nodes, training_set)
    }

    /// Replaces node `i`'s dataset, keeping everything else.
    pub fn with_node(mut self, i: usize, data: LocalDataset) -> Result<Self> {
        if i >= self.nodes.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.nodes.len(),
            });
        }
        self.nodes[i] = data;
        let nodes = core::mem::take(&mut self.nodes);
        Self::new(self.graph, nodes, self.training_set)
    }
}

/// True weights and cluster membership of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub weights: NodeSignal,
    pub clusters: Vec<usize>,
}

/// Parameters of the synthetic linear-model generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec<'a> {
    pub clusters: &'a [usize],
    pub cluster_weights: &'a [Vec<f64>],
    pub m_per_node: usize,
    pub noise_std: f64,
    pub seed: u64,
}

/// Draws standard Gaussian features and labels `y = xᵀ w̄(i) + noise_std · N(0, 1)`.
///
/// The noise draw happens regardless of `noise_std`, so the features for a
/// given seed do not depend on the noise level.
pub fn synth_generate(graph: &EmpiricalGraph, spec: &SynthSpec<'_>) -> Result<(NetworkedDataset, GroundTruth)> {
    let node_count = graph.node_count();
    if spec.clusters.len() != node_count {
        return Err(Error::ShapeMismatch {
            what: "cluster assignment length",
            expected: node_count,
            found: spec.clusters.len(),
        });
    }
    if spec.m_per_node == 0 {
        return Err(Error::InvalidArgument("m_per_node must be positive".into()));
    }
    if !(spec.noise_std.is_finite() && spec.noise_std >= 0.0) {
        return Err(Error::InvalidArgument("noise_std must be a nonnegative real".into()));
    }
    let n = spec.cluster_weights.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::InvalidArgument(
            "cluster weights must be non-empty vectors".into(),
        ));
    }
    if spec.cluster_weights.iter().any(|w| w.len() != n) {
        return Err(Error::InvalidArgument(
            "cluster weight vectors differ in dimension".into(),
        ));
    }
    if let Some(&c) = spec.clusters.iter().find(|&&c| c >= spec.cluster_weights.len()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "cluster {c} has no weight vector"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut truth = Vec::with_capacity(node_count);
    let mut nodes = Vec::with_capacity(node_count);
    let mut row = alloc::vec![0.0; n];
    for &c in spec.clusters {
        let w_bar = &spec.cluster_weights[c];
        let mut features = DMatrix::zeros(spec.m_per_node, n);
        let mut labels = DVector::zeros(spec.m_per_node);
        for r in 0..spec.m_per_node {
            for (k, x) in row.iter_mut().enumerate() {
                *x = StandardNormal.sample(&mut rng);
                features[(r, k)] = *x;
            }
            let noise: f64 = StandardNormal.sample(&mut rng);
            labels[r] = math::dot(&row, w_bar) + spec.noise_std * noise;
        }
        nodes.push(LocalDataset::new(features, labels)?);
        truth.push(w_bar.clone());
    }
    let dataset = NetworkedDataset::new(graph.clone(), nodes, Vec::new())?;
    let truth = GroundTruth {
        weights: NodeSignal::from_blocks(n, &truth)?,
        clusters: spec.clusters.to_vec(),
    };
    Ok((dataset, truth))
}

/// Uniformly samples `count` distinct nodes, returned ascending.
pub fn sample_training_set(graph: &EmpiricalGraph, count: usize, seed: u64) -> Result<Vec<usize>> {
    let n = graph.node_count();
    if count == 0 || count > n {
        return Err(Error::InvalidArgument(alloc::format!(
            "training set size {count} must be in 1..={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Maps labels to `{0, 1}` by the sign rule `y ≥ 0 ⇒ 1`.
pub fn binarize_labels(ds: &NetworkedDataset) -> Result<NetworkedDataset> {
    let nodes = ds
        .nodes()
        .iter()
        .map(|d| {
            let y = d.labels().map(|v| if v >= 0.0 { 1.0 } else { 0.0 });
            LocalDataset::new(d.features().clone(), y)
        })
        .collect::<Result<Vec<_>>>()?;
    NetworkedDataset::new(ds.graph().clone(), nodes, ds.training_set().to_vec())
}
