//! Error metrics and the network-agnostic pooled regression baseline.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SVD};

use crate::data::{GroundTruth, NetworkedDataset};
use crate::error::{Error, Result};
use crate::graph::NodeSignal;
use crate::math;

/// Weight MSE `(1/|V|) Σ_{i ∈ V∖M} ‖w̄(i) − ŵ(i)‖²`.
///
/// Note the normalization by `|V|` rather than `|V∖M|`.
pub fn weight_mse(w_hat: &NodeSignal, truth: &GroundTruth, training_set: &[usize], node_count: usize) -> Result<f64> {
    check_truth(w_hat, truth, node_count)?;
    let mut labeled = alloc::vec![false; node_count];
    for &i in training_set {
        *labeled.get_mut(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: node_count,
        })? = true;
    }
    let sum: f64 = (0..node_count)
        .filter(|&i| !labeled[i])
        .map(|i| squared_distance(truth.weights.block(i), w_hat.block(i)))
        .sum();
    Ok(sum / node_count as f64)
}

/// Per-cluster weight error over unlabeled nodes, normalized by cluster size.
pub fn per_cluster_weight_mse(w_hat: &NodeSignal, truth: &GroundTruth, training_set: &[usize]) -> Result<Vec<f64>> {
    let node_count = truth.clusters.len();
    check_truth(w_hat, truth, node_count)?;
    let clusters = truth.clusters.iter().copied().max().map_or(0, |c| c + 1);
    let mut sums = alloc::vec![0.0; clusters];
    let mut sizes = alloc::vec![0usize; clusters];
    for (i, &c) in truth.clusters.iter().enumerate() {
        sizes[c] += 1;
        if training_set.binary_search(&i).is_err() {
            sums[c] += squared_distance(truth.weights.block(i), w_hat.block(i));
        }
    }
    Ok(sums.iter().zip(&sizes).map(|(s, &n)| s / n as f64).collect())
}

/// Mean of `(y − xᵀŵ(i))²` over all data points of the given nodes.
pub fn prediction_mse(w_hat: &NodeSignal, ds: &NetworkedDataset, nodes: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for &i in checked_nodes(w_hat, ds, nodes)? {
        let data = ds.node(i);
        let prediction = data.features() * DVector::from_column_slice(w_hat.block(i));
        total += (data.labels() - prediction).norm_squared();
        count += data.len();
    }
    Ok(total / count as f64)
}

/// Fraction of data points whose label matches `xᵀŵ(i) ≥ 0`.
pub fn accuracy(w_hat: &NodeSignal, ds: &NetworkedDataset, nodes: &[usize]) -> Result<f64> {
    let mut hits = 0usize;
    let mut count = 0usize;
    for &i in checked_nodes(w_hat, ds, nodes)? {
        let data = ds.node(i);
        let scores = data.features() * DVector::from_column_slice(w_hat.block(i));
        for (s, y) in scores.iter().zip(data.labels().iter()) {
            let predicted = if *s >= 0.0 { 1.0 } else { 0.0 };
            hits += usize::from(predicted == *y);
        }
        count += data.len();
    }
    Ok(hits as f64 / count as f64)
}

/// Least-squares fit on the concatenation of every labeled node's data.
///
/// Returns the minimum-norm solution when the stacked design is rank deficient.
pub fn pooled_linear_regression(ds: &NetworkedDataset) -> Result<Vec<f64>> {
    let labeled = ds.training_set();
    if labeled.is_empty() {
        return Err(Error::InvalidArgument("pooled regression needs labeled data".into()));
    }
    let rows: usize = labeled.iter().map(|&i| ds.node(i).len()).sum();
    let n = ds.n_features();
    let mut design = DMatrix::zeros(rows, n);
    let mut target = DVector::zeros(rows);
    let mut r = 0;
    for &i in labeled {
        let data = ds.node(i);
        design.rows_mut(r, data.len()).copy_from(data.features());
        target.rows_mut(r, data.len()).copy_from(data.labels());
        r += data.len();
    }
    let svd = SVD::new(design, true, true);
    let largest = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = largest * rows.max(n) as f64 * f64::EPSILON;
    let solution = svd
        .solve(&target, eps)
        .map_err(|e| Error::InvalidArgument(alloc::format!("pooled regression failed: {e}")))?;
    Ok(solution.as_slice().to_vec())
}

/// Quality summary of a learned networked predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Requires ground truth.
    pub weight_mse: Option<f64>,
    pub per_cluster_weight_mse: Vec<f64>,
    pub train_prediction_mse: f64,
    /// `None` when every node is labeled.
    pub test_prediction_mse: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
}

/// Evaluates `w_hat`; accuracies are filled in when `classification` is set.
pub fn evaluate(
    w_hat: &NodeSignal,
    ds: &NetworkedDataset,
    truth: Option<&GroundTruth>,
    classification: bool,
) -> Result<EvalReport> {
    let train = ds.training_set();
    let test = ds.unlabeled_nodes();
    let node_count = ds.graph().node_count();
    let (weight_mse, per_cluster) = match truth {
        Some(t) => (
            Some(weight_mse(w_hat, t, train, node_count)?),
            per_cluster_weight_mse(w_hat, t, train)?,
        ),
        None => (None, Vec::new()),
    };
    let optional = |f: fn(&NodeSignal, &NetworkedDataset, &[usize]) -> Result<f64>, nodes: &[usize]| {
        if nodes.is_empty() {
            Ok(None)
        } else {
            f(w_hat, ds, nodes).map(Some)
        }
    };
    Ok(EvalReport {
        weight_mse,
        per_cluster_weight_mse: per_cluster,
        train_prediction_mse: prediction_mse(w_hat, ds, train)?,
        test_prediction_mse: optional(prediction_mse, &test)?,
        train_accuracy: if classification {
            optional(accuracy, train)?
        } else {
            None
        },
        test_accuracy: if classification {
            optional(accuracy, &test)?
        } else {
            None
        },
    })
}

/// Broadcasts one weight vector to every node.
pub fn constant_signal(node_count: usize, w: &[f64]) -> NodeSignal {
    let blocks: Vec<&[f64]> = (0..node_count).map(|_| w).collect();
    NodeSignal::from_blocks(w.len(), &blocks).expect("blocks share one length")
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let d = math::dist2(a, b);
    d * d
}

fn check_truth(w_hat: &NodeSignal, truth: &GroundTruth, node_count: usize) -> Result<()> {
    if w_hat.len() != node_count || truth.weights.len() != node_count {
        return Err(Error::ShapeMismatch {
            what: "weights per node",
            expected: node_count,
            found: if w_hat.len() != node_count {
                w_hat.len()
            } else {
                truth.weights.len()
            },
        });
    }
    if w_hat.dim() != truth.weights.dim() {
        return Err(Error::ShapeMismatch {
            what: "weight dimension",
            expected: truth.weights.dim(),
            found: w_hat.dim(),
        });
    }
    Ok(())
}

fn checked_nodes<'n>(w_hat: &NodeSignal, ds: &NetworkedDataset, nodes: &'n [usize]) -> Result<&'n [usize]> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("node subset is empty".into()));
    }
    if w_hat.len() != ds.graph().node_count() || w_hat.dim() != ds.n_features() {
        return Err(Error::ShapeMismatch {
            what: "weights per node",
            expected: ds.graph().node_count(),
            found: w_hat.len(),
        });
    }
    if let Some(&bad) = nodes.iter().find(|&&i| i >= w_hat.len()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: w_hat.len(),
        });
    }
    Ok(nodes)
}
