//! Serializable evaluation reports and their text rendering.

use std::fmt::Write as _;

use nlasso_core::EvalReport;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub method: String,
    pub weight_mse: Option<f64>,
    pub per_cluster_weight_mse: Vec<f64>,
    pub train_prediction_mse: f64,
    pub test_prediction_mse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_accuracy: Option<f64>,
}

impl ReportFile {
    pub fn new(method: &str, r: &EvalReport) -> Self {
        Self {
            method: method.to_owned(),
            weight_mse: r.weight_mse,
            per_cluster_weight_mse: r.per_cluster_weight_mse.clone(),
            train_prediction_mse: r.train_prediction_mse,
            test_prediction_mse: r.test_prediction_mse,
            train_accuracy: r.train_accuracy,
            test_accuracy: r.test_accuracy,
        }
    }
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_owned(), |v| format!("{v:.3e}"))
}

/// One row per method, columns aligned.
pub fn render_table(rows: &[ReportFile]) -> String {
    let classification = rows.iter().any(|r| r.train_accuracy.is_some());
    let mut header = vec![
        "method".to_owned(),
        "weight MSE".into(),
        "training MSE".into(),
        "test MSE".into(),
    ];
    if classification {
        header.extend(["training acc".to_owned(), "test acc".into()]);
    }
    let clusters = rows.iter().map(|r| r.per_cluster_weight_mse.len()).max().unwrap_or(0);
    header.extend((0..clusters).map(|c| format!("cluster {c} MSE")));

    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut line = vec![
                r.method.clone(),
                cell(r.weight_mse),
                cell(Some(r.train_prediction_mse)),
                cell(r.test_prediction_mse),
            ];
            if classification {
                line.extend([cell(r.train_accuracy), cell(r.test_accuracy)]);
            }
            line.extend((0..clusters).map(|c| cell(r.per_cluster_weight_mse.get(c).copied())));
            line
        })
        .collect();

    let widths: Vec<usize> = (0..header.len())
        .map(|k| {
            body.iter()
                .map(|l| l[k].len())
                .chain([header[k].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for line in std::iter::once(&header).chain(&body) {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(k, (c, &w))| if k == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
    }
    out
}
