//! Stochastic block model generator.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::EmpiricalGraph;

/// An SBM draw: the graph plus the block each node was generated in.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmGraph {
    pub graph: EmpiricalGraph,
    pub clusters: Vec<usize>,
}

/// Samples a stochastic block model with unit edge weights.
///
/// Nodes are numbered block by block. Pairs `i < j` are visited in
/// lexicographic order and joined with probability `p_in` inside a block and
/// `p_out` across blocks, so a fixed seed always yields the same edge list.
pub fn sbm_generate(cluster_sizes: &[usize], p_in: f64, p_out: f64, seed: u64) -> Result<SbmGraph> {
    if cluster_sizes.is_empty() {
        return Err(Error::InvalidArgument("cluster list is empty".into()));
    }
    if cluster_sizes.contains(&0) {
        return Err(Error::InvalidArgument("cluster sizes must be positive".into()));
    }
    for (name, p) in [("p_in", p_in), ("p_out", p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(alloc::format!(
                "{name} = {p} is not a probability"
            )));
        }
    }
    let clusters: Vec<usize> = cluster_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &size)| core::iter::repeat_n(c, size))
        .collect();
    let n = clusters.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if clusters[i] == clusters[j] { p_in } else { p_out };
            if rng.random_bool(p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    Ok(SbmGraph {
        graph: EmpiricalGraph::new(n, edges)?,
        clusters,
    })
}
