//! The empirical graph and the matrix-free block incidence operator.
//!
//! Edges are kept in lexicographic order `(i, j)` with `i < j`. That order
//! fixes the row order of the block incidence matrix `D`: row block `e` of
//! `D w` is `w(i) - w(j)`. Edge weights never enter `D`; they only scale the
//! total-variation penalty and the dual clipping bound.

use alloc::vec;
use alloc::vec::Vec;
use core::marker::PhantomData;

use crate::error::{Error, Result};
use crate::math;

/// An undirected edge `{head, tail}` with `head < tail`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub head: usize,
    pub tail: usize,
    pub weight: f64,
}

/// A single incidence entry of a node: the edge and the sign of `D_{e,i}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub edge: usize,
    pub neighbor: usize,
    /// `true` when the node is the smaller endpoint (`D_{e,i} = +I`).
    pub positive: bool,
}

/// Undirected, positively weighted graph over local datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalGraph {
    node_count: usize,
    edges: Vec<Edge>,
    // Per node, incident edges in canonical edge order.
    incidence: Vec<Vec<Incidence>>,
}

impl EmpiricalGraph {
    /// Builds a graph from `(i, j, weight)` triples.
    ///
    /// Every edge must satisfy `i < j < node_count` and carry a finite positive
    /// weight. Edges may be given in any order; they are stored sorted.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGraph("graph must have at least one node".into()));
        }
        let mut list = Vec::new();
        for (position, (i, j, weight)) in edges.into_iter().enumerate() {
            if i >= j {
                return Err(Error::InvalidGraph(alloc::format!(
                    "edge #{position} ({i}, {j}) is not canonical: require i < j"
                )));
            }
            if j >= node_count {
                return Err(Error::InvalidGraph(alloc::format!(
                    "edge #{position} ({i}, {j}) references node {j} but the graph has {node_count} nodes"
                )));
            }
            if !(weight.is_finite() && weight > 0.0) {
                return Err(Error::InvalidGraph(alloc::format!(
                    "edge #{position} ({i}, {j}) has non-positive or non-finite weight {weight}"
                )));
            }
            list.push(Edge {
                head: i,
                tail: j,
                weight,
            });
        }
        list.sort_by_key(|e| (e.head, e.tail));
        for pair in list.windows(2) {
            if pair[0].head == pair[1].head && pair[0].tail == pair[1].tail {
                return Err(Error::InvalidGraph(alloc::format!(
                    "duplicate edge ({}, {})",
                    pair[0].head,
                    pair[0].tail
                )));
            }
        }
        let mut incidence = vec![Vec::new(); node_count];
        for (e, edge) in list.iter().enumerate() {
            incidence[edge.head].push(Incidence {
                edge: e,
                neighbor: edge.tail,
                positive: true,
            });
            incidence[edge.tail].push(Incidence {
                edge: e,
                neighbor: edge.head,
                positive: false,
            });
        }
        Ok(Self {
            node_count,
            edges: list,
            incidence,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> Result<&Edge> {
        self.edges.get(e).ok_or(Error::IndexOutOfRange {
            index: e,
            len: self.edges.len(),
        })
    }

    /// Incident edges of node `i` in canonical edge order.
    pub fn incident(&self, i: usize) -> Result<&[Incidence]> {
        self.incidence.get(i).map(Vec::as_slice).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.node_count,
        })
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        self.incident(i).map(<[Incidence]>::len)
    }

    /// The neighbourhood `N_i`, sorted ascending.
    pub fn neighborhood(&self, i: usize) -> Result<Vec<usize>> {
        let mut out: Vec<usize> = self.incident(i)?.iter().map(|inc| inc.neighbor).collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Computes `D w`: edge `(i, j)` carries `w(i) - w(j)`.
    pub fn apply_incidence(&self, w: &NodeSignal) -> Result<EdgeSignal> {
        self.check_nodes(w)?;
        let dim = w.dim();
        let mut out = EdgeSignal::zeros(self.edges.len(), dim);
        for (e, edge) in self.edges.iter().enumerate() {
            let (a, b) = (w.block(edge.head), w.block(edge.tail));
            for ((o, x), y) in out.block_mut(e).iter_mut().zip(a).zip(b) {
                *o = x - y;
            }
        }
        Ok(out)
    }

    /// Computes `Dᵀ u`, accumulating each node's incident edges in canonical order.
    pub fn apply_incidence_transpose(&self, u: &EdgeSignal) -> Result<NodeSignal> {
        if u.len() != self.edges.len() {
            return Err(Error::ShapeMismatch {
                what: "edge signal length",
                expected: self.edges.len(),
                found: u.len(),
            });
        }
        let dim = u.dim();
        let mut out = NodeSignal::zeros(self.node_count, dim);
        for (i, incident) in self.incidence.iter().enumerate() {
            let acc = out.block_mut(i);
            for inc in incident {
                accumulate_signed(acc, u.block(inc.edge), inc.positive);
            }
        }
        Ok(out)
    }

    /// Connected components, each sorted ascending, ordered by smallest member.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.node_count];
        let mut components = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.node_count {
            if label[start] != usize::MAX {
                continue;
            }
            let id = components.len();
            let mut members = Vec::new();
            label[start] = id;
            stack.push(start);
            while let Some(v) = stack.pop() {
                members.push(v);
                for inc in &self.incidence[v] {
                    if label[inc.neighbor] == usize::MAX {
                        label[inc.neighbor] = id;
                        stack.push(inc.neighbor);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() == 1
    }

    fn check_nodes(&self, w: &NodeSignal) -> Result<()> {
        if w.len() != self.node_count {
            return Err(Error::ShapeMismatch {
                what: "node signal length",
                expected: self.node_count,
                found: w.len(),
            });
        }
        Ok(())
    }
}

/// `acc += u` or `acc -= u`. Shared with the message-passing runtime so that
/// both execution paths perform identical floating-point operations.
#[inline]
pub(crate) fn accumulate_signed(acc: &mut [f64], u: &[f64], positive: bool) {
    if positive {
        for (a, x) in acc.iter_mut().zip(u) {
            *a += x;
        }
    } else {
        for (a, x) in acc.iter_mut().zip(u) {
            *a -= x;
        }
    }
}

/// Marker for signals indexed by nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Nodes;
/// Marker for signals indexed by edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edges;

/// A vector-valued signal: one block of `dim` reals per node or per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal<K> {
    dim: usize,
    values: Vec<f64>,
    _kind: PhantomData<K>,
}

pub type NodeSignal = Signal<Nodes>;
pub type EdgeSignal = Signal<Edges>;

impl<K> Signal<K> {
    pub fn zeros(len: usize, dim: usize) -> Self {
        Self {
            dim,
            values: vec![0.0; len * dim],
            _kind: PhantomData,
        }
    }

    /// Builds a signal from per-index blocks, all of length `dim`.
    pub fn from_blocks<B: AsRef<[f64]>>(dim: usize, blocks: &[B]) -> Result<Self> {
        let mut values = Vec::with_capacity(blocks.len() * dim);
        for b in blocks {
            let b = b.as_ref();
            if b.len() != dim {
                return Err(Error::ShapeMismatch {
                    what: "signal block dimension",
                    expected: dim,
                    found: b.len(),
                });
            }
            values.extend_from_slice(b);
        }
        Ok(Self {
            dim,
            values,
            _kind: PhantomData,
        })
    }

    /// Builds a signal from a flat buffer of `len * dim` values.
    pub fn from_flat(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 && !values.is_empty() || dim > 0 && !values.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch {
                what: "flat signal length (multiple of dim)",
                expected: dim,
                found: values.len(),
            });
        }
        Ok(Self {
            dim,
            values,
            _kind: PhantomData,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of blocks (nodes or edges).
    pub fn len(&self) -> usize {
        self.values.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, index: usize) -> &[f64] {
        &self.values[index * self.dim..(index + 1) * self.dim]
    }

    pub fn block_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.values[index * self.dim..(index + 1) * self.dim]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn dot(&self, other: &Self) -> f64 {
        math::dot(&self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        math::norm2(&self.values)
    }

    /// Euclidean distance between two signals of the same shape.
    pub fn distance(&self, other: &Self) -> f64 {
        math::dist2(&self.values, &other.values)
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| math::abs(a - b))
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            values: self.values.iter().map(|x| c * x).collect(),
            _kind: PhantomData,
        }
    }
}
