//! Synchronous message-passing execution of the primal-dual iterations.
//!
//! Node agents own a weight vector and, when labeled, read their own local
//! dataset. Edge agents own the dual vector of their edge. A round has two
//! half-rounds separated by a transport barrier:
//!
//! * **A** – each edge sends `+u(e)` to its smaller endpoint and `−u(e)` to its
//!   larger endpoint; each node sums what it received in canonical edge order
//!   and takes its primal step.
//! * **B** – each node sends `2 w_new − w_old` to every incident edge; each edge
//!   takes its dual step and clips.
//!
//! That is `4|E|` messages per round. The arithmetic is the same as the
//! centralized solver's, so the iterates agree bit for bit.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::data::{LocalDataset, NetworkedDataset};
use crate::error::{Error, Result};
use crate::graph::{EdgeSignal, Incidence, NodeSignal};
use crate::loss::LossModel;
use crate::math;
use crate::solver::{
    edge_update, extrapolate, node_update, should_trace, PrimalDual, SolverConfig, SolverState, StopReason, TraceRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentId {
    Node(usize),
    Edge(usize),
}

impl core::fmt::Display for AgentId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AgentId::Node(i) => write!(f, "node:{i}"),
            AgentId::Edge(e) => write!(f, "edge:{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Node → edge: the extrapolated weight `2 w_new − w_old`.
    Extrapolated(Vec<f64>),
    /// Edge → node: the signed dual contribution `±u(e)`.
    Dual(Vec<f64>),
}

impl Payload {
    pub fn values(&self) -> &[f64] {
        match self {
            Payload::Extrapolated(v) | Payload::Dual(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: AgentId,
    pub receiver: AgentId,
    pub round: usize,
    pub payload: Payload,
}

/// One line of the message log.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageRecord {
    pub round: usize,
    pub sender: AgentId,
    pub receiver: AgentId,
    pub payload_norm: f64,
    pub payload: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MessageStats {
    pub messages: usize,
    /// `n` reals of 8 bytes per payload.
    pub bytes: usize,
}

/// Carries messages between agents. `deliver` is the barrier that ends a
/// half-round and hands over everything sent since the previous barrier.
pub trait Transport {
    fn send(&mut self, message: Message) -> Result<()>;
    fn deliver(&mut self) -> Vec<Message>;
    fn stats(&self) -> MessageStats;
}

/// Deliver-all-per-half-round transport inside one process.
#[derive(Debug, Default)]
pub struct InProcessTransport {
    pending: Vec<Message>,
    last_round: BTreeMap<(AgentId, AgentId), usize>,
    stats: MessageStats,
    log: Option<Vec<MessageRecord>>,
    log_payloads: bool,
}

impl InProcessTransport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records every message sent; payload values only when `payloads` is set.
    pub fn with_log(payloads: bool) -> Self {
        Self {
            log: Some(Vec::new()),
            log_payloads: payloads,
            ..Self::default()
        }
    }

    pub fn log(&self) -> Option<&[MessageRecord]> {
        self.log.as_deref()
    }

    pub fn take_log(&mut self) -> Option<Vec<MessageRecord>> {
        self.log.take()
    }
}

impl Transport for InProcessTransport {
    fn send(&mut self, message: Message) -> Result<()> {
        let channel = (message.sender, message.receiver);
        if let Some(&last) = self.last_round.get(&channel) {
            if message.round <= last {
                return Err(Error::Protocol {
                    channel: format!("{} -> {}", message.sender, message.receiver),
                    round: message.round,
                    detail: format!("round does not increase (previous {last})"),
                });
            }
        }
        self.last_round.insert(channel, message.round);
        let values = message.payload.values();
        self.stats.messages += 1;
        self.stats.bytes += core::mem::size_of_val(values);
        if let Some(log) = self.log.as_mut() {
            log.push(MessageRecord {
                round: message.round,
                sender: message.sender,
                receiver: message.receiver,
                payload_norm: math::norm2(values),
                payload: self.log_payloads.then(|| values.to_vec()),
            });
        }
        self.pending.push(message);
        Ok(())
    }

    fn deliver(&mut self) -> Vec<Message> {
        core::mem::take(&mut self.pending)
    }

    fn stats(&self) -> MessageStats {
        self.stats
    }
}

/// A node of the empirical graph acting on its own state only.
#[derive(Debug, Clone)]
pub struct NodeAgent<'a> {
    pub id: usize,
    pub w: Vec<f64>,
    pub tau: f64,
    /// Present exactly for labeled nodes.
    data: Option<&'a LocalDataset>,
    incident: Vec<Incidence>,
}

impl NodeAgent<'_> {
    pub fn is_labeled(&self) -> bool {
        self.data.is_some()
    }

    pub fn incident(&self) -> &[Incidence] {
        &self.incident
    }
}

/// An edge `(head, tail)`, `head < tail`, owning the dual `u(e)`.
#[derive(Debug, Clone)]
pub struct EdgeAgent {
    pub id: usize,
    pub head: usize,
    pub tail: usize,
    pub u: Vec<f64>,
    pub sigma: f64,
    pub weight: f64,
    /// `λ A_e`.
    pub bound: f64,
    /// Extrapolated endpoint weights received in the last round.
    pub last_head: Vec<f64>,
    pub last_tail: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub messages: usize,
    pub max_prox_residual: f64,
    pub soft_failures: usize,
}

/// All agents of one problem instance.
#[derive(Debug, Clone)]
pub struct Network<'a> {
    nodes: Vec<NodeAgent<'a>>,
    edges: Vec<EdgeAgent>,
    loss: &'a LossModel,
    dim: usize,
    round: usize,
}

impl<'a> Network<'a> {
    /// Spawns agents with `w = 0`, `u = 0` and the problem's preconditioners.
    pub fn new(problem: &PrimalDual<'a>) -> Self {
        let ds = problem.dataset();
        let graph = ds.graph();
        let dim = ds.n_features();
        let precond = problem.preconditioners();
        let nodes = (0..graph.node_count())
            .map(|i| NodeAgent {
                id: i,
                w: alloc::vec![0.0; dim],
                tau: precond.tau[i],
                data: problem.is_labeled(i).then(|| ds.node(i)),
                incident: graph.incident(i).map(<[Incidence]>::to_vec).unwrap_or_default(),
            })
            .collect();
        let edges = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| EdgeAgent {
                id: e,
                head: edge.head,
                tail: edge.tail,
                u: alloc::vec![0.0; dim],
                sigma: precond.sigma[e],
                weight: edge.weight,
                bound: problem.lambda() * edge.weight,
                last_head: alloc::vec![0.0; dim],
                last_tail: alloc::vec![0.0; dim],
            })
            .collect();
        Self {
            nodes,
            edges,
            loss: problem.loss(),
            dim,
            round: 0,
        }
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn nodes(&self) -> &[NodeAgent<'a>] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeAgent] {
        &self.edges
    }

    /// Current global primal state, gathered from the node agents.
    pub fn weights(&self) -> NodeSignal {
        let blocks: Vec<&[f64]> = self.nodes.iter().map(|n| n.w.as_slice()).collect();
        NodeSignal::from_blocks(self.dim, &blocks).expect("agents share the feature dimension")
    }

    /// Current global dual state, gathered from the edge agents.
    pub fn duals(&self) -> EdgeSignal {
        let blocks: Vec<&[f64]> = self.edges.iter().map(|e| e.u.as_slice()).collect();
        EdgeSignal::from_blocks(self.dim, &blocks).expect("agents share the feature dimension")
    }

    /// Executes one synchronous round (both half-rounds).
    pub fn run_round<T: Transport + ?Sized>(&mut self, transport: &mut T) -> Result<RoundReport> {
        let round = self.round + 1;
        let before = transport.stats().messages;

        // Half-round A: duals to nodes.
        for edge in &self.edges {
            transport.send(Message {
                sender: AgentId::Edge(edge.id),
                receiver: AgentId::Node(edge.head),
                round,
                payload: Payload::Dual(edge.u.clone()),
            })?;
            transport.send(Message {
                sender: AgentId::Edge(edge.id),
                receiver: AgentId::Node(edge.tail),
                round,
                payload: Payload::Dual(edge.u.iter().map(|x| -x).collect()),
            })?;
        }
        let mut node_inbox = route(transport.deliver(), self.nodes.len(), round, |id| match id {
            AgentId::Node(i) => Some(i),
            AgentId::Edge(_) => None,
        })?;

        let mut max_prox_residual: f64 = 0.0;
        let mut soft_failures = 0;
        let mut extrapolated = Vec::with_capacity(self.nodes.len());
        for node in &mut self.nodes {
            let inbox = &mut node_inbox[node.id];
            let mut sum = alloc::vec![0.0; self.dim];
            for inc in &node.incident {
                let payload = take_from(inbox, AgentId::Edge(inc.edge), AgentId::Node(node.id), round)?;
                let Payload::Dual(contribution) = payload else {
                    return Err(unexpected(AgentId::Edge(inc.edge), AgentId::Node(node.id), round));
                };
                for (s, c) in sum.iter_mut().zip(&contribution) {
                    *s += c;
                }
            }
            if let Some(extra) = inbox.first() {
                return Err(unexpected(extra.sender, AgentId::Node(node.id), round));
            }
            let (next, report) = node_update(self.loss, node.data, &node.w, &sum, node.tau)?;
            if let Some(report) = report {
                max_prox_residual = max_prox_residual.max(report.residual);
                soft_failures += usize::from(!report.converged);
            }
            extrapolated.push(extrapolate(&next, &node.w));
            node.w = next;
        }

        // Half-round B: extrapolated weights to edges.
        for node in &self.nodes {
            for inc in &node.incident {
                transport.send(Message {
                    sender: AgentId::Node(node.id),
                    receiver: AgentId::Edge(inc.edge),
                    round,
                    payload: Payload::Extrapolated(extrapolated[node.id].clone()),
                })?;
            }
        }
        let mut edge_inbox = route(transport.deliver(), self.edges.len(), round, |id| match id {
            AgentId::Edge(e) => Some(e),
            AgentId::Node(_) => None,
        })?;
        for edge in &mut self.edges {
            let inbox = &mut edge_inbox[edge.id];
            let me = AgentId::Edge(edge.id);
            let Payload::Extrapolated(head) = take_from(inbox, AgentId::Node(edge.head), me, round)? else {
                return Err(unexpected(AgentId::Node(edge.head), me, round));
            };
            let Payload::Extrapolated(tail) = take_from(inbox, AgentId::Node(edge.tail), me, round)? else {
                return Err(unexpected(AgentId::Node(edge.tail), me, round));
            };
            if let Some(extra) = inbox.first() {
                return Err(unexpected(extra.sender, me, round));
            }
            edge.u = edge_update(&edge.u, edge.sigma, &head, &tail, edge.bound);
            edge.last_head = head;
            edge.last_tail = tail;
        }

        self.round = round;
        Ok(RoundReport {
            round,
            messages: transport.stats().messages - before,
            max_prox_residual,
            soft_failures,
        })
    }
}

/// Sorts delivered messages into per-receiver inboxes, keeping arrival order.
fn route(
    messages: Vec<Message>,
    receivers: usize,
    round: usize,
    index: impl Fn(AgentId) -> Option<usize>,
) -> Result<Vec<Vec<Message>>> {
    let mut inboxes: Vec<Vec<Message>> = (0..receivers).map(|_| Vec::new()).collect();
    for message in messages {
        match index(message.receiver) {
            Some(r) if r < receivers => inboxes[r].push(message),
            _ => return Err(unexpected(message.sender, message.receiver, round)),
        }
    }
    Ok(inboxes)
}

fn take_from(inbox: &mut Vec<Message>, sender: AgentId, receiver: AgentId, round: usize) -> Result<Payload> {
    match inbox.iter().position(|m| m.sender == sender && m.round == round) {
        Some(p) => Ok(inbox.remove(p).payload),
        None => Err(Error::Protocol {
            channel: format!("{sender} -> {receiver}"),
            round,
            detail: "expected message not received".into(),
        }),
    }
}

fn unexpected(sender: AgentId, receiver: AgentId, round: usize) -> Error {
    Error::Protocol {
        channel: format!("{sender} -> {receiver}"),
        round,
        detail: "unexpected message".into(),
    }
}

/// Final state of a message-passing run.
#[derive(Debug, Clone)]
pub struct DistributedOutcome {
    pub weights: NodeSignal,
    pub duals: EdgeSignal,
    pub rounds: usize,
    pub stats: MessageStats,
    pub soft_failures: usize,
    pub max_dual_excess: f64,
    pub trace: Vec<TraceRecord>,
    pub stop_reason: StopReason,
}

/// Runs the solver as message passing with a fresh in-process transport.
pub fn run_distributed(ds: &NetworkedDataset, loss: &LossModel, config: &SolverConfig) -> Result<DistributedOutcome> {
    run_distributed_with(ds, loss, config, &mut InProcessTransport::new())
}

/// As [`run_distributed`], over a caller-supplied transport.
///
/// The stopping test and the trace are computed by an observer that gathers
/// the agents' states after each round; agents never see them.
pub fn run_distributed_with<T: Transport + ?Sized>(
    ds: &NetworkedDataset,
    loss: &LossModel,
    config: &SolverConfig,
    transport: &mut T,
) -> Result<DistributedOutcome> {
    config.validate()?;
    let problem = PrimalDual::new(ds, loss, config.lambda)?;
    let mut network = Network::new(&problem);
    let mut observed: SolverState = problem.initial_state();
    let mut stop_reason = StopReason::IterationLimit;
    let start = transport.stats();
    while network.round() < config.max_iterations {
        let report = network.run_round(transport)?;
        let summary = problem.commit(
            &mut observed,
            network.weights(),
            network.duals(),
            report.max_prox_residual,
            report.soft_failures,
        );
        let stop = config.stop_tolerance > 0.0 && summary.relative_change <= config.stop_tolerance;
        if should_trace(config, observed.iteration, stop) {
            let record = problem.record(&observed, &summary)?;
            observed.trace.push(record);
        }
        if stop {
            stop_reason = StopReason::Converged;
            break;
        }
    }
    let end = transport.stats();
    Ok(DistributedOutcome {
        weights: observed.w,
        duals: observed.u,
        rounds: network.round(),
        stats: MessageStats {
            messages: end.messages - start.messages,
            bytes: end.bytes - start.bytes,
        },
        soft_failures: observed.soft_failures,
        max_dual_excess: observed.max_dual_excess,
        trace: observed.trace,
        stop_reason,
    })
}
