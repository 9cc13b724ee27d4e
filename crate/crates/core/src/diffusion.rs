//! Node graph, microphone/loudspeaker ownership, combination weights and the
//! synchronous adapt-then-combine iteration.
//!
//! Node `k` only ever sees the ATF rows and desired values of its own
//! microphones ([`LocalData`]); neighbours exchange nothing but their
//! intermediate estimates `ψ`.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::engine::{all_finite, gradient_step, norm, residuals, ControlFilter, NoCount, OpCount, OpCounter};
use crate::error::{Error, Result};
use crate::scene::{AtfMatrix, DesiredField, RowBlock};
use crate::C64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    adjacency: Vec<Vec<bool>>,
    neighborhoods: Vec<Vec<usize>>,
}

impl Topology {
    /// Undirected graph from an edge list; self-loops are implicit.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Topology("need at least one node".into()));
        }
        let mut adjacency = vec![vec![false; n_nodes]; n_nodes];
        for &(a, b) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::Topology(format!(
                    "edge ({a}, {b}) references a node outside 0..{n_nodes}"
                )));
            }
            adjacency[a][b] = true;
            adjacency[b][a] = true;
        }
        for (k, row) in adjacency.iter_mut().enumerate() {
            row[k] = true;
        }
        let neighborhoods: Vec<Vec<usize>> = adjacency
            .iter()
            .map(|row| row.iter().enumerate().filter(|(_, &a)| a).map(|(l, _)| l).collect())
            .collect();
        let top = Topology {
            adjacency,
            neighborhoods,
        };
        if !top.is_connected() {
            return Err(Error::Topology("graph is not connected".into()));
        }
        Ok(top)
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a][b]
    }

    /// `N_k`, sorted, including `k` itself.
    pub fn neighborhood(&self, k: usize) -> &[usize] {
        &self.neighborhoods[k]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_nodes();
        (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.adjacency[a][b])
            .collect()
    }

    fn is_connected(&self) -> bool {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(k) = queue.pop_front() {
            for &l in &self.neighborhoods[k] {
                if !seen[l] {
                    seen[l] = true;
                    queue.push_back(l);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

pub fn ring_topology(n_nodes: usize) -> Result<Topology> {
    if n_nodes < 2 {
        return Err(Error::Topology(format!("a ring needs at least 2 nodes, got {n_nodes}")));
    }
    let edges: Vec<_> = (0..n_nodes).map(|k| (k, (k + 1) % n_nodes)).collect();
    Topology::from_edges(n_nodes, &edges)
}

/// Microphone sets `C_k` and loudspeaker sets `S_k` per node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    mic_sets: Vec<Vec<usize>>,
    speaker_sets: Vec<Vec<usize>>,
}

fn check_cover(sets: &[Vec<usize>], total: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; total];
    for (k, set) in sets.iter().enumerate() {
        for &i in set {
            if i >= total {
                return Err(Error::Partition(format!(
                    "node {k} owns {what} {i}, outside 0..{total}"
                )));
            }
            if seen[i] {
                return Err(Error::Partition(format!("{what} {i} is owned twice")));
            }
            seen[i] = true;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::Partition(format!("{what} {i} is not owned by any node")));
    }
    Ok(())
}

impl Partition {
    pub fn new(
        mic_sets: Vec<Vec<usize>>,
        speaker_sets: Vec<Vec<usize>>,
        n_mics: usize,
        n_speakers: usize,
    ) -> Result<Self> {
        if mic_sets.len() != speaker_sets.len() {
            return Err(Error::Partition(format!(
                "{} microphone sets but {} loudspeaker sets",
                mic_sets.len(),
                speaker_sets.len()
            )));
        }
        if let Some(k) = mic_sets.iter().position(Vec::is_empty) {
            return Err(Error::Partition(format!("node {k} owns no microphones")));
        }
        check_cover(&mic_sets, n_mics, "microphone")?;
        check_cover(&speaker_sets, n_speakers, "loudspeaker")?;
        Ok(Partition {
            mic_sets,
            speaker_sets,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.mic_sets.len()
    }

    pub fn n_mics(&self) -> usize {
        self.mic_sets.iter().map(Vec::len).sum()
    }

    pub fn n_speakers(&self) -> usize {
        self.speaker_sets.iter().map(Vec::len).sum()
    }

    pub fn mics(&self, k: usize) -> &[usize] {
        &self.mic_sets[k]
    }

    pub fn speakers(&self, k: usize) -> &[usize] {
        &self.speaker_sets[k]
    }

    /// Node owning loudspeaker `l`.
    pub fn speaker_owner(&self, l: usize) -> Option<usize> {
        self.speaker_sets.iter().position(|s| s.contains(&l))
    }
}

/// Microphones per node for the 9-node system; nodes 0–3 cover the bright
/// zone, nodes 4–8 the dark zone.
pub const SYSTEM1_MIC_COUNTS: [usize; 9] = [4, 4, 4, 4, 4, 4, 4, 2, 2];

/// Loudspeakers per node for the 4-node system.
pub const SYSTEM2_SPEAKER_COUNTS: [usize; 4] = [3, 2, 2, 2];

const PAPER_BRIGHT: usize = 16;
const PAPER_MICS: usize = 32;
const PAPER_SPEAKERS: usize = 9;

fn contiguous(counts: &[usize]) -> Vec<Vec<usize>> {
    let mut start = 0;
    counts
        .iter()
        .map(|&c| {
            let set = (start..start + c).collect();
            start += c;
            set
        })
        .collect()
}

/// Contiguous microphone assignment on a ring, with every node inside a single zone.
fn zoned_ring(mic_counts: &[usize], speaker_counts: &[usize]) -> Result<(Topology, Partition)> {
    let mic_sets = contiguous(mic_counts);
    for (k, set) in mic_sets.iter().enumerate() {
        if let (Some(&a), Some(&b)) = (set.first(), set.last()) {
            if (a < PAPER_BRIGHT) != (b < PAPER_BRIGHT) {
                return Err(Error::Partition(format!(
                    "node {k} straddles the bright and dark zones"
                )));
            }
        }
    }
    let part = Partition::new(mic_sets, contiguous(speaker_counts), PAPER_MICS, PAPER_SPEAKERS)?;
    Ok((ring_topology(mic_counts.len())?, part))
}

/// 9-node ring, one loudspeaker per node, microphones per `mic_counts`.
pub fn system1_partition_with(mic_counts: &[usize]) -> Result<(Topology, Partition)> {
    if mic_counts.len() != PAPER_SPEAKERS {
        return Err(Error::Partition(format!(
            "system 1 has 9 nodes, got {} microphone counts",
            mic_counts.len()
        )));
    }
    zoned_ring(mic_counts, &[1; PAPER_SPEAKERS])
}

pub fn system1_partition() -> (Topology, Partition) {
    system1_partition_with(&SYSTEM1_MIC_COUNTS).expect("default counts are valid")
}

/// 4-node ring, eight microphones per node, loudspeakers split 3/2/2/2.
pub fn system2_partition() -> (Topology, Partition) {
    zoned_ring(&[8; 4], &SYSTEM2_SPEAKER_COUNTS).expect("fixed layout is valid")
}

/// Explicit per-node description of a custom system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub mics: Vec<usize>,
    pub speakers: Vec<usize>,
    #[serde(default)]
    pub neighbors: Vec<usize>,
}

pub fn custom_system(nodes: &[NodeSpec], n_mics: usize, n_speakers: usize) -> Result<(Topology, Partition)> {
    let n = nodes.len();
    let mut edges = Vec::new();
    for (k, spec) in nodes.iter().enumerate() {
        for &l in &spec.neighbors {
            if l >= n {
                return Err(Error::Topology(format!("node {k} lists unknown neighbour {l}")));
            }
            if l != k && !nodes[l].neighbors.contains(&k) {
                return Err(Error::Topology(format!(
                    "node {k} lists {l} as a neighbour but not vice versa"
                )));
            }
            edges.push((k, l));
        }
    }
    let top = Topology::from_edges(n, &edges)?;
    let part = Partition::new(
        nodes.iter().map(|s| s.mics.clone()).collect(),
        nodes.iter().map(|s| s.speakers.clone()).collect(),
        n_mics,
        n_speakers,
    )?;
    Ok((top, part))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinationRule {
    #[default]
    Uniform,
    Metropolis,
}

/// Left-stochastic weights; `weight(l, k)` is what node `k` gives to `ψ_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CombinationMatrix {
    /// Validates non-negativity, unit column sums and neighbourhood support.
    pub fn new(top: &Topology, entries: Vec<f64>) -> Result<Self> {
        let n = top.n_nodes();
        if entries.len() != n * n {
            return Err(Error::Dimension {
                context: "combination matrix",
                expected: n * n,
                actual: entries.len(),
            });
        }
        let a = CombinationMatrix { n, entries };
        for k in 0..n {
            let mut sum = 0.0;
            for l in 0..n {
                let w = a.weight(l, k);
                if !(w >= 0.0) {
                    return Err(Error::Topology(format!("negative weight a[{l}][{k}] = {w}")));
                }
                if w != 0.0 && !top.adjacent(l, k) {
                    return Err(Error::Topology(format!(
                        "a[{l}][{k}] = {w} but {l} is not a neighbour of {k}"
                    )));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Topology(format!("column {k} sums to {sum}")));
            }
        }
        Ok(a)
    }

    pub fn from_rule(top: &Topology, rule: CombinationRule) -> Self {
        match rule {
            CombinationRule::Uniform => uniform_combination(top),
            CombinationRule::Metropolis => metropolis_combination(top),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn weight(&self, l: usize, k: usize) -> f64 {
        self.entries[l * self.n + k]
    }

    pub fn column_sum(&self, k: usize) -> f64 {
        (0..self.n).map(|l| self.weight(l, k)).sum()
    }

    pub fn row_sum(&self, l: usize) -> f64 {
        (0..self.n).map(|k| self.weight(l, k)).sum()
    }
}

/// `a_lk = 1/|N_k|` for every `l ∈ N_k`.
pub fn uniform_combination(top: &Topology) -> CombinationMatrix {
    let n = top.n_nodes();
    let mut entries = vec![0.0; n * n];
    for k in 0..n {
        let nk = top.neighborhood(k);
        for &l in nk {
            entries[l * n + k] = 1.0 / nk.len() as f64;
        }
    }
    CombinationMatrix { n, entries }
}

/// Metropolis–Hastings weights `a_lk = 1/max(|N_k|, |N_l|)` off the
/// diagonal, remainder on the diagonal. Symmetric, hence doubly stochastic.
pub fn metropolis_combination(top: &Topology) -> CombinationMatrix {
    let n = top.n_nodes();
    let mut entries = vec![0.0; n * n];
    for k in 0..n {
        let mut off = 0.0;
        for &l in top.neighborhood(k) {
            if l != k {
                let w = 1.0 / top.neighborhood(k).len().max(top.neighborhood(l).len()) as f64;
                entries[l * n + k] = w;
                off += w;
            }
        }
        entries[k * n + k] = 1.0 - off;
    }
    CombinationMatrix { n, entries }
}

/// Topology, ownership and weights of one distributed system.
#[derive(Debug, Clone)]
pub struct Network {
    pub topology: Topology,
    pub partition: Partition,
    pub combination: CombinationMatrix,
}

impl Network {
    pub fn new(topology: Topology, partition: Partition, combination: CombinationMatrix) -> Result<Self> {
        let n = topology.n_nodes();
        if partition.n_nodes() != n || combination.n_nodes() != n {
            return Err(Error::Topology(format!(
                "topology has {n} nodes, partition {}, combination matrix {}",
                partition.n_nodes(),
                combination.n_nodes()
            )));
        }
        Ok(Network {
            topology,
            partition,
            combination,
        })
    }

    pub fn with_rule(topology: Topology, partition: Partition, rule: CombinationRule) -> Result<Self> {
        let a = CombinationMatrix::from_rule(&topology, rule);
        Self::new(topology, partition, a)
    }

    /// A single node that owns every microphone and loudspeaker.
    pub fn single_node(n_mics: usize, n_speakers: usize) -> Result<Self> {
        let top = Topology::from_edges(1, &[])?;
        let part = Partition::new(vec![(0..n_mics).collect()], vec![(0..n_speakers).collect()], n_mics, n_speakers)?;
        let a = uniform_combination(&top);
        Self::new(top, part, a)
    }

    pub fn n_nodes(&self) -> usize {
        self.topology.n_nodes()
    }
}

/// The ATF rows and desired values of one node's microphones.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalData {
    rows: Vec<C64>,
    desired: Vec<C64>,
    n_cols: usize,
}

impl LocalData {
    pub fn gather(h: &AtfMatrix, d: &DesiredField, mics: &[usize]) -> Result<Self> {
        if d.len() != h.n_rows() {
            return Err(Error::Dimension {
                context: "desired field length",
                expected: h.n_rows(),
                actual: d.len(),
            });
        }
        Ok(LocalData {
            rows: h.select_rows(mics)?,
            desired: mics.iter().map(|&m| d.values[m]).collect(),
            n_cols: h.n_cols(),
        })
    }

    pub fn n_mics(&self) -> usize {
        self.desired.len()
    }

    fn block(&self) -> RowBlock<'_> {
        RowBlock::new(&self.rows, self.n_cols).expect("rows are whole")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub estimate: ControlFilter,
    pub intermediate: ControlFilter,
    pub step_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub nodes: Vec<NodeState>,
    pub iteration: usize,
}

impl NetworkState {
    /// Every node starts from the zero filter.
    pub fn zeros(step_sizes: &[f64], n_speakers: usize, freq: f64) -> Result<Self> {
        if step_sizes.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one node".into()));
        }
        if let Some(mu) = step_sizes.iter().find(|mu| !(mu.is_finite() && **mu >= 0.0)) {
            return Err(Error::InvalidArgument(format!("invalid node step size {mu}")));
        }
        let zero = ControlFilter::zeros(n_speakers, freq);
        Ok(NetworkState {
            nodes: step_sizes
                .iter()
                .map(|&mu| NodeState {
                    estimate: zero.clone(),
                    intermediate: zero.clone(),
                    step_size: mu,
                })
                .collect(),
            iteration: 0,
        })
    }

    pub fn uniform(n_nodes: usize, step_size: f64, n_speakers: usize, freq: f64) -> Result<Self> {
        Self::zeros(&vec![step_size; n_nodes], n_speakers, freq)
    }

    pub fn estimates(&self) -> impl Iterator<Item = &ControlFilter> {
        self.nodes.iter().map(|n| &n.estimate)
    }
}

/// Local gradient step `ψ_k = g_k − μ_k Σ_{ℓ∈C_k} H(ℓ,:)ᴴ e_ℓ`.
pub fn adapt(node: usize, state: &NodeState, local: &LocalData) -> Result<ControlFilter> {
    adapt_counted(node, state, local, &mut NoCount)
}

pub fn adapt_counted<C: OpCounter>(
    node: usize,
    state: &NodeState,
    local: &LocalData,
    counter: &mut C,
) -> Result<ControlFilter> {
    let g = state.estimate.weights();
    if g.len() != local.n_cols {
        return Err(Error::Dimension {
            context: "node estimate length",
            expected: local.n_cols,
            actual: g.len(),
        });
    }
    let e = residuals(local.block(), g, &local.desired);
    let psi = gradient_step(g, local.block(), &e, state.step_size, counter);
    if !all_finite(&psi) {
        return Err(Error::Divergence {
            algorithm: "dpmd".into(),
            node: Some(node),
            iteration: 0,
        });
    }
    Ok(ControlFilter::from_raw(psi, state.estimate.freq))
}

/// `g_k = Σ_{ℓ∈N_k} a_ℓk ψ_ℓ` from the messages received by node `k`.
///
/// Messages must come from exactly the neighbourhood of `k`; they are
/// summed in neighbourhood order whatever order they arrive in.
pub fn combine(
    node: usize,
    messages: &[(usize, &ControlFilter)],
    top: &Topology,
    a: &CombinationMatrix,
) -> Result<ControlFilter> {
    combine_counted(node, messages, top, a, &mut NoCount)
}

pub fn combine_counted<C: OpCounter>(
    node: usize,
    messages: &[(usize, &ControlFilter)],
    top: &Topology,
    a: &CombinationMatrix,
    counter: &mut C,
) -> Result<ControlFilter> {
    let hood = top.neighborhood(node);
    let senders: BTreeSet<usize> = messages.iter().map(|(l, _)| *l).collect();
    if senders.len() != messages.len() {
        return Err(Error::Protocol {
            node,
            detail: "duplicate neighbour message".into(),
        });
    }
    if let Some(l) = hood.iter().find(|l| !senders.contains(l)) {
        return Err(Error::Protocol {
            node,
            detail: format!("missing message from neighbour {l}"),
        });
    }
    if let Some(l) = senders.iter().find(|l| !hood.contains(l)) {
        return Err(Error::Protocol {
            node,
            detail: format!("message from non-neighbour {l}"),
        });
    }
    let lookup = |l: usize| messages.iter().find(|(s, _)| *s == l).map(|(_, psi)| *psi).unwrap();
    let first = lookup(hood[0]);
    let n_cols = first.len();
    let freq = first.freq;
    let mut out = vec![C64::new(0.0, 0.0); n_cols];
    for (i, &l) in hood.iter().enumerate() {
        let psi = lookup(l);
        if psi.len() != n_cols {
            return Err(Error::Dimension {
                context: "neighbour estimate length",
                expected: n_cols,
                actual: psi.len(),
            });
        }
        let w = a.weight(l, node);
        counter.mul(n_cols as u64);
        if i == 0 {
            for (o, p) in out.iter_mut().zip(psi.weights()) {
                *o = p * w;
            }
        } else {
            counter.add(n_cols as u64);
            for (o, p) in out.iter_mut().zip(psi.weights()) {
                *o += p * w;
            }
        }
    }
    Ok(ControlFilter::from_raw(out, freq))
}

/// One synchronous ATC iteration. Every node adapts from the iteration-`n`
/// state, then every node combines its neighbours' `ψ`.
pub fn dpmd_iteration(
    state: &NetworkState,
    net: &Network,
    h: &AtfMatrix,
    d: &DesiredField,
) -> Result<NetworkState> {
    let mut counts = vec![NoCount; net.n_nodes()];
    dpmd_iteration_counted(state, net, h, d, &mut counts)
}

pub fn dpmd_iteration_counted<C: OpCounter>(
    state: &NetworkState,
    net: &Network,
    h: &AtfMatrix,
    d: &DesiredField,
    counters: &mut [C],
) -> Result<NetworkState> {
    let n = net.n_nodes();
    if state.nodes.len() != n || counters.len() != n {
        return Err(Error::Dimension {
            context: "network state nodes",
            expected: n,
            actual: state.nodes.len(),
        });
    }
    let with_iter = |e: Error| match e {
        Error::Divergence { algorithm, node, .. } => Error::Divergence {
            algorithm,
            node,
            iteration: state.iteration,
        },
        other => other,
    };

    let mut psis = Vec::with_capacity(n);
    for k in 0..n {
        let local = LocalData::gather(h, d, net.partition.mics(k))?;
        psis.push(adapt_counted(k, &state.nodes[k], &local, &mut counters[k]).map_err(with_iter)?);
    }

    let mut nodes = Vec::with_capacity(n);
    for k in 0..n {
        let messages: Vec<(usize, &ControlFilter)> = net
            .topology
            .neighborhood(k)
            .iter()
            .map(|&l| (l, &psis[l]))
            .collect();
        let estimate = combine_counted(k, &messages, &net.topology, &net.combination, &mut counters[k])?;
        nodes.push(NodeState {
            estimate,
            intermediate: psis[k].clone(),
            step_size: state.nodes[k].step_size,
        });
    }
    Ok(NetworkState {
        nodes,
        iteration: state.iteration + 1,
    })
}

/// Per-node operation counts of one ATC iteration.
pub fn count_iteration_ops(net: &Network, h: &AtfMatrix, d: &DesiredField) -> Result<Vec<OpCount>> {
    let state = NetworkState::uniform(net.n_nodes(), 1e-3, h.n_cols(), h.freq())?;
    let mut counts = vec![OpCount::default(); net.n_nodes()];
    dpmd_iteration_counted(&state, net, h, d, &mut counts)?;
    Ok(counts)
}

/// Largest pairwise distance between node estimates.
pub fn disagreement(state: &NetworkState) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in state.nodes.iter().enumerate() {
        for b in &state.nodes[i + 1..] {
            let diff: Vec<C64> = a
                .estimate
                .weights()
                .iter()
                .zip(b.estimate.weights())
                .map(|(x, y)| x - y)
                .collect();
            worst = worst.max(norm(&diff));
        }
    }
    worst
}

/// The filter actually driving the loudspeakers: each loudspeaker takes its
/// weight from the estimate of the node that owns it.
pub fn rendered_filter(state: &NetworkState, part: &Partition) -> ControlFilter {
    let first = &state.nodes[0].estimate;
    let mut w = vec![C64::new(0.0, 0.0); first.len()];
    for (k, node) in state.nodes.iter().enumerate() {
        for &l in part.speakers(k) {
            w[l] = node.estimate.weights()[l];
        }
    }
    ControlFilter::from_raw(w, first.freq)
}

#[cfg(test)]
mod tests;
