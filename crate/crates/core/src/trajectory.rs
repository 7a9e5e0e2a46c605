//! Hypothetical overlays and plausible-trajectory inference.
//!
//! A trace record tells the adversary that a message entered an honest
//! segment at one neighbor and left it at another. To reason about what
//! happened in between, the adversary builds a hypothetical overlay: its
//! known nodes plus chains of dummy nodes standing in for arbitrarily many
//! unknown participants, over an edge relation that admits every link it
//! cannot rule out. A plausible trajectory is any node sequence through that
//! overlay which is consistent with the record and with greedy routing.
//!
//! A link (u, v) is proven only when every plausible trajectory routes u
//! directly into v. The library enumerates trajectories by pruned
//! depth-first search; an independent brute-force oracle re-derives the same
//! sets on small fixtures to guard the pruning logic.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;
use core::ops::ControlFlow;

use crate::embedding::Coordinate;
use crate::graph::NodeId;
use crate::knowledge::{KnowledgeBase, KnowledgeError, KnownNodeId, NodeClass};
use crate::routing::{tree_distance, TraceRecord};

/// Default cap on enumerated trajectories per trace record.
pub const DEFAULT_TRAJECTORY_LIMIT: usize = 1_000_000;

/// Largest hypothetical overlay the brute-force oracle accepts.
pub const ORACLE_NODE_LIMIT: usize = 20;

/// Errors raised by hypothetical-overlay construction and trajectory search.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrajectoryError {
    /// No coordinate has been observed, so the dummy depth is undefined.
    #[error("knowledge base holds no coordinates; hypothetical overlay undefined")]
    NoCoordinates,
    /// A trace node has no identified counterpart in the knowledge base.
    #[error("trace node {0} is not an identified known node")]
    UnknownTraceNode(NodeId),
    /// A trace node's coordinate was never observed.
    #[error("trace node {0} has no observed coordinate")]
    UncoordinatedTraceNode(NodeId),
    /// A trace entry or exit is not a malicious member.
    #[error("trace endpoint {0} is not malicious")]
    EndpointNotMalicious(NodeId),
    /// A trace segment endpoint is malicious.
    #[error("trace segment node {0} is malicious")]
    SegmentNodeMalicious(NodeId),
    /// Enumeration hit the result cap before finishing.
    #[error("trajectory enumeration truncated at {limit} results")]
    Truncated { limit: usize },
    /// A consistent trace must admit at least one trajectory.
    #[error("no plausible trajectory exists for the trace")]
    NoPlausibleTrajectories,
    /// The brute-force oracle only handles small overlays.
    #[error("oracle limited to {limit} hypothetical nodes, got {nodes}")]
    OracleFixtureTooLarge { nodes: usize, limit: usize },
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

/// Identifier of a dummy node within one hypothetical overlay.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct DummyId(u32);

impl DummyId {
    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

/// A node of the hypothetical overlay: either a known node or a dummy
/// standing in for unknown participants below a known one.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum HypoNode {
    Known(KnownNodeId),
    Dummy(DummyId),
}

/// The adversary's model of what the overlay could look like: every known
/// coordinate-bearing node, dummy chains for potential unknown participants,
/// and an implicit edge relation admitting all links not ruled out.
///
/// Immutable once built; snapshots the knowledge it was derived from, so
/// trajectory queries over one overlay are pure and parallelizable.
#[derive(Clone, Debug)]
pub struct HypotheticalOverlay {
    coords: BTreeMap<HypoNode, Coordinate>,
    chains: BTreeMap<KnownNodeId, Vec<DummyId>>,
    malicious: BTreeSet<KnownNodeId>,
    links: BTreeSet<(KnownNodeId, KnownNodeId)>,
    adjacency: BTreeMap<KnownNodeId, Vec<KnownNodeId>>,
    absent: BTreeSet<(KnownNodeId, KnownNodeId)>,
    longest_observed: usize,
}

/// Builds the hypothetical overlay for the current knowledge: copy the known
/// view, then below every non-malicious coordinate-bearing node of depth l
/// hang a chain of l_max − l + 1 dummies, where l_max is the longest
/// observed coordinate. Dummy elements are sentinels outside the observed
/// element range, one fresh coordinate per level. Unknown nodes cannot hang
/// below malicious nodes (members know their own neighbors), and any message
/// that may have passed through unknown nodes has a counterpart route
/// through dummies.
pub fn build_hypothetical_overlay(
    kb: &KnowledgeBase,
) -> Result<HypotheticalOverlay, TrajectoryError> {
    let mut coords: BTreeMap<HypoNode, Coordinate> = BTreeMap::new();
    let mut malicious = BTreeSet::new();
    for id in kb.node_ids() {
        if kb.class(id)? == NodeClass::Malicious {
            malicious.insert(id);
        }
        if let Some(c) = kb.coordinate(id)? {
            coords.insert(HypoNode::Known(id), c.clone());
        }
    }
    if coords.is_empty() {
        return Err(TrajectoryError::NoCoordinates);
    }
    let longest_observed = coords
        .values()
        .map(Coordinate::len)
        .max()
        .expect("non-empty");
    // Sentinel elements: strictly outside every observed element, so a dummy
    // coordinate never collides with or extends an observed one unexpectedly.
    let observed_elements: BTreeSet<u128> = coords
        .values()
        .flat_map(|c| c.elements().iter().copied())
        .collect();
    let mut next_sentinel = observed_elements
        .last()
        .map(|m| m.wrapping_add(1))
        .unwrap_or(0);
    let mut fresh_sentinel = || {
        while observed_elements.contains(&next_sentinel) {
            next_sentinel = next_sentinel.wrapping_add(1);
        }
        let s = next_sentinel;
        next_sentinel = next_sentinel.wrapping_add(1);
        s
    };
    let mut chains: BTreeMap<KnownNodeId, Vec<DummyId>> = BTreeMap::new();
    let mut dummy_count = 0u32;
    let hosts: Vec<(KnownNodeId, Coordinate)> = coords
        .iter()
        .filter_map(|(n, c)| match n {
            HypoNode::Known(id) if !malicious.contains(id) => Some((*id, c.clone())),
            _ => None,
        })
        .collect();
    let mut dummy_entries = Vec::new();
    for (host, base) in hosts {
        let depth = longest_observed - base.len() + 1;
        let mut chain = Vec::with_capacity(depth);
        let mut coordinate = base;
        for _ in 0..depth {
            coordinate = coordinate.child(fresh_sentinel());
            let id = DummyId(dummy_count);
            dummy_count += 1;
            chain.push(id);
            dummy_entries.push((HypoNode::Dummy(id), coordinate.clone()));
        }
        chains.insert(host, chain);
    }
    coords.extend(dummy_entries);
    let mut links = BTreeSet::new();
    let mut adjacency: BTreeMap<KnownNodeId, Vec<KnownNodeId>> = BTreeMap::new();
    for ((a, b), _) in kb.links() {
        links.insert((a, b));
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }
    Ok(HypotheticalOverlay {
        coords,
        chains,
        malicious,
        links,
        adjacency,
        absent: kb.absent_pairs().collect(),
        longest_observed,
    })
}

impl HypotheticalOverlay {
    /// Coordinate-bearing nodes: every dummy plus each known node with an
    /// observed coordinate. Only these can appear in trajectories.
    pub fn nodes(&self) -> impl Iterator<Item = HypoNode> + '_ {
        self.coords.keys().copied()
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn coordinate(&self, n: HypoNode) -> Option<&Coordinate> {
        self.coords.get(&n)
    }

    /// Length of the longest observed coordinate (the dummy-depth anchor).
    pub fn longest_observed_length(&self) -> usize {
        self.longest_observed
    }

    /// Dummy chain below a known node, shallowest first.
    pub fn dummy_chain(&self, host: KnownNodeId) -> &[DummyId] {
        self.chains.get(&host).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_malicious(&self, n: HypoNode) -> bool {
        match n {
            HypoNode::Known(id) => self.malicious.contains(&id),
            HypoNode::Dummy(_) => false,
        }
    }

    /// The hypothetical edge relation: all confirmed links, plus every pair
    /// of distinct non-malicious nodes not known to be unlinked. Dummies are
    /// never malicious and never named in exclusions.
    pub fn connects(&self, a: HypoNode, b: HypoNode) -> bool {
        if a == b {
            return false;
        }
        match (a, b) {
            (HypoNode::Known(x), HypoNode::Known(y)) => {
                let pair = (x.min(y), x.max(y));
                self.links.contains(&pair)
                    || (!self.malicious.contains(&x)
                        && !self.malicious.contains(&y)
                        && !self.absent.contains(&pair))
            }
            _ => !self.is_malicious(a) && !self.is_malicious(b),
        }
    }

    /// Confirmed-link neighbors of a known node (its observed overlay, used
    /// for the greedy-consistency bound).
    pub fn confirmed_neighbors(&self, id: KnownNodeId) -> &[KnownNodeId] {
        self.adjacency.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Renders a trajectory as `a->b->c`; known nodes by id, dummies as
    /// `D:<coordinate>`.
    pub fn render_trajectory(&self, trajectory: &[HypoNode]) -> String {
        let mut out = String::new();
        for (i, n) in trajectory.iter().enumerate() {
            if i > 0 {
                out.push_str("->");
            }
            match n {
                HypoNode::Known(id) => {
                    let _ = write!(out, "{id}");
                }
                HypoNode::Dummy(_) => {
                    let _ = write!(
                        out,
                        "D:{}",
                        self.coords.get(n).expect("dummies always have coordinates")
                    );
                }
            }
        }
        out
    }
}

/// Trace endpoints resolved to known nodes with coordinates.
struct ResolvedTrace {
    entry: KnownNodeId,
    first: KnownNodeId,
    last: KnownNodeId,
    exit: KnownNodeId,
}

fn resolve_trace(
    h: &HypotheticalOverlay,
    kb: &KnowledgeBase,
    trace: &TraceRecord,
) -> Result<ResolvedTrace, TrajectoryError> {
    let lookup = |v: NodeId| -> Result<KnownNodeId, TrajectoryError> {
        let id = kb
            .node_by_binding(v)
            .ok_or(TrajectoryError::UnknownTraceNode(v))?;
        if h.coordinate(HypoNode::Known(id)).is_none() {
            return Err(TrajectoryError::UncoordinatedTraceNode(v));
        }
        Ok(id)
    };
    let entry = lookup(trace.entry)?;
    let exit = lookup(trace.exit)?;
    for (overlay, id) in [(trace.entry, entry), (trace.exit, exit)] {
        if kb.class(id)? != NodeClass::Malicious {
            return Err(TrajectoryError::EndpointNotMalicious(overlay));
        }
    }
    let first = lookup(trace.segment_first)?;
    let last = lookup(trace.segment_last)?;
    for (overlay, id) in [(trace.segment_first, first), (trace.segment_last, last)] {
        if kb.class(id)? == NodeClass::Malicious {
            return Err(TrajectoryError::SegmentNodeMalicious(overlay));
        }
    }
    Ok(ResolvedTrace {
        entry,
        first,
        last,
        exit,
    })
}

/// Streams every plausible trajectory for `trace` towards `target` into
/// `visit`, in lexicographic node order. Returns whether the enumeration ran
/// to completion (`false` if the visitor broke off early).
///
/// A sequence qualifies when it starts with the trace's entry pair, ends
/// with its exit pair, keeps interior nodes non-malicious, steps only along
/// hypothetical edges, strictly decreases the tree distance to the target at
/// every hop, and never hops farther than the best confirmed neighbor of the
/// current node would allow. The strict decrease bounds the search depth, so
/// enumeration always terminates.
pub fn for_each_plausible_trajectory(
    h: &HypotheticalOverlay,
    kb: &KnowledgeBase,
    trace: &TraceRecord,
    target: &Coordinate,
    mut visit: impl FnMut(&[HypoNode]) -> ControlFlow<()>,
) -> Result<bool, TrajectoryError> {
    let rt = resolve_trace(h, kb, trace)?;
    let distance: BTreeMap<HypoNode, usize> = h
        .coords
        .iter()
        .map(|(&n, c)| (n, tree_distance(c, target)))
        .collect();
    // Greedy-consistency bound per node: the closest distance among its
    // confirmed neighbors. A forwarder never picks a hop farther than that.
    // Coordinate-less neighbors contribute nothing; dummies have no
    // confirmed links, so their bound is vacuous.
    let bound: BTreeMap<HypoNode, usize> = h
        .coords
        .keys()
        .map(|&n| {
            let b = match n {
                HypoNode::Known(id) => h
                    .confirmed_neighbors(id)
                    .iter()
                    .filter_map(|&u| distance.get(&HypoNode::Known(u)).copied())
                    .min()
                    .unwrap_or(usize::MAX),
                HypoNode::Dummy(_) => usize::MAX,
            };
            (n, b)
        })
        .collect();
    let candidates: Vec<HypoNode> = distance.keys().copied().collect();
    let (entry, first) = (HypoNode::Known(rt.entry), HypoNode::Known(rt.first));
    let (last, exit) = (HypoNode::Known(rt.last), HypoNode::Known(rt.exit));
    let admissible = |from: HypoNode, to: HypoNode| {
        distance[&to] < distance[&from] && distance[&to] <= bound[&from] && h.connects(from, to)
    };
    if !admissible(entry, first) {
        return Ok(true);
    }
    // Depth-first extension. The last segment node can only sit directly
    // before the exit, so reaching it forces the close; strictly decreasing
    // distances make revisits impossible without an explicit check.
    struct Search<'a, V> {
        h: &'a HypotheticalOverlay,
        candidates: &'a [HypoNode],
        last: HypoNode,
        exit: HypoNode,
        visit: V,
    }
    impl<V: FnMut(&[HypoNode]) -> ControlFlow<()>> Search<'_, V> {
        fn extend(
            &mut self,
            path: &mut Vec<HypoNode>,
            admissible: &impl Fn(HypoNode, HypoNode) -> bool,
        ) -> ControlFlow<()> {
            let v = *path.last().expect("path starts non-empty");
            if v == self.last {
                if admissible(v, self.exit) {
                    path.push(self.exit);
                    let flow = (self.visit)(path);
                    path.pop();
                    flow?;
                }
                return ControlFlow::Continue(());
            }
            for &w in self.candidates {
                if !self.h.is_malicious(w) && admissible(v, w) {
                    debug_assert!(!path.contains(&w), "strict decrease forbids revisits");
                    path.push(w);
                    let flow = self.extend(path, admissible);
                    path.pop();
                    flow?;
                }
            }
            ControlFlow::Continue(())
        }
    }
    let mut search = Search {
        h,
        candidates: &candidates,
        last,
        exit,
        visit: &mut visit,
    };
    let mut path = vec![entry, first];
    Ok(search.extend(&mut path, &admissible).is_continue())
}

/// The plausible trajectories for one trace record, capped at `limit`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrajectorySet {
    pub trajectories: BTreeSet<Vec<HypoNode>>,
    /// True when the cap cut enumeration short; the set is then a strict
    /// subset of the plausible trajectories.
    pub truncated: bool,
}

/// Collects all plausible trajectories for `trace` towards `target`, up to
/// `limit` results (truncation is flagged, never silent).
pub fn enumerate_plausible_trajectories(
    h: &HypotheticalOverlay,
    kb: &KnowledgeBase,
    trace: &TraceRecord,
    target: &Coordinate,
    limit: usize,
) -> Result<TrajectorySet, TrajectoryError> {
    let mut trajectories = BTreeSet::new();
    let completed = for_each_plausible_trajectory(h, kb, trace, target, |t| {
        if trajectories.len() >= limit {
            return ControlFlow::Break(());
        }
        trajectories.insert(t.to_vec());
        ControlFlow::Continue(())
    })?;
    Ok(TrajectorySet {
        trajectories,
        truncated: !completed,
    })
}

/// Does this trace prove the link (u, v)? True exactly when every plausible
/// trajectory routes u directly into v.
///
/// Streams trajectories and stops at the first counterexample. A trace with
/// no plausible trajectory is inconsistent (simulator bug) and an error, as
/// is hitting `limit` before a conclusive answer.
pub fn proves_link_existence(
    h: &HypotheticalOverlay,
    kb: &KnowledgeBase,
    trace: &TraceRecord,
    target: &Coordinate,
    u: KnownNodeId,
    v: KnownNodeId,
    limit: usize,
) -> Result<bool, TrajectoryError> {
    let (needle_a, needle_b) = (HypoNode::Known(u), HypoNode::Known(v));
    let mut seen = 0usize;
    let mut all_contain = true;
    let completed = for_each_plausible_trajectory(h, kb, trace, target, |t| {
        seen += 1;
        let contains = t.windows(2).any(|w| w[0] == needle_a && w[1] == needle_b);
        if !contains {
            all_contain = false;
            return ControlFlow::Break(());
        }
        if seen >= limit {
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    })?;
    if !all_contain {
        return Ok(false);
    }
    if !completed {
        return Err(TrajectoryError::Truncated { limit });
    }
    if seen == 0 {
        return Err(TrajectoryError::NoPlausibleTrajectories);
    }
    Ok(true)
}

/// All consecutive pairs shared by every plausible trajectory of the trace:
/// the links this trace proves. Always contains the entry and exit pairs.
pub fn proven_consecutive_pairs(
    h: &HypotheticalOverlay,
    kb: &KnowledgeBase,
    trace: &TraceRecord,
    target: &Coordinate,
    limit: usize,
) -> Result<BTreeSet<(HypoNode, HypoNode)>, TrajectoryError> {
    let mut intersection: Option<BTreeSet<(HypoNode, HypoNode)>> = None;
    let mut seen = 0usize;
    let completed = for_each_plausible_trajectory(h, kb, trace, target, |t| {
        seen += 1;
        let pairs: BTreeSet<(HypoNode, HypoNode)> = t.windows(2).map(|w| (w[0], w[1])).collect();
        intersection = Some(match intersection.take() {
            None => pairs,
            Some(acc) => &acc & &pairs,
        });
        if seen >= limit {
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    })?;
    if !completed {
        return Err(TrajectoryError::Truncated { limit });
    }
    intersection.ok_or(TrajectoryError::NoPlausibleTrajectories)
}

/// Independent re-check of the five plausibility conditions on a candidate
/// sequence. Shares no search logic with the enumerator; used by the oracle
/// and by completeness tests.
pub fn satisfies_plausibility_conditions(
    h: &HypotheticalOverlay,
    kb: &KnowledgeBase,
    trace: &TraceRecord,
    target: &Coordinate,
    candidate: &[HypoNode],
) -> Result<bool, TrajectoryError> {
    let rt = resolve_trace(h, kb, trace)?;
    let n = candidate.len();
    if n < 3 {
        return Ok(false);
    }
    // Condition 1: endpoint pattern entry, first .. last, exit.
    if candidate[0] != HypoNode::Known(rt.entry)
        || candidate[1] != HypoNode::Known(rt.first)
        || candidate[n - 2] != HypoNode::Known(rt.last)
        || candidate[n - 1] != HypoNode::Known(rt.exit)
    {
        return Ok(false);
    }
    // Condition 2: interior nodes are non-malicious.
    if candidate[1..n - 1].iter().any(|&v| h.is_malicious(v)) {
        return Ok(false);
    }
    // All nodes need coordinates to route at all.
    let Some(dists) = candidate
        .iter()
        .map(|&v| h.coordinate(v).map(|c| tree_distance(c, target)))
        .collect::<Option<Vec<usize>>>()
    else {
        return Ok(false);
    };
    // Condition 3: consecutive nodes are hypothetically connected.
    if candidate.windows(2).any(|w| !h.connects(w[0], w[1])) {
        return Ok(false);
    }
    // Condition 4: strictly decreasing distance to the target.
    if dists.windows(2).any(|w| w[1] >= w[0]) {
        return Ok(false);
    }
    // Condition 5: no hop beats the best confirmed neighbor of its origin.
    for i in 0..n - 1 {
        let best = match candidate[i] {
            HypoNode::Known(id) => h
                .confirmed_neighbors(id)
                .iter()
                .filter_map(|&u| h.coordinate(HypoNode::Known(u)))
                .map(|c| tree_distance(c, target))
                .min()
                .unwrap_or(usize::MAX),
            HypoNode::Dummy(_) => usize::MAX,
        };
        if dists[i + 1] > best {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exhaustive reference enumeration for small fixtures: generates every
/// simple sequence from the trace entry up to the depth bound implied by
/// strict distance decrease, then filters with
/// [`satisfies_plausibility_conditions`]. No condition is used for pruning;
/// the only generation limits are provable supersets of the conditions
/// (sequences start at the entry, end at the first occurrence of the exit,
/// and cannot be longer than the entry distance plus one).
pub fn brute_force_trajectory_oracle(
    h: &HypotheticalOverlay,
    kb: &KnowledgeBase,
    trace: &TraceRecord,
    target: &Coordinate,
) -> Result<BTreeSet<Vec<HypoNode>>, TrajectoryError> {
    if h.node_count() > ORACLE_NODE_LIMIT {
        return Err(TrajectoryError::OracleFixtureTooLarge {
            nodes: h.node_count(),
            limit: ORACLE_NODE_LIMIT,
        });
    }
    let rt = resolve_trace(h, kb, trace)?;
    let entry = HypoNode::Known(rt.entry);
    let exit = HypoNode::Known(rt.exit);
    let entry_coord = h.coordinate(entry).expect("resolved");
    let max_len = tree_distance(entry_coord, target) + 1;
    let nodes: Vec<HypoNode> = h.nodes().collect();
    let mut out = BTreeSet::new();
    let mut seq = vec![entry];
    generate(
        h, kb, trace, target, &nodes, exit, max_len, &mut seq, &mut out,
    )?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn generate(
    h: &HypotheticalOverlay,
    kb: &KnowledgeBase,
    trace: &TraceRecord,
    target: &Coordinate,
    nodes: &[HypoNode],
    exit: HypoNode,
    max_len: usize,
    seq: &mut Vec<HypoNode>,
    out: &mut BTreeSet<Vec<HypoNode>>,
) -> Result<(), TrajectoryError> {
    if *seq.last().expect("seq starts non-empty") == exit {
        // A valid trajectory contains the exit exactly once, at its end;
        // extending past it cannot produce further candidates.
        if satisfies_plausibility_conditions(h, kb, trace, target, seq)? {
            out.insert(seq.clone());
        }
        return Ok(());
    }
    if seq.len() == max_len {
        return Ok(());
    }
    for &w in nodes {
        if !seq.contains(&w) {
            seq.push(w);
            generate(h, kb, trace, target, nodes, exit, max_len, seq, out)?;
            seq.pop();
        }
    }
    Ok(())
}
