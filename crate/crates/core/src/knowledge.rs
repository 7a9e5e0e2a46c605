//! The adversary's knowledge of the overlay.
//!
//! Colluding malicious nodes pool four pieces of state: which participants
//! they know of, which links among those they have confirmed, which links
//! they know to be absent, and which coordinates they have seen. Known nodes
//! split into malicious members, compromised honest neighbors (identifiable,
//! since overlay links require mutual trust), and pseudonymous nodes whose
//! existence is only inferred; the overlay identity behind a pseudonym is
//! unknown.
//!
//! Every observed coordinate is closed under tree-link inference: each
//! non-empty prefix names the parent on the spanning tree, and under
//! enumeration mode a last element n also proves siblings 0..n exist. The
//! pseudonym count after a run measures how many additional participants the
//! adversary can enumerate.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use crate::embedding::{Coordinate, EmbeddingMode};
use crate::graph::{GraphError, NodeId, OverlayGraph};

/// Identifier of a node in the adversary's view. Unrelated to overlay ids;
/// the mapping is only known for malicious and compromised nodes.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct KnownNodeId(u32);

impl KnownNodeId {
    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for KnownNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How the adversary knows a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeClass {
    /// Attacker-controlled member.
    Malicious,
    /// Honest node adjacent to a malicious one; identified through the
    /// mutual-trust link.
    Compromised,
    /// Inferred participant; overlay identity unknown.
    Pseudonymous,
}

impl fmt::Display for NodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeClass::Malicious => "malicious",
            NodeClass::Compromised => "compromised",
            NodeClass::Pseudonymous => "pseudonymous",
        })
    }
}

/// Provenance of a known link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum LinkKind {
    /// Seen directly: both endpoints identified at initialization.
    Observed,
    /// Deduced from coordinate structure: a spanning-tree edge.
    InferredTree,
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkKind::Observed => "observed",
            LinkKind::InferredTree => "inferred-tree",
        })
    }
}

/// Errors raised by knowledge maintenance.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KnowledgeError {
    /// An announcing node is not part of the adversary's view.
    #[error("observer {0} is not a known overlay node")]
    UnknownObserver(NodeId),
    /// A node announced a coordinate that differs from its recorded one.
    /// Impossible in a static embedding; signals a simulator bug.
    #[error("node {node} already bound to coordinate {existing}, now observed as {observed}")]
    BindingConflict {
        node: KnownNodeId,
        existing: Coordinate,
        observed: Coordinate,
    },
    /// Two identified overlay nodes would share one coordinate.
    #[error("coordinate {0} bound to two distinct overlay nodes")]
    CoordinateConflict(Coordinate),
    /// Merging nodes bound to different overlay identities.
    #[error("cannot merge nodes bound to overlay ids {0} and {1}")]
    MergeBindingMismatch(NodeId, NodeId),
    /// Only a pseudonym can merge into an identified node.
    #[error("merge requires a pseudonym and an identified node")]
    MergeNeedsPseudonym,
    /// A link was both confirmed present and declared absent.
    #[error("link ({0}, {1}) is both known present and known absent")]
    Contradiction(KnownNodeId, KnownNodeId),
    /// A merged-away or unknown known-node id was used.
    #[error("known node {0} does not exist")]
    NoSuchNode(KnownNodeId),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct KnownNode {
    class: NodeClass,
    binding: Option<NodeId>,
    coordinate: Option<Coordinate>,
    live: bool,
}

/// Counts of what one observation changed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ObservationReport {
    pub nodes_created: usize,
    pub links_added: usize,
    /// Pseudonyms merged into identified nodes (0 or 1 per observation).
    pub merges: usize,
}

/// The knowledge tuple: known nodes, confirmed links, excluded links and
/// observed coordinates, with the identity mapping where available.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnowledgeBase {
    nodes: Vec<KnownNode>,
    by_binding: BTreeMap<NodeId, KnownNodeId>,
    by_coordinate: BTreeMap<Coordinate, KnownNodeId>,
    links: BTreeMap<(KnownNodeId, KnownNodeId), LinkKind>,
    absent: BTreeSet<(KnownNodeId, KnownNodeId)>,
}

/// Initial knowledge of a malicious collective before any traffic: the
/// members, every honest neighbor (compromised through the trust link), and
/// all overlay edges among those identified nodes. No links are excluded and
/// no coordinates are known yet.
pub fn init_knowledge(
    g: &OverlayGraph,
    malicious: &BTreeSet<NodeId>,
) -> Result<KnowledgeBase, KnowledgeError> {
    let mut kb = KnowledgeBase {
        nodes: Vec::new(),
        by_binding: BTreeMap::new(),
        by_coordinate: BTreeMap::new(),
        links: BTreeMap::new(),
        absent: BTreeSet::new(),
    };
    let compromised = g.neighborhood(malicious)?;
    for &m in malicious {
        kb.create_node(NodeClass::Malicious, Some(m), None);
    }
    for &v in &compromised {
        kb.create_node(NodeClass::Compromised, Some(v), None);
    }
    for (&u, &ku) in &kb.by_binding.clone() {
        for &w in g.neighbors(u) {
            if w > u {
                if let Some(&kw) = kb.by_binding.get(&w) {
                    kb.links.insert(ordered(ku, kw), LinkKind::Observed);
                }
            }
        }
    }
    Ok(kb)
}

fn ordered(a: KnownNodeId, b: KnownNodeId) -> (KnownNodeId, KnownNodeId) {
    (a.min(b), a.max(b))
}

impl KnowledgeBase {
    fn create_node(
        &mut self,
        class: NodeClass,
        binding: Option<NodeId>,
        coordinate: Option<Coordinate>,
    ) -> KnownNodeId {
        debug_assert_eq!(binding.is_none(), class == NodeClass::Pseudonymous);
        let id = KnownNodeId(self.nodes.len() as u32);
        if let Some(b) = binding {
            let previous = self.by_binding.insert(b, id);
            debug_assert!(previous.is_none(), "one known node per overlay id");
        }
        if let Some(c) = &coordinate {
            let previous = self.by_coordinate.insert(c.clone(), id);
            debug_assert!(previous.is_none(), "coordinates are unique");
        }
        self.nodes.push(KnownNode {
            class,
            binding,
            coordinate,
            live: true,
        });
        id
    }

    fn node(&self, id: KnownNodeId) -> Result<&KnownNode, KnowledgeError> {
        self.nodes
            .get(id.index())
            .filter(|n| n.live)
            .ok_or(KnowledgeError::NoSuchNode(id))
    }

    /// Live known nodes in id order.
    pub fn node_ids(&self) -> impl Iterator<Item = KnownNodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.live)
            .map(|(i, _)| KnownNodeId(i as u32))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.live).count()
    }

    pub fn class(&self, id: KnownNodeId) -> Result<NodeClass, KnowledgeError> {
        Ok(self.node(id)?.class)
    }

    /// Overlay identity, known only for malicious and compromised nodes.
    pub fn binding(&self, id: KnownNodeId) -> Result<Option<NodeId>, KnowledgeError> {
        Ok(self.node(id)?.binding)
    }

    pub fn coordinate(&self, id: KnownNodeId) -> Result<Option<&Coordinate>, KnowledgeError> {
        Ok(self.node(id)?.coordinate.as_ref())
    }

    pub fn node_by_coordinate(&self, c: &Coordinate) -> Option<KnownNodeId> {
        self.by_coordinate.get(c).copied()
    }

    pub fn node_by_binding(&self, v: NodeId) -> Option<KnownNodeId> {
        self.by_binding.get(&v).copied()
    }

    /// Confirmed links with their provenance, in id order.
    pub fn links(&self) -> impl Iterator<Item = ((KnownNodeId, KnownNodeId), LinkKind)> + '_ {
        self.links.iter().map(|(&pair, &kind)| (pair, kind))
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn link_kind(&self, a: KnownNodeId, b: KnownNodeId) -> Option<LinkKind> {
        self.links.get(&ordered(a, b)).copied()
    }

    pub fn has_link(&self, a: KnownNodeId, b: KnownNodeId) -> bool {
        self.links.contains_key(&ordered(a, b))
    }

    /// Records that no overlay link exists between two known nodes.
    pub fn declare_absent(&mut self, a: KnownNodeId, b: KnownNodeId) -> Result<(), KnowledgeError> {
        self.node(a)?;
        self.node(b)?;
        let pair = ordered(a, b);
        if self.links.contains_key(&pair) {
            return Err(KnowledgeError::Contradiction(pair.0, pair.1));
        }
        self.absent.insert(pair);
        Ok(())
    }

    pub fn absent_pairs(&self) -> impl Iterator<Item = (KnownNodeId, KnownNodeId)> + '_ {
        self.absent.iter().copied()
    }

    pub fn is_absent(&self, a: KnownNodeId, b: KnownNodeId) -> bool {
        self.absent.contains(&ordered(a, b))
    }

    fn add_link(&mut self, a: KnownNodeId, b: KnownNodeId) -> Result<bool, KnowledgeError> {
        debug_assert_ne!(a, b);
        let pair = ordered(a, b);
        if self.absent.contains(&pair) {
            return Err(KnowledgeError::Contradiction(pair.0, pair.1));
        }
        Ok(self
            .links
            .insert(
                pair,
                *self.links.get(&pair).unwrap_or(&LinkKind::InferredTree),
            )
            .is_none())
    }

    /// Node holding coordinate `c`, created as a pseudonym if unseen.
    fn ensure_node(&mut self, c: &Coordinate, report: &mut ObservationReport) -> KnownNodeId {
        if let Some(&id) = self.by_coordinate.get(c) {
            return id;
        }
        report.nodes_created += 1;
        self.create_node(NodeClass::Pseudonymous, None, Some(c.clone()))
    }

    /// Ingests one coordinate observation and closes it under tree-link
    /// inference.
    ///
    /// `observed` identifies the announcing node (a compromised neighbor
    /// announcing its own coordinate, or a member's self-knowledge); without
    /// it the coordinate is attributed to a pseudonym, as for message
    /// targets. Every non-empty prefix proves a parent node and its tree
    /// link. Enumeration mode additionally proves, for each prefix ending in
    /// element n > 0, sibling nodes with last elements 0..n and their links
    /// to the shared parent; random-mode elements carry no such order, so
    /// sibling inference is skipped. Repeating an observation changes
    /// nothing.
    pub fn observe_coordinate(
        &mut self,
        c: &Coordinate,
        observed: Option<NodeId>,
        mode: EmbeddingMode,
    ) -> Result<ObservationReport, KnowledgeError> {
        let mut report = ObservationReport::default();
        match observed {
            Some(overlay) => {
                let id = self
                    .node_by_binding(overlay)
                    .ok_or(KnowledgeError::UnknownObserver(overlay))?;
                match (
                    &self.nodes[id.index()].coordinate,
                    self.by_coordinate.get(c),
                ) {
                    (Some(existing), _) if existing != c => {
                        return Err(KnowledgeError::BindingConflict {
                            node: id,
                            existing: existing.clone(),
                            observed: c.clone(),
                        })
                    }
                    (Some(_), _) => {}
                    (None, Some(&holder)) => {
                        // The coordinate was previously inferred: identify
                        // that pseudonym with the announcer.
                        self.merge(id, holder)?;
                        report.merges += 1;
                    }
                    (None, None) => {
                        self.nodes[id.index()].coordinate = Some(c.clone());
                        self.by_coordinate.insert(c.clone(), id);
                    }
                }
            }
            None => {
                self.ensure_node(c, &mut report);
            }
        }
        // Parent chain: every non-empty prefix implies its parent exists and
        // is tree-linked to it.
        for len in (1..=c.len()).rev() {
            let child = self.ensure_node(&c.prefix(len), &mut report);
            let parent = self.ensure_node(&c.prefix(len - 1), &mut report);
            if self.add_link(child, parent)? {
                report.links_added += 1;
            }
        }
        if mode == EmbeddingMode::Enumeration {
            // Positional elements: a child at position n proves positions
            // 0..n under the same parent.
            for len in 1..=c.len() {
                let prefix = c.prefix(len);
                let parent = self.ensure_node(&prefix.parent().expect("len >= 1"), &mut report);
                for lower in 0..prefix.last().expect("len >= 1") {
                    let sibling_coord = prefix.parent().expect("len >= 1").child(lower);
                    let sibling = self.ensure_node(&sibling_coord, &mut report);
                    if self.add_link(sibling, parent)? {
                        report.links_added += 1;
                    }
                }
            }
        }
        Ok(report)
    }

    /// Identifies a pseudonym with an identified node (order-insensitive):
    /// the pseudonym's coordinate and links transfer, the pseudonym id dies.
    /// Returns the surviving id.
    pub fn merge_coordinate_bindings(
        &mut self,
        a: KnownNodeId,
        b: KnownNodeId,
    ) -> Result<KnownNodeId, KnowledgeError> {
        if a == b {
            self.node(a)?;
            return Ok(a);
        }
        let (na, nb) = (self.node(a)?, self.node(b)?);
        match (na.binding, nb.binding) {
            (Some(x), Some(y)) => Err(KnowledgeError::MergeBindingMismatch(x, y)),
            (None, None) => Err(KnowledgeError::MergeNeedsPseudonym),
            (Some(_), None) => {
                self.merge(a, b)?;
                Ok(a)
            }
            (None, Some(_)) => {
                self.merge(b, a)?;
                Ok(b)
            }
        }
    }

    /// Merges pseudonym `gone` into identified node `keep`.
    fn merge(&mut self, keep: KnownNodeId, gone: KnownNodeId) -> Result<(), KnowledgeError> {
        debug_assert!(self.nodes[keep.index()].binding.is_some());
        debug_assert!(self.nodes[gone.index()].binding.is_none());
        let coordinate = match (
            self.nodes[keep.index()].coordinate.clone(),
            self.nodes[gone.index()].coordinate.clone(),
        ) {
            (Some(k), Some(g)) if k != g => return Err(KnowledgeError::CoordinateConflict(g)),
            (k, g) => k.or(g),
        };
        let rewrite = |id: KnownNodeId| if id == gone { keep } else { id };
        let mut links = BTreeMap::new();
        for (&(x, y), &kind) in &self.links {
            let (x, y) = (rewrite(x), rewrite(y));
            if x == y {
                continue;
            }
            // Observed wins over inferred when a merge collapses two links.
            let slot = links.entry(ordered(x, y)).or_insert(kind);
            if kind == LinkKind::Observed {
                *slot = kind;
            }
        }
        let absent: BTreeSet<_> = self
            .absent
            .iter()
            .map(|&(x, y)| ordered(rewrite(x), rewrite(y)))
            .filter(|&(x, y)| x != y)
            .collect();
        if let Some(&(x, y)) = absent.iter().find(|pair| links.contains_key(pair)) {
            return Err(KnowledgeError::Contradiction(x, y));
        }
        if let Some(c) = &coordinate {
            self.by_coordinate.insert(c.clone(), keep);
        }
        self.nodes[keep.index()].coordinate = coordinate;
        self.nodes[gone.index()].live = false;
        self.nodes[gone.index()].coordinate = None;
        self.links = links;
        self.absent = absent;
        Ok(())
    }

    /// Number of pseudonymous nodes: participants the adversary enumerated
    /// beyond those it already identifies.
    pub fn count_pseudonyms(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.live && n.class == NodeClass::Pseudonymous)
            .count()
    }

    /// Known nodes with no confirmed link to a malicious node.
    ///
    /// A literal reading of the metric over the observed overlay: it counts
    /// the malicious members themselves (a node never neighbors itself) and
    /// drops pseudonyms whose inferred tree link happens to touch a member.
    /// Kept for comparison against [`Self::count_pseudonyms`].
    pub fn count_non_neighbors_of_malicious(&self) -> usize {
        let malicious: BTreeSet<KnownNodeId> = self
            .node_ids()
            .filter(|&id| self.nodes[id.index()].class == NodeClass::Malicious)
            .collect();
        self.node_ids()
            .filter(|&id| {
                !self.links.keys().any(|&(x, y)| {
                    (x == id && malicious.contains(&y)) || (y == id && malicious.contains(&x))
                })
            })
            .count()
    }

    /// Known nodes as CSV: `id,class,coordinate` with colon-joined
    /// coordinate elements (empty when unknown; the root displays as empty
    /// too, distinguishable by class and links).
    pub fn nodes_csv(&self) -> String {
        let mut out = String::from("id,class,coordinate\n");
        for id in self.node_ids() {
            let n = &self.nodes[id.index()];
            let _ = match &n.coordinate {
                Some(c) => writeln!(out, "{id},{},{c}", n.class),
                None => writeln!(out, "{id},{},", n.class),
            };
        }
        out
    }

    /// Known links as CSV: `id_a,id_b,kind` with `observed` or
    /// `inferred-tree` provenance.
    pub fn links_csv(&self) -> String {
        let mut out = String::from("id_a,id_b,kind\n");
        for ((a, b), kind) in self.links() {
            let _ = writeln!(out, "{a},{b},{kind}");
        }
        out
    }
}
