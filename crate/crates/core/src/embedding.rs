//! Spanning trees and coordinate assignment.
//!
//! An embedding roots a spanning tree in the overlay and hands every node a
//! coordinate: the root gets the empty vector, and each child extends its
//! parent's vector by one element. Enumeration mode uses the child's position
//! index, random mode draws fresh b-bit elements. Coordinates only reveal
//! tree positions, yet greedy routing over them may use every overlay link.
//!
//! Trees can be built by honest participants (plain randomized BFS) or under
//! the leaf-only misbehavior, where malicious nodes suppress announcements to
//! honest neighbors and attach as leaves, deepening the tree around them.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::graph::{GraphError, NodeId, OverlayGraph};

/// Default element width in bits for random-mode coordinates.
pub const DEFAULT_ELEMENT_BITS: u32 = 128;

/// Errors raised while building trees, assigning or obfuscating coordinates.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmbeddingError {
    /// The graph has no spanning tree rooted at the requested node.
    #[error("node {unreached} is unreachable from root {root}")]
    Unreachable { root: NodeId, unreached: NodeId },
    /// Random mode with `bits` cannot give `children` siblings distinct
    /// elements.
    #[error("{bits}-bit elements cannot distinguish {children} children of node {node}")]
    ElementSpaceExhausted {
        node: NodeId,
        children: usize,
        bits: u32,
    },
    /// Element width outside `1..=128`.
    #[error("element width must lie in 1..=128 bits, got {0}")]
    InvalidElementBits(u32),
    /// Obfuscation requires random-mode elements for its padding.
    #[error("coordinate obfuscation requires random mode")]
    ObfuscationRequiresRandomMode,
    /// A coordinate is longer than the requested padded length.
    #[error("coordinate of length {length} exceeds padded length {padded}")]
    PaddingTooShort { length: usize, padded: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Tree coordinate: the element path from the root to a node.
///
/// The root is the empty vector. Displays as colon-joined decimal elements
/// (`2:4:1`), the root as the empty string.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Coordinate(Vec<u128>);

impl Coordinate {
    pub const fn root() -> Self {
        Coordinate(Vec::new())
    }

    pub fn from_elements(elements: impl Into<Vec<u128>>) -> Self {
        Coordinate(elements.into())
    }

    pub fn elements(&self) -> &[u128] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The coordinate extended by one trailing element.
    pub fn child(&self, element: u128) -> Coordinate {
        let mut v = self.0.clone();
        v.push(element);
        Coordinate(v)
    }

    /// The coordinate with the last element removed; `None` for the root.
    pub fn parent(&self) -> Option<Coordinate> {
        if self.0.is_empty() {
            None
        } else {
            Some(Coordinate(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// The first `len` elements as a coordinate.
    ///
    /// # Panics
    /// Panics if `len` exceeds the coordinate length.
    pub fn prefix(&self, len: usize) -> Coordinate {
        Coordinate(self.0[..len].to_vec())
    }

    pub fn last(&self) -> Option<u128> {
        self.0.last().copied()
    }

    pub fn is_prefix_of(&self, other: &Coordinate) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }
}

/// Length of the longest shared prefix of two coordinates.
pub fn common_prefix_length(a: &Coordinate, b: &Coordinate) -> usize {
    a.0.iter().zip(&b.0).take_while(|(x, y)| x == y).count()
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(":")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

/// Error parsing a coordinate from its colon-joined form.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid coordinate element {0:?}")]
pub struct ParseCoordinateError(pub String);

impl FromStr for Coordinate {
    type Err = ParseCoordinateError;

    /// Parses the [`fmt::Display`] form; the empty string is the root.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Ok(Coordinate::root());
        }
        s.split(':')
            .map(|e| {
                e.parse::<u128>()
                    .map_err(|_| ParseCoordinateError(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Coordinate)
    }
}

/// How child coordinate elements are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingMode {
    /// The i-th child of a node extends the parent coordinate by `i`.
    /// Elements leak child counts and sibling existence.
    Enumeration,
    /// Every child extends the parent coordinate by a fresh uniform element
    /// of `bits` bits, distinct among siblings.
    Random { bits: u32 },
}

impl EmbeddingMode {
    /// Random mode at the default element width.
    pub const fn random_default() -> Self {
        EmbeddingMode::Random {
            bits: DEFAULT_ELEMENT_BITS,
        }
    }
}

/// Rooted spanning tree of an overlay graph.
///
/// Child lists are in attachment order; nodes attached in the same round are
/// ordered by id. The tree remembers how many honest nodes had to be attached
/// under malicious parents when normal construction stalled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanningTree {
    root: NodeId,
    parents: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    depths: Vec<usize>,
    fallback_attachments: usize,
}

impl SpanningTree {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.parents.len()
    }

    /// Parent of `v`; `None` for the root.
    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parents[v.index()]
    }

    /// Children of `v` in attachment order.
    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v.index()]
    }

    /// Distance from the root along tree edges.
    pub fn depth(&self, v: NodeId) -> usize {
        self.depths[v.index()]
    }

    /// Honest nodes that ended up with a malicious (non-root) parent because
    /// no honest announcement ever reached them. Nonzero only under
    /// misbehavior on unfavorable topologies; such runs are flagged so they
    /// can be excluded or studied separately.
    pub fn fallback_attachments(&self) -> usize {
        self.fallback_attachments
    }

    /// Nodes in assignment order: root first, then level by level in
    /// attachment order. Every parent precedes its children.
    pub fn assignment_order(&self) -> Vec<NodeId> {
        let mut order = vec![self.root];
        let mut cursor = 0;
        while cursor < order.len() {
            let u = order[cursor];
            cursor += 1;
            order.extend(self.children(u).iter().copied());
        }
        order
    }
}

/// Builds a BFS spanning tree rooted at `root`.
///
/// Every non-root node picks its parent uniformly among its neighbors one
/// level closer to the root, which models honest nodes accepting the first
/// wave of announcements with random tie-breaks. Fails if any node is
/// unreachable.
pub fn build_bfs_tree(
    g: &OverlayGraph,
    root: NodeId,
    rng: &mut impl Rng,
) -> Result<SpanningTree, EmbeddingError> {
    g.check_node(root)?;
    build_tree(g, root, None, rng)
}

/// Builds the spanning tree that results when `malicious` nodes announce the
/// tree only to each other, never to honest neighbors.
///
/// Honest nodes then never select a malicious parent, and each malicious node
/// joins as a leaf once a (non-malicious or root) neighbor is announced: its
/// depth is one below its shallowest such neighbor. A malicious root is
/// assumed to behave correctly, since misbehaving there would orphan the
/// whole tree. If honest nodes remain that no honest announcement can reach,
/// they are attached under a shallowest reached malicious neighbor and
/// counted in [`SpanningTree::fallback_attachments`].
pub fn build_adversarial_tree(
    g: &OverlayGraph,
    root: NodeId,
    malicious: &BTreeSet<NodeId>,
    rng: &mut impl Rng,
) -> Result<SpanningTree, EmbeddingError> {
    g.check_node(root)?;
    for &m in malicious {
        g.check_node(m)?;
    }
    build_tree(g, root, Some(malicious), rng)
}

/// Shared tree construction. `suppressed`: nodes whose announcements honest
/// neighbors never see (leaf-only malicious set); `None` builds a plain BFS
/// tree.
///
/// Levels are processed in ascending depth through a pending map, so a
/// fallback round that re-opens a shallow depth slots back into the wave
/// correctly.
fn build_tree(
    g: &OverlayGraph,
    root: NodeId,
    suppressed: Option<&BTreeSet<NodeId>>,
    rng: &mut impl Rng,
) -> Result<SpanningTree, EmbeddingError> {
    let n = g.node_count();
    let announces = |v: NodeId| match suppressed {
        Some(set) => v == root || !set.contains(&v),
        None => true,
    };
    let mut depths: Vec<Option<usize>> = vec![None; n];
    let mut parents: Vec<Option<NodeId>> = vec![None; n];
    let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut fallback_attachments = 0;
    let mut assigned = 1;
    depths[root.index()] = Some(0);
    let mut pending: BTreeMap<usize, BTreeSet<NodeId>> = BTreeMap::new();
    pending.insert(0, [root].into());
    loop {
        while let Some((&d, _)) = pending.first_key_value() {
            let level = pending.remove(&d).expect("key just observed");
            let mut discovered: BTreeSet<NodeId> = BTreeSet::new();
            for &u in level.iter().filter(|&&u| announces(u)) {
                discovered.extend(
                    g.neighbors(u)
                        .iter()
                        .filter(|v| depths[v.index()].is_none()),
                );
            }
            for v in discovered {
                // Non-empty: v was discovered from an announcer at depth d.
                let candidates: Vec<NodeId> = g
                    .neighbors(v)
                    .iter()
                    .copied()
                    .filter(|&u| announces(u) && depths[u.index()] == Some(d))
                    .collect();
                let parent = candidates[rng.random_range(0..candidates.len())];
                depths[v.index()] = Some(d + 1);
                parents[v.index()] = Some(parent);
                children[parent.index()].push(v);
                assigned += 1;
                pending.entry(d + 1).or_default().insert(v);
            }
        }
        if assigned == n {
            break;
        }
        // No announcement reaches the rest. Suppressed nodes still accept
        // join requests from neighbors that discovered them socially: attach
        // each cut-off node under a shallowest reached suppressed neighbor.
        let mut salvaged: Vec<(NodeId, usize, Vec<NodeId>)> = Vec::new();
        if let Some(set) = suppressed {
            for v in g.nodes().filter(|v| depths[v.index()].is_none()) {
                let reached: Vec<(usize, NodeId)> = g
                    .neighbors(v)
                    .iter()
                    .filter(|u| set.contains(u))
                    .filter_map(|&u| depths[u.index()].map(|d| (d, u)))
                    .collect();
                if let Some(&(dmin, _)) = reached.iter().min() {
                    let ties = reached
                        .iter()
                        .filter(|&&(d, _)| d == dmin)
                        .map(|&(_, u)| u)
                        .collect();
                    salvaged.push((v, dmin, ties));
                }
            }
        }
        if salvaged.is_empty() {
            let unreached = g
                .nodes()
                .find(|v| depths[v.index()].is_none())
                .expect("assigned < n implies an unreached node");
            return Err(EmbeddingError::Unreachable { root, unreached });
        }
        let set = suppressed.expect("salvage only happens with suppression");
        for (v, dmin, ties) in salvaged {
            let parent = ties[rng.random_range(0..ties.len())];
            depths[v.index()] = Some(dmin + 1);
            parents[v.index()] = Some(parent);
            children[parent.index()].push(v);
            assigned += 1;
            if !set.contains(&v) {
                fallback_attachments += 1;
            }
            pending.entry(dmin + 1).or_default().insert(v);
        }
    }
    Ok(SpanningTree {
        root,
        parents,
        children,
        depths: depths
            .into_iter()
            .map(|d| d.expect("all nodes assigned"))
            .collect(),
        fallback_attachments,
    })
}

/// Coordinates of every node in one embedding, indexed by dense node id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoordinateMap {
    coords: Vec<Coordinate>,
}

impl CoordinateMap {
    pub fn from_vec(coords: Vec<Coordinate>) -> Self {
        CoordinateMap { coords }
    }

    pub fn get(&self, v: NodeId) -> &Coordinate {
        &self.coords[v.index()]
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Coordinate)> {
        self.coords
            .iter()
            .enumerate()
            .map(|(i, c)| (NodeId::new(i as u32), c))
    }
}

/// Assigns coordinates along `tree` under `mode`.
///
/// The root receives the empty coordinate. In enumeration mode the i-th child
/// (attachment order) extends the parent by element i. In random mode each
/// child extends the parent by a uniform `bits`-bit element, redrawn until
/// distinct from its earlier siblings; sibling distinctness makes all
/// coordinates globally unique in both modes.
pub fn assign_coordinates(
    tree: &SpanningTree,
    mode: EmbeddingMode,
    rng: &mut impl Rng,
) -> Result<CoordinateMap, EmbeddingError> {
    if let EmbeddingMode::Random { bits } = mode {
        check_bits(bits)?;
    }
    let mut coords = vec![Coordinate::root(); tree.node_count()];
    for u in tree.assignment_order() {
        let base = coords[u.index()].clone();
        match mode {
            EmbeddingMode::Enumeration => {
                for (i, &c) in tree.children(u).iter().enumerate() {
                    coords[c.index()] = base.child(i as u128);
                }
            }
            EmbeddingMode::Random { bits } => {
                let kids = tree.children(u);
                if kids.len() > capacity(bits) {
                    return Err(EmbeddingError::ElementSpaceExhausted {
                        node: u,
                        children: kids.len(),
                        bits,
                    });
                }
                let mut used: BTreeSet<u128> = BTreeSet::new();
                for &c in kids {
                    let element = draw_distinct(bits, &used, rng);
                    used.insert(element);
                    coords[c.index()] = base.child(element);
                }
            }
        }
    }
    debug_assert!(
        {
            let set: BTreeSet<&Coordinate> = coords.iter().collect();
            set.len() == coords.len()
        },
        "coordinates must be globally unique"
    );
    Ok(CoordinateMap::from_vec(coords))
}

fn check_bits(bits: u32) -> Result<(), EmbeddingError> {
    if (1..=128).contains(&bits) {
        Ok(())
    } else {
        Err(EmbeddingError::InvalidElementBits(bits))
    }
}

/// Number of distinct `bits`-bit elements, saturated at `usize::MAX`.
fn capacity(bits: u32) -> usize {
    if bits >= usize::BITS {
        usize::MAX
    } else {
        1usize << bits
    }
}

fn draw_element(bits: u32, rng: &mut impl Rng) -> u128 {
    if bits == 128 {
        rng.random::<u128>()
    } else {
        rng.random_range(0..(1u128 << bits))
    }
}

/// Uniform element not in `used`. Falls back to the smallest unused value if
/// rejection sampling runs long (only plausible for tiny widths).
fn draw_distinct(bits: u32, used: &BTreeSet<u128>, rng: &mut impl Rng) -> u128 {
    for _ in 0..10_000 {
        let e = draw_element(bits, rng);
        if !used.contains(&e) {
            return e;
        }
    }
    (0..)
        .find(|e| !used.contains(e))
        .expect("caller checked the element space is large enough")
}

/// Hash function applied to salted coordinate elements during obfuscation.
///
/// Receivers compare digests positionally, so any collision-resistant keyed
/// digest works; the simulator only needs it to be deterministic.
pub trait ElementDigest {
    fn digest(&self, salt: u64, element: u128) -> [u8; 32];
}

/// SHA-256 over the little-endian salt and element bytes.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sha256Digest;

impl ElementDigest for Sha256Digest {
    fn digest(&self, salt: u64, element: u128) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(salt.to_le_bytes());
        h.update(element.to_le_bytes());
        h.finalize().into()
    }
}

/// A coordinate as published for receiver anonymity: padded to a fixed
/// length, every element replaced by a salted digest.
///
/// Holders of a plaintext coordinate can still locate the boundary between
/// real prefix and padding positionally, but observers cannot tell length,
/// elements, or shared prefixes beyond what they can rehash themselves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObfuscatedCoordinate {
    digests: Vec<[u8; 32]>,
    salts: Vec<u64>,
}

impl ObfuscatedCoordinate {
    pub fn len(&self) -> usize {
        self.digests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digests.is_empty()
    }

    pub fn digests(&self) -> &[[u8; 32]] {
        &self.digests
    }

    pub fn salts(&self) -> &[u64] {
        &self.salts
    }
}

/// Obfuscates `coordinate` to a fixed `padded_len`.
///
/// The coordinate is extended with fresh random elements to `padded_len`,
/// then each element is replaced by `digest(salt_i, element_i)` with a fresh
/// salt per position. Requires random mode (padding must be indistinguishable
/// from real elements) and `padded_len >= coordinate.len()`.
pub fn obfuscate_coordinate(
    coordinate: &Coordinate,
    padded_len: usize,
    mode: EmbeddingMode,
    digest: &impl ElementDigest,
    rng: &mut impl Rng,
) -> Result<ObfuscatedCoordinate, EmbeddingError> {
    let EmbeddingMode::Random { bits } = mode else {
        return Err(EmbeddingError::ObfuscationRequiresRandomMode);
    };
    check_bits(bits)?;
    if coordinate.len() > padded_len {
        return Err(EmbeddingError::PaddingTooShort {
            length: coordinate.len(),
            padded: padded_len,
        });
    }
    let mut elements = coordinate.elements().to_vec();
    while elements.len() < padded_len {
        elements.push(draw_element(bits, rng));
    }
    let salts: Vec<u64> = (0..padded_len).map(|_| rng.random()).collect();
    let digests = salts
        .iter()
        .zip(&elements)
        .map(|(&s, &e)| digest.digest(s, e))
        .collect();
    Ok(ObfuscatedCoordinate { digests, salts })
}

/// Longest prefix of `plain` whose salted digests match `obfuscated`
/// position by position.
pub fn obfuscated_prefix_length(
    plain: &Coordinate,
    obfuscated: &ObfuscatedCoordinate,
    digest: &impl ElementDigest,
) -> usize {
    plain
        .elements()
        .iter()
        .zip(obfuscated.salts.iter().zip(&obfuscated.digests))
        .take_while(|(&e, (&s, d))| digest.digest(s, e) == **d)
        .count()
}
