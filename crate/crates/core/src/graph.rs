//! Undirected overlay graphs with dense node identifiers.
//!
//! Overlays are simple undirected graphs: no self-loops, no parallel edges.
//! Nodes carry dense ids `0..n`; when a graph is parsed from an edge list the
//! original file ids are retained so provenance survives re-mapping and
//! component extraction. Adjacency lists are kept sorted, which makes every
//! traversal in the crate deterministic.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Dense identifier of an overlay node, valid within one [`OverlayGraph`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(u32);

impl NodeId {
    pub const fn new(raw: u32) -> Self {
        NodeId(raw)
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub const fn raw(self) -> u32 {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Errors raised by graph construction, parsing and queries.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    /// An edge-list line was not two whitespace-separated integer ids.
    #[error("line {line}: expected two integer ids, got {content:?}")]
    MalformedLine { line: usize, content: String },
    /// The input contained no usable edges.
    #[error("edge list contains no edges")]
    NoEdges,
    /// A node id outside `0..node_count` was supplied.
    #[error("unknown node id {0}")]
    UnknownNode(u64),
    /// A generator was configured with out-of-range parameters.
    #[error("invalid model parameters: {0}")]
    InvalidParameters(String),
    /// Small-world rewiring kept disconnecting the graph.
    #[error("rewired graph stayed disconnected after {attempts} attempts")]
    RewiringDisconnected { attempts: usize },
}

/// Simple undirected graph over dense node ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlayGraph {
    adjacency: Vec<Vec<NodeId>>,
    original_ids: Vec<u64>,
    edge_count: usize,
}

impl OverlayGraph {
    /// Builds a graph on `node_count` nodes from dense edge pairs.
    ///
    /// Self-loops and duplicate edges are dropped. Endpoints outside
    /// `0..node_count` are an error. Original ids are the dense ids.
    pub fn from_edges(
        node_count: usize,
        edges: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self, GraphError> {
        let mut set: BTreeSet<(u32, u32)> = BTreeSet::new();
        for (a, b) in edges {
            if a as usize >= node_count {
                return Err(GraphError::UnknownNode(a as u64));
            }
            if b as usize >= node_count {
                return Err(GraphError::UnknownNode(b as u64));
            }
            if a == b {
                continue;
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b) in &set {
            adjacency[a as usize].push(NodeId(b));
            adjacency[b as usize].push(NodeId(a));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(OverlayGraph {
            adjacency,
            original_ids: (0..node_count as u64).collect(),
            edge_count: set.len(),
        })
    }

    /// Parses a whitespace-separated edge list ("u v" per line).
    ///
    /// Lines starting with `#` and blank lines are skipped; any other line
    /// must hold exactly two integer ids. Self-loop lines are ignored. With
    /// `mutual_only` an undirected edge is kept only when both directions
    /// appear, which turns a directed trust graph into its mutual core.
    /// Original ids are preserved; dense ids follow ascending original id.
    pub fn parse_edge_list(text: &str, mutual_only: bool) -> Result<Self, GraphError> {
        let mut directed: BTreeSet<(u64, u64)> = BTreeSet::new();
        let mut seen: BTreeSet<u64> = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (a, b) = match (fields.next(), fields.next(), fields.next()) {
                (Some(a), Some(b), None) => match (a.parse::<u64>(), b.parse::<u64>()) {
                    (Ok(a), Ok(b)) => (a, b),
                    _ => {
                        return Err(GraphError::MalformedLine {
                            line: idx + 1,
                            content: line.to_string(),
                        })
                    }
                },
                _ => {
                    return Err(GraphError::MalformedLine {
                        line: idx + 1,
                        content: line.to_string(),
                    })
                }
            };
            seen.insert(a);
            seen.insert(b);
            if a != b {
                directed.insert((a, b));
            }
        }
        let mut undirected: BTreeSet<(u64, u64)> = BTreeSet::new();
        for &(a, b) in &directed {
            if !mutual_only || directed.contains(&(b, a)) {
                undirected.insert((a.min(b), a.max(b)));
            }
        }
        if undirected.is_empty() {
            return Err(GraphError::NoEdges);
        }
        let original_ids: Vec<u64> = seen.iter().copied().collect();
        let index: BTreeMap<u64, u32> = original_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i as u32))
            .collect();
        let mut adjacency = vec![Vec::new(); original_ids.len()];
        for &(a, b) in &undirected {
            let (a, b) = (index[&a], index[&b]);
            adjacency[a as usize].push(NodeId(b));
            adjacency[b as usize].push(NodeId(a));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(OverlayGraph {
            adjacency,
            edge_count: undirected.len(),
            original_ids,
        })
    }

    /// Renders the graph as an edge list: one `u v` line per edge, dense ids,
    /// `u < v`, ascending. Nodes without edges do not appear.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for u in self.nodes() {
            for &v in self.neighbors(u) {
                if u < v {
                    out.push_str(&u.to_string());
                    out.push(' ');
                    out.push_str(&v.to_string());
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.adjacency.len() as u32).map(NodeId)
    }

    /// Sorted neighbor list of `v`.
    ///
    /// # Panics
    /// Panics if `v` is out of range; use [`Self::check_node`] for fallible
    /// validation of external input.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adjacency[v.index()]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency[v.index()].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency[u.index()].binary_search(&v).is_ok()
    }

    /// Original (file) id of a dense node id.
    pub fn original_id(&self, v: NodeId) -> u64 {
        self.original_ids[v.index()]
    }

    pub fn check_node(&self, v: NodeId) -> Result<(), GraphError> {
        if v.index() < self.adjacency.len() {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(v.raw() as u64))
        }
    }

    /// Joint neighborhood of `subset`: nodes adjacent to at least one member,
    /// excluding the members themselves.
    pub fn neighborhood(&self, subset: &BTreeSet<NodeId>) -> Result<BTreeSet<NodeId>, GraphError> {
        let mut out = BTreeSet::new();
        for &v in subset {
            self.check_node(v)?;
            out.extend(self.neighbors(v).iter().copied());
        }
        Ok(&out - subset)
    }

    pub fn is_connected(&self) -> bool {
        if self.adjacency.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.node_count()];
        let mut queue = vec![NodeId(0)];
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop() {
            for &v in self.neighbors(u) {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    reached += 1;
                    queue.push(v);
                }
            }
        }
        reached == self.node_count()
    }

    /// Extracts the largest connected component as a new graph with dense ids.
    ///
    /// Ties on size go to the component containing the smallest original id.
    /// Original ids chain through, so nodes stay traceable to the input file.
    pub fn largest_connected_component(&self) -> OverlayGraph {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut best: Vec<NodeId> = Vec::new();
        for seed in self.nodes() {
            if seen[seed.index()] {
                continue;
            }
            let mut comp = vec![seed];
            seen[seed.index()] = true;
            let mut cursor = 0;
            while cursor < comp.len() {
                let u = comp[cursor];
                cursor += 1;
                for &v in self.neighbors(u) {
                    if !seen[v.index()] {
                        seen[v.index()] = true;
                        comp.push(v);
                    }
                }
            }
            // Seeds ascend, so the first component of a given size also
            // contains the smallest original id among equals.
            if comp.len() > best.len() {
                best = comp;
            }
        }
        best.sort_unstable();
        let index: BTreeMap<NodeId, u32> = best
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i as u32))
            .collect();
        let mut adjacency = vec![Vec::new(); best.len()];
        let mut edge_count = 0;
        for &v in &best {
            let list: Vec<NodeId> = self.neighbors(v).iter().map(|w| NodeId(index[w])).collect();
            edge_count += list.len();
            adjacency[index[&v] as usize] = list;
        }
        OverlayGraph {
            adjacency,
            original_ids: best.iter().map(|&v| self.original_id(v)).collect(),
            edge_count: edge_count / 2,
        }
    }
}
