//! Synthetic social-graph generators.
//!
//! Two standard models stand in for real social datasets: preferential
//! attachment (scale-free degree distribution, connected by construction) and
//! a ring-lattice rewiring model (small-world). Both draw every choice from
//! the caller's RNG, so a seed fully determines the output graph.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;
use rand::Rng;

use crate::graph::{GraphError, OverlayGraph};

/// Families of synthetic overlay topologies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SyntheticModel {
    /// Preferential attachment: each new node links to `attach_edges`
    /// distinct existing nodes chosen proportionally to degree.
    ScaleFree { attach_edges: usize },
    /// Ring lattice of even degree `ring_degree` with each edge rewired to a
    /// random endpoint with probability `rewire_prob`.
    SmallWorld {
        ring_degree: usize,
        rewire_prob: f64,
    },
}

/// Upper bound on rewiring retries before giving up on a connected result.
const REWIRING_ATTEMPTS: usize = 32;

/// Generates a connected synthetic graph on `nodes` nodes.
pub fn generate(
    model: SyntheticModel,
    nodes: usize,
    rng: &mut impl Rng,
) -> Result<OverlayGraph, GraphError> {
    match model {
        SyntheticModel::ScaleFree { attach_edges } => scale_free(nodes, attach_edges, rng),
        SyntheticModel::SmallWorld {
            ring_degree,
            rewire_prob,
        } => small_world(nodes, ring_degree, rewire_prob, rng),
    }
}

fn scale_free(nodes: usize, m: usize, rng: &mut impl Rng) -> Result<OverlayGraph, GraphError> {
    if nodes < 2 {
        return Err(GraphError::InvalidParameters(format!(
            "scale-free needs at least 2 nodes, got {nodes}"
        )));
    }
    if m < 1 || m >= nodes {
        return Err(GraphError::InvalidParameters(format!(
            "attach_edges must satisfy 1 <= m < n, got m={m}, n={nodes}"
        )));
    }
    let mut edges: Vec<(u32, u32)> = Vec::new();
    // Seed clique on the first m nodes keeps the graph connected from the
    // start and gives the attachment pool nonzero degrees.
    for a in 0..m as u32 {
        for b in (a + 1)..m as u32 {
            edges.push((a, b));
        }
    }
    // Each edge endpoint appears once; sampling this list uniformly is
    // sampling nodes proportionally to degree.
    let mut endpoints: Vec<u32> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    for v in m as u32..nodes as u32 {
        let mut targets: BTreeSet<u32> = BTreeSet::new();
        while targets.len() < m {
            let t = if endpoints.is_empty() {
                // Only reachable for m = 1 (empty seed clique): attach the
                // second node uniformly among the existing ones.
                rng.random_range(0..v)
            } else {
                endpoints[rng.random_range(0..endpoints.len())]
            };
            targets.insert(t);
        }
        for t in targets {
            edges.push((v, t));
            endpoints.push(v);
            endpoints.push(t);
        }
    }
    OverlayGraph::from_edges(nodes, edges)
}

fn small_world(
    nodes: usize,
    k: usize,
    p: f64,
    rng: &mut impl Rng,
) -> Result<OverlayGraph, GraphError> {
    if k < 2 || !k.is_multiple_of(2) || k >= nodes {
        return Err(GraphError::InvalidParameters(format!(
            "ring_degree must be even with 2 <= k < n, got k={k}, n={nodes}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphError::InvalidParameters(format!(
            "rewire_prob must lie in [0, 1], got {p}"
        )));
    }
    for _ in 0..REWIRING_ATTEMPTS {
        let mut edges: BTreeSet<(u32, u32)> = BTreeSet::new();
        let norm = |a: u32, b: u32| (a.min(b), a.max(b));
        for u in 0..nodes as u32 {
            for j in 1..=(k / 2) as u32 {
                edges.insert(norm(u, (u + j) % nodes as u32));
            }
        }
        let lattice: Vec<(u32, u32)> = edges.iter().copied().collect();
        for (u, v) in lattice {
            if !rng.random_bool(p) {
                continue;
            }
            // Rewire the far endpoint, keeping u; skip draws that would
            // create a self-loop or duplicate edge.
            let w = rng.random_range(0..nodes as u32);
            let candidate = norm(u, w);
            if w != u && !edges.contains(&candidate) {
                edges.remove(&norm(u, v));
                edges.insert(candidate);
            }
        }
        let g = OverlayGraph::from_edges(nodes, edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(GraphError::RewiringDisconnected {
        attempts: REWIRING_ATTEMPTS,
    })
}
