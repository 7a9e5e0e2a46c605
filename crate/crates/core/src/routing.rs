//! Greedy routing under the tree distance.
//!
//! The distance between two coordinates is the hop count between their nodes
//! in the spanning tree: both depths minus twice the common prefix. Greedy
//! forwarding hands a message to a strictly closer neighbor until the holder
//! of the target coordinate is reached; since every forwarder may use all of
//! its overlay links, routes can leave the tree through shortcut edges.
//!
//! Malicious forwarders see which neighbor handed them a message and where
//! they sent it. [`extract_trace_records`] condenses a routed path into those
//! observations: one record per maximal honest segment between two malicious
//! positions.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::embedding::{
    common_prefix_length, Coordinate, CoordinateMap, ElementDigest, ObfuscatedCoordinate,
};
use crate::graph::{GraphError, NodeId, OverlayGraph};

/// Errors raised by message routing.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RoutingError {
    /// No neighbor of `at` is strictly closer to the target.
    #[error("routing stuck at node {at} with distance {remaining} to target")]
    Stuck { at: NodeId, remaining: usize },
    /// The coordinate map does not cover the graph.
    #[error("coordinate map covers {coords} nodes but the graph has {graph}")]
    MapSizeMismatch { graph: usize, coords: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Hop count between two coordinates along spanning-tree edges: up from one
/// node to the deepest common ancestor, down to the other.
pub fn tree_distance(a: &Coordinate, b: &Coordinate) -> usize {
    a.len() + b.len() - 2 * common_prefix_length(a, b)
}

/// Tree distance against an obfuscated target.
///
/// The target's true length is hidden by padding, so its padded length
/// stands in for it; this shifts all distances by the constant padding
/// surplus and preserves every greedy comparison.
pub fn obfuscated_distance(
    c: &Coordinate,
    target: &ObfuscatedCoordinate,
    digest: &impl ElementDigest,
) -> usize {
    let opl = crate::embedding::obfuscated_prefix_length(c, target, digest);
    target.len() + c.len() - 2 * opl
}

/// How a forwarder picks among strictly closer neighbors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NextHopRule {
    /// Minimum-distance neighbor, uniform among ties.
    #[default]
    GreedyBest,
    /// Uniform over all strictly closer neighbors. Reaches the same targets
    /// over longer routes; selectable for sensitivity analysis.
    AnyCloser,
}

/// One routed message: every traversed node in order plus the target
/// coordinate it was addressed to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutePath {
    pub nodes: Vec<NodeId>,
    pub target: Coordinate,
}

impl RoutePath {
    pub fn source(&self) -> NodeId {
        self.nodes[0]
    }

    /// Node where the route ended (the target holder for delivered routes).
    pub fn delivery(&self) -> NodeId {
        *self.nodes.last().expect("paths hold at least the source")
    }

    pub fn hops(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// Strictly closer neighbor of `current` under `rule`, or `None` at a local
/// minimum of the distance to `target`.
pub fn greedy_next_hop(
    g: &OverlayGraph,
    coords: &CoordinateMap,
    current: NodeId,
    target: &Coordinate,
    rule: NextHopRule,
    rng: &mut impl Rng,
) -> Option<NodeId> {
    next_hop_by(g, current, rule, rng, |v| {
        tree_distance(coords.get(v), target)
    })
}

fn next_hop_by(
    g: &OverlayGraph,
    current: NodeId,
    rule: NextHopRule,
    rng: &mut impl Rng,
    distance: impl Fn(NodeId) -> usize,
) -> Option<NodeId> {
    let here = distance(current);
    let closer: Vec<(usize, NodeId)> = g
        .neighbors(current)
        .iter()
        .map(|&v| (distance(v), v))
        .filter(|&(d, _)| d < here)
        .collect();
    let pool: Vec<NodeId> = match rule {
        NextHopRule::GreedyBest => {
            let best = closer.iter().map(|&(d, _)| d).min()?;
            closer
                .iter()
                .filter(|&&(d, _)| d == best)
                .map(|&(_, v)| v)
                .collect()
        }
        NextHopRule::AnyCloser => closer.iter().map(|&(_, v)| v).collect(),
    };
    if pool.is_empty() {
        None
    } else {
        Some(pool[rng.random_range(0..pool.len())])
    }
}

/// Routes a message from `source` to the plaintext coordinate `target`.
///
/// Forwarding stops when the current node holds the target coordinate.
/// Strict distance decrease bounds the route by the initial tree distance
/// and rules out loops. A local minimum short of the target is an error
/// naming the stuck node.
pub fn route(
    g: &OverlayGraph,
    coords: &CoordinateMap,
    source: NodeId,
    target: &Coordinate,
    rule: NextHopRule,
    rng: &mut impl Rng,
) -> Result<RoutePath, RoutingError> {
    check_map(g, coords)?;
    g.check_node(source)?;
    let mut nodes = vec![source];
    let mut current = source;
    while coords.get(current) != target {
        match greedy_next_hop(g, coords, current, target, rule, rng) {
            Some(next) => {
                current = next;
                nodes.push(next);
            }
            None => {
                return Err(RoutingError::Stuck {
                    at: current,
                    remaining: tree_distance(coords.get(current), target),
                })
            }
        }
    }
    debug_assert!(nodes.len() - 1 <= tree_distance(coords.get(source), target));
    Ok(RoutePath {
        nodes,
        target: target.clone(),
    })
}

/// Routes toward an obfuscated target, stopping at the distance minimum.
///
/// Returns the traversed path and the plaintext coordinate of the node the
/// route ended at. Barring digest collisions the endpoint is the target
/// holder, because the padded distance is minimized exactly there.
pub fn route_obfuscated(
    g: &OverlayGraph,
    coords: &CoordinateMap,
    source: NodeId,
    target: &ObfuscatedCoordinate,
    digest: &impl ElementDigest,
    rule: NextHopRule,
    rng: &mut impl Rng,
) -> Result<RoutePath, RoutingError> {
    check_map(g, coords)?;
    g.check_node(source)?;
    let mut nodes = vec![source];
    let mut current = source;
    while let Some(next) = next_hop_by(g, current, rule, rng, |v| {
        obfuscated_distance(coords.get(v), target, digest)
    }) {
        current = next;
        nodes.push(next);
    }
    Ok(RoutePath {
        nodes,
        target: coords.get(current).clone(),
    })
}

fn check_map(g: &OverlayGraph, coords: &CoordinateMap) -> Result<(), RoutingError> {
    if g.node_count() == coords.node_count() {
        Ok(())
    } else {
        Err(RoutingError::MapSizeMismatch {
            graph: g.node_count(),
            coords: coords.node_count(),
        })
    }
}

/// What two colluding malicious nodes learn from one message passing between
/// them: the honest segment endpoints they are adjacent to, and the target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    /// Malicious node that forwarded the message into the honest segment.
    pub entry: NodeId,
    /// First honest node of the segment (received from `entry`).
    pub segment_first: NodeId,
    /// Last honest node of the segment (forwarded to `exit`).
    pub segment_last: NodeId,
    /// Malicious node that received the message after the segment.
    pub exit: NodeId,
    /// Target coordinate, visible to every forwarder.
    pub target: Coordinate,
}

/// Splits a routed path into trace records: one per maximal run of honest
/// nodes between two malicious positions. Honest prefixes and suffixes of
/// the path are unobserved; adjacent malicious nodes exchange directly and
/// produce no record.
pub fn extract_trace_records(path: &RoutePath, malicious: &BTreeSet<NodeId>) -> Vec<TraceRecord> {
    let positions: Vec<usize> = path
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, v)| malicious.contains(v))
        .map(|(i, _)| i)
        .collect();
    positions
        .windows(2)
        .filter(|w| w[1] - w[0] >= 2)
        .map(|w| TraceRecord {
            entry: path.nodes[w[0]],
            segment_first: path.nodes[w[0] + 1],
            segment_last: path.nodes[w[1] - 1],
            exit: path.nodes[w[1]],
            target: path.target.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{
        assign_coordinates, build_bfs_tree, obfuscate_coordinate, EmbeddingMode, Sha256Digest,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn coord(elements: &[u128]) -> Coordinate {
        Coordinate::from_elements(elements)
    }

    #[test]
    fn tree_distance_cases() {
        assert_eq!(tree_distance(&coord(&[0]), &coord(&[1])), 2);
        assert_eq!(tree_distance(&coord(&[2, 4, 1]), &coord(&[2, 4])), 1);
        assert_eq!(tree_distance(&coord(&[2, 4, 1]), &coord(&[2, 0, 1])), 4);
        assert_eq!(tree_distance(&Coordinate::root(), &coord(&[9, 9])), 2);
        let c = coord(&[5, 0, 7]);
        assert_eq!(tree_distance(&c, &c), 0);
    }

    #[test]
    fn tree_distance_is_symmetric() {
        let a = coord(&[1, 2, 3]);
        let b = coord(&[1, 5]);
        assert_eq!(tree_distance(&a, &b), tree_distance(&b, &a));
    }

    /// Tree distance equals the actual hop count in the spanning tree.
    #[test]
    fn tree_distance_matches_tree_hops() {
        let g = crate::synth::generate(
            crate::synth::SyntheticModel::ScaleFree { attach_edges: 2 },
            60,
            &mut rng(1),
        )
        .unwrap();
        let t = build_bfs_tree(&g, NodeId::new(0), &mut rng(2)).unwrap();
        let coords = assign_coordinates(&t, EmbeddingMode::Enumeration, &mut rng(3)).unwrap();
        // Independent hop count: walk both nodes up to the root, find the
        // lowest common ancestor by depth alignment.
        let hops = |mut a: NodeId, mut b: NodeId| {
            let mut n = 0;
            while t.depth(a) > t.depth(b) {
                a = t.parent(a).unwrap();
                n += 1;
            }
            while t.depth(b) > t.depth(a) {
                b = t.parent(b).unwrap();
                n += 1;
            }
            while a != b {
                a = t.parent(a).unwrap();
                b = t.parent(b).unwrap();
                n += 2;
            }
            n
        };
        for a in g.nodes() {
            for b in g.nodes() {
                assert_eq!(tree_distance(coords.get(a), coords.get(b)), hops(a, b));
            }
        }
    }

    /// Ring 0-1-2-3-0 rooted at 0. Node 2 sits under one of the depth-1
    /// nodes; routing from the other one can shortcut directly to 2 instead
    /// of taking the 3-hop tree path.
    #[test]
    fn routing_uses_shortcut_links() {
        let g = OverlayGraph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let t = build_bfs_tree(&g, NodeId::new(0), &mut rng(4)).unwrap();
        let coords = assign_coordinates(&t, EmbeddingMode::Enumeration, &mut rng(5)).unwrap();
        let far = if t.parent(NodeId::new(2)) == Some(NodeId::new(1)) {
            NodeId::new(3)
        } else {
            NodeId::new(1)
        };
        assert_eq!(
            tree_distance(coords.get(far), coords.get(NodeId::new(2))),
            3
        );
        let path = route(
            &g,
            &coords,
            far,
            coords.get(NodeId::new(2)),
            NextHopRule::GreedyBest,
            &mut rng(6),
        )
        .unwrap();
        assert_eq!(path.nodes, vec![far, NodeId::new(2)]);
    }

    #[test]
    fn routing_delivers_with_strictly_decreasing_distance() {
        let g = crate::synth::generate(
            crate::synth::SyntheticModel::SmallWorld {
                ring_degree: 4,
                rewire_prob: 0.1,
            },
            120,
            &mut rng(7),
        )
        .unwrap();
        let t = build_bfs_tree(&g, NodeId::new(0), &mut rng(8)).unwrap();
        let coords = assign_coordinates(&t, EmbeddingMode::random_default(), &mut rng(9)).unwrap();
        let mut r = rng(10);
        for (source, target) in [(3u32, 77u32), (115, 2), (50, 50), (0, 119)] {
            let (source, target) = (NodeId::new(source), NodeId::new(target));
            let want = coords.get(target).clone();
            let path = route(&g, &coords, source, &want, NextHopRule::GreedyBest, &mut r).unwrap();
            assert_eq!(path.source(), source);
            assert_eq!(path.delivery(), target);
            assert_eq!(coords.get(path.delivery()), &want);
            let distances: Vec<usize> = path
                .nodes
                .iter()
                .map(|&v| tree_distance(coords.get(v), &want))
                .collect();
            assert!(distances.windows(2).all(|w| w[1] < w[0]));
            assert!(path.hops() <= tree_distance(coords.get(source), &want));
        }
    }

    #[test]
    fn routing_to_zero_hop_target() {
        let g = OverlayGraph::from_edges(2, [(0, 1)]).unwrap();
        let t = build_bfs_tree(&g, NodeId::new(0), &mut rng(0)).unwrap();
        let coords = assign_coordinates(&t, EmbeddingMode::Enumeration, &mut rng(0)).unwrap();
        let path = route(
            &g,
            &coords,
            NodeId::new(1),
            &coord(&[0]),
            NextHopRule::GreedyBest,
            &mut rng(0),
        )
        .unwrap();
        assert_eq!(path.nodes, vec![NodeId::new(1)]);
        assert_eq!(path.hops(), 0);
    }

    #[test]
    fn routing_reports_stuck_node() {
        // Coordinates (), (0): the nonexistent target (1) pulls the message
        // to the root, which has no closer neighbor.
        let g = OverlayGraph::from_edges(2, [(0, 1)]).unwrap();
        let t = build_bfs_tree(&g, NodeId::new(0), &mut rng(0)).unwrap();
        let coords = assign_coordinates(&t, EmbeddingMode::Enumeration, &mut rng(0)).unwrap();
        let err = route(
            &g,
            &coords,
            NodeId::new(1),
            &coord(&[1]),
            NextHopRule::GreedyBest,
            &mut rng(0),
        )
        .unwrap_err();
        assert_eq!(
            err,
            RoutingError::Stuck {
                at: NodeId::new(0),
                remaining: 1
            }
        );
    }

    #[test]
    fn any_closer_rule_still_delivers() {
        let g = crate::synth::generate(
            crate::synth::SyntheticModel::ScaleFree { attach_edges: 3 },
            100,
            &mut rng(11),
        )
        .unwrap();
        let t = build_bfs_tree(&g, NodeId::new(0), &mut rng(12)).unwrap();
        let coords = assign_coordinates(&t, EmbeddingMode::Enumeration, &mut rng(13)).unwrap();
        let mut r = rng(14);
        let want = coords.get(NodeId::new(42)).clone();
        let path = route(
            &g,
            &coords,
            NodeId::new(99),
            &want,
            NextHopRule::AnyCloser,
            &mut r,
        )
        .unwrap();
        assert_eq!(path.delivery(), NodeId::new(42));
        assert!(path.hops() <= tree_distance(coords.get(NodeId::new(99)), &want));
    }

    /// With identical tie-break draws, obfuscated routing follows the exact
    /// plaintext route: padding shifts every distance by the same constant.
    #[test]
    fn obfuscated_routing_mirrors_plaintext() {
        let g = crate::synth::generate(
            crate::synth::SyntheticModel::ScaleFree { attach_edges: 2 },
            70,
            &mut rng(15),
        )
        .unwrap();
        let t = build_bfs_tree(&g, NodeId::new(0), &mut rng(16)).unwrap();
        let mode = EmbeddingMode::random_default();
        let coords = assign_coordinates(&t, mode, &mut rng(17)).unwrap();
        let max_len = g.nodes().map(|v| coords.get(v).len()).max().unwrap();
        for (source, target) in [(5u32, 60u32), (33, 8), (69, 1)] {
            let (source, target) = (NodeId::new(source), NodeId::new(target));
            let plain = coords.get(target).clone();
            let obf = obfuscate_coordinate(&plain, max_len + 4, mode, &Sha256Digest, &mut rng(18))
                .unwrap();
            let direct = route(
                &g,
                &coords,
                source,
                &plain,
                NextHopRule::GreedyBest,
                &mut rng(19),
            )
            .unwrap();
            let hidden = route_obfuscated(
                &g,
                &coords,
                source,
                &obf,
                &Sha256Digest,
                NextHopRule::GreedyBest,
                &mut rng(19),
            )
            .unwrap();
            assert_eq!(hidden.nodes, direct.nodes);
            assert_eq!(hidden.target, plain);
        }
    }

    #[test]
    fn trace_records_split_on_malicious_positions() {
        let path = RoutePath {
            nodes: [0u32, 1, 2, 3, 4, 5].map(NodeId::new).to_vec(),
            target: coord(&[7]),
        };
        // Malicious at positions 0, 3, 5: segments 1-2 and 4.
        let malicious: BTreeSet<NodeId> = [NodeId::new(0), NodeId::new(3), NodeId::new(5)].into();
        let records = extract_trace_records(&path, &malicious);
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].entry, NodeId::new(0));
        assert_eq!(records[0].segment_first, NodeId::new(1));
        assert_eq!(records[0].segment_last, NodeId::new(2));
        assert_eq!(records[0].exit, NodeId::new(3));
        assert_eq!(records[1].entry, NodeId::new(3));
        assert_eq!(records[1].segment_first, NodeId::new(4));
        assert_eq!(records[1].segment_last, NodeId::new(4));
        assert_eq!(records[1].exit, NodeId::new(5));
        assert!(records.iter().all(|r| r.target == coord(&[7])));
    }

    #[test]
    fn adjacent_malicious_nodes_yield_no_record() {
        let path = RoutePath {
            nodes: [0u32, 1, 2, 3].map(NodeId::new).to_vec(),
            target: coord(&[]),
        };
        let malicious: BTreeSet<NodeId> = [NodeId::new(1), NodeId::new(2)].into();
        assert!(extract_trace_records(&path, &malicious).is_empty());
    }

    #[test]
    fn unobserved_prefix_and_suffix_produce_no_records() {
        let path = RoutePath {
            nodes: [0u32, 1, 2, 3, 4].map(NodeId::new).to_vec(),
            target: coord(&[]),
        };
        // Single malicious position: nothing passes between two of them.
        let malicious: BTreeSet<NodeId> = [NodeId::new(2)].into();
        assert!(extract_trace_records(&path, &malicious).is_empty());
    }

    #[test]
    fn route_validates_inputs() {
        let g = OverlayGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let coords = CoordinateMap::from_vec(vec![Coordinate::root(), coord(&[0])]);
        assert_eq!(
            route(
                &g,
                &coords,
                NodeId::new(0),
                &coord(&[0]),
                NextHopRule::GreedyBest,
                &mut rng(0)
            )
            .unwrap_err(),
            RoutingError::MapSizeMismatch {
                graph: 3,
                coords: 2
            }
        );
    }
}
