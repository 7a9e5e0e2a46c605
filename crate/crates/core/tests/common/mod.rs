//! Helpers shared by the integration and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rste_core::embedding::{
    assign_coordinates, build_adversarial_tree, build_bfs_tree, Coordinate, CoordinateMap,
    EmbeddingMode, SpanningTree,
};
use rste_core::experiment::AdversaryBehavior;
use rste_core::graph::{NodeId, OverlayGraph};
use rste_core::knowledge::{init_knowledge, KnowledgeBase, NodeClass};
use rste_core::synth::{generate, SyntheticModel};
use rste_core::trajectory::{HypoNode, HypotheticalOverlay};

pub fn scale_free(nodes: usize, attach_edges: usize, seed: u64) -> OverlayGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate(SyntheticModel::ScaleFree { attach_edges }, nodes, &mut rng).unwrap()
}

pub fn small_world(nodes: usize, ring_degree: usize, rewire_prob: f64, seed: u64) -> OverlayGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate(
        SyntheticModel::SmallWorld {
            ring_degree,
            rewire_prob,
        },
        nodes,
        &mut rng,
    )
    .unwrap()
}

/// Everything one simulated embedding produced, ground truth included.
pub struct GroundTruth {
    pub tree: SpanningTree,
    pub coords: CoordinateMap,
    pub kb: KnowledgeBase,
    pub compromised: BTreeSet<NodeId>,
}

/// Runs one embedding with full visibility: random root, tree per behavior,
/// coordinates per mode, then the adversary ingests each member's and each
/// compromised node's coordinate in assignment order.
pub fn simulate_with_ground_truth(
    g: &OverlayGraph,
    malicious: &BTreeSet<NodeId>,
    mode: EmbeddingMode,
    behavior: AdversaryBehavior,
    rng: &mut impl Rng,
) -> GroundTruth {
    let root = NodeId::new(rng.random_range(0..g.node_count() as u32));
    let tree = match behavior {
        AdversaryBehavior::Honest => build_bfs_tree(g, root, rng).unwrap(),
        AdversaryBehavior::LeafOnly => build_adversarial_tree(g, root, malicious, rng).unwrap(),
    };
    let coords = assign_coordinates(&tree, mode, rng).unwrap();
    let compromised = g.neighborhood(malicious).unwrap();
    let mut kb = init_knowledge(g, malicious).unwrap();
    for v in tree.assignment_order() {
        if malicious.contains(&v) || compromised.contains(&v) {
            kb.observe_coordinate(coords.get(v), Some(v), mode).unwrap();
        }
    }
    GroundTruth {
        tree,
        coords,
        kb,
        compromised,
    }
}

/// Maps a true node's coordinate into the hypothetical overlay: the known
/// node holding it, or the dummy at the matching depth below the deepest
/// known non-malicious prefix holder. Returns `None` when no stand-in
/// exists (which would disprove dummy sufficiency).
pub fn hypothetical_node_for(
    kb: &KnowledgeBase,
    h: &HypotheticalOverlay,
    c: &Coordinate,
) -> Option<HypoNode> {
    if let Some(id) = kb.node_by_coordinate(c) {
        return Some(HypoNode::Known(id));
    }
    for len in (0..c.len()).rev() {
        if let Some(host) = kb.node_by_coordinate(&c.prefix(len)) {
            if kb.class(host).unwrap() == NodeClass::Malicious {
                continue;
            }
            let chain = h.dummy_chain(host);
            return chain.get(c.len() - len - 1).map(|&d| HypoNode::Dummy(d));
        }
    }
    None
}
