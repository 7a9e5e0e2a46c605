//! Randomized properties of coordinates, the tree metric, and the
//! observation closure.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rste_core::embedding::{common_prefix_length, Coordinate, EmbeddingMode};
use rste_core::graph::OverlayGraph;
use rste_core::knowledge::{init_knowledge, KnowledgeBase, LinkKind};
use rste_core::routing::tree_distance;

fn coordinate(max_len: usize, max_element: u128) -> impl Strategy<Value = Coordinate> {
    prop::collection::vec(0..=max_element, 0..=max_len).prop_map(Coordinate::from_elements)
}

/// Knowledge built purely from unattributed observations, canonicalized by
/// coordinate so internal id assignment order cannot matter.
fn observe_all(coords: &[Coordinate], mode: EmbeddingMode) -> KnowledgeBase {
    let g = OverlayGraph::from_edges(2, [(0, 1)]).unwrap();
    let mut kb = init_knowledge(&g, &BTreeSet::new()).unwrap();
    for c in coords {
        kb.observe_coordinate(c, None, mode).unwrap();
    }
    kb
}

type Canonical = (
    BTreeSet<Coordinate>,
    BTreeSet<(Coordinate, Coordinate, LinkKind)>,
);

fn canonical(kb: &KnowledgeBase) -> Canonical {
    let coordinate_of = |id| {
        kb.coordinate(id)
            .unwrap()
            .expect("closure nodes bear coordinates")
    };
    let nodes = kb.node_ids().map(|id| coordinate_of(id).clone()).collect();
    let links = kb
        .links()
        .map(|((a, b), kind)| {
            let (ca, cb) = (coordinate_of(a).clone(), coordinate_of(b).clone());
            if ca <= cb {
                (ca, cb, kind)
            } else {
                (cb, ca, kind)
            }
        })
        .collect();
    (nodes, links)
}

proptest! {
    #[test]
    fn coordinate_display_parses_back(c in coordinate(6, u128::MAX)) {
        let parsed: Coordinate = c.to_string().parse().unwrap();
        prop_assert_eq!(parsed, c);
    }

    #[test]
    fn tree_distance_is_a_metric(
        a in coordinate(5, 3),
        b in coordinate(5, 3),
        c in coordinate(5, 3),
    ) {
        prop_assert_eq!(tree_distance(&a, &b), tree_distance(&b, &a));
        prop_assert_eq!(tree_distance(&a, &b) == 0, a == b);
        prop_assert!(
            tree_distance(&a, &c) <= tree_distance(&a, &b) + tree_distance(&b, &c)
        );
    }

    #[test]
    fn common_prefixes_are_maximal(a in coordinate(5, 2), b in coordinate(5, 2)) {
        let k = common_prefix_length(&a, &b);
        prop_assert!(k <= a.len().min(b.len()));
        prop_assert_eq!(a.prefix(k), b.prefix(k));
        if k < a.len() && k < b.len() {
            prop_assert_ne!(a.elements()[k], b.elements()[k]);
        }
    }

    #[test]
    fn observation_order_is_irrelevant(
        (coords, shuffled) in prop::collection::vec(coordinate(4, 3), 1..6)
            .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()))
    ) {
        for mode in [EmbeddingMode::Enumeration, EmbeddingMode::random_default()] {
            let forward = observe_all(&coords, mode);
            let reordered = observe_all(&shuffled, mode);
            prop_assert_eq!(canonical(&forward), canonical(&reordered));
        }
    }

    #[test]
    fn closure_links_every_node_to_its_parent(
        coords in prop::collection::vec(coordinate(4, 3), 1..6)
    ) {
        for mode in [EmbeddingMode::Enumeration, EmbeddingMode::random_default()] {
            let kb = observe_all(&coords, mode);
            for id in kb.node_ids() {
                let c = kb.coordinate(id).unwrap().unwrap().clone();
                if let Some(parent) = c.parent() {
                    let pid = kb.node_by_coordinate(&parent);
                    prop_assert!(pid.is_some(), "parent of {} missing", c);
                    prop_assert!(kb.has_link(id, pid.unwrap()));
                }
            }
        }
    }

    #[test]
    fn more_observations_never_shrink_knowledge(
        coords in prop::collection::vec(coordinate(4, 3), 2..6),
        cut in 1usize..5,
    ) {
        let cut = cut.min(coords.len() - 1);
        for mode in [EmbeddingMode::Enumeration, EmbeddingMode::random_default()] {
            let partial = observe_all(&coords[..cut], mode);
            let full = observe_all(&coords, mode);
            prop_assert!(partial.count_pseudonyms() <= full.count_pseudonyms());
            let (partial_nodes, partial_links) = canonical(&partial);
            let (full_nodes, full_links) = canonical(&full);
            prop_assert!(partial_nodes.is_subset(&full_nodes));
            prop_assert!(partial_links.is_subset(&full_links));
        }
    }
}
