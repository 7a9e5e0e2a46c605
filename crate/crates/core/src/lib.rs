//! Deterministic simulator and attack library for rooted spanning-tree
//! embeddings on friend-to-friend overlays.
//!
//! The library models overlays whose links mirror a social graph, embeds them
//! by assigning every node a coordinate derived from a rooted spanning tree,
//! and routes messages greedily under the tree distance. On top of that it
//! implements the adversary side: colluding malicious participants record the
//! coordinates and message fragments they see, derive a knowledge base of
//! pseudonymous nodes and links, and enumerate which routes through a
//! hypothetical overlay could explain each observed message. The experiment
//! layer reproduces the full inference study with seeded, replayable runs.
//!
//! All randomness flows through caller-supplied [`rand::Rng`] values and all
//! collections iterate in a fixed order, so every result is reproducible from
//! a seed. The crate is `no_std` (with `alloc`); file formats and the command
//! line front end live in the companion `rste-cli` crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod embedding;
pub mod experiment;
pub mod graph;
pub mod knowledge;
pub mod routing;
pub mod synth;
pub mod trajectory;

pub use embedding::{Coordinate, EmbeddingMode, SpanningTree};
pub use experiment::{AdversaryBehavior, ExperimentConfig, ExperimentResult};
pub use graph::{NodeId, OverlayGraph};
pub use knowledge::{KnowledgeBase, KnownNodeId, LinkKind, NodeClass};
pub use routing::{RoutePath, TraceRecord};
pub use trajectory::{HypoNode, HypotheticalOverlay};
