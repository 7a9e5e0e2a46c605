//! Graph sources: edge-list files or synthetic model specs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rste_core::graph::{NodeId, OverlayGraph};
use rste_core::synth::{generate, SyntheticModel};

/// Load options shared by every graph-consuming subcommand.
#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Keep only reciprocated directed edges of a file source.
    pub mutual_only: bool,
    /// Reduce a file source to its largest connected component.
    pub largest_component: bool,
}

/// Loads a graph from `spec`: either a synthetic model spec of the form
/// `scale-free(n=1000,m=3,seed=7)` / `small-world(n=1000,k=10,p=0.1,seed=3)`
/// or a path to a whitespace-separated edge-list file (`#` comments).
pub fn load_graph(spec: &str, options: LoadOptions) -> Result<OverlayGraph> {
    if let Some(model) = parse_synthetic(spec)? {
        let (model, nodes, seed) = model;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return generate(model, nodes, &mut rng)
            .with_context(|| format!("generating synthetic graph {spec:?}"));
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading edge list {}", path.display()))?;
    let mut g = OverlayGraph::parse_edge_list(&text, options.mutual_only)
        .with_context(|| format!("parsing edge list {}", path.display()))?;
    if options.largest_component {
        g = g.largest_connected_component();
    }
    anyhow::ensure!(g.node_count() > 0, "graph {spec:?} has no nodes");
    Ok(g)
}

/// Parses a synthetic spec, or returns `None` when `spec` names a file.
fn parse_synthetic(spec: &str) -> Result<Option<(SyntheticModel, usize, u64)>> {
    let Some((name, rest)) = spec.split_once('(') else {
        return Ok(None);
    };
    if !matches!(name, "scale-free" | "small-world") {
        return Ok(None);
    }
    let Some(body) = rest.strip_suffix(')') else {
        bail!("synthetic spec {spec:?} is missing the closing parenthesis");
    };
    let mut params = BTreeMap::new();
    for pair in body.split(',') {
        let Some((k, v)) = pair.split_once('=') else {
            bail!("synthetic spec parameter {pair:?} is not key=value");
        };
        if params.insert(k.trim(), v.trim()).is_some() {
            bail!("synthetic spec parameter {} given twice", k.trim());
        }
    }
    let mut take = |key: &str| {
        params
            .remove(key)
            .with_context(|| format!("synthetic spec {spec:?} is missing {key}="))
    };
    let parsed = match name {
        "scale-free" => {
            let n: usize = take("n")?.parse().context("n must be an integer")?;
            let m: usize = take("m")?.parse().context("m must be an integer")?;
            let seed: u64 = take("seed")?.parse().context("seed must be an integer")?;
            (SyntheticModel::ScaleFree { attach_edges: m }, n, seed)
        }
        _ => {
            let n: usize = take("n")?.parse().context("n must be an integer")?;
            let k: usize = take("k")?.parse().context("k must be an integer")?;
            let p: f64 = take("p")?.parse().context("p must be a number")?;
            let seed: u64 = take("seed")?.parse().context("seed must be an integer")?;
            (
                SyntheticModel::SmallWorld {
                    ring_degree: k,
                    rewire_prob: p,
                },
                n,
                seed,
            )
        }
    };
    if let Some(key) = params.keys().next() {
        bail!("synthetic spec {spec:?} has unknown parameter {key}");
    }
    Ok(Some(parsed))
}

/// Maps user-facing original node ids to dense internal ids.
pub struct IdMap {
    by_original: BTreeMap<u64, NodeId>,
}

impl IdMap {
    pub fn new(g: &OverlayGraph) -> Self {
        IdMap {
            by_original: g.nodes().map(|v| (g.original_id(v), v)).collect(),
        }
    }

    pub fn resolve(&self, original: u64) -> Result<NodeId> {
        self.by_original
            .get(&original)
            .copied()
            .with_context(|| format!("node {original} does not exist in the graph"))
    }
}

/// Parses a comma-separated list of original node ids.
pub fn parse_id_list(list: &str, ids: &IdMap) -> Result<Vec<NodeId>> {
    list.split(',')
        .map(|part| {
            let original: u64 = part
                .trim()
                .parse()
                .with_context(|| format!("invalid node id {part:?}"))?;
            ids.resolve(original)
        })
        .collect()
}
