//! Implementations of the four subcommands.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rste_core::embedding::{assign_coordinates, build_bfs_tree, CoordinateMap, EmbeddingMode};
use rste_core::experiment::{
    execute_task, plan_tasks, render_csv, summarize, AdversaryBehavior, ExperimentConfig,
    ExperimentError, ExperimentResult, RunRecord,
};
use rste_core::graph::{NodeId, OverlayGraph};
use rste_core::knowledge::{init_knowledge, KnowledgeBase, LinkKind, NodeClass};
use rste_core::routing::{extract_trace_records, route};
use rste_core::trajectory::{
    build_hypothetical_overlay, enumerate_plausible_trajectories, proven_consecutive_pairs,
    HypoNode, HypotheticalOverlay, TrajectoryError,
};

use crate::coords::{read_coords_file, render_coords, to_coordinate_map};
use crate::source::{load_graph, parse_id_list, IdMap, LoadOptions};
use crate::{EmbedArgs, ExperimentArgs, InferArgs, TraceArgs};

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run_embed(args: &EmbedArgs) -> Result<()> {
    let g = args.graph.load()?;
    let ids = IdMap::new(&g);
    let mode = args.mode.to_mode(args.bits);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let root = match args.root {
        Some(original) => ids.resolve(original)?,
        None => NodeId::new(rng.random_range(0..g.node_count() as u32)),
    };
    let tree = build_bfs_tree(&g, root, &mut rng).context(
        "building the spanning tree; for fragmented file graphs try --largest-component",
    )?;
    let coords = assign_coordinates(&tree, mode, &mut rng)?;
    write_output(args.out.as_deref(), &render_coords(&g, &coords, mode))
}

/// Builds the adversary's knowledge after every observable participant
/// (members and compromised neighbors) has announced its own coordinate.
fn observe_own_coordinates(
    g: &OverlayGraph,
    coords: &CoordinateMap,
    malicious: &BTreeSet<NodeId>,
    mode: EmbeddingMode,
) -> Result<KnowledgeBase> {
    let mut kb = init_knowledge(g, malicious)?;
    let mut observers = malicious.clone();
    observers.extend(g.neighborhood(malicious)?);
    for &v in &observers {
        kb.observe_coordinate(coords.get(v), Some(v), mode)?;
    }
    Ok(kb)
}

pub fn run_infer(args: &InferArgs) -> Result<()> {
    let g = args.graph.load()?;
    let ids = IdMap::new(&g);
    let (mode, by_original) = read_coords_file(&args.coords)?;
    let coords = to_coordinate_map(&g, &by_original)?;
    let malicious: BTreeSet<NodeId> = parse_id_list(&args.malicious, &ids)?.into_iter().collect();
    let compromised = g.neighborhood(&malicious)?;
    let kb = observe_own_coordinates(&g, &coords, &malicious, mode)?;

    let mut by_class = [0usize; 3];
    for id in kb.node_ids() {
        by_class[match kb.class(id)? {
            NodeClass::Malicious => 0,
            NodeClass::Compromised => 1,
            NodeClass::Pseudonymous => 2,
        }] += 1;
    }
    let observed_links = kb
        .links()
        .filter(|&(_, kind)| kind == LinkKind::Observed)
        .count();
    println!(
        "graph {}: {} nodes, {} edges",
        args.graph.graph,
        g.node_count(),
        g.edge_count()
    );
    println!(
        "malicious members: {}, compromised neighbors: {}",
        malicious.len(),
        compromised.len()
    );
    println!(
        "known nodes: {} ({} malicious, {} compromised, {} pseudonymous)",
        kb.node_count(),
        by_class[0],
        by_class[1],
        by_class[2]
    );
    println!(
        "known links: {} ({} observed, {} inferred-tree)",
        kb.link_count(),
        observed_links,
        kb.link_count() - observed_links
    );
    if let Some(prefix) = &args.out {
        let nodes_path = PathBuf::from(format!("{}.nodes.csv", prefix.display()));
        let links_path = PathBuf::from(format!("{}.links.csv", prefix.display()));
        fs::write(&nodes_path, kb.nodes_csv())
            .with_context(|| format!("writing {}", nodes_path.display()))?;
        fs::write(&links_path, kb.links_csv())
            .with_context(|| format!("writing {}", links_path.display()))?;
        println!(
            "wrote {} and {}",
            nodes_path.display(),
            links_path.display()
        );
    }
    Ok(())
}

/// Renders a hypothetical node for trace output: identified nodes by
/// original id, pseudonyms as `c:<coordinate>`, dummies as `d:<coordinate>`.
fn render_hyponode(
    g: &OverlayGraph,
    kb: &KnowledgeBase,
    h: &HypotheticalOverlay,
    n: HypoNode,
) -> String {
    let coordinate = |n| h.coordinate(n).map(|c| c.to_string()).unwrap_or_default();
    match n {
        HypoNode::Known(id) => match kb.binding(id).ok().flatten() {
            Some(v) => g.original_id(v).to_string(),
            None => format!("c:{}", coordinate(n)),
        },
        HypoNode::Dummy(_) => format!("d:{}", coordinate(n)),
    }
}

pub fn run_trace(args: &TraceArgs) -> Result<()> {
    let g = args.graph.load()?;
    let ids = IdMap::new(&g);
    let (mode, by_original) = read_coords_file(&args.coords)?;
    let coords = to_coordinate_map(&g, &by_original)?;
    let malicious: BTreeSet<NodeId> = parse_id_list(&args.malicious, &ids)?.into_iter().collect();
    if g.node_count() < 2 {
        bail!("tracing needs at least two nodes to route between");
    }
    let rule = args.forwarding.rule();
    let mut kb = observe_own_coordinates(&g, &coords, &malicious, mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);

    let mut csv = String::new();
    csv.push_str(&format!(
        "# graph={} coords={} malicious={} messages={} seed={} forwarding={} limit={}\n",
        args.graph.graph,
        args.coords.display(),
        args.malicious,
        args.messages,
        args.seed,
        args.forwarding.label(),
        args.limit
    ));
    csv.push_str(
        "msg,entry,segment_first,segment_last,exit,target,trajectories,truncated,proven_links\n",
    );
    let mut records_analyzed = 0usize;
    for msg in 0..args.messages {
        let source = NodeId::new(rng.random_range(0..g.node_count() as u32));
        let destination = loop {
            let v = NodeId::new(rng.random_range(0..g.node_count() as u32));
            if v != source {
                break v;
            }
        };
        let target = coords.get(destination).clone();
        let path = route(&g, &coords, source, &target, rule, &mut rng)?;
        for record in extract_trace_records(&path, &malicious) {
            // The collective reads the target coordinate off the message
            // before reasoning about the trace.
            kb.observe_coordinate(&record.target, None, mode)?;
            let h = build_hypothetical_overlay(&kb)?;
            let set =
                enumerate_plausible_trajectories(&h, &kb, &record, &record.target, args.limit)?;
            let proven = if set.truncated {
                String::from("?")
            } else {
                match proven_consecutive_pairs(&h, &kb, &record, &record.target, args.limit) {
                    Ok(pairs) => pairs
                        .iter()
                        .map(|&(a, b)| {
                            format!(
                                "{}->{}",
                                render_hyponode(&g, &kb, &h, a),
                                render_hyponode(&g, &kb, &h, b)
                            )
                        })
                        .collect::<Vec<_>>()
                        .join(";"),
                    Err(TrajectoryError::NoPlausibleTrajectories) => String::from("-"),
                    Err(e) => return Err(e.into()),
                }
            };
            csv.push_str(&format!(
                "{msg},{},{},{},{},{},{},{},{proven}\n",
                g.original_id(record.entry),
                g.original_id(record.segment_first),
                g.original_id(record.segment_last),
                g.original_id(record.exit),
                record.target,
                set.trajectories.len(),
                if set.truncated { "yes" } else { "no" },
            ));
            records_analyzed += 1;
        }
    }
    let summary = format!(
        "routed {} messages, analyzed {} trace records",
        args.messages, records_analyzed
    );
    match &args.out {
        Some(path) => {
            fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
            println!("{summary} -> {}", path.display());
        }
        None => {
            print!("{csv}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

/// One parsed experiment config file.
#[derive(Debug)]
struct ExperimentFile {
    graph: String,
    config: ExperimentConfig,
    output: Option<PathBuf>,
    load: LoadOptions,
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => bail!("expected true or false, found {other:?}"),
    }
}

/// Parses a `key = value` experiment config (one pair per line, `#`
/// comments). Unknown and duplicate keys are rejected.
fn parse_experiment_file(text: &str) -> Result<ExperimentFile> {
    let mut map: BTreeMap<&str, &str> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected key = value, found {line:?}", idx + 1))?;
        if map.insert(k.trim(), v.trim()).is_some() {
            bail!("line {}: key {} given twice", idx + 1, k.trim());
        }
    }
    let mut require = |key: &str| {
        map.remove(key)
            .with_context(|| format!("config is missing required key {key}"))
    };
    let graph = require("graph")?.to_string();
    let mode_value = require("mode")?;
    let n_compromised: usize = require("n_compromised")?
        .parse()
        .context("n_compromised must be an integer")?;
    let num_sets: usize = require("num_sets")?
        .parse()
        .context("num_sets must be an integer")?;
    let runs_per_set: usize = require("runs_per_set")?
        .parse()
        .context("runs_per_set must be an integer")?;
    let bits = map.remove("bits");
    let mode = match mode_value {
        "enum" | "enumeration" => {
            if bits.is_some() {
                bail!("bits= only applies to random mode");
            }
            EmbeddingMode::Enumeration
        }
        "random" => match bits {
            Some(b) => EmbeddingMode::Random {
                bits: b.parse().context("bits must be an integer")?,
            },
            None => EmbeddingMode::random_default(),
        },
        other => bail!("unknown mode {other:?} (use enum or random)"),
    };
    let behavior = match map.remove("behavior").unwrap_or("honest") {
        "honest" => AdversaryBehavior::Honest,
        "leaf-only" => AdversaryBehavior::LeafOnly,
        other => bail!("unknown behavior {other:?} (use honest or leaf-only)"),
    };
    let master_seed: u64 = map
        .remove("master_seed")
        .map(str::parse)
        .transpose()
        .context("master_seed must be an integer")?
        .unwrap_or(0);
    let output = map.remove("output").map(PathBuf::from);
    let mutual_only = map
        .remove("mutual_only")
        .map(parse_bool)
        .transpose()
        .context("mutual_only")?
        .unwrap_or(false);
    let largest_component = map
        .remove("largest_component")
        .map(parse_bool)
        .transpose()
        .context("largest_component")?
        .unwrap_or(false);
    if let Some(key) = map.keys().next() {
        bail!("unknown config key {key:?}");
    }
    Ok(ExperimentFile {
        config: ExperimentConfig {
            graph_label: graph.clone(),
            mode,
            behavior,
            n_compromised,
            num_sets,
            runs_per_set,
            master_seed,
        },
        graph,
        output,
        load: LoadOptions {
            mutual_only,
            largest_component,
        },
    })
}

/// Runs all planned (set, run) cells in parallel. Results are identical to
/// the sequential runner: tasks carry their own derived seeds, and records
/// are emitted in (set, run) order.
fn run_experiment_parallel(
    g: &OverlayGraph,
    config: &ExperimentConfig,
) -> Result<ExperimentResult, ExperimentError> {
    let tasks = plan_tasks(g, config)?;
    let mut runs: Vec<RunRecord> = tasks
        .par_iter()
        .map(|task| execute_task(g, config, task))
        .collect::<Result<_, _>>()?;
    runs.sort_by_key(|r| (r.set_index, r.run_index));
    let values: Vec<f64> = runs.iter().map(|r| r.n_pseudonyms as f64).collect();
    Ok(ExperimentResult {
        config: config.clone(),
        runs,
        statistics: summarize(&values),
    })
}

pub fn run_experiment_cmd(args: &ExperimentArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let file = parse_experiment_file(&text)
        .with_context(|| format!("parsing config {}", args.config.display()))?;
    let g = load_graph(&file.graph, file.load)?;
    let result = run_experiment_parallel(&g, &file.config)?;
    let csv = render_csv(&result);
    let s = result.statistics;
    let summary = format!(
        "mean pseudonyms {:.3} +- {:.3} (99% CI) over {} runs",
        s.mean,
        s.ci99_half_width,
        result.runs.len()
    );
    match &file.output {
        Some(path) => {
            fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
            println!("{summary}");
            println!("wrote {}", path.display());
        }
        None => {
            print!("{csv}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}
