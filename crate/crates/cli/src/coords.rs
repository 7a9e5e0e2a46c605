//! Coordinate file format: one embedding as CSV keyed by original node id.
//!
//! ```text
//! # mode=enumeration          (or: # mode=random bits=128)
//! node,coordinate
//! 0,
//! 7,0
//! 12,0:3
//! ```
//!
//! Coordinates are colon-joined elements; the root's coordinate is empty.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rste_core::embedding::{Coordinate, CoordinateMap, EmbeddingMode};
use rste_core::graph::OverlayGraph;

/// Renders an embedding of `g`, rows in ascending original id.
pub fn render_coords(g: &OverlayGraph, coords: &CoordinateMap, mode: EmbeddingMode) -> String {
    let mut out = String::new();
    match mode {
        EmbeddingMode::Enumeration => out.push_str("# mode=enumeration\n"),
        EmbeddingMode::Random { bits } => {
            out.push_str(&format!("# mode=random bits={bits}\n"));
        }
    }
    out.push_str("node,coordinate\n");
    let mut rows: Vec<(u64, &Coordinate)> = g
        .nodes()
        .map(|v| (g.original_id(v), coords.get(v)))
        .collect();
    rows.sort_by_key(|&(id, _)| id);
    for (id, c) in rows {
        out.push_str(&format!("{id},{c}\n"));
    }
    out
}

/// Parses a coordinate file into its mode and per-node coordinates.
pub fn parse_coords(text: &str) -> Result<(EmbeddingMode, BTreeMap<u64, Coordinate>)> {
    let mut lines = text.lines().enumerate();
    let (_, mode_line) = lines.next().context("coordinate file is empty")?;
    let mode = parse_mode_line(mode_line)?;
    let (_, header) = lines
        .next()
        .context("coordinate file has no column header")?;
    if header.trim() != "node,coordinate" {
        bail!("expected header `node,coordinate`, found {header:?}");
    }
    let mut map = BTreeMap::new();
    for (idx, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (id, coord) = line
            .split_once(',')
            .with_context(|| format!("line {}: missing comma in {line:?}", idx + 1))?;
        let id: u64 = id
            .trim()
            .parse()
            .with_context(|| format!("line {}: invalid node id {id:?}", idx + 1))?;
        let coord: Coordinate = coord
            .trim()
            .parse()
            .with_context(|| format!("line {}: invalid coordinate for node {id}", idx + 1))?;
        if map.insert(id, coord).is_some() {
            bail!("line {}: node {id} appears twice", idx + 1);
        }
    }
    Ok((mode, map))
}

fn parse_mode_line(line: &str) -> Result<EmbeddingMode> {
    let body = line
        .trim()
        .strip_prefix('#')
        .with_context(|| format!("expected `# mode=...` header, found {line:?}"))?
        .trim();
    match body.strip_prefix("mode=") {
        Some("enumeration") => Ok(EmbeddingMode::Enumeration),
        Some(rest) => {
            let Some(rest) = rest.strip_prefix("random") else {
                bail!("unknown embedding mode in header {line:?}");
            };
            let bits: u32 = rest
                .trim()
                .strip_prefix("bits=")
                .with_context(|| format!("random mode header needs bits=, found {line:?}"))?
                .parse()
                .with_context(|| format!("invalid bits value in header {line:?}"))?;
            Ok(EmbeddingMode::Random { bits })
        }
        None => bail!("expected `# mode=...` header, found {line:?}"),
    }
}

/// Reads a coordinate file from disk.
pub fn read_coords_file(path: &Path) -> Result<(EmbeddingMode, BTreeMap<u64, Coordinate>)> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading coordinate file {}", path.display()))?;
    parse_coords(&text).with_context(|| format!("parsing coordinate file {}", path.display()))
}

/// Aligns file coordinates with the graph: every node must have exactly one
/// coordinate, coordinates must be unique, and no row may name a foreign
/// node.
pub fn to_coordinate_map(
    g: &OverlayGraph,
    by_original: &BTreeMap<u64, Coordinate>,
) -> Result<CoordinateMap> {
    let known: BTreeMap<u64, _> = g.nodes().map(|v| (g.original_id(v), v)).collect();
    for id in by_original.keys() {
        if !known.contains_key(id) {
            bail!("coordinate file names node {id}, which is not in the graph");
        }
    }
    let mut coords = vec![Coordinate::root(); g.node_count()];
    for (&id, &v) in &known {
        let c = by_original
            .get(&id)
            .with_context(|| format!("coordinate file is missing node {id}"))?;
        coords[v.index()] = c.clone();
    }
    let mut seen: BTreeMap<&Coordinate, u64> = BTreeMap::new();
    for (&id, &v) in &known {
        if let Some(previous) = seen.insert(&coords[v.index()], id) {
            bail!(
                "nodes {previous} and {id} share the coordinate {:?}",
                coords[v.index()].to_string()
            );
        }
    }
    Ok(CoordinateMap::from_vec(coords))
}
