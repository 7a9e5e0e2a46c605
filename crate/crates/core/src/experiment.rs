//! Experiment harness: malicious-set selection, full embedding simulations,
//! and aggregation of inferred-pseudonym counts across seeds.
//!
//! A study cell fixes a graph, an embedding mode, an adversary behavior, and
//! a compromised-count target, then measures the mean number of pseudonyms
//! the colluding nodes infer over many malicious sets and embedding runs.
//! Every random decision derives from one master seed through a documented
//! hierarchy, so any single run is reproducible in isolation and complete
//! reruns are bit-identical. Runs are mutually independent; callers may
//! execute planned tasks in parallel and aggregate by (set, run) index.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::{
    assign_coordinates, build_adversarial_tree, build_bfs_tree, EmbeddingError, EmbeddingMode,
};
use crate::graph::{GraphError, NodeId, OverlayGraph};
use crate::knowledge::{init_knowledge, KnowledgeBase, KnowledgeError};

/// Restart budget for malicious-set selection before settling for the
/// closest achieved compromised count.
pub const SELECTION_RESTART_BUDGET: usize = 1000;

/// Largest tolerated relative deviation between achieved and requested
/// compromised counts when the budget runs out.
pub const SELECTION_TOLERANCE: f64 = 0.05;

/// 99.5th percentile of the standard normal: two-sided 99% confidence.
pub const Z99: f64 = 2.575_829_303_548_900_4;

/// Errors raised by selection, simulation, and experiment orchestration.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    /// No restart got within tolerance of the requested compromised count.
    #[error(
        "malicious-set selection reached {achieved} compromised nodes for target {target}, \
         beyond the {SELECTION_TOLERANCE} relative tolerance"
    )]
    SelectionDeviation { target: usize, achieved: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

/// How malicious nodes participate in tree construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdversaryBehavior {
    /// Follow the embedding algorithm faithfully.
    Honest,
    /// Suppress parent announcements towards honest neighbors, always
    /// attaching as leaves (a malicious root still behaves correctly).
    LeafOnly,
}

impl fmt::Display for AdversaryBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdversaryBehavior::Honest => "honest",
            AdversaryBehavior::LeafOnly => "leaf-only",
        })
    }
}

/// Stable cell label for an embedding mode in output files.
pub fn mode_label(mode: EmbeddingMode) -> &'static str {
    match mode {
        EmbeddingMode::Enumeration => "enumeration",
        EmbeddingMode::Random { .. } => "random",
    }
}

/// Purpose tag separating the seed streams of one (set, run) cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedDomain {
    /// Malicious-set selection; one stream per set (run index 0).
    Selection = 0,
    /// Root choice, tree construction, and coordinate assignment.
    Simulation = 1,
}

/// Child generator for one point of the seed hierarchy. The seed packs
/// (master, set, run, domain) as little-endian words, so every stream is
/// independent and reconstructible from the output header alone.
pub fn derive_rng(
    master_seed: u64,
    set_index: u64,
    run_index: u64,
    domain: SeedDomain,
) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&set_index.to_le_bytes());
    seed[16..24].copy_from_slice(&run_index.to_le_bytes());
    seed[24..32].copy_from_slice(&(domain as u64).to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Grows a malicious set by uniform random node addition until its outside
/// neighborhood reaches `n_compromised` nodes. Overshooting restarts the
/// walk; after the restart budget the closest snapshot wins if it deviates
/// by at most [`SELECTION_TOLERANCE`], else selection fails. Returns the set
/// and the achieved compromised count.
pub fn select_malicious_set(
    g: &OverlayGraph,
    n_compromised: usize,
    rng: &mut impl Rng,
) -> Result<(BTreeSet<NodeId>, usize), ExperimentError> {
    if n_compromised == 0 {
        return Ok((BTreeSet::new(), 0));
    }
    let n = g.node_count();
    if n_compromised >= n {
        return Err(ExperimentError::InvalidConfig(String::from(
            "compromised target must be below the node count",
        )));
    }
    let mut best: Option<(BTreeSet<NodeId>, usize)> = None;
    for _ in 0..SELECTION_RESTART_BUDGET {
        let mut pool: Vec<NodeId> = (0..n as u32).map(NodeId::new).collect();
        let mut members: BTreeSet<NodeId> = BTreeSet::new();
        let mut covered: BTreeSet<NodeId> = BTreeSet::new();
        while let Some(v) = pick_uniform(&mut pool, rng) {
            members.insert(v);
            covered.remove(&v);
            for &u in g.neighbors(v) {
                if !members.contains(&u) {
                    covered.insert(u);
                }
            }
            let achieved = covered.len();
            if best
                .as_ref()
                .is_none_or(|(_, b)| achieved.abs_diff(n_compromised) < b.abs_diff(n_compromised))
            {
                best = Some((members.clone(), achieved));
            }
            if achieved == n_compromised {
                return Ok((members, achieved));
            }
            if achieved > n_compromised {
                break;
            }
        }
    }
    let (members, achieved) = best.expect("budget is positive and graphs are non-empty");
    let deviation = achieved.abs_diff(n_compromised) as f64 / n_compromised as f64;
    if deviation <= SELECTION_TOLERANCE {
        Ok((members, achieved))
    } else {
        Err(ExperimentError::SelectionDeviation {
            target: n_compromised,
            achieved,
        })
    }
}

fn pick_uniform(pool: &mut Vec<NodeId>, rng: &mut impl Rng) -> Option<NodeId> {
    if pool.is_empty() {
        return None;
    }
    let i = rng.random_range(0..pool.len());
    Some(pool.swap_remove(i))
}

/// Knobs for sensitivity checks on the simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimulationOptions {
    /// Feed each malicious node's own assigned coordinate into inference
    /// (the adversary trivially knows its own positions). On by default.
    pub include_member_coordinates: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            include_member_coordinates: true,
        }
    }
}

/// Runs one full embedding and feeds every observable coordinate to the
/// adversary: uniform random root, spanning tree per behavior, coordinates
/// per mode, then each compromised node's announcement (and each member's
/// own coordinate) ingested in assignment order. Returns the final
/// knowledge and its pseudonym count.
pub fn run_embedding_simulation(
    g: &OverlayGraph,
    malicious: &BTreeSet<NodeId>,
    mode: EmbeddingMode,
    behavior: AdversaryBehavior,
    rng: &mut impl Rng,
) -> Result<(KnowledgeBase, usize), ExperimentError> {
    run_embedding_simulation_with(
        g,
        malicious,
        mode,
        behavior,
        SimulationOptions::default(),
        rng,
    )
}

/// [`run_embedding_simulation`] with explicit options.
pub fn run_embedding_simulation_with(
    g: &OverlayGraph,
    malicious: &BTreeSet<NodeId>,
    mode: EmbeddingMode,
    behavior: AdversaryBehavior,
    options: SimulationOptions,
    rng: &mut impl Rng,
) -> Result<(KnowledgeBase, usize), ExperimentError> {
    // First draw is the root, keeping roots and tree structure shared
    // across modes under a common seed.
    let root = NodeId::new(rng.random_range(0..g.node_count() as u32));
    let tree = match behavior {
        AdversaryBehavior::Honest => build_bfs_tree(g, root, rng)?,
        AdversaryBehavior::LeafOnly => build_adversarial_tree(g, root, malicious, rng)?,
    };
    let coords = assign_coordinates(&tree, mode, rng)?;
    let compromised = g.neighborhood(malicious)?;
    let mut kb = init_knowledge(g, malicious)?;
    for v in tree.assignment_order() {
        let announces = compromised.contains(&v)
            || (options.include_member_coordinates && malicious.contains(&v));
        if announces {
            kb.observe_coordinate(coords.get(v), Some(v), mode)?;
        }
    }
    let pseudonyms = kb.count_pseudonyms();
    Ok((kb, pseudonyms))
}

/// One study cell: everything needed to reproduce its runs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExperimentConfig {
    /// Label for the graph source, recorded in output.
    pub graph_label: String,
    pub mode: EmbeddingMode,
    pub behavior: AdversaryBehavior,
    /// Requested compromised count per malicious set.
    pub n_compromised: usize,
    pub num_sets: usize,
    pub runs_per_set: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self, g: &OverlayGraph) -> Result<(), ExperimentError> {
        if self.num_sets == 0 {
            return Err(ExperimentError::InvalidConfig(String::from(
                "num_sets must be at least 1",
            )));
        }
        if self.runs_per_set == 0 {
            return Err(ExperimentError::InvalidConfig(String::from(
                "runs_per_set must be at least 1",
            )));
        }
        if self.n_compromised >= g.node_count() {
            return Err(ExperimentError::InvalidConfig(String::from(
                "n_compromised must be below the graph size",
            )));
        }
        Ok(())
    }
}

/// One planned simulation: a (set, run) cell with its malicious set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulationTask {
    pub set_index: usize,
    pub run_index: usize,
    pub malicious: BTreeSet<NodeId>,
    pub n_compromised_actual: usize,
}

/// Outcome of one simulation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunRecord {
    pub set_index: usize,
    pub run_index: usize,
    pub n_compromised_actual: usize,
    pub n_pseudonyms: usize,
}

/// Sample mean and normal-approximation 99% confidence half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Statistics {
    pub mean: f64,
    pub ci99_half_width: f64,
}

/// Mean and 99% confidence half-width of a sample; NaN for empty input,
/// zero half-width for a single value.
pub fn summarize(values: &[f64]) -> Statistics {
    let n = values.len();
    if n == 0 {
        return Statistics {
            mean: f64::NAN,
            ci99_half_width: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Statistics {
            mean,
            ci99_half_width: 0.0,
        };
    }
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Statistics {
        mean,
        ci99_half_width: Z99 * libm::sqrt(variance / n as f64),
    }
}

/// All runs of one cell plus their aggregate, ordered by (set, run).
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
    pub statistics: Statistics,
}

/// Selects the malicious set of every set index and lays out all (set, run)
/// cells. Tasks are independent given the config; schedulers may run them
/// in any order or in parallel.
pub fn plan_tasks(
    g: &OverlayGraph,
    config: &ExperimentConfig,
) -> Result<Vec<SimulationTask>, ExperimentError> {
    config.validate(g)?;
    let mut tasks = Vec::with_capacity(config.num_sets * config.runs_per_set);
    for set_index in 0..config.num_sets {
        let mut rng = derive_rng(
            config.master_seed,
            set_index as u64,
            0,
            SeedDomain::Selection,
        );
        let (malicious, n_compromised_actual) =
            select_malicious_set(g, config.n_compromised, &mut rng)?;
        for run_index in 0..config.runs_per_set {
            tasks.push(SimulationTask {
                set_index,
                run_index,
                malicious: malicious.clone(),
                n_compromised_actual,
            });
        }
    }
    Ok(tasks)
}

/// Runs one planned task under its derived seed.
pub fn execute_task(
    g: &OverlayGraph,
    config: &ExperimentConfig,
    task: &SimulationTask,
) -> Result<RunRecord, ExperimentError> {
    let mut rng = derive_rng(
        config.master_seed,
        task.set_index as u64,
        task.run_index as u64,
        SeedDomain::Simulation,
    );
    let (_, n_pseudonyms) =
        run_embedding_simulation(g, &task.malicious, config.mode, config.behavior, &mut rng)?;
    Ok(RunRecord {
        set_index: task.set_index,
        run_index: task.run_index,
        n_compromised_actual: task.n_compromised_actual,
        n_pseudonyms,
    })
}

/// Full sequential run of one cell: plan, execute in (set, run) order,
/// aggregate. Bit-identical across reruns of the same config.
pub fn run_experiment(
    g: &OverlayGraph,
    config: &ExperimentConfig,
) -> Result<ExperimentResult, ExperimentError> {
    let tasks = plan_tasks(g, config)?;
    let mut runs = Vec::with_capacity(tasks.len());
    for task in &tasks {
        runs.push(execute_task(g, config, task)?);
    }
    let values: Vec<f64> = runs.iter().map(|r| r.n_pseudonyms as f64).collect();
    Ok(ExperimentResult {
        config: config.clone(),
        runs,
        statistics: summarize(&values),
    })
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        let mut out = String::with_capacity(s.len() + 2);
        out.push('"');
        for ch in s.chars() {
            if ch == '"' {
                out.push('"');
            }
            out.push(ch);
        }
        out.push('"');
        out
    } else {
        String::from(s)
    }
}

/// Renders a result as CSV: two `#` header lines documenting the cell and
/// the seed hierarchy, then one row per run in (set, run) order.
pub fn render_csv(result: &ExperimentResult) -> String {
    let c = &result.config;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# graph={} mode={} behavior={} n_compromised_target={} num_sets={} runs_per_set={} \
         master_seed={}",
        c.graph_label,
        mode_label(c.mode),
        c.behavior,
        c.n_compromised,
        c.num_sets,
        c.runs_per_set,
        c.master_seed
    );
    let _ = writeln!(
        out,
        "# seeds: chacha8 over little-endian (master_seed, set_index, run_index, domain); \
         selection domain=0 with run_index=0, simulation domain=1"
    );
    out.push_str("graph,mode,behavior,n_compromised_target,set_index,run_index,n_compromised_actual,n_pseudonyms\n");
    let graph = csv_field(&c.graph_label);
    for r in &result.runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            graph,
            mode_label(c.mode),
            c.behavior,
            c.n_compromised,
            r.set_index,
            r.run_index,
            r.n_compromised_actual,
            r.n_pseudonyms
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Coordinate;
    use crate::synth::{generate, SyntheticModel};
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;

    fn star(leaves: u32) -> OverlayGraph {
        OverlayGraph::from_edges((leaves + 1) as usize, (1..=leaves).map(|i| (0, i))).unwrap()
    }

    #[test]
    fn star_selection_is_forced_to_the_center() {
        let g = star(7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (members, achieved) = select_malicious_set(&g, 7, &mut rng).unwrap();
        assert_eq!(members, [NodeId::new(0)].into());
        assert_eq!(achieved, 7);
    }

    #[test]
    fn unreachable_target_errors_with_achieved_count() {
        // Path 0-1-2-3: no malicious set yields 3 compromised nodes.
        let g = OverlayGraph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            select_malicious_set(&g, 3, &mut rng),
            Err(ExperimentError::SelectionDeviation {
                target: 3,
                achieved: 2
            })
        );
    }

    #[test]
    fn selection_prefers_exact_counts() {
        // On a 6-cycle any single node covers exactly two neighbors.
        let g =
            OverlayGraph::from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (members, achieved) = select_malicious_set(&g, 2, &mut rng).unwrap();
            assert_eq!(achieved, 2);
            assert_eq!(members.len(), 1);
        }
    }

    #[test]
    fn scale_free_selection_stays_within_tolerance() {
        let mut gen_rng = ChaCha8Rng::seed_from_u64(7);
        let g = generate(
            SyntheticModel::ScaleFree { attach_edges: 3 },
            10_000,
            &mut gen_rng,
        )
        .unwrap();
        for set in 0..20u64 {
            let mut rng = derive_rng(11, set, 0, SeedDomain::Selection);
            let (members, achieved) = select_malicious_set(&g, 200, &mut rng).unwrap();
            assert!((190..=210).contains(&achieved), "achieved {achieved}");
            // Reported count matches a direct recomputation.
            assert_eq!(g.neighborhood(&members).unwrap().len(), achieved);
        }
    }

    #[test]
    fn empty_malicious_set_infers_nothing() {
        let g = star(5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (kb, np) = run_embedding_simulation(
            &g,
            &BTreeSet::new(),
            EmbeddingMode::Enumeration,
            AdversaryBehavior::Honest,
            &mut rng,
        )
        .unwrap();
        assert_eq!(np, 0);
        assert_eq!(kb.node_count(), 0);
    }

    #[test]
    fn malicious_star_center_leaves_no_pseudonyms() {
        let g = star(6);
        for seed in 0..8 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, np) = run_embedding_simulation(
                &g,
                &[NodeId::new(0)].into(),
                EmbeddingMode::Enumeration,
                AdversaryBehavior::Honest,
                &mut rng,
            )
            .unwrap();
            // Every other node is compromised and announces itself.
            assert_eq!(np, 0);
        }
    }

    /// Path 0-1-2-3-4-5 with the single malicious node 2: the inference
    /// closure is small enough to derive by hand for every possible root.
    /// Enumeration mode additionally reveals a sibling of node 2's child
    /// when the root is node 1; prefix closure reveals unobserved ancestors
    /// for far roots.
    #[test]
    fn path_fixture_matches_hand_computed_closures() {
        let g = OverlayGraph::from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
        let malicious: BTreeSet<NodeId> = [NodeId::new(2)].into();
        let expected_enumeration = [1usize, 1, 0, 0, 1, 2];
        let expected_random = [1usize, 0, 0, 0, 1, 2];
        for seed in 0..12 {
            let mut probe = ChaCha8Rng::seed_from_u64(seed);
            let root = probe.random_range(0..6u32) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, np_enum) = run_embedding_simulation(
                &g,
                &malicious,
                EmbeddingMode::Enumeration,
                AdversaryBehavior::Honest,
                &mut rng,
            )
            .unwrap();
            assert_eq!(np_enum, expected_enumeration[root], "root {root}");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, np_random) = run_embedding_simulation(
                &g,
                &malicious,
                EmbeddingMode::random_default(),
                AdversaryBehavior::Honest,
                &mut rng,
            )
            .unwrap();
            assert_eq!(np_random, expected_random[root], "root {root}");
        }
    }

    /// Same seed, different mode: the root and tree structure stay fixed,
    /// so every identified node sits at the same depth in both runs.
    #[test]
    fn modes_share_roots_and_trees_under_one_seed() {
        let mut gen_rng = ChaCha8Rng::seed_from_u64(5);
        let g = generate(
            SyntheticModel::ScaleFree { attach_edges: 2 },
            60,
            &mut gen_rng,
        )
        .unwrap();
        let malicious: BTreeSet<NodeId> = [NodeId::new(3), NodeId::new(17)].into();
        for seed in 0..6 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (kb_enum, _) = run_embedding_simulation(
                &g,
                &malicious,
                EmbeddingMode::Enumeration,
                AdversaryBehavior::Honest,
                &mut rng,
            )
            .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (kb_random, _) = run_embedding_simulation(
                &g,
                &malicious,
                EmbeddingMode::random_default(),
                AdversaryBehavior::Honest,
                &mut rng,
            )
            .unwrap();
            for v in (0..60).map(NodeId::new) {
                let depth_of = |kb: &KnowledgeBase| {
                    kb.node_by_binding(v)
                        .and_then(|id| kb.coordinate(id).unwrap().map(Coordinate::len))
                };
                assert_eq!(depth_of(&kb_enum), depth_of(&kb_random), "node {v}");
            }
        }
    }

    #[test]
    fn pseudonym_count_is_bounded_by_unknown_nodes() {
        let mut gen_rng = ChaCha8Rng::seed_from_u64(9);
        let g = generate(
            SyntheticModel::SmallWorld {
                ring_degree: 4,
                rewire_prob: 0.1,
            },
            80,
            &mut gen_rng,
        )
        .unwrap();
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (members, achieved) = select_malicious_set(&g, 10, &mut rng).unwrap();
            for mode in [EmbeddingMode::Enumeration, EmbeddingMode::random_default()] {
                let mut sim_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31));
                let (_, np) = run_embedding_simulation(
                    &g,
                    &members,
                    mode,
                    AdversaryBehavior::Honest,
                    &mut sim_rng,
                )
                .unwrap();
                assert!(np <= 80 - members.len() - achieved);
            }
        }
    }

    #[test]
    fn summarize_matches_precomputed_values() {
        let values = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        let stats = summarize(&values);
        assert!((stats.mean - 5.0).abs() < 1e-12);
        assert!((stats.ci99_half_width - 1.947_143_930_555_169_9).abs() < 1e-12);
        assert!(summarize(&[]).mean.is_nan());
        let single = summarize(&[3.5]);
        assert_eq!(single.mean, 3.5);
        assert_eq!(single.ci99_half_width, 0.0);
    }

    fn small_config(mode: EmbeddingMode) -> ExperimentConfig {
        ExperimentConfig {
            graph_label: "test-graph".to_string(),
            mode,
            behavior: AdversaryBehavior::Honest,
            n_compromised: 12,
            num_sets: 2,
            runs_per_set: 3,
            master_seed: 99,
        }
    }

    #[test]
    fn experiments_are_deterministic_and_recomputable() {
        let mut gen_rng = ChaCha8Rng::seed_from_u64(21);
        let g = generate(
            SyntheticModel::ScaleFree { attach_edges: 2 },
            120,
            &mut gen_rng,
        )
        .unwrap();
        let config = small_config(EmbeddingMode::Enumeration);
        let a = run_experiment(&g, &config).unwrap();
        let b = run_experiment(&g, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(render_csv(&a), render_csv(&b));
        assert_eq!(a.runs.len(), 6);
        // The mean is recomputable from the raw rows.
        let mean = a.runs.iter().map(|r| r.n_pseudonyms as f64).sum::<f64>() / 6.0;
        assert!((a.statistics.mean - mean).abs() < 1e-12);
        // Rows are ordered by (set, run).
        let order: Vec<(usize, usize)> =
            a.runs.iter().map(|r| (r.set_index, r.run_index)).collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]);
    }

    #[test]
    fn single_run_mean_is_the_run_value() {
        let mut gen_rng = ChaCha8Rng::seed_from_u64(2);
        let g = generate(
            SyntheticModel::ScaleFree { attach_edges: 2 },
            80,
            &mut gen_rng,
        )
        .unwrap();
        let config = ExperimentConfig {
            num_sets: 1,
            runs_per_set: 1,
            ..small_config(EmbeddingMode::random_default())
        };
        let result = run_experiment(&g, &config).unwrap();
        assert_eq!(result.statistics.mean, result.runs[0].n_pseudonyms as f64);
        assert_eq!(result.statistics.ci99_half_width, 0.0);
    }

    #[test]
    fn planned_tasks_reproduce_sequential_records() {
        let mut gen_rng = ChaCha8Rng::seed_from_u64(33);
        let g = generate(
            SyntheticModel::ScaleFree { attach_edges: 2 },
            100,
            &mut gen_rng,
        )
        .unwrap();
        let config = small_config(EmbeddingMode::Enumeration);
        let sequential = run_experiment(&g, &config).unwrap();
        let tasks = plan_tasks(&g, &config).unwrap();
        // Executing tasks out of order yields the same records.
        let mut records: Vec<RunRecord> = tasks
            .iter()
            .rev()
            .map(|t| execute_task(&g, &config, t).unwrap())
            .collect();
        records.sort_by_key(|r| (r.set_index, r.run_index));
        assert_eq!(records, sequential.runs);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let g = star(4);
        let mut config = small_config(EmbeddingMode::Enumeration);
        config.n_compromised = 2;
        config.num_sets = 0;
        assert!(matches!(
            run_experiment(&g, &config),
            Err(ExperimentError::InvalidConfig(_))
        ));
        let mut config = small_config(EmbeddingMode::Enumeration);
        config.n_compromised = 5;
        assert!(matches!(
            run_experiment(&g, &config),
            Err(ExperimentError::InvalidConfig(_))
        ));
    }

    #[test]
    fn csv_layout_is_stable_and_quotes_labels() {
        let g = star(6);
        let config = ExperimentConfig {
            graph_label: "scale-free(n=10,m=2,seed=1)".to_string(),
            mode: EmbeddingMode::Enumeration,
            behavior: AdversaryBehavior::LeafOnly,
            n_compromised: 3,
            num_sets: 1,
            runs_per_set: 1,
            master_seed: 5,
        };
        let result = run_experiment(&g, &config).unwrap();
        let csv = render_csv(&result);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with(
            "# graph=scale-free(n=10,m=2,seed=1) mode=enumeration behavior=leaf-only"
        ));
        assert!(lines[1].starts_with("# seeds: chacha8"));
        assert_eq!(
            lines[2],
            "graph,mode,behavior,n_compromised_target,set_index,run_index,n_compromised_actual,n_pseudonyms"
        );
        assert!(
            lines[3].starts_with("\"scale-free(n=10,m=2,seed=1)\",enumeration,leaf-only,3,0,0,")
        );
        assert_eq!(lines.len(), 4);
        assert_eq!(
            format!("{},{}", csv_field("plain"), csv_field("a\"b")),
            "plain,\"a\"\"b\""
        );
    }
}
