//! Synthetic labeled dataset generator.
//!
//! Each class is a distinct structural motif over `subgraph_size` nodes
//! (star, chain, ring with pendants, bipartite fan, binary tree, clique with
//! tail). A sample embeds one motif, under a random node relabeling, into a
//! host graph with a few background nodes and seeded noise edges. Noise
//! never touches motif-internal pairs, so the induced target subgraph stays
//! isomorphic to its class template. Attributes are drawn from a shared
//! vocabulary with class-tilted token frequencies: weak on purpose, so
//! structure carries the signal.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, NodeRecord};
use crate::nn::derive_seed;

pub const MOTIF_NAMES: [&str; 6] = [
    "star",
    "chain",
    "ring-with-pendants",
    "bipartite-fan",
    "binary-tree",
    "clique-with-tail",
];

const VOCAB: [&str; 12] = [
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa",
    "lambda", "mu",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub samples_per_class: usize,
    /// Motif (target subgraph) node count.
    pub subgraph_size: usize,
    /// Background nodes per host graph.
    pub background_nodes: usize,
    /// Expected noise edges per sample, as a fraction of `subgraph_size`.
    /// Noise edges always involve at least one background node.
    pub noise_edge_rate: f64,
    /// Tokens drawn per node attribute.
    pub tokens_per_node: usize,
    /// Extra sampling weight on each class's favored vocabulary tokens.
    pub class_tilt: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_classes: 6,
            samples_per_class: 300,
            subgraph_size: 17,
            background_nodes: 6,
            noise_edge_rate: 0.15,
            tokens_per_node: 3,
            class_tilt: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.num_classes > MOTIF_NAMES.len() {
            return Err(Error::Config(format!(
                "num_classes must lie in 2..={}, got {}",
                MOTIF_NAMES.len(),
                self.num_classes
            )));
        }
        if self.subgraph_size < 8 {
            return Err(Error::Config(format!(
                "subgraph_size {} is too small to host the motif templates (need >= 8)",
                self.subgraph_size
            )));
        }
        if self.noise_edge_rate < 0.0 {
            return Err(Error::Config("noise_edge_rate must be >= 0".into()));
        }
        if self.tokens_per_node == 0 {
            return Err(Error::Config("tokens_per_node must be >= 1".into()));
        }
        Ok(())
    }
}

/// Edge list of the class template over nodes `0..n-1`.
pub fn motif_edges(class: usize, n: usize) -> Vec<(usize, usize)> {
    match class {
        // Star: hub 0.
        0 => (1..n).map(|i| (0, i)).collect(),
        // Chain.
        1 => (1..n).map(|i| (i - 1, i)).collect(),
        // Ring of ceil(n/2) nodes with pendants attached round-robin.
        2 => {
            let r = n.div_ceil(2);
            let mut edges: Vec<(usize, usize)> = (0..r).map(|i| (i, (i + 1) % r)).collect();
            for p in r..n {
                edges.push((p, (p - r) % r));
            }
            edges
        }
        // Complete bipartite K_{3, n-3}.
        3 => {
            let mut edges = Vec::new();
            for a in 0..3 {
                for b in 3..n {
                    edges.push((a, b));
                }
            }
            edges
        }
        // Complete binary tree.
        4 => (1..n).map(|i| (i, (i - 1) / 2)).collect(),
        // Clique on 6 nodes with a tail path.
        5 => {
            let q = 6.min(n - 2);
            let mut edges = Vec::new();
            for a in 0..q {
                for b in (a + 1)..q {
                    edges.push((a, b));
                }
            }
            edges.push((0, q));
            for i in (q + 1)..n {
                edges.push((i - 1, i));
            }
            edges
        }
        _ => panic!("no motif template for class {class}"),
    }
}

/// Degree-refinement signature: sorted multiset of
/// `(degree, sorted neighbor degrees)` over all nodes. Isomorphic graphs
/// share a signature; the motif templates are built to have distinct ones.
pub fn degree_signature(n: usize, edges: &[(usize, usize)]) -> Vec<(usize, Vec<usize>)> {
    let mut neighbors = vec![Vec::new(); n];
    for &(a, b) in edges {
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    let degrees: Vec<usize> = neighbors.iter().map(Vec::len).collect();
    let mut sig: Vec<(usize, Vec<usize>)> = (0..n)
        .map(|v| {
            let mut nd: Vec<usize> = neighbors[v].iter().map(|&u| degrees[u]).collect();
            nd.sort_unstable();
            (degrees[v], nd)
        })
        .collect();
    sig.sort();
    sig
}

/// Classify a sample by comparing its induced target subgraph's signature
/// against every class template. Independent of the generator's bookkeeping.
pub fn motif_matcher(sample: &Sample, cfg: &SynthConfig) -> Option<usize> {
    let n = sample.target_nodes.len();
    let sub = sample.subgraph().ok()?;
    let adj = crate::graph::adjacency_matrix(&sub);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if adj[i][j] == 1 {
                edges.push((i, j));
            }
        }
    }
    let sig = degree_signature(n, &edges);
    (0..cfg.num_classes).find(|&class| degree_signature(n, &motif_edges(class, n)) == sig)
}

fn node_role(class: usize, position: usize, n: usize) -> &'static str {
    match class {
        0 => {
            if position == 0 {
                "hub"
            } else {
                "leaf"
            }
        }
        2 => {
            if position < n.div_ceil(2) {
                "ring"
            } else {
                "pendant"
            }
        }
        3 => {
            if position < 3 {
                "left"
            } else {
                "right"
            }
        }
        5 => {
            if position < 6.min(n - 2) {
                "member"
            } else {
                "tail"
            }
        }
        _ => "part",
    }
}

fn draw_tokens(class: usize, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> String {
    let weights: Vec<f64> = (0..VOCAB.len())
        .map(|t| {
            if t % cfg.num_classes == class {
                1.0 + cfg.class_tilt
            } else {
                1.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(cfg.tokens_per_node);
    for _ in 0..cfg.tokens_per_node {
        let mut x = rng.gen_range(0.0..total);
        let mut pick = VOCAB.len() - 1;
        for (t, &w) in weights.iter().enumerate() {
            if x < w {
                pick = t;
                break;
            }
            x -= w;
        }
        out.push(VOCAB[pick]);
    }
    out.join(" ")
}

/// Generate the full labeled dataset. Deterministic per seed.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let n = cfg.subgraph_size;
    // Reject configurations where two templates collide structurally.
    let signatures: Vec<_> = (0..cfg.num_classes)
        .map(|c| degree_signature(n, &motif_edges(c, n)))
        .collect();
    for a in 0..cfg.num_classes {
        for b in (a + 1)..cfg.num_classes {
            if signatures[a] == signatures[b] {
                return Err(Error::Config(format!(
                    "motifs '{}' and '{}' are structurally indistinct at n={n}",
                    MOTIF_NAMES[a], MOTIF_NAMES[b]
                )));
            }
        }
    }
    let mut samples = Vec::with_capacity(cfg.num_classes * cfg.samples_per_class);
    for class in 0..cfg.num_classes {
        for s in 0..cfg.samples_per_class {
            let seed = derive_seed(cfg.seed, "synth-sample", &[class as u64, s as u64]);
            samples.push(generate_sample(cfg, class, seed)?);
        }
    }
    Ok(Dataset { samples })
}

fn generate_sample(cfg: &SynthConfig, class: usize, seed: u64) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.subgraph_size;
    let total = n + cfg.background_nodes;
    // Random placement of motif and background nodes among host indices.
    let mut placement: Vec<usize> = (0..total).collect();
    placement.shuffle(&mut rng);
    let motif_at = &placement[..n];
    let background_at = &placement[n..];

    let mut nodes: Vec<Option<NodeRecord>> = vec![None; total];
    for (pos, &host_idx) in motif_at.iter().enumerate() {
        let record = NodeRecord::new(
            format!("c{class}-m{pos}"),
            node_role(class, pos, n),
        )
        .with_attr("title", draw_tokens(class, cfg, &mut rng));
        nodes[host_idx] = Some(record);
    }
    for (b, &host_idx) in background_at.iter().enumerate() {
        let record = NodeRecord::new(format!("bg{b}"), "background")
            .with_attr("title", draw_tokens(class, cfg, &mut rng));
        nodes[host_idx] = Some(record);
    }
    let mut graph = AttributedGraph::new();
    for record in nodes {
        graph.add_node(record.expect("all host indices placed"));
    }
    for (a, b) in motif_edges(class, n) {
        graph.add_edge(motif_at[a], motif_at[b])?;
    }
    // Anchor every background node so path aggregation finds neighbors.
    for &bg in background_at {
        let target = motif_at[rng.gen_range(0..n)];
        graph.add_edge(bg, target)?;
    }
    // Noise edges: at least one background endpoint, never motif-internal.
    if cfg.background_nodes > 0 {
        let noise_count = (cfg.noise_edge_rate * n as f64).round() as usize;
        for _ in 0..noise_count {
            let a = background_at[rng.gen_range(0..cfg.background_nodes)];
            let b = placement[rng.gen_range(0..total)];
            if a != b {
                graph.add_edge(a, b)?;
            }
        }
    }
    // Target node order: shuffle away the template labeling, then apply the
    // structure-derived canonical order. A schema match would hand consumers
    // its nodes in deterministic BFS-from-root order; the generator mirrors
    // that instead of emitting an adversarial permutation.
    let mut target_nodes = motif_at.to_vec();
    target_nodes.shuffle(&mut rng);
    let target_nodes = canonical_target_order(&graph, &target_nodes);
    Ok(Sample {
        graph,
        target_nodes,
        label: class,
    })
}

/// Deterministic structure-derived ordering of the target nodes.
///
/// Iterated degree refinement colors the induced subgraph, the rarest color
/// picks a root, and a breadth-first traversal visiting neighbors in color
/// order lays the nodes out. Samples of the same motif end up with aligned
/// adjacency patterns (up to automorphism), the way a schema query returns
/// its matches in a fixed traversal order. Only structure is consulted; ties
/// between interchangeable nodes keep their incoming (shuffled) order.
pub fn canonical_target_order(graph: &AttributedGraph, targets: &[usize]) -> Vec<usize> {
    let n = targets.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if graph.has_edge(targets[i], targets[j]) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    // Color refinement: a node's color becomes the rank of
    // (color, sorted neighbor colors) until the partition stabilizes.
    let mut colors: Vec<u64> = adj.iter().map(|a| a.len() as u64).collect();
    for _ in 0..n {
        let sigs: Vec<(u64, Vec<u64>)> = (0..n)
            .map(|v| {
                let mut nc: Vec<u64> = adj[v].iter().map(|&u| colors[u]).collect();
                nc.sort_unstable();
                (colors[v], nc)
            })
            .collect();
        let mut uniq = sigs.clone();
        uniq.sort();
        uniq.dedup();
        let next: Vec<u64> = sigs
            .iter()
            .map(|s| uniq.binary_search(s).unwrap() as u64)
            .collect();
        if next == colors {
            break;
        }
        colors = next;
    }
    let mut class_size = std::collections::BTreeMap::new();
    for &c in &colors {
        *class_size.entry(c).or_insert(0usize) += 1;
    }
    let root = (0..n)
        .min_by_key(|&v| (class_size[&colors[v]], colors[v], v))
        .unwrap_or(0);
    let mut order = vec![root];
    let mut seen = vec![false; n];
    if n > 0 {
        seen[root] = true;
    }
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        let mut next: Vec<usize> = adj[u].iter().copied().filter(|&v| !seen[v]).collect();
        next.sort_by_key(|&v| (colors[v], v));
        for v in next {
            seen[v] = true;
            order.push(v);
        }
    }
    for v in 0..n {
        if !seen[v] {
            order.push(v);
        }
    }
    order.into_iter().map(|i| targets[i]).collect()
}

/// Manifest written alongside a generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub config: SynthConfig,
    pub num_samples: usize,
}
