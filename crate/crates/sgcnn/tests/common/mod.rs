//! Shared helpers for the integration tests: random instances, independent
//! reimplementations of the math (oracles), and a finite-difference gradient
//! checker. The oracles deliberately use different algorithms and data
//! layouts than the library so agreement is evidence, not tautology.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sgcnn::graph::{AttributedGraph, NodeRecord, TargetSubgraph};
use sgcnn::model::Model;
use sgcnn::nn::{softmax_cross_entropy, ActivationKind};

/// A graph with `n` nodes, feature vectors of dimension `f` drawn uniformly
/// from [-1, 1), and each edge present independently with probability `p`.
pub fn random_graph(n: usize, f: usize, p: f64, rng: &mut ChaCha8Rng) -> AttributedGraph {
    let mut g = AttributedGraph::new();
    for i in 0..n {
        let mut node = NodeRecord::new(format!("n{i}"), "node");
        node.features = (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect();
        g.add_node(node);
    }
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.gen_bool(p) {
                g.add_edge(a, b).unwrap();
            }
        }
    }
    g
}

/// Rebuild `g` with its nodes relabeled by `perm`: old node `v` becomes new
/// node `perm[v]`.
pub fn relabel(g: &AttributedGraph, perm: &[usize]) -> AttributedGraph {
    let n = g.node_count();
    let mut inverse = vec![0usize; n];
    for (old, &new) in perm.iter().enumerate() {
        inverse[new] = old;
    }
    let mut out = AttributedGraph::new();
    for new in 0..n {
        out.add_node(g.node(inverse[new]).clone());
    }
    for &(a, b) in g.edges() {
        out.add_edge(perm[a], perm[b]).unwrap();
    }
    out
}

pub fn random_permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Brute-force path oracle: enumerate every length-`d` tuple over all host
/// nodes by counting, then filter to simple paths that start at `anchor`,
/// follow edges, and avoid the other target nodes. Output sorted.
pub fn brute_force_paths(
    host: &AttributedGraph,
    targets: &[usize],
    anchor: usize,
    d: usize,
) -> Vec<Vec<usize>> {
    let n = host.node_count();
    let mut out = Vec::new();
    let total = (n as u64).pow(d as u32);
    'tuples: for code in 0..total {
        let mut tuple = Vec::with_capacity(d);
        let mut rest = code;
        for _ in 0..d {
            tuple.push((rest % n as u64) as usize);
            rest /= n as u64;
        }
        if tuple[0] != anchor {
            continue;
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if tuple[i] == tuple[j] {
                    continue 'tuples;
                }
            }
        }
        for w in tuple.windows(2) {
            if !host.has_edge(w[0], w[1]) {
                continue 'tuples;
            }
        }
        for &v in &tuple[1..] {
            if targets.contains(&v) {
                continue 'tuples;
            }
        }
        out.push(tuple);
    }
    out.sort();
    out
}

/// Independent Alg.-3 scoring: per-node degrees by row summation, candidate
/// connectivity by a literal quadruple loop over node pairs.
pub fn brute_force_scores(adjacency: &[Vec<u8>], candidates: &[Vec<usize>]) -> Vec<u64> {
    let degree: Vec<u64> = adjacency
        .iter()
        .map(|row| row.iter().map(|&x| u64::from(x)).sum())
        .collect();
    let connected = |a: &[usize], b: &[usize]| -> bool {
        for &u in a {
            for &w in b {
                if adjacency[u][w] == 1 {
                    return true;
                }
            }
        }
        false
    };
    candidates
        .iter()
        .enumerate()
        .map(|(i, cand)| {
            let mut score: u64 = cand.iter().map(|&v| degree[v]).sum();
            for (j, other) in candidates.iter().enumerate() {
                if j != i && connected(cand, other) {
                    score += 1;
                }
            }
            score
        })
        .collect()
}

/// Independent top-`s` selection over the full candidate list: highest score
/// first, ties toward the lexicographically earlier candidate.
pub fn brute_force_top(adjacency: &[Vec<u8>], candidates: &[Vec<usize>], s: usize) -> Vec<Vec<usize>> {
    let scores = brute_force_scores(adjacency, candidates);
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| scores[b].cmp(&scores[a]).then(a.cmp(&b)));
    (0..s)
        .map(|i| candidates[order[i % order.len()]].clone())
        .collect()
}

/// Nested-loop convolution oracle: explicit block loops with the A+I mask
/// written out, no shared machinery with the layer code.
pub fn nested_loop_convolution(
    features: &[Vec<f64>],
    adjacency: &[Vec<u8>],
    subset: &[usize],
    kernels: &[Vec<f64>],
    biases: &[f64],
    act: ActivationKind,
) -> Vec<f64> {
    let k = subset.len();
    let f_in = features[0].len();
    let mut out = Vec::with_capacity(biases.len());
    for (c, kernel) in kernels.iter().enumerate() {
        let mut acc = biases[c];
        for bi in 0..k {
            for bj in 0..k {
                let i = subset[bi];
                let j = subset[bj];
                if i == j || adjacency[i][j] == 1 {
                    for l in 0..f_in {
                        acc += kernel[(bi * k + bj) * f_in + l] * features[j][l];
                    }
                }
            }
        }
        out.push(act.apply(acc));
    }
    out
}

fn loss_of(model: &Model, sub: &TargetSubgraph, sample_idx: u64, label: usize) -> f64 {
    let logits = model.forward(sub, sample_idx).unwrap();
    softmax_cross_entropy(&logits, label).unwrap().0
}

/// Central-difference check of every trainable scalar. Returns the worst
/// relative error; the denominator is floored at 1e-3 so near-zero gradient
/// pairs are compared absolutely (tolerance 1e-8 at the 1e-5 relative bar),
/// where finite-difference cancellation noise dominates any true signal.
pub fn finite_difference_worst_error(
    model: &Model,
    sub: &TargetSubgraph,
    sample_idx: u64,
    label: usize,
    step: f64,
) -> f64 {
    let trace = model.forward_trace(sub, sample_idx).unwrap();
    let (_, d_logits) = softmax_cross_entropy(&trace.logits, label).unwrap();
    let grads = model.backward(&trace, &d_logits).unwrap();
    let names: Vec<String> = model.store.names().map(str::to_string).collect();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for name in &names {
        let len = probe.store.get(name).unwrap().data.len();
        for i in 0..len {
            let orig = probe.store.get(name).unwrap().data[i];
            probe.store.get_mut(name).unwrap().data[i] = orig + step;
            let plus = loss_of(&probe, sub, sample_idx, label);
            probe.store.get_mut(name).unwrap().data[i] = orig - step;
            let minus = loss_of(&probe, sub, sample_idx, label);
            probe.store.get_mut(name).unwrap().data[i] = orig;
            let fd = (plus - minus) / (2.0 * step);
            let g = grads.get(name).unwrap().data[i];
            let err = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-3);
            worst = worst.max(err);
        }
    }
    worst
}
