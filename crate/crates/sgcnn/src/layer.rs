//! One subgraph convolution layer: attribute matrix construction, candidate
//! enumeration, degree-ranked graph pooling, per-candidate convolution, and
//! recomputation of the adjacency for the output feature graph.
//!
//! A layer consumes `n` node feature vectors plus an `n x n` adjacency and
//! produces a feature graph with `s` nodes, one per kept `k`-subset of the
//! input vertices.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ActivationKind;

/// Candidate selection strategy for the pooling step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolingStrategy {
    /// Random pre-dropout followed by keeping the highest-scoring candidates.
    DegreeRanked,
    /// Purely random dropout to `s` candidates.
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerConfig {
    /// Kernel size: candidates are `k`-subsets of the incoming vertices.
    pub k: usize,
    /// Output sample size: candidates kept after pooling.
    pub s: usize,
    /// Random pre-sample cap applied before degree ranking.
    pub pre_dropout: usize,
    pub pooling: PoolingStrategy,
    /// Output channels.
    pub f_out: usize,
    pub activation: ActivationKind,
}

impl LayerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("kernel size k must be >= 1".into()));
        }
        if self.s == 0 {
            return Err(Error::Config("sample size s must be >= 1".into()));
        }
        if self.pre_dropout < self.s {
            return Err(Error::Config(format!(
                "pre_dropout {} must be >= s {}",
                self.pre_dropout, self.s
            )));
        }
        if self.f_out == 0 {
            return Err(Error::Config("f_out must be >= 1".into()));
        }
        self.activation.validate()
    }
}

/// Trainable tensors of one layer: one `k x k x F_in` kernel per output
/// channel plus a bias per channel. Kernels are stored flat, indexed as
/// `(i * k + j) * f_in + l`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerParams {
    pub kernels: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub k: usize,
    pub f_in: usize,
}

impl LayerParams {
    pub fn zeros(k: usize, f_in: usize, f_out: usize) -> Self {
        Self {
            kernels: vec![vec![0.0; k * k * f_in]; f_out],
            biases: vec![0.0; f_out],
            k,
            f_in,
        }
    }

    pub fn f_out(&self) -> usize {
        self.biases.len()
    }
}

/// Attribute matrix: entry `(i,j)` is node `j`'s feature vector when `i = j`
/// or `A[i][j] = 1`, and the zero vector otherwise.
#[derive(Debug, Clone)]
pub struct AttributeMatrix {
    pub features: Vec<Vec<f64>>,
    pub adjacency: Vec<Vec<u8>>,
    pub f: usize,
}

impl AttributeMatrix {
    pub fn n(&self) -> usize {
        self.features.len()
    }

    pub fn masked(&self, i: usize, j: usize) -> bool {
        i == j || self.adjacency[i][j] == 1
    }

    /// Materialized entry (zero vector where masked out).
    pub fn entry(&self, i: usize, j: usize) -> Vec<f64> {
        if self.masked(i, j) {
            self.features[j].clone()
        } else {
            vec![0.0; self.f]
        }
    }
}

/// Build the attribute matrix from node features and a binary adjacency.
pub fn attribute_matrix(features: &[Vec<f64>], adjacency: &[Vec<u8>]) -> Result<AttributeMatrix> {
    let n = features.len();
    if adjacency.len() != n || adjacency.iter().any(|row| row.len() != n) {
        return Err(Error::Contract(format!(
            "adjacency must be {n} x {n} to match {n} feature vectors"
        )));
    }
    let f = features.first().map(Vec::len).unwrap_or(0);
    if features.iter().any(|v| v.len() != f) {
        return Err(Error::Contract("ragged feature vectors".into()));
    }
    Ok(AttributeMatrix {
        features: features.to_vec(),
        adjacency: adjacency.iter().map(|r| r.to_vec()).collect(),
        f,
    })
}

/// `C(n, k)` saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All `k`-subsets of `{0..n-1}`, each ascending, in lexicographic order.
pub fn enumerate_candidates(n: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > n {
        return Err(Error::Contract(format!(
            "k must satisfy 1 <= k <= n (k={k}, n={n})"
        )));
    }
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        // Advance to the next combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if current[i] != i + n - k {
                break;
            }
            if i == 0 {
                return Ok(out);
            }
        }
        current[i] += 1;
        for j in (i + 1)..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

/// The combination at `rank` in the lexicographic order produced by
/// [`enumerate_candidates`].
pub fn unrank_candidate(n: usize, k: usize, mut rank: u128) -> Result<Vec<usize>> {
    let total = binomial(n, k);
    if rank >= total {
        return Err(Error::Contract(format!(
            "rank {rank} out of range for C({n},{k}) = {total}"
        )));
    }
    let mut out = Vec::with_capacity(k);
    let mut next = 0usize;
    for remaining in (1..=k).rev() {
        // Choose the smallest feasible element.
        let mut candidate = next;
        loop {
            let tail = binomial(n - candidate - 1, remaining - 1);
            if rank < tail {
                out.push(candidate);
                next = candidate + 1;
                break;
            }
            rank -= tail;
            candidate += 1;
        }
    }
    Ok(out)
}

/// `count` distinct values from `0..m`, ascending, reproducible from `seed`.
/// Floyd's sampling; returns all of `0..m` when `count >= m`.
pub fn sample_indices(m: u128, count: usize, seed: u64) -> Vec<u128> {
    if count as u128 >= m {
        return (0..m).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = std::collections::BTreeSet::new();
    for i in (m - count as u128)..m {
        let r = rng.gen_range(0..=i);
        if !chosen.insert(r) {
            chosen.insert(i);
        }
    }
    chosen.into_iter().collect()
}

/// Per-candidate connectivity bitsets over the graph being pooled.
struct CandidateSets {
    words: usize,
    members: Vec<Vec<u64>>,
    neighborhood: Vec<Vec<u64>>,
}

impl CandidateSets {
    fn build(adjacency: &[Vec<u8>], candidates: &[Vec<usize>]) -> Self {
        let n = adjacency.len();
        let words = n.div_ceil(64);
        let mut members = Vec::with_capacity(candidates.len());
        let mut neighborhood = Vec::with_capacity(candidates.len());
        for cand in candidates {
            let mut mem = vec![0u64; words];
            let mut nbr = vec![0u64; words];
            for &v in cand {
                mem[v / 64] |= 1 << (v % 64);
                for (u, &a) in adjacency[v].iter().enumerate() {
                    if a == 1 {
                        nbr[u / 64] |= 1 << (u % 64);
                    }
                }
            }
            members.push(mem);
            neighborhood.push(nbr);
        }
        Self {
            words,
            members,
            neighborhood,
        }
    }

    /// Some host edge joins a node of `a` with a node of `b`.
    fn connected(&self, a: usize, b: usize) -> bool {
        (0..self.words).any(|w| self.neighborhood[a][w] & self.members[b][w] != 0)
    }

    fn intersects(&self, a: usize, b: usize) -> bool {
        (0..self.words).any(|w| self.members[a][w] & self.members[b][w] != 0)
    }
}

/// Score every surviving candidate: the sum of its nodes' degrees in the
/// pooled graph plus the number of other surviving candidates it shares a
/// host edge with.
pub fn score_candidates(adjacency: &[Vec<u8>], candidates: &[Vec<usize>]) -> Vec<u64> {
    let degrees: Vec<u64> = adjacency
        .iter()
        .map(|row| row.iter().map(|&a| a as u64).sum())
        .collect();
    let sets = CandidateSets::build(adjacency, candidates);
    let mut scores = Vec::with_capacity(candidates.len());
    for (i, cand) in candidates.iter().enumerate() {
        let mut score: u64 = cand.iter().map(|&v| degrees[v]).sum();
        for j in 0..candidates.len() {
            if j != i && sets.connected(i, j) {
                score += 1;
            }
        }
        scores.push(score);
    }
    scores
}

/// Keep the `s` highest-scoring candidates; ties break toward earlier
/// (lexicographically smaller) candidates; cycle to pad when fewer than `s`
/// survive. `survivors` must be in lexicographic order.
fn keep_top(adjacency: &[Vec<u8>], survivors: &[Vec<usize>], s: usize) -> Vec<Vec<usize>> {
    let scores = score_candidates(adjacency, survivors);
    let mut order: Vec<usize> = (0..survivors.len()).collect();
    order.sort_by(|&a, &b| scores[b].cmp(&scores[a]).then(a.cmp(&b)));
    (0..s)
        .map(|i| survivors[order[i % order.len()]].clone())
        .collect()
}

/// Alg.-style graph pooling: uniformly pre-sample up to `pre_dropout`
/// candidates without replacement, then keep the `s` best by degree score.
pub fn graph_pool(
    adjacency: &[Vec<u8>],
    candidates: &[Vec<usize>],
    s: usize,
    pre_dropout: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if s > pre_dropout {
        return Err(Error::Contract(format!(
            "s {s} must not exceed pre_dropout {pre_dropout}"
        )));
    }
    if candidates.is_empty() {
        return Err(Error::Contract("no candidates to pool".into()));
    }
    let picked = sample_indices(candidates.len() as u128, pre_dropout, seed);
    let survivors: Vec<Vec<usize>> = picked
        .iter()
        .map(|&i| candidates[i as usize].clone())
        .collect();
    Ok(keep_top(adjacency, &survivors, s))
}

/// Purely random dropout to `s` candidates (comparison baseline).
pub fn random_pool(
    candidates: &[Vec<usize>],
    s: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if candidates.is_empty() {
        return Err(Error::Contract("no candidates to pool".into()));
    }
    let picked = sample_indices(candidates.len() as u128, s, seed);
    Ok((0..s)
        .map(|i| candidates[picked[i % picked.len()] as usize].clone())
        .collect())
}

/// Pairs `(bi, bj, orig_j)` inside the candidate block where the attribute
/// matrix is non-masked.
fn masked_pairs(ar: &AttributeMatrix, subset: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut pairs = Vec::new();
    for (bi, &i) in subset.iter().enumerate() {
        for (bj, &j) in subset.iter().enumerate() {
            if ar.masked(i, j) {
                pairs.push((bi, bj, j));
            }
        }
    }
    pairs
}

fn convolve_with_pairs(
    ar: &AttributeMatrix,
    pairs: &[(usize, usize, usize)],
    params: &LayerParams,
    act: ActivationKind,
) -> (Vec<f64>, Vec<f64>) {
    let k = params.k;
    let f_in = params.f_in;
    let f_out = params.f_out();
    let mut pre = params.biases.clone();
    for c in 0..f_out {
        let kernel = &params.kernels[c];
        let mut acc = 0.0;
        for &(bi, bj, j) in pairs {
            let base = (bi * k + bj) * f_in;
            let feat = &ar.features[j];
            for l in 0..f_in {
                acc += kernel[base + l] * feat[l];
            }
        }
        pre[c] += acc;
    }
    let out = act.apply_slice(&pre);
    (out, pre)
}

/// Convolve one candidate block: channel `c` is
/// `act(sum_{i,j} <kernel[c][i][j], Ar_k[i][j]> + bias[c])` where `Ar_k` is
/// the attribute block restricted to `subset` rows/columns in ascending
/// original vertex order.
pub fn convolve_candidate(
    ar: &AttributeMatrix,
    subset: &[usize],
    params: &LayerParams,
    act: ActivationKind,
) -> Result<Vec<f64>> {
    if subset.len() != params.k {
        return Err(Error::Contract(format!(
            "subset size {} does not match kernel size {}",
            subset.len(),
            params.k
        )));
    }
    if subset.iter().any(|&v| v >= ar.n()) {
        return Err(Error::Contract("subset index out of range".into()));
    }
    if ar.f != params.f_in {
        return Err(Error::Contract(format!(
            "input feature dimension {} does not match kernel f_in {}",
            ar.f, params.f_in
        )));
    }
    let pairs = masked_pairs(ar, subset);
    Ok(convolve_with_pairs(ar, &pairs, params, act).0)
}

/// Adjacency of the output feature graph: kept candidates `p` and `q` are
/// connected when they share a vertex or some host edge joins them.
pub fn new_adjacency(kept: &[Vec<usize>], host_adjacency: &[Vec<u8>]) -> Result<Vec<Vec<u8>>> {
    if kept.is_empty() {
        return Err(Error::Contract("kept candidate list is empty".into()));
    }
    let sets = CandidateSets::build(host_adjacency, kept);
    let s = kept.len();
    let mut adj = vec![vec![0u8; s]; s];
    for p in 0..s {
        for q in (p + 1)..s {
            if sets.intersects(p, q) || sets.connected(p, q) {
                adj[p][q] = 1;
                adj[q][p] = 1;
            }
        }
    }
    Ok(adj)
}

/// Layer output: one node per kept candidate plus the recomputed adjacency.
#[derive(Debug, Clone)]
pub struct FeatureGraph {
    pub node_features: Vec<Vec<f64>>,
    pub adjacency: Vec<Vec<u8>>,
    /// The k-subset each output node came from.
    pub provenance: Vec<Vec<usize>>,
}

/// Forward cache for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub kept: Vec<Vec<usize>>,
    pub pair_lists: Vec<Vec<(usize, usize, usize)>>,
    pub pre_activations: Vec<Vec<f64>>,
    /// Number of candidate convolutions performed (always `s`).
    pub convolve_calls: usize,
}

/// Full layer forward pass.
///
/// Candidates are enumerated lazily: when `C(n,k)` exceeds `pre_dropout`,
/// `pre_dropout` lexicographic ranks are sampled and unranked instead of
/// materializing the whole list, so forward work scales with `s`, not
/// `C(n,k)`.
pub fn layer_forward(
    features: &[Vec<f64>],
    adjacency: &[Vec<u8>],
    cfg: &LayerConfig,
    params: &LayerParams,
    seed: u64,
) -> Result<(FeatureGraph, LayerTrace)> {
    cfg.validate()?;
    let n = features.len();
    if n < cfg.k {
        return Err(Error::Contract(format!(
            "kernel size {} exceeds graph size {n}",
            cfg.k
        )));
    }
    let ar = attribute_matrix(features, adjacency)?;
    if ar.f != params.f_in || cfg.k != params.k || cfg.f_out != params.f_out() {
        return Err(Error::Contract(
            "layer parameters do not match layer config".into(),
        ));
    }
    let m = binomial(n, cfg.k);
    let kept: Vec<Vec<usize>> = match cfg.pooling {
        PoolingStrategy::DegreeRanked => {
            // Identical selection to graph_pool over the full lexicographic
            // candidate list, without materializing it.
            let picked = sample_indices(m, cfg.pre_dropout, seed);
            let survivors: Vec<Vec<usize>> = picked
                .iter()
                .map(|&rank| unrank_candidate(n, cfg.k, rank))
                .collect::<Result<_>>()?;
            keep_top(adjacency, &survivors, cfg.s)
        }
        PoolingStrategy::Random => {
            let picked = sample_indices(m, cfg.s, seed);
            (0..cfg.s)
                .map(|i| unrank_candidate(n, cfg.k, picked[i % picked.len()]))
                .collect::<Result<_>>()?
        }
    };
    let mut node_features = Vec::with_capacity(cfg.s);
    let mut pair_lists = Vec::with_capacity(cfg.s);
    let mut pre_activations = Vec::with_capacity(cfg.s);
    for subset in &kept {
        let pairs = masked_pairs(&ar, subset);
        let (out, pre) = convolve_with_pairs(&ar, &pairs, params, cfg.activation);
        node_features.push(out);
        pair_lists.push(pairs);
        pre_activations.push(pre);
    }
    let out_adjacency = new_adjacency(&kept, adjacency)?;
    let convolve_calls = kept.len();
    Ok((
        FeatureGraph {
            node_features,
            adjacency: out_adjacency,
            provenance: kept.clone(),
        },
        LayerTrace {
            kept,
            pair_lists,
            pre_activations,
            convolve_calls,
        },
    ))
}

/// Backward through one layer. Returns `(d_kernels, d_biases, d_features_in)`.
/// The candidate selection is treated as a fixed discrete structure.
pub fn layer_backward(
    features_in: &[Vec<f64>],
    cfg: &LayerConfig,
    params: &LayerParams,
    trace: &LayerTrace,
    d_out: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    let k = params.k;
    let f_in = params.f_in;
    let f_out = params.f_out();
    let n = features_in.len();
    let mut d_kernels = vec![vec![0.0; k * k * f_in]; f_out];
    let mut d_biases = vec![0.0; f_out];
    let mut d_features = vec![vec![0.0; f_in]; n];
    for (p, pairs) in trace.pair_lists.iter().enumerate() {
        let pre = &trace.pre_activations[p];
        for c in 0..f_out {
            let dz = cfg.activation.derivative(pre[c]) * d_out[p][c];
            if dz == 0.0 {
                continue;
            }
            d_biases[c] += dz;
            let kernel = &params.kernels[c];
            let dk = &mut d_kernels[c];
            for &(bi, bj, j) in pairs {
                let base = (bi * k + bj) * f_in;
                let feat = &features_in[j];
                let dfeat = &mut d_features[j];
                for l in 0..f_in {
                    dk[base + l] += dz * feat[l];
                    dfeat[l] += dz * kernel[base + l];
                }
            }
        }
    }
    (d_kernels, d_biases, d_features)
}
