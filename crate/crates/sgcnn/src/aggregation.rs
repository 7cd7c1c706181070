//! Neighbor nodes aggregation.
//!
//! For each configured depth `d`, every subgraph node anchors a search for
//! simple length-`d` paths that leave the subgraph. `s` paths are sampled
//! from the pooled set to form the neighbor path matrix; a trainable 1-by-`d`
//! kernel plus a symmetric pooling over rows extracts one feature vector per
//! depth, the depth vectors are fused by a second pooling, and the fused
//! vector is concatenated onto every subgraph node's features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{enumerate_paths, TargetSubgraph};
use crate::nn::{derive_seed, ActivationKind};

/// Symmetric pooling operators (order-invariant over what they reduce).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolKind {
    Mean,
    Max,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregationConfig {
    pub depths: Vec<usize>,
    pub samples_per_depth: Vec<usize>,
    pub path_pool: PoolKind,
    pub depth_pool: PoolKind,
    pub activation: ActivationKind,
    pub seed: u64,
}

impl AggregationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depths.is_empty() {
            return Err(Error::Config("aggregation needs at least one depth".into()));
        }
        if self.depths.len() != self.samples_per_depth.len() {
            return Err(Error::Config(
                "depths and samples_per_depth must have equal length".into(),
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &d in &self.depths {
            if d == 0 {
                return Err(Error::Config("depths must be >= 1".into()));
            }
            if !seen.insert(d) {
                return Err(Error::Config(format!("duplicate depth {d}")));
            }
        }
        if self.samples_per_depth.iter().any(|&s| s == 0) {
            return Err(Error::Config("samples_per_depth must be >= 1".into()));
        }
        self.activation.validate()
    }
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            depths: vec![1],
            samples_per_depth: vec![4],
            path_pool: PoolKind::Mean,
            depth_pool: PoolKind::Mean,
            activation: ActivationKind::Relu,
            seed: 0,
        }
    }
}

/// Trainable parameters for one depth: the 1-by-`d` path kernel (scalar per
/// position, shared across feature dimensions) and an `F`-dim bias.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthParams {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// The sampled `s`-by-`d` matrix of neighbor feature vectors.
#[derive(Debug, Clone)]
pub struct NeighborPathMatrix {
    /// `s` rows, each `d` feature vectors of dimension `F`.
    pub entries: Vec<Vec<Vec<f64>>>,
    pub depth: usize,
    /// `(anchor, path)` for every non-padded sampled row, in row order.
    /// Padded rows repeat earlier provenance entries.
    pub provenance: Vec<(usize, Vec<usize>)>,
}

/// Pooled path set for one depth: the union over all anchors, anchors in
/// `node_indices` order, per-anchor paths in lexicographic DFS order.
pub fn pooled_paths(sub: &TargetSubgraph, d: usize) -> Result<Vec<(usize, Vec<usize>)>> {
    let mut pool = Vec::new();
    for &anchor in &sub.node_indices {
        for path in enumerate_paths(sub, anchor, d)? {
            pool.push((anchor, path));
        }
    }
    Ok(pool)
}

fn feature_dim(sub: &TargetSubgraph) -> usize {
    sub.node_indices
        .first()
        .map(|&i| sub.host.node(i).features.len())
        .unwrap_or(0)
}

/// Sample `s` rows from the pooled depth-`d` path set.
///
/// With more than `s` paths available, rows are drawn uniformly without
/// replacement (kept in pooled order). With `s` or fewer, every path is used
/// and rows are padded by cycling through the pool in order. An empty pool
/// yields an all-zero matrix.
pub fn build_neighbor_matrix(
    sub: &TargetSubgraph,
    d: usize,
    s: usize,
    seed: u64,
) -> Result<NeighborPathMatrix> {
    if d == 0 || s == 0 {
        return Err(Error::Contract("d and s must be >= 1".into()));
    }
    let pool = pooled_paths(sub, d)?;
    let f = feature_dim(sub);
    if pool.is_empty() {
        return Ok(NeighborPathMatrix {
            entries: vec![vec![vec![0.0; f]; d]; s],
            depth: d,
            provenance: Vec::new(),
        });
    }
    let selected: Vec<usize> = if pool.len() > s {
        let mut indices: Vec<usize> = (0..pool.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        indices.shuffle(&mut rng);
        let mut picked = indices[..s].to_vec();
        picked.sort_unstable();
        picked
    } else {
        (0..s).map(|i| i % pool.len()).collect()
    };
    let mut entries = Vec::with_capacity(s);
    let mut provenance = Vec::with_capacity(s);
    for &idx in &selected {
        let (anchor, path) = &pool[idx];
        entries.push(
            path.iter()
                .map(|&v| sub.host.node(v).features.clone())
                .collect(),
        );
        provenance.push((*anchor, path.clone()));
    }
    Ok(NeighborPathMatrix {
        entries,
        depth: d,
        provenance,
    })
}

/// Cache from one depth's forward pass, used by the backward pass.
#[derive(Debug, Clone)]
pub struct DepthTrace {
    /// Pre-activation `pool(rows) + b`.
    pub pre_activation: Vec<f64>,
    /// For max path-pooling: winning row per feature dimension.
    pub argmax_rows: Option<Vec<usize>>,
    pub x_d: Vec<f64>,
}

/// Eq. `x_d = act(pool_rows(sum_t w[t] * N[row][t]) + b)`.
pub fn aggregate_depth(
    matrix: &NeighborPathMatrix,
    params: &DepthParams,
    pool: PoolKind,
    act: ActivationKind,
) -> Result<DepthTrace> {
    if params.w.len() != matrix.depth {
        return Err(Error::Contract(format!(
            "kernel length {} does not match depth {}",
            params.w.len(),
            matrix.depth
        )));
    }
    let s = matrix.entries.len();
    let f = params.b.len();
    for row in &matrix.entries {
        for cell in row {
            if cell.len() != f {
                return Err(Error::Contract(format!(
                    "feature dimension {} does not match bias dimension {f}",
                    cell.len()
                )));
            }
        }
    }
    // y[r][k] = sum_t w[t] * N[r][t][k]
    let row_values: Vec<Vec<f64>> = matrix
        .entries
        .iter()
        .map(|row| {
            let mut y = vec![0.0; f];
            for (t, cell) in row.iter().enumerate() {
                let wt = params.w[t];
                for (yk, &ck) in y.iter_mut().zip(cell) {
                    *yk += wt * ck;
                }
            }
            y
        })
        .collect();
    let mut pre = vec![0.0; f];
    let mut argmax_rows = None;
    match pool {
        PoolKind::Mean => {
            for y in &row_values {
                for (p, &v) in pre.iter_mut().zip(y) {
                    *p += v;
                }
            }
            for p in &mut pre {
                *p /= s as f64;
            }
        }
        PoolKind::Max => {
            let mut winners = vec![0usize; f];
            pre.copy_from_slice(&row_values[0]);
            for (r, y) in row_values.iter().enumerate().skip(1) {
                for k in 0..f {
                    if y[k] > pre[k] {
                        pre[k] = y[k];
                        winners[k] = r;
                    }
                }
            }
            argmax_rows = Some(winners);
        }
    }
    for (p, &bk) in pre.iter_mut().zip(&params.b) {
        *p += bk;
    }
    let x_d = act.apply_slice(&pre);
    Ok(DepthTrace {
        pre_activation: pre,
        argmax_rows,
        x_d,
    })
}

/// Gradients of one depth's output w.r.t. its kernel and bias.
pub fn aggregate_depth_backward(
    matrix: &NeighborPathMatrix,
    params: &DepthParams,
    pool: PoolKind,
    act: ActivationKind,
    trace: &DepthTrace,
    d_xd: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let s = matrix.entries.len();
    let f = params.b.len();
    let d = matrix.depth;
    // d pre = act'(pre) * d x_d
    let d_pre: Vec<f64> = trace
        .pre_activation
        .iter()
        .zip(d_xd)
        .map(|(&z, &g)| act.derivative(z) * g)
        .collect();
    let db = d_pre.clone();
    let mut dw = vec![0.0; d];
    match pool {
        PoolKind::Mean => {
            for row in &matrix.entries {
                for (t, cell) in row.iter().enumerate() {
                    let mut acc = 0.0;
                    for k in 0..f {
                        acc += d_pre[k] * cell[k];
                    }
                    dw[t] += acc / s as f64;
                }
            }
        }
        PoolKind::Max => {
            let winners = trace.argmax_rows.as_ref().expect("max pooling trace");
            for k in 0..f {
                let row = &matrix.entries[winners[k]];
                for (t, cell) in row.iter().enumerate() {
                    dw[t] += d_pre[k] * cell[k];
                }
            }
        }
    }
    (dw, db)
}

/// Full forward cache for the aggregation stage.
#[derive(Debug, Clone)]
pub struct AggregateTrace {
    pub matrices: Vec<NeighborPathMatrix>,
    pub depth_traces: Vec<DepthTrace>,
    /// Fused neighbor vector concatenated onto every node.
    pub x_n: Vec<f64>,
    /// For max depth-pooling: winning depth index per feature dimension.
    pub argmax_depths: Option<Vec<usize>>,
}

/// Run the aggregation stage: build each depth's matrix, extract per-depth
/// features, fuse across depths, and concatenate the fused vector onto every
/// node's features. Returns the augmented `n x 2F` features and the trace.
pub fn aggregate(
    sub: &TargetSubgraph,
    cfg: &AggregationConfig,
    params: &[DepthParams],
) -> Result<(Vec<Vec<f64>>, AggregateTrace)> {
    cfg.validate()?;
    if params.len() != cfg.depths.len() {
        return Err(Error::Contract(format!(
            "expected {} depth parameter sets, got {}",
            cfg.depths.len(),
            params.len()
        )));
    }
    let f = feature_dim(sub);
    let mut matrices = Vec::new();
    let mut depth_traces = Vec::new();
    for (i, (&d, &s)) in cfg.depths.iter().zip(&cfg.samples_per_depth).enumerate() {
        let seed = derive_seed(cfg.seed, "agg-depth", &[d as u64]);
        let matrix = build_neighbor_matrix(sub, d, s, seed)?;
        let trace = aggregate_depth(&matrix, &params[i], cfg.path_pool, cfg.activation)?;
        matrices.push(matrix);
        depth_traces.push(trace);
    }
    let k = depth_traces.len();
    let mut x_n = vec![0.0; f];
    let mut argmax_depths = None;
    match cfg.depth_pool {
        PoolKind::Mean => {
            for trace in &depth_traces {
                for (x, &v) in x_n.iter_mut().zip(&trace.x_d) {
                    *x += v;
                }
            }
            for x in &mut x_n {
                *x /= k as f64;
            }
        }
        PoolKind::Max => {
            let mut winners = vec![0usize; f];
            x_n.copy_from_slice(&depth_traces[0].x_d);
            for (i, trace) in depth_traces.iter().enumerate().skip(1) {
                for j in 0..f {
                    if trace.x_d[j] > x_n[j] {
                        x_n[j] = trace.x_d[j];
                        winners[j] = i;
                    }
                }
            }
            argmax_depths = Some(winners);
        }
    }
    let augmented = sub
        .node_indices
        .iter()
        .map(|&idx| {
            let mut v = sub.host.node(idx).features.clone();
            v.extend_from_slice(&x_n);
            v
        })
        .collect();
    Ok((
        augmented,
        AggregateTrace {
            matrices,
            depth_traces,
            x_n,
            argmax_depths,
        },
    ))
}

/// Backward through the aggregation stage from the gradient of the fused
/// neighbor vector. Returns `(dw, db)` per depth, in config depth order.
pub fn aggregate_backward(
    cfg: &AggregationConfig,
    params: &[DepthParams],
    trace: &AggregateTrace,
    d_xn: &[f64],
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let k = trace.depth_traces.len();
    let f = d_xn.len();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let mut d_xd = vec![0.0; f];
        match cfg.depth_pool {
            PoolKind::Mean => {
                for j in 0..f {
                    d_xd[j] = d_xn[j] / k as f64;
                }
            }
            PoolKind::Max => {
                let winners = trace.argmax_depths.as_ref().expect("max depth-pool trace");
                for j in 0..f {
                    if winners[j] == i {
                        d_xd[j] = d_xn[j];
                    }
                }
            }
        }
        out.push(aggregate_depth_backward(
            &trace.matrices[i],
            &params[i],
            cfg.path_pool,
            cfg.activation,
            &trace.depth_traces[i],
            &d_xd,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{AttributedGraph, NodeRecord};

    fn graph_with_features(n: usize, edges: &[(usize, usize)], f: usize) -> AttributedGraph {
        let mut g = AttributedGraph::new();
        for i in 0..n {
            let mut node = NodeRecord::new(format!("n{i}"), "node");
            node.features = (0..f).map(|j| (i * f + j) as f64 * 0.1).collect();
            g.add_node(node);
        }
        for &(a, b) in edges {
            g.add_edge(a, b).unwrap();
        }
        g
    }

    #[test]
    fn whole_population_is_used_when_sizes_match() {
        // 0-1, 0-2 with target {0}: two depth-2 paths.
        let g = graph_with_features(3, &[(0, 1), (0, 2)], 2);
        let sub = TargetSubgraph::new(&g, vec![0]).unwrap();
        for seed in [0u64, 1, 99] {
            let m = build_neighbor_matrix(&sub, 2, 2, seed).unwrap();
            let paths: Vec<_> = m.provenance.iter().map(|(_, p)| p.clone()).collect();
            assert_eq!(paths, vec![vec![0, 1], vec![0, 2]]);
        }
    }

    #[test]
    fn padding_cycles_the_pool() {
        let g = graph_with_features(3, &[(0, 1), (0, 2)], 2);
        let sub = TargetSubgraph::new(&g, vec![0]).unwrap();
        let m = build_neighbor_matrix(&sub, 2, 5, 7).unwrap();
        let paths: Vec<_> = m.provenance.iter().map(|(_, p)| p.clone()).collect();
        assert_eq!(
            paths,
            vec![vec![0, 1], vec![0, 2], vec![0, 1], vec![0, 2], vec![0, 1]]
        );
    }

    #[test]
    fn empty_pool_gives_zero_matrix() {
        let g = graph_with_features(1, &[], 3);
        let sub = TargetSubgraph::new(&g, vec![0]).unwrap();
        let m = build_neighbor_matrix(&sub, 4, 3, 0).unwrap();
        assert_eq!(m.entries, vec![vec![vec![0.0; 3]; 4]; 3]);
    }

    #[test]
    fn one_hot_kernel_selects_first_position() {
        let g = graph_with_features(4, &[(0, 1), (0, 2), (0, 3)], 2);
        let sub = TargetSubgraph::new(&g, vec![0]).unwrap();
        let m = build_neighbor_matrix(&sub, 2, 3, 0).unwrap();
        let params = DepthParams {
            w: vec![1.0, 0.0],
            b: vec![0.0, 0.0],
        };
        let trace =
            aggregate_depth(&m, &params, PoolKind::Mean, ActivationKind::Identity).unwrap();
        // All rows start at the anchor, so the mean of first-position
        // features is the anchor's feature vector.
        for (got, want) in trace.x_d.iter().zip(&g.node(0).features) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_matrix_yields_activated_bias() {
        let g = graph_with_features(1, &[], 2);
        let sub = TargetSubgraph::new(&g, vec![0]).unwrap();
        let m = build_neighbor_matrix(&sub, 3, 2, 0).unwrap();
        let params = DepthParams {
            w: vec![0.5, 0.5, 0.5],
            b: vec![-1.0, 2.0],
        };
        let trace = aggregate_depth(&m, &params, PoolKind::Mean, ActivationKind::Relu).unwrap();
        assert_eq!(trace.x_d, vec![0.0, 2.0]);
    }

    #[test]
    fn aggregate_depth_matches_double_loop_oracle() {
        let g = graph_with_features(6, &[(0, 1), (1, 2), (0, 3), (3, 4), (0, 5)], 2);
        let sub = TargetSubgraph::new(&g, vec![0]).unwrap();
        let m = build_neighbor_matrix(&sub, 3, 4, 11).unwrap();
        let params = DepthParams {
            w: vec![0.3, -0.7, 1.1],
            b: vec![0.05, -0.2],
        };
        let trace = aggregate_depth(&m, &params, PoolKind::Mean, ActivationKind::Tanh).unwrap();
        // Independent straightforward reimplementation.
        let s = m.entries.len();
        for k in 0..2 {
            let mut acc = 0.0;
            for row in &m.entries {
                let mut y = 0.0;
                for (t, cell) in row.iter().enumerate() {
                    y += params.w[t] * cell[k];
                }
                acc += y;
            }
            let expected = (acc / s as f64 + params.b[k]).tanh();
            assert!((trace.x_d[k] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn row_exchange_invariance() {
        let g = graph_with_features(6, &[(0, 1), (1, 2), (0, 3), (3, 4), (0, 5)], 2);
        let sub = TargetSubgraph::new(&g, vec![0]).unwrap();
        let mut m = build_neighbor_matrix(&sub, 2, 3, 5).unwrap();
        let params = DepthParams {
            w: vec![0.4, 0.9],
            b: vec![0.1, 0.1],
        };
        for pool in [PoolKind::Mean, PoolKind::Max] {
            let before = aggregate_depth(&m, &params, pool, ActivationKind::Sigmoid)
                .unwrap()
                .x_d;
            m.entries.reverse();
            let after = aggregate_depth(&m, &params, pool, ActivationKind::Sigmoid)
                .unwrap()
                .x_d;
            m.entries.reverse();
            assert_eq!(before, after);
        }
    }

    #[test]
    fn single_depth_pool_is_identity() {
        let g = graph_with_features(4, &[(0, 1), (1, 2), (2, 3)], 2);
        let sub = TargetSubgraph::new(&g, vec![0]).unwrap();
        let cfg = AggregationConfig {
            depths: vec![2],
            samples_per_depth: vec![2],
            ..Default::default()
        };
        let params = vec![DepthParams {
            w: vec![0.5, 0.5],
            b: vec![0.0, 0.0],
        }];
        let (aug, trace) = aggregate(&sub, &cfg, &params).unwrap();
        assert_eq!(trace.x_n, trace.depth_traces[0].x_d);
        assert_eq!(aug[0].len(), 4);
        assert_eq!(&aug[0][..2], &g.node(0).features[..]);
        assert_eq!(&aug[0][2..], &trace.x_n[..]);
    }

    #[test]
    fn mean_depth_pool_arithmetic() {
        // x_d1 = (2,0), x_d2 = (0,2) -> x_n = (1,1)
        let mut x_n = vec![0.0; 2];
        for x_d in [[2.0, 0.0], [0.0, 2.0]] {
            for (a, b) in x_n.iter_mut().zip(x_d) {
                *a += b;
            }
        }
        for a in &mut x_n {
            *a /= 2.0;
        }
        assert_eq!(x_n, vec![1.0, 1.0]);
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let mut cfg = AggregationConfig::default();
        cfg.depths = vec![];
        cfg.samples_per_depth = vec![];
        assert!(cfg.validate().is_err());
        let mut cfg = AggregationConfig::default();
        cfg.depths = vec![1, 1];
        cfg.samples_per_depth = vec![2, 2];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn kernel_length_mismatch_is_contract_violation() {
        let g = graph_with_features(2, &[(0, 1)], 2);
        let sub = TargetSubgraph::new(&g, vec![0]).unwrap();
        let m = build_neighbor_matrix(&sub, 2, 1, 0).unwrap();
        let params = DepthParams {
            w: vec![1.0],
            b: vec![0.0, 0.0],
        };
        assert!(aggregate_depth(&m, &params, PoolKind::Mean, ActivationKind::Relu).is_err());
    }
}
