//! Attributed graph data model, schema-based subgraph induction, adjacency
//! construction and simple-path enumeration.
//!
//! Graphs are undirected and unweighted. Node order is stable: the position
//! of a node in [`AttributedGraph::nodes`] is its index, and serialization
//! round-trips preserve that assignment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A node of an attributed graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    #[serde(rename = "type")]
    pub node_type: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, String>,
    /// Feature vector of fixed dimension `F`, filled by the embedding stage.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub features: Vec<f64>,
}

impl NodeRecord {
    pub fn new(id: impl Into<String>, node_type: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            node_type: node_type.into(),
            attrs: BTreeMap::new(),
            features: Vec::new(),
        }
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attrs.insert(key.into(), value.into());
        self
    }
}

/// Undirected, unweighted graph with per-node attributes and features.
///
/// Self-loops are never stored; they are added analytically where the
/// algorithms need them. Duplicate edges are rejected on insertion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttributedGraph {
    nodes: Vec<NodeRecord>,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl AttributedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: NodeRecord) -> usize {
        self.nodes.push(node);
        self.adjacency.push(Vec::new());
        self.nodes.len() - 1
    }

    /// Insert an undirected edge. Self-loops and out-of-range endpoints are
    /// errors; duplicate insertions are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        if a == b {
            return Err(Error::Contract(format!("self-loop on node {a}")));
        }
        let n = self.nodes.len();
        if a >= n || b >= n {
            return Err(Error::Contract(format!(
                "edge ({a},{b}) out of range for {n} nodes"
            )));
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if self.adjacency[lo].contains(&hi) {
            return Ok(());
        }
        self.edges.push((lo, hi));
        self.adjacency[lo].push(hi);
        self.adjacency[hi].push(lo);
        self.adjacency[lo].sort_unstable();
        self.adjacency[hi].sort_unstable();
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &NodeRecord {
        &self.nodes[idx]
    }

    pub fn node_mut(&mut self, idx: usize) -> &mut NodeRecord {
        &mut self.nodes[idx]
    }

    /// Edges as `(lo, hi)` pairs in insertion order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbors of `idx`, ascending.
    pub fn neighbors(&self, idx: usize) -> &[usize] {
        &self.adjacency[idx]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && self.adjacency[a].contains(&b)
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.adjacency[idx].len()
    }

    /// Serialize to the versioned graph JSON document.
    pub fn to_json(&self) -> GraphFile {
        GraphFile {
            version: 1,
            nodes: self.nodes.clone(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }

    pub fn from_json(file: GraphFile) -> Result<Self> {
        if file.version != 1 {
            return Err(Error::Config(format!(
                "unsupported graph file version {}",
                file.version
            )));
        }
        let mut g = AttributedGraph::new();
        for node in file.nodes {
            g.add_node(node);
        }
        for [a, b] in file.edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }
}

/// On-disk graph document: `{"version":1,"nodes":[...],"edges":[[i,j],...]}`.
/// Node array order defines node indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub version: u32,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<[usize; 2]>,
}

/// One expansion rule of a [`Schema`]: from every matched node of
/// `from_type`, follow edges to exactly `count` neighbors of `to_type`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaRule {
    pub from_type: String,
    pub to_type: String,
    pub count: usize,
}

/// A minimal subgraph query: a root node type plus expansion rules applied
/// breadth-first. Each root node of `root_type` yields at most one subgraph;
/// a rule that cannot be satisfied exactly discards the root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schema {
    pub root_type: String,
    pub rules: Vec<SchemaRule>,
    pub max_nodes: usize,
}

impl Schema {
    fn validate(&self) -> Result<()> {
        if self.root_type.is_empty() {
            return Err(Error::Config("schema root_type is empty".into()));
        }
        if self.max_nodes == 0 {
            return Err(Error::Config("schema max_nodes must be positive".into()));
        }
        for rule in &self.rules {
            if rule.from_type.is_empty() || rule.to_type.is_empty() {
                return Err(Error::Config("schema rule with empty node type".into()));
            }
            if rule.count == 0 {
                return Err(Error::Config("schema rule with zero cardinality".into()));
            }
        }
        Ok(())
    }
}

/// An induced subgraph of a host graph. `node_indices` order is significant:
/// it defines the row order of the attribute matrix.
#[derive(Debug, Clone)]
pub struct TargetSubgraph<'g> {
    pub host: &'g AttributedGraph,
    pub node_indices: Vec<usize>,
    pub label: Option<usize>,
}

impl<'g> TargetSubgraph<'g> {
    pub fn new(host: &'g AttributedGraph, node_indices: Vec<usize>) -> Result<Self> {
        let n = host.node_count();
        let mut seen = vec![false; n];
        for &idx in &node_indices {
            if idx >= n {
                return Err(Error::Contract(format!("subgraph node {idx} out of range")));
            }
            if seen[idx] {
                return Err(Error::Contract(format!("duplicate subgraph node {idx}")));
            }
            seen[idx] = true;
        }
        Ok(Self {
            host,
            node_indices,
            label: None,
        })
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn len(&self) -> usize {
        self.node_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_indices.is_empty()
    }

    /// Membership mask over host nodes.
    pub fn membership(&self) -> Vec<bool> {
        let mut m = vec![false; self.host.node_count()];
        for &idx in &self.node_indices {
            m[idx] = true;
        }
        m
    }
}

/// Binary adjacency matrix of the induced subgraph, in `node_indices` order.
/// Symmetric, zero diagonal.
pub fn adjacency_matrix(sub: &TargetSubgraph) -> Vec<Vec<u8>> {
    let n = sub.len();
    let mut a = vec![vec![0u8; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if sub.host.has_edge(sub.node_indices[i], sub.node_indices[j]) {
                a[i][j] = 1;
                a[j][i] = 1;
            }
        }
    }
    a
}

/// All simple paths of exactly `d` nodes starting at `anchor` that contain no
/// subgraph node other than the anchor. Paths are host-node index sequences,
/// emitted in lexicographic order (ascending-neighbor DFS).
pub fn enumerate_paths(sub: &TargetSubgraph, anchor: usize, d: usize) -> Result<Vec<Vec<usize>>> {
    if d == 0 {
        return Err(Error::Contract("path length must be at least 1".into()));
    }
    if !sub.node_indices.contains(&anchor) {
        return Err(Error::Contract(format!(
            "anchor {anchor} is not a subgraph node"
        )));
    }
    let blocked = sub.membership();
    let mut out = Vec::new();
    let mut stack = vec![anchor];
    let mut on_path = vec![false; sub.host.node_count()];
    on_path[anchor] = true;
    dfs_paths(sub.host, &blocked, d, &mut stack, &mut on_path, &mut out);
    Ok(out)
}

fn dfs_paths(
    host: &AttributedGraph,
    blocked: &[bool],
    d: usize,
    stack: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Vec<usize>>,
) {
    if stack.len() == d {
        out.push(stack.clone());
        return;
    }
    let last = *stack.last().unwrap();
    for &next in host.neighbors(last) {
        if on_path[next] || blocked[next] {
            continue;
        }
        stack.push(next);
        on_path[next] = true;
        dfs_paths(host, blocked, d, stack, on_path, out);
        on_path[next] = false;
        stack.pop();
    }
}

/// Apply a schema to a graph, producing one induced subgraph per satisfiable
/// root, ordered by smallest contained node index.
pub fn induce_subgraphs<'g>(
    graph: &'g AttributedGraph,
    schema: &Schema,
) -> Result<Vec<TargetSubgraph<'g>>> {
    schema.validate()?;
    let mut result = Vec::new();
    for root in 0..graph.node_count() {
        if graph.node(root).node_type != schema.root_type {
            continue;
        }
        if let Some(nodes) = match_root(graph, schema, root) {
            result.push(TargetSubgraph::new(graph, nodes)?);
        }
    }
    result.sort_by_key(|sub| sub.node_indices.iter().copied().min().unwrap_or(usize::MAX));
    Ok(result)
}

fn match_root(graph: &AttributedGraph, schema: &Schema, root: usize) -> Option<Vec<usize>> {
    let mut matched: Vec<usize> = vec![root];
    let mut in_match = vec![false; graph.node_count()];
    in_match[root] = true;
    for rule in &schema.rules {
        // Breadth-first: expand every already-matched node of from_type.
        let sources: Vec<usize> = matched
            .iter()
            .copied()
            .filter(|&v| graph.node(v).node_type == rule.from_type)
            .collect();
        if sources.is_empty() {
            return None;
        }
        for src in sources {
            let mut picked = 0;
            for &nb in graph.neighbors(src) {
                if picked == rule.count {
                    break;
                }
                if !in_match[nb] && graph.node(nb).node_type == rule.to_type {
                    in_match[nb] = true;
                    matched.push(nb);
                    picked += 1;
                }
            }
            if picked < rule.count {
                return None;
            }
        }
        if matched.len() > schema.max_nodes {
            return None;
        }
    }
    Some(matched)
}
