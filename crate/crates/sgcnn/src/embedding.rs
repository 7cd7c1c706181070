//! Node attribute embedding.
//!
//! The default embedder is a token-hashing bag of words: attribute values are
//! lowercased, split on non-alphanumeric characters, and each token is hashed
//! with FNV-1a (64-bit, offset basis `0xcbf29ce484222325`, prime
//! `0x100000001b3`). The token contributes `sign` to bucket `hash % F`, where
//! `sign` is `+1` when the top hash bit is clear and `-1` otherwise. The node
//! vector is the sum of its token contributions. The same recipe is spelled
//! out in the book so external tools can reproduce vectors bit-exactly.
//!
//! A pretrained-table mode is available for callers with real embeddings:
//! node ids are looked up first, otherwise token vectors are averaged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedMode {
    HashedBagOfWords,
    PretrainedTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    None,
    UnitL2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub dimension: usize,
    pub mode: EmbedMode,
    pub normalization: Normalization,
}

impl EmbedderConfig {
    pub fn hashed(dimension: usize) -> Self {
        Self {
            dimension,
            mode: EmbedMode::HashedBagOfWords,
            normalization: Normalization::None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Config("embedding dimension must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self::hashed(16)
    }
}

/// Pretrained vector table: `{"dimension":F,"vectors":{"token or node-id":[...]}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PretrainedTable {
    pub dimension: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

pub const FNV_OFFSET: u64 = 0xcbf29ce484222325;
pub const FNV_PRIME: u64 = 0x100000001b3;

/// FNV-1a over the token bytes.
pub fn token_hash(token: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for byte in token.bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect::<Vec<_>>()
        .into_iter()
}

fn normalize(mut v: Vec<f64>, norm: Normalization) -> Vec<f64> {
    if norm == Normalization::UnitL2 {
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 0.0 {
            for x in &mut v {
                *x /= len;
            }
        }
    }
    v
}

/// Embed one attribute map. Empty attributes give the zero vector.
pub fn embed_node(attrs: &BTreeMap<String, String>, cfg: &EmbedderConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if cfg.mode != EmbedMode::HashedBagOfWords {
        return Err(Error::Config(
            "pretrained-table mode requires embed_node_with_table".into(),
        ));
    }
    let mut v = vec![0.0; cfg.dimension];
    for value in attrs.values() {
        for token in tokenize(value) {
            let h = token_hash(&token);
            let bucket = (h % cfg.dimension as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
    }
    Ok(normalize(v, cfg.normalization))
}

/// Table lookup: node id first, otherwise the average of the token vectors
/// found in the table (missing tokens contribute nothing).
pub fn embed_node_with_table(
    node_id: &str,
    attrs: &BTreeMap<String, String>,
    table: &PretrainedTable,
    cfg: &EmbedderConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if table.dimension != cfg.dimension {
        return Err(Error::Config(format!(
            "pretrained table dimension {} does not match configured dimension {}",
            table.dimension, cfg.dimension
        )));
    }
    if let Some(v) = table.vectors.get(node_id) {
        if v.len() != cfg.dimension {
            return Err(Error::Config(format!(
                "vector for '{node_id}' has length {}, expected {}",
                v.len(),
                cfg.dimension
            )));
        }
        return Ok(normalize(v.clone(), cfg.normalization));
    }
    let mut v = vec![0.0; cfg.dimension];
    let mut hits = 0usize;
    for value in attrs.values() {
        for token in tokenize(value) {
            if let Some(tv) = table.vectors.get(&token) {
                if tv.len() != cfg.dimension {
                    return Err(Error::Config(format!(
                        "vector for token '{token}' has length {}, expected {}",
                        tv.len(),
                        cfg.dimension
                    )));
                }
                for (a, b) in v.iter_mut().zip(tv) {
                    *a += b;
                }
                hits += 1;
            }
        }
    }
    if hits > 0 {
        for x in &mut v {
            *x /= hits as f64;
        }
    }
    Ok(normalize(v, cfg.normalization))
}

/// Fill every node's feature vector in place. Idempotent.
pub fn embed_graph(graph: &mut AttributedGraph, cfg: &EmbedderConfig) -> Result<()> {
    cfg.validate()?;
    for idx in 0..graph.node_count() {
        let features = embed_node(&graph.node(idx).attrs, cfg)?;
        graph.node_mut(idx).features = features;
    }
    Ok(())
}

pub fn embed_graph_with_table(
    graph: &mut AttributedGraph,
    table: &PretrainedTable,
    cfg: &EmbedderConfig,
) -> Result<()> {
    for idx in 0..graph.node_count() {
        let node = graph.node(idx);
        let features = embed_node_with_table(&node.id.clone(), &node.attrs.clone(), table, cfg)?;
        graph.node_mut(idx).features = features;
    }
    Ok(())
}
