//! Dataset containers and the JSON-lines sample format.
//!
//! One record per line: `{"graph": {...}, "target_nodes": [...], "label": n}`
//! with either an inline `graph` document or a `graph_file` path resolved
//! relative to the dataset file.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, GraphFile, TargetSubgraph};

/// One labeled sample: a host graph plus the target node list. The node list
/// order defines the attribute-matrix row order.
#[derive(Debug, Clone)]
pub struct Sample {
    pub graph: AttributedGraph,
    pub target_nodes: Vec<usize>,
    pub label: usize,
}

impl Sample {
    pub fn subgraph(&self) -> Result<TargetSubgraph<'_>> {
        Ok(TargetSubgraph::new(&self.graph, self.target_nodes.clone())?.with_label(self.label))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    graph: Option<GraphFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    graph_file: Option<String>,
    target_nodes: Vec<usize>,
    label: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.samples
            .iter()
            .map(|s| s.label + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        for sample in &self.samples {
            let record = SampleRecord {
                graph: Some(sample.graph.to_json()),
                graph_file: None,
                target_nodes: sample.target_nodes.clone(),
                label: sample.label,
            };
            serde_json::to_writer(&mut file, &record)?;
            file.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn load_jsonl(path: &Path) -> Result<Self> {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let file = BufReader::new(std::fs::File::open(path)?);
        let mut samples = Vec::new();
        for (lineno, line) in file.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: SampleRecord = serde_json::from_str(&line).map_err(|e| {
                Error::Config(format!("{}:{}: bad sample record: {e}", path.display(), lineno + 1))
            })?;
            let graph = match (record.graph, record.graph_file) {
                (Some(g), _) => AttributedGraph::from_json(g)?,
                (None, Some(rel)) => {
                    let gpath = dir.join(rel);
                    let text = std::fs::read_to_string(&gpath)?;
                    AttributedGraph::from_json(serde_json::from_str(&text)?)?
                }
                (None, None) => {
                    return Err(Error::Config(format!(
                        "{}:{}: sample has neither 'graph' nor 'graph_file'",
                        path.display(),
                        lineno + 1
                    )))
                }
            };
            samples.push(Sample {
                graph,
                target_nodes: record.target_nodes,
                label: record.label,
            });
        }
        Ok(Self { samples })
    }
}

/// Stratified split: per class, a seeded shuffle then a `ratio` cut. Returns
/// `(train_indices, test_indices)`.
pub fn split(dataset: &Dataset, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must be in (0,1), got {ratio}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, sample) in dataset.samples.iter().enumerate() {
        by_class.entry(sample.label).or_default().push(idx);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, mut indices) in by_class {
        if indices.len() < 2 {
            return Err(Error::Config(format!(
                "class {label} has fewer than 2 samples; cannot stratify"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(crate::nn::derive_seed(seed, "split", &[label as u64]));
        indices.shuffle(&mut rng);
        let cut = ((indices.len() as f64) * ratio).round() as usize;
        let cut = cut.clamp(1, indices.len() - 1);
        train.extend_from_slice(&indices[..cut]);
        test.extend_from_slice(&indices[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeRecord;

    fn tiny_dataset(per_class: usize, classes: usize) -> Dataset {
        let mut samples = Vec::new();
        for label in 0..classes {
            for i in 0..per_class {
                let mut g = AttributedGraph::new();
                g.add_node(NodeRecord::new(format!("c{label}s{i}a"), "node"));
                g.add_node(NodeRecord::new(format!("c{label}s{i}b"), "node"));
                g.add_edge(0, 1).unwrap();
                samples.push(Sample {
                    graph: g,
                    target_nodes: vec![0, 1],
                    label,
                });
            }
        }
        Dataset { samples }
    }

    #[test]
    fn stratified_split_sizes_and_proportions() {
        let ds = tiny_dataset(10, 6);
        let (train, test) = split(&ds, 0.8, 1).unwrap();
        assert_eq!(train.len(), 48);
        assert_eq!(test.len(), 12);
        for label in 0..6 {
            let n = train.iter().filter(|&&i| ds.samples[i].label == label).count();
            assert_eq!(n, 8);
        }
    }

    #[test]
    fn split_is_deterministic_disjoint_and_covering() {
        let ds = tiny_dataset(7, 3);
        let (tr1, te1) = split(&ds, 0.7, 42).unwrap();
        let (tr2, te2) = split(&ds, 0.7, 42).unwrap();
        assert_eq!(tr1, tr2);
        assert_eq!(te1, te2);
        let mut all: Vec<usize> = tr1.iter().chain(&te1).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
    }

    #[test]
    fn singleton_class_is_a_stratification_error() {
        let mut ds = tiny_dataset(3, 2);
        ds.samples.pop();
        ds.samples.pop();
        assert!(split(&ds, 0.5, 0).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let ds = tiny_dataset(2, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.jsonl");
        ds.save_jsonl(&path).unwrap();
        let back = Dataset::load_jsonl(&path).unwrap();
        assert_eq!(back.len(), ds.len());
        assert_eq!(back.samples[3].label, 1);
        assert_eq!(back.samples[3].graph, ds.samples[3].graph);
    }
}
