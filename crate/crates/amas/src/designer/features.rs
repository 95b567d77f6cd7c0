//! Deterministic feature extraction for the feature scorer.
//!
//! The vector is a fixed, documented layout over a configured potential-edge
//! universe (d edges, L length buckets, H hashed token buckets):
//!
//! | block                         | size      |
//! |-------------------------------|-----------|
//! | edge inclusion indicators     | d         |
//! | node-kind counts (tot/reflect/io/output) | 4 |
//! | edge count / d                | 1         |
//! | query length one-hot          | L         |
//! | hashed token presence         | H         |
//! | edge x (length ++ token) cross products | d * (L + H) |
//!
//! The cross block makes selection query-conditional: a linear scorer can
//! weight each edge differently per query bucket.
//!
//! When the query text is a rendered designer prompt, only the section
//! between the literal anchors `"The input query is: "` and `"The graph
//! structure is:"` feeds the query blocks; otherwise the whole text does.
//! An empty query leaves the query blocks all-zero.

use crate::graph::{GraphStructure, NodeKind};
use crate::hash::fnv1a64;
use serde::{Deserialize, Serialize};

use super::{QUERY_SECTION_CLOSE, QUERY_SECTION_OPEN};

/// Chars per query length bucket.
const LEN_BUCKET_WIDTH: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub potential_edges: Vec<(usize, usize)>,
    pub len_buckets: usize,
    pub hash_buckets: usize,
}

impl FeatureConfig {
    pub fn new(potential_edges: Vec<(usize, usize)>) -> Self {
        Self {
            potential_edges,
            len_buckets: 8,
            hash_buckets: 16,
        }
    }

    pub fn dim(&self) -> usize {
        let d = self.potential_edges.len();
        let q = self.len_buckets + self.hash_buckets;
        d + 4 + 1 + q + d * q
    }

    /// Extracts the documented feature vector. Unparseable graph text leaves
    /// the graph blocks zero rather than erroring.
    pub fn extract(&self, query: &str, graph_text: &str) -> Vec<f64> {
        let d = self.potential_edges.len();
        let q = self.len_buckets + self.hash_buckets;
        let mut out = vec![0.0; self.dim()];

        // Graph blocks.
        if let Ok(structure) = GraphStructure::deserialize(graph_text) {
            for (k, edge) in self.potential_edges.iter().enumerate() {
                if structure.edges().binary_search(edge).is_ok() {
                    out[k] = 1.0;
                }
            }
            for node in structure.nodes() {
                let slot = match node.kind {
                    NodeKind::Tot { .. } => 0,
                    NodeKind::Reflect { .. } => 1,
                    NodeKind::Io => 2,
                    NodeKind::Output => 3,
                };
                out[d + slot] += 1.0;
            }
            if d > 0 {
                out[d + 4] = structure.edges().len() as f64 / d as f64;
            }
        }

        // Query blocks.
        let section = query_section(query);
        let mut qvec = vec![0.0; q];
        if !section.is_empty() {
            let bucket = (section.chars().count() / LEN_BUCKET_WIDTH).min(self.len_buckets - 1);
            qvec[bucket] = 1.0;
            for token in tokens(section) {
                let h = (fnv1a64(token.as_bytes()) % self.hash_buckets as u64) as usize;
                qvec[self.len_buckets + h] = 1.0;
            }
        }
        out[d + 5..d + 5 + q].copy_from_slice(&qvec);

        // Cross products: edge indicator times each query feature.
        for k in 0..d {
            if out[k] == 0.0 {
                continue;
            }
            let base = d + 5 + q + k * q;
            out[base..base + q].copy_from_slice(&qvec);
        }
        out
    }
}

/// Slices the input-query section out of a rendered designer prompt; plain
/// text passes through unchanged.
fn query_section(text: &str) -> &str {
    if let Some(start) = text.find(QUERY_SECTION_OPEN) {
        let rest = &text[start + QUERY_SECTION_OPEN.len()..];
        if let Some(end) = rest.find(QUERY_SECTION_CLOSE) {
            let section = rest[..end].trim_end();
            return section.strip_suffix('.').unwrap_or(section);
        }
    }
    text
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}
