//! Parameterized composite agent graph.
//!
//! A graph is a fixed roster of agent nodes plus a set of *potential* edges,
//! each governed by a learnable logit. Sampling a concrete structure includes
//! every potential edge independently with probability `sigmoid(theta_k)`.
//! The potential-edge set is layered (edges only run from lower to higher
//! node id), so every sampled subset is a DAG by construction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid parameters: {0}")]
    InvalidParameter(String),
    #[error("edge ({0}, {1}) is not in the potential edge set")]
    EdgeMismatch(usize, usize),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid structure: {0}")]
    InvalidStructure(String),
}

/// What an agent node does when executed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeKind {
    /// Tree-search reasoning: expands `branching` continuations per frontier
    /// state for `depth` levels, keeping a beam of `branching` states.
    Tot { depth: u32, branching: u32 },
    /// Draft/critique/revise loop: `passes` drafting passes with
    /// `reflection_steps` critique calls between consecutive passes.
    Reflect { reflection_steps: u32, passes: u32 },
    /// Single direct completion of the composed input.
    Io,
    /// Terminal node; consolidates predecessor answers into the final one.
    Output,
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Tot { .. } => "tot",
            NodeKind::Reflect { .. } => "reflect",
            NodeKind::Io => "io",
            NodeKind::Output => "output",
        }
    }

    fn default_template(&self) -> &'static str {
        self.name()
    }
}

/// One node of the roster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: usize,
    pub kind: NodeKind,
    pub prompt_template_id: String,
}

impl NodeSpec {
    pub fn new(id: usize, kind: NodeKind) -> Self {
        let prompt_template_id = kind.default_template().to_string();
        Self {
            id,
            kind,
            prompt_template_id,
        }
    }
}

/// The learnable graph: node roster, potential edges, and edge logits.
///
/// Immutable after construction; optimization produces updated copies.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphParams {
    nodes: Vec<NodeSpec>,
    potential_edges: Vec<(usize, usize)>,
    theta: Vec<f64>,
}

impl GraphParams {
    /// Validates and builds graph parameters.
    ///
    /// Potential edges must be unique, layered (`src < dst`), and in range;
    /// the roster must have contiguous ids, exactly one output node, and at
    /// least one IO node (the degenerate-structure fallback needs it).
    pub fn new(
        nodes: Vec<NodeSpec>,
        potential_edges: Vec<(usize, usize)>,
        theta: Vec<f64>,
    ) -> Result<Self, GraphError> {
        validate_nodes(&nodes)?;
        if theta.len() != potential_edges.len() {
            return Err(GraphError::InvalidParameter(format!(
                "theta length {} != potential edge count {}",
                theta.len(),
                potential_edges.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(GraphError::InvalidParameter(
                "theta contains a non-finite value".into(),
            ));
        }
        let n = nodes.len();
        let mut seen = std::collections::HashSet::new();
        for &(src, dst) in &potential_edges {
            if src >= dst {
                return Err(GraphError::InvalidParameter(format!(
                    "potential edge ({src}, {dst}) is not layered (need src < dst)"
                )));
            }
            if dst >= n {
                return Err(GraphError::InvalidParameter(format!(
                    "potential edge ({src}, {dst}) references a missing node"
                )));
            }
            if !seen.insert((src, dst)) {
                return Err(GraphError::InvalidParameter(format!(
                    "duplicate potential edge ({src}, {dst})"
                )));
            }
        }
        Ok(Self {
            nodes,
            potential_edges,
            theta,
        })
    }

    /// The reference composite roster: one IO node, five tree-search nodes
    /// (depth 4, branching 2), five reflection nodes (one reflection step
    /// over two passes), and one output node — 12 nodes total. The potential
    /// edge set is the full layered set, all pairs `(i, j)` with `i < j`.
    pub fn reference(theta_init: f64) -> Self {
        let mut nodes = vec![NodeSpec::new(0, NodeKind::Io)];
        for id in 1..=5 {
            nodes.push(NodeSpec::new(
                id,
                NodeKind::Tot {
                    depth: 4,
                    branching: 2,
                },
            ));
        }
        for id in 6..=10 {
            nodes.push(NodeSpec::new(
                id,
                NodeKind::Reflect {
                    reflection_steps: 1,
                    passes: 2,
                },
            ));
        }
        nodes.push(NodeSpec::new(11, NodeKind::Output));
        Self::full_layered(nodes, theta_init).expect("reference roster is valid")
    }

    /// A 4-node roster (IO, one ToT, one Reflect, Output) with the full
    /// layered potential-edge set; handy for tests and synthetic runs.
    pub fn tiny(theta_init: f64) -> Self {
        let nodes = vec![
            NodeSpec::new(0, NodeKind::Io),
            NodeSpec::new(
                1,
                NodeKind::Tot {
                    depth: 1,
                    branching: 1,
                },
            ),
            NodeSpec::new(
                2,
                NodeKind::Reflect {
                    reflection_steps: 1,
                    passes: 1,
                },
            ),
            NodeSpec::new(3, NodeKind::Output),
        ];
        Self::full_layered(nodes, theta_init).expect("tiny roster is valid")
    }

    /// Builds params over the full layered edge set for the given roster.
    pub fn full_layered(nodes: Vec<NodeSpec>, theta_init: f64) -> Result<Self, GraphError> {
        let n = nodes.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        let d = edges.len();
        Self::new(nodes, edges, vec![theta_init; d])
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn potential_edges(&self) -> &[(usize, usize)] {
        &self.potential_edges
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Number of learnable edges.
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Returns a copy with replaced logits.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self, GraphError> {
        Self::new(self.nodes.clone(), self.potential_edges.clone(), theta)
    }

    /// Element-wise `sigmoid(theta)`: the per-edge inclusion probabilities.
    pub fn edge_probabilities(&self) -> Result<Vec<f64>, GraphError> {
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(GraphError::InvalidParameter(
                "theta contains a non-finite value".into(),
            ));
        }
        Ok(self.theta.iter().map(|&t| sigmoid(t)).collect())
    }

    /// Samples a structure: every potential edge is included independently
    /// with its probability, drawing one uniform per edge, in edge order,
    /// from `ChaCha8Rng::seed_from_u64(seed)`. Bit-reproducible.
    pub fn sample_structure(&self, seed: u64) -> GraphStructure {
        let probs = self
            .edge_probabilities()
            .expect("validated params have finite theta");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges: Vec<(usize, usize)> = self
            .potential_edges
            .iter()
            .zip(&probs)
            .filter(|&(_, &p)| rng.gen::<f64>() < p)
            .map(|(&e, _)| e)
            .collect();
        GraphStructure::from_sorted_subset(self.nodes.clone(), edges)
    }

    /// Log-likelihood of `structure` under the edge distribution:
    /// `sum_k included_k * ln p_k + (1 - included_k) * ln(1 - p_k)`.
    pub fn log_prob(&self, structure: &GraphStructure) -> Result<f64, GraphError> {
        let included = self.inclusion_mask(structure)?;
        let mut total = 0.0;
        for (&t, inc) in self.theta.iter().zip(included) {
            // ln sigmoid(t) = -softplus(-t); ln(1 - sigmoid(t)) = -softplus(t)
            total -= if inc { softplus(-t) } else { softplus(t) };
        }
        Ok(total)
    }

    /// Per-potential-edge inclusion indicators for `structure`.
    ///
    /// Errors if the structure has an edge outside the potential set.
    pub fn inclusion_mask(&self, structure: &GraphStructure) -> Result<Vec<bool>, GraphError> {
        let mut mask = vec![false; self.potential_edges.len()];
        let index: std::collections::HashMap<(usize, usize), usize> = self
            .potential_edges
            .iter()
            .enumerate()
            .map(|(k, &e)| (e, k))
            .collect();
        for &(src, dst) in structure.edges() {
            match index.get(&(src, dst)) {
                Some(&k) => mask[k] = true,
                None => return Err(GraphError::EdgeMismatch(src, dst)),
            }
        }
        Ok(mask)
    }

    /// The deterministic structure with edge k included iff `p_k >= 0.5`
    /// (equivalently `theta_k >= 0`; the tie at 0.5 resolves to include).
    pub fn realize_map(&self) -> GraphStructure {
        let edges: Vec<(usize, usize)> = self
            .potential_edges
            .iter()
            .zip(&self.theta)
            .filter(|&(_, &t)| t >= 0.0)
            .map(|(&e, _)| e)
            .collect();
        GraphStructure::from_sorted_subset(self.nodes.clone(), edges)
    }
}

/// One realized agent graph: the roster plus a concrete edge subset.
///
/// Immutable; edges are kept sorted by `(source, target)` so equal edge sets
/// always serialize to byte-equal text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphStructure {
    nodes: Vec<NodeSpec>,
    edges: Vec<(usize, usize)>,
}

impl GraphStructure {
    /// Builds a structure from arbitrary parts, enforcing all invariants:
    /// valid roster, in-range unique acyclic edges, no self-loops.
    pub fn new(nodes: Vec<NodeSpec>, mut edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        validate_nodes(&nodes)?;
        edges.sort_unstable();
        let n = nodes.len();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::InvalidStructure(format!(
                    "duplicate edge ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        for &(src, dst) in &edges {
            if src == dst {
                return Err(GraphError::InvalidStructure(format!("self-loop at {src}")));
            }
            if src >= n || dst >= n {
                return Err(GraphError::InvalidStructure(format!(
                    "edge ({src}, {dst}) references a missing node"
                )));
            }
        }
        let out = Self { nodes, edges };
        out.topological_order()?;
        Ok(out)
    }

    /// Internal fast path for edges already known to be a layered subset.
    fn from_sorted_subset(nodes: Vec<NodeSpec>, mut edges: Vec<(usize, usize)>) -> Self {
        edges.sort_unstable();
        Self { nodes, edges }
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn node(&self, id: usize) -> &NodeSpec {
        &self.nodes[id]
    }

    /// Ids of direct predecessors of `id`, ascending.
    pub fn predecessors(&self, id: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, dst)| dst == id)
            .map(|&(src, _)| src)
            .collect()
    }

    /// The unique output node id.
    pub fn output_id(&self) -> usize {
        self.nodes
            .iter()
            .find(|n| n.kind == NodeKind::Output)
            .expect("validated structure has an output node")
            .id
    }

    /// Lowest-id IO node.
    pub fn first_io_id(&self) -> usize {
        self.nodes
            .iter()
            .find(|n| n.kind == NodeKind::Io)
            .expect("validated structure has an IO node")
            .id
    }

    /// True when the output node is unreachable from every IO node. Such
    /// structures are legal samples; the executor falls back to running the
    /// first IO node directly.
    pub fn is_degenerate(&self) -> bool {
        let n = self.nodes.len();
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(src, dst) in &self.edges {
            succ[src].push(dst);
        }
        let output = self.output_id();
        let mut visited = vec![false; n];
        let mut stack: Vec<usize> = self
            .nodes
            .iter()
            .filter(|s| s.kind == NodeKind::Io)
            .map(|s| s.id)
            .collect();
        while let Some(id) = stack.pop() {
            if visited[id] {
                continue;
            }
            visited[id] = true;
            if id == output {
                return false;
            }
            stack.extend(&succ[id]);
        }
        true
    }

    /// Deterministic topological order: Kahn's algorithm taking the smallest
    /// ready node id first. Errors on cycles.
    pub fn topological_order(&self) -> Result<Vec<usize>, GraphError> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(src, dst) in &self.edges {
            indegree[dst] += 1;
            succ[src].push(dst);
        }
        let mut ready: std::collections::BTreeSet<usize> = (0..n)
            .filter(|&i| indegree[i] == 0)
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&id) = ready.iter().next() {
            ready.remove(&id);
            order.push(id);
            for &next in &succ[id] {
                indegree[next] -= 1;
                if indegree[next] == 0 {
                    ready.insert(next);
                }
            }
        }
        if order.len() != n {
            return Err(GraphError::InvalidStructure(
                "edge set contains a cycle".into(),
            ));
        }
        Ok(order)
    }

    /// Canonical serialization: compact JSON with fixed field order and the
    /// edge list sorted ascending; equal structures produce byte-equal text.
    pub fn serialize(&self) -> String {
        let wire = WireGraph {
            nodes: self.nodes.iter().map(WireNode::from_spec).collect(),
            edges: self.edges.iter().map(|&(s, d)| [s, d]).collect(),
        };
        serde_json::to_string(&wire).expect("graph serialization cannot fail")
    }

    /// Parses canonical text back into a structure, enforcing all invariants
    /// (including acyclicity). Position-carrying errors on malformed input.
    pub fn deserialize(text: &str) -> Result<Self, GraphError> {
        let wire: WireGraph = serde_json::from_str(text).map_err(|e| GraphError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut nodes = Vec::with_capacity(wire.nodes.len());
        for w in wire.nodes {
            nodes.push(w.into_spec()?);
        }
        let edges = wire.edges.iter().map(|&[s, d]| (s, d)).collect();
        Self::new(nodes, edges)
    }
}

fn validate_nodes(nodes: &[NodeSpec]) -> Result<(), GraphError> {
    if nodes.is_empty() {
        return Err(GraphError::InvalidParameter("empty node roster".into()));
    }
    for (i, spec) in nodes.iter().enumerate() {
        if spec.id != i {
            return Err(GraphError::InvalidParameter(format!(
                "node ids must be contiguous from 0; position {i} holds id {}",
                spec.id
            )));
        }
        match spec.kind {
            NodeKind::Tot { depth, branching } => {
                if depth < 1 || branching < 1 {
                    return Err(GraphError::InvalidParameter(format!(
                        "node {i}: tree-search depth and branching must be >= 1"
                    )));
                }
            }
            NodeKind::Reflect {
                reflection_steps,
                passes,
            } => {
                if passes < 1 || reflection_steps < 1 {
                    return Err(GraphError::InvalidParameter(format!(
                        "node {i}: reflection passes and steps must be >= 1"
                    )));
                }
            }
            NodeKind::Io | NodeKind::Output => {}
        }
    }
    let outputs = nodes
        .iter()
        .filter(|s| s.kind == NodeKind::Output)
        .count();
    if outputs != 1 {
        return Err(GraphError::InvalidParameter(format!(
            "exactly one output node required, found {outputs}"
        )));
    }
    if !nodes.iter().any(|s| s.kind == NodeKind::Io) {
        return Err(GraphError::InvalidParameter(
            "at least one IO node required".into(),
        ));
    }
    Ok(())
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

// Wire format. Field order is fixed by declaration order; `cfg` is a
// BTreeMap so keys always serialize alphabetically.

#[derive(Serialize, Deserialize)]
struct WireGraph {
    nodes: Vec<WireNode>,
    edges: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct WireNode {
    id: usize,
    kind: String,
    cfg: BTreeMap<String, serde_json::Value>,
}

impl WireNode {
    fn from_spec(spec: &NodeSpec) -> Self {
        let mut cfg = BTreeMap::new();
        match spec.kind {
            NodeKind::Tot { depth, branching } => {
                cfg.insert("branching".into(), branching.into());
                cfg.insert("depth".into(), depth.into());
            }
            NodeKind::Reflect {
                reflection_steps,
                passes,
            } => {
                cfg.insert("passes".into(), passes.into());
                cfg.insert("steps".into(), reflection_steps.into());
            }
            NodeKind::Io | NodeKind::Output => {}
        }
        cfg.insert("tpl".into(), spec.prompt_template_id.clone().into());
        Self {
            id: spec.id,
            kind: spec.kind.name().to_string(),
            cfg,
        }
    }

    fn into_spec(self) -> Result<NodeSpec, GraphError> {
        let get_u32 = |cfg: &BTreeMap<String, serde_json::Value>, key: &str| {
            cfg.get(key)
                .and_then(|v| v.as_u64())
                .and_then(|v| u32::try_from(v).ok())
                .ok_or_else(|| {
                    GraphError::InvalidStructure(format!(
                        "node {}: missing or invalid cfg key '{key}'",
                        self.id
                    ))
                })
        };
        let kind = match self.kind.as_str() {
            "tot" => NodeKind::Tot {
                depth: get_u32(&self.cfg, "depth")?,
                branching: get_u32(&self.cfg, "branching")?,
            },
            "reflect" => NodeKind::Reflect {
                reflection_steps: get_u32(&self.cfg, "steps")?,
                passes: get_u32(&self.cfg, "passes")?,
            },
            "io" => NodeKind::Io,
            "output" => NodeKind::Output,
            other => {
                return Err(GraphError::InvalidStructure(format!(
                    "node {}: unknown kind '{other}'",
                    self.id
                )))
            }
        };
        let prompt_template_id = self
            .cfg
            .get("tpl")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .unwrap_or_else(|| kind.default_template().to_string());
        Ok(NodeSpec {
            id: self.id,
            kind,
            prompt_template_id,
        })
    }
}
