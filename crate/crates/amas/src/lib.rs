//! Adaptive multi-agent orchestration.
//!
//! The crate builds agent systems as parameterized directed acyclic graphs
//! whose edges are learnable. It provides:
//!
//! - [`graph`]: the composite agent graph, edge-probability distribution,
//!   structure sampling, and canonical serialization.
//! - [`executor`]: topological execution of a sampled graph against a
//!   pluggable text backend (tree-search, reflection, IO, and output nodes).
//! - [`backend`] / [`llm`]: the text-generation contract, a deterministic
//!   in-process mock, and an OpenAI-compatible HTTP client.
//! - [`optim`]: policy-gradient optimization of the edge logits, checkpoint
//!   persistence, and harvesting of the top-K candidate structures.
//! - [`designer`]: the per-query graph designer — listwise ranking loss,
//!   feature scorer, training loop, and candidate selection.
//! - [`tasks`]: task environments, metrics, and oracles (arithmetic-to-24,
//!   mini crossword, multiple choice, synthetic affinity).
//! - [`pipeline`]: end-to-end orchestration, evaluation modes, and reports.

pub mod backend;
pub mod designer;
pub mod executor;
pub mod graph;
mod hash;
pub mod llm;
pub mod optim;
pub mod pipeline;
pub mod runner;
pub mod tasks;
