//! Dual-memory augmentation for task-planning agents.
//!
//! The crate pairs a bounded **short-term memory** (recently observed
//! objects, managed by a replacement policy and recalled by embedding
//! similarity) with a persistent **long-term memory** (a hierarchical
//! scene graph of the environment). A prompt builder assembles both into
//! planner prompts, and a workload simulator measures how much
//! exploration the memory saves under synthetic task streams.
//!
//! Float-carrying math (embeddings, geometry) is generic over the scalar
//! type via [`scalar::Real`]; the crate root fixes the concrete aliases
//! used throughout: [`Embedding`] (`f32`) and [`Position`] (`f64`).

pub mod embedding;
pub mod geometry;
pub mod policy;
pub mod prompt;
pub mod scalar;
pub mod scene_graph;
pub mod short_term;
pub mod sim;
pub mod sketch;

/// Concrete embedding vector used by the stores and embedders.
pub type Embedding = embedding::EmbeddingVector<f32>;
/// Concrete 3-D position; `f64` so serialized coordinates round-trip
/// exactly.
pub type Position = geometry::Point3<f64>;

pub use embedding::{cosine_distance, LocalEmbedder, RemoteEmbedder, TextEmbedder, LOCAL_DIM};
pub use policy::{Policy, PolicyVariant, Segment, UnitKey};
pub use prompt::{build_prompt, default_skill_registry, PromptBundle, SkillRegistry};
pub use scene_graph::SceneGraph;
pub use short_term::{MemoryUnit, ObjectState, ShortTermStore};
pub use sim::{generate_stream, run_experiment, sweep, CostModel, StreamParams};
pub use sketch::FrequencySketch;
