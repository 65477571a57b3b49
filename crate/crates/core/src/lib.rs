//! Knowledge graph entity typing with structural aggregation and
//! unsupervised re-ranking.
//!
//! The crate is organised bottom-up:
//!
//! - [`kg`] loads and indexes a knowledge graph (triples, type assertions,
//!   textual metadata) and answers neighbourhood / known-type queries.
//! - [`numerics`] is a small dense kernel: matrices, ELU, row normalisation,
//!   residual-attention pooling, Adam and a finite-difference checker.
//! - [`model`] is the structural aggregation model: embedding fusion,
//!   multi-hop TransE-style aggregation, classifier, losses and training.
//! - [`rerank`] fuses semantic and structural probabilities.
//! - [`eval`] computes filtered Hit@k / MR / MRR.
//! - [`io`] holds the versioned binary formats shared with external tools.

pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod kg;
pub mod model;
pub mod numerics;
pub mod rerank;
pub mod synthetic;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use eval::{evaluate, filtered_rank, RankingReport};
pub use kg::{
    load_dataset, DatasetManifest, Direction, EntityId, KnowledgeGraph, KnowledgeGraphBuilder,
    NeighborEdge, RelationId, Split, TextRecord, Triple, TypeAssertion, TypeId,
};
pub use model::{
    LossSign, Mode, ProbabilityRow, SkaModel, TrainConfig, TrainHistory, Trainer, ViewPlan,
};
pub use numerics::{DenseMatrix, Real};
pub use rerank::{rerank, FusedRow, RerankConfig};
