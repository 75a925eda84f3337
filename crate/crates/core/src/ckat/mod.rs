//! The data discovery service: collaborative knowledge graph construction,
//! TransR + attention-propagation embeddings with pairwise ranking training,
//! top-K recommendation, evaluation, and study harnesses.

mod eval;
mod kg;
mod model;
mod study;
mod train;

pub use eval::{evaluate, holdout_split, recommend_topk, EvalResult, Split};
pub use kg::{
    build_ckg, build_source_kgs, inject_noise, item_id, user_id, Ckg, Source, SourceKg, Triple,
};
pub use model::{
    all_attention, attention_weights, predict_score, propagate, transr_energy, Aggregator,
    EmbeddingParams, ModelDims,
};
pub use study::{evaluate_combination, run_combination_study, Checkpoint, StudyRow};
pub use train::{
    cf_batch_grads, cf_batch_loss, kg_batch_grads, kg_batch_loss, train, CfTriple, KgPair,
    TrainConfig, Trained,
};
