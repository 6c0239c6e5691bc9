//! Experiment configuration, datasets, and the training loop.

mod config;
mod data;
mod ratings;
mod similarity;
mod train;

pub use config::{
    ArchitectureConfig, EdgeListConfig, ExperimentConfig, Family, RatingsConfig, ReadoutKind,
    SourceLocalizationConfig, TaskConfig, TrainingConfig,
};
pub use data::{
    block_sizes, community_sources, gen_source_localization, ingest_edge_list, parse_signals,
    Dataset, Sample, Split, Splits, Target,
};
pub use ratings::{parse_matrix_csv, ratings_dataset, ratings_from_matrix, read_matrix_csv};
pub use similarity::{build_similarity_graph, pearson_similarity, similarity_adjacency};
pub use train::{
    build_dataset, evaluate, evaluate_indices, metrics_csv, model_spec_for, run_experiment,
    sample_loss, train, with_splits, Evaluation, ExperimentOutcome, MetricsRecord, TrainOutcome,
    METRICS_HEADER,
};
