//! Trainable classifiers and their binary model format.

pub mod codec;
pub mod gbdt;
pub mod optim;
pub mod transformer;

pub use gbdt::{build_tree, train_gbdt, GbdtModel, GbdtParams, GbdtTraining, SparseMatrix, Tree};
pub use transformer::{
    grad_check, train_transformer, TrainingConfig, TransformerClassifier, TransformerConfig,
    TransformerTraining,
};
