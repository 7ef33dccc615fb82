//! Conditional generator of filled templates and its training objective.

pub mod checkpoint;
mod decode;
mod encoding;
mod loss;
mod network;
pub mod tape;
mod train;
mod vocab;

pub use decode::{from_tokens, predict, DecodeConfig};
pub use encoding::ExtendedVocab;
pub use loss::{
    alignment_loss, argument_distributions, distribution_l2_sum, extraction_loss, objective, output_distributions,
    sequence_nll, total_loss, ArgumentDistribution, LossComponents, PreparedInstance,
};
pub use network::{
    init_params, Architecture, AttentionBlocks, Block, ConvBlocks, DecoderLayerBlocks, ExtractorModel, Layout,
};
pub use train::{
    evaluate_objective, train, train_prepared, training_examples, Adam, TrainingConfig, TrainingExample, TrainingRun,
    TrainingStepReport,
};
pub use vocab::{Vocabulary, SPECIALS, UNK};
