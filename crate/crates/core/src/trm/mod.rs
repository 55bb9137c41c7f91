//! Multi-task topological reward model.

mod features;
mod loss;
mod model;
pub mod synthetic;
mod train;

pub use features::{featurize, topology_coordinate, FeatureConfig, FeatureVector, ONE_HOT_DIM, STRUCTURAL_DIM};
pub use loss::{
    combined_loss, grad, mean_rank_loss, mse_loss, pairwise_rank_loss, softplus, Batch,
    LossWeights, PairItem, RegressionItem,
};
pub use model::{Activations, Params, TrmModel, MODEL_VERSION};
pub use train::{
    build_pairs, build_training_set, evaluate, evaluate_set, is_holdout, split_problem_ids, train,
    PreferencePair, TrainOutcome, TrainingConfig, TrainingSet,
};
