//! Toy-scale ground truth, rank correlations and runtime measurement used to
//! check valuation scores against retraining.

mod correlation;
mod groundtruth;
mod timing;

pub use correlation::{
    correlations, evaluate_method, kendall, pearson, spearman, CorrelationReport, MethodEvaluation, Orientation,
};
pub use groundtruth::{train_ground_truth, train_one, GroundTruth, Metric, TrainingConfig};
pub use timing::{time_method, RuntimeReport, TimingOptions};
