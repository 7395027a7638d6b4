//! Regressor of the settled capture outcome from the snapshot at the
//! closing trigger, with a Gaussian residual model.

pub mod features;
pub mod model;
pub mod nn;

pub use features::{default_mu_features, extract_features, extract_window_features, FeatureSpec};
pub use model::{
    fit_gaussian, train, Dataset, DatasetMeta, ErrorModel, Prediction, Sample, SplitMse,
    SurrogateModel, TrainOptions, TrainReport,
};
pub use nn::{Adam, Gradients, Mlp};
