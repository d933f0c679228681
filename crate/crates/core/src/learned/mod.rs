//! Learned estimators: the Chow-Liu tree with progressive sampling, the
//! query-driven gradient-boosted-tree regressor, and a small masked
//! autoregressive network.

mod chow_liu;
mod features;
mod gbt;
mod made;
mod progressive;

pub use chow_liu::{mutual_information, ChowLiuEstimator, ChowLiuModel};
pub use features::{FeatureExtractor, QueryFeatures};
pub use gbt::{GbtConfig, GbtEstimator, GbtModel, GbtParams};
pub use made::{MadeConfig, MadeEstimator, MadeModel};
pub use progressive::{
    progressive_estimate, progressive_estimate_detailed, ConditionalOracle,
    ProgressiveSamplerConfig,
};
