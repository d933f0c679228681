//! Declarative estimator specs and the factory that builds them, shared by
//! the CLI and the language bindings.

use serde::{Deserialize, Serialize};

use crate::estimator::{derive_seed, Estimator, ExactOracle};
use crate::learned::{
    ChowLiuEstimator, GbtConfig, GbtEstimator, GbtParams, MadeConfig, MadeEstimator,
    ProgressiveSamplerConfig,
};
use crate::table::Table;
use crate::traditional::{AviEstimator, Budget, KdeEstimator, MhistEstimator, SampleEstimator};
use crate::Result;

fn default_rate() -> f64 {
    0.015
}
fn default_buckets() -> usize {
    100
}
fn default_alpha() -> f64 {
    1.0
}
fn default_samples() -> usize {
    512
}
fn default_train_queries() -> usize {
    10_000
}
fn default_trees() -> usize {
    64
}
fn default_max_depth() -> usize {
    6
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_update_sample_rate() -> f64 {
    0.05
}
fn default_hidden() -> usize {
    64
}
fn default_epochs() -> usize {
    20
}
fn default_batch_size() -> usize {
    256
}
fn default_made_lr() -> f64 {
    0.01
}
fn default_update_epochs() -> usize {
    1
}

/// A buildable estimator description with serde-friendly defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    /// Ground truth wrapped as an estimator (harness sanity checks).
    Exact,
    SampleA {
        #[serde(default = "default_rate")]
        rate: f64,
    },
    SampleB {
        #[serde(default = "default_rate")]
        rate: f64,
    },
    Avi {
        #[serde(default = "default_buckets")]
        buckets: usize,
        #[serde(default)]
        budget: Budget,
    },
    Mhist {
        #[serde(default)]
        budget: Budget,
    },
    Kde {
        #[serde(default = "default_rate")]
        rate: f64,
        #[serde(default)]
        budget: Budget,
    },
    Bayes {
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    Gbt {
        #[serde(default = "default_train_queries")]
        train_queries: usize,
        #[serde(default = "default_trees")]
        trees: usize,
        #[serde(default = "default_max_depth")]
        max_depth: usize,
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
        #[serde(default = "default_update_sample_rate")]
        update_sample_rate: f64,
    },
    Made {
        #[serde(default = "default_hidden")]
        hidden: usize,
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default = "default_batch_size")]
        batch_size: usize,
        #[serde(default = "default_made_lr")]
        learning_rate: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_update_epochs")]
        update_epochs: usize,
    },
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::Exact => "exact",
            EstimatorSpec::SampleA { .. } => "sample-a",
            EstimatorSpec::SampleB { .. } => "sample-b",
            EstimatorSpec::Avi { .. } => "avi",
            EstimatorSpec::Mhist { .. } => "mhist",
            EstimatorSpec::Kde { .. } => "kde",
            EstimatorSpec::Bayes { .. } => "bayes",
            EstimatorSpec::Gbt { .. } => "gbt",
            EstimatorSpec::Made { .. } => "made",
        }
    }

    /// Parses a bare name into a spec with all-default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        let spec = match name {
            "exact" => EstimatorSpec::Exact,
            "sample-a" => EstimatorSpec::SampleA {
                rate: default_rate(),
            },
            "sample-b" => EstimatorSpec::SampleB {
                rate: default_rate(),
            },
            "avi" => EstimatorSpec::Avi {
                buckets: default_buckets(),
                budget: Budget::default(),
            },
            "mhist" => EstimatorSpec::Mhist {
                budget: Budget::default(),
            },
            "kde" => EstimatorSpec::Kde {
                rate: default_rate(),
                budget: Budget::default(),
            },
            "bayes" => EstimatorSpec::Bayes {
                alpha: default_alpha(),
                samples: default_samples(),
            },
            "gbt" => EstimatorSpec::Gbt {
                train_queries: default_train_queries(),
                trees: default_trees(),
                max_depth: default_max_depth(),
                learning_rate: default_learning_rate(),
                update_sample_rate: default_update_sample_rate(),
            },
            "made" => EstimatorSpec::Made {
                hidden: default_hidden(),
                epochs: default_epochs(),
                batch_size: default_batch_size(),
                learning_rate: default_made_lr(),
                samples: default_samples(),
                update_epochs: default_update_epochs(),
            },
            other => {
                return Err(crate::Error::InvalidConfig(format!(
                    "unknown estimator {other:?}"
                )))
            }
        };
        Ok(spec)
    }

    /// Builds the estimator against a table. Per-estimator seeds derive from
    /// the master seed and the estimator kind, so a suite built from one
    /// master seed is reproducible as a whole.
    pub fn build(&self, table: &Table, master_seed: u64) -> Result<Box<dyn Estimator>> {
        let seed = derive_seed(master_seed, self.name().len() as u64 ^ kind_salt(self));
        Ok(match *self {
            EstimatorSpec::Exact => Box::new(ExactOracle::new(table)),
            EstimatorSpec::SampleA { rate } => {
                Box::new(SampleEstimator::build_sample_a(table, rate, seed)?)
            }
            EstimatorSpec::SampleB { rate } => {
                Box::new(SampleEstimator::build_sample_b(table, rate, seed)?)
            }
            EstimatorSpec::Avi { buckets, budget } => {
                Box::new(AviEstimator::build(table, buckets, budget)?)
            }
            EstimatorSpec::Mhist { budget } => Box::new(MhistEstimator::build(table, budget)?),
            EstimatorSpec::Kde { rate, budget } => {
                Box::new(KdeEstimator::build(table, rate, seed, budget)?)
            }
            EstimatorSpec::Bayes { alpha, samples } => Box::new(ChowLiuEstimator::build(
                table,
                alpha,
                ProgressiveSamplerConfig { samples },
            )?),
            EstimatorSpec::Gbt {
                train_queries,
                trees,
                max_depth,
                learning_rate,
                update_sample_rate,
            } => Box::new(GbtEstimator::build(
                table,
                GbtParams {
                    train_queries,
                    update_sample_rate,
                    gbt: GbtConfig {
                        n_trees: trees,
                        max_depth,
                        learning_rate,
                        ..GbtConfig::default()
                    },
                },
                seed,
            )?),
            EstimatorSpec::Made {
                hidden,
                epochs,
                batch_size,
                learning_rate,
                samples,
                update_epochs,
            } => Box::new(MadeEstimator::build(
                table,
                MadeConfig {
                    hidden,
                    epochs,
                    batch_size,
                    learning_rate,
                    seed,
                },
                ProgressiveSamplerConfig { samples },
                update_epochs,
            )?),
        })
    }
}

fn kind_salt(spec: &EstimatorSpec) -> u64 {
    match spec {
        EstimatorSpec::Exact => 0x10,
        EstimatorSpec::SampleA { .. } => 0x20,
        EstimatorSpec::SampleB { .. } => 0x30,
        EstimatorSpec::Avi { .. } => 0x40,
        EstimatorSpec::Mhist { .. } => 0x50,
        EstimatorSpec::Kde { .. } => 0x60,
        EstimatorSpec::Bayes { .. } => 0x70,
        EstimatorSpec::Gbt { .. } => 0x80,
        EstimatorSpec::Made { .. } => 0x90,
    }
}

/// All eight concrete estimators with default parameters.
pub fn default_suite() -> Vec<EstimatorSpec> {
    [
        "sample-a", "sample-b", "avi", "mhist", "kde", "bayes", "gbt", "made",
    ]
    .iter()
    .map(|n| EstimatorSpec::from_name(n).unwrap())
    .collect()
}
