//! Gradient-boosted regression trees over query features, fit to the
//! log-transformed selectivity by stagewise least squares.
//!
//! Splits are greedy variance-reduction choices over a per-feature quantile
//! grid. Training canonicalizes the example order first, so the fitted model
//! is invariant to how the training set was shuffled.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::estimator::{derive_seed, Estimator};
use crate::learned::features::FeatureExtractor;
use crate::query::Query;
use crate::table::Table;
use crate::workload::{gen_workload, label, LabeledQuery, WorkloadConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub n_quantiles: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_trees: 64,
            max_depth: 6,
            learning_rate: 0.1,
            n_quantiles: 32,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    fn depth_from(&self, i: usize) -> usize {
        match &self.nodes[i] {
            Node::Leaf(_) => 0,
            Node::Split { left, right, .. } => {
                1 + self.depth_from(*left).max(self.depth_from(*right))
            }
        }
    }
}

/// The boosted-tree regression model over flat feature vectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbtModel {
    base: f64,
    trees: Vec<Tree>,
    cfg: GbtConfig,
    /// Mean squared error on the training set after each boosting stage.
    pub stage_losses: Vec<f64>,
}

impl GbtModel {
    /// Fits to (feature vector, label) pairs; labels are already in log space.
    pub fn train(features: &[Vec<f64>], labels: &[f64], cfg: GbtConfig) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.len(),
                right: labels.len(),
            });
        }
        let n = features.len();
        let n_features = features[0].len();

        // Canonical example order: lexicographic by features then label.
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| {
            features[a]
                .iter()
                .zip(&features[b])
                .map(|(x, y)| x.partial_cmp(y).unwrap())
                .find(|o| o.is_ne())
                .unwrap_or_else(|| labels[a].partial_cmp(&labels[b]).unwrap())
        });
        let xs: Vec<&[f64]> = idx.iter().map(|&i| features[i].as_slice()).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();

        // Per-feature quantile grid of candidate thresholds.
        let mut grids: Vec<Vec<f64>> = Vec::with_capacity(n_features);
        for f in 0..n_features {
            let mut vals: Vec<f64> = xs.iter().map(|x| x[f]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut grid = Vec::new();
            for q in 1..=cfg.n_quantiles {
                let pos = (q * (n - 1)) / (cfg.n_quantiles + 1);
                let v = vals[pos];
                if v < *vals.last().unwrap() && grid.last() != Some(&v) {
                    grid.push(v);
                }
            }
            grids.push(grid);
        }

        let base = ys.iter().sum::<f64>() / n as f64;
        let mut residuals: Vec<f64> = ys.iter().map(|y| y - base).collect();
        let mut trees = Vec::with_capacity(cfg.n_trees);
        let mut stage_losses = Vec::with_capacity(cfg.n_trees);

        for _ in 0..cfg.n_trees {
            let mut tree = Tree { nodes: Vec::new() };
            let rows: Vec<usize> = (0..n).collect();
            build_node(&mut tree, &xs, &residuals, rows, &grids, cfg.max_depth);
            for (i, x) in xs.iter().enumerate() {
                residuals[i] -= cfg.learning_rate * tree.predict(x);
            }
            stage_losses.push(residuals.iter().map(|r| r * r).sum::<f64>() / n as f64);
            trees.push(tree);
        }

        Ok(GbtModel {
            base,
            trees,
            cfg,
            stage_losses,
        })
    }

    /// Model output in log-selectivity space.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.cfg.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn max_tree_depth(&self) -> usize {
        self.trees
            .iter()
            .map(|t| t.depth_from(0))
            .max()
            .unwrap_or(0)
    }

    fn n_nodes(&self) -> usize {
        self.trees.iter().map(|t| t.nodes.len()).sum()
    }
}

fn sse(sum: f64, sq_sum: f64, n: f64) -> f64 {
    sq_sum - sum * sum / n
}

fn build_node(
    tree: &mut Tree,
    xs: &[&[f64]],
    residuals: &[f64],
    rows: Vec<usize>,
    grids: &[Vec<f64>],
    depth_left: usize,
) -> usize {
    let n = rows.len() as f64;
    let sum: f64 = rows.iter().map(|&i| residuals[i]).sum();
    let mean = sum / n;
    if depth_left == 0 || rows.len() < 2 {
        tree.nodes.push(Node::Leaf(mean));
        return tree.nodes.len() - 1;
    }

    let sq_sum: f64 = rows.iter().map(|&i| residuals[i] * residuals[i]).sum();
    let parent_sse = sse(sum, sq_sum, n);

    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    for (f, grid) in grids.iter().enumerate() {
        for &thr in grid {
            let mut lsum = 0.0;
            let mut lsq = 0.0;
            let mut ln = 0.0;
            for &i in &rows {
                if xs[i][f] <= thr {
                    lsum += residuals[i];
                    lsq += residuals[i] * residuals[i];
                    ln += 1.0;
                }
            }
            if ln == 0.0 || ln == n {
                continue;
            }
            let gain = parent_sse - sse(lsum, lsq, ln) - sse(sum - lsum, sq_sum - lsq, n - ln);
            if best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, f, thr));
            }
        }
    }

    match best {
        Some((gain, feature, threshold)) if gain > 1e-12 => {
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                rows.into_iter().partition(|&i| xs[i][feature] <= threshold);
            let here = tree.nodes.len();
            tree.nodes.push(Node::Leaf(0.0)); // placeholder
            let left = build_node(tree, xs, residuals, left_rows, grids, depth_left - 1);
            let right = build_node(tree, xs, residuals, right_rows, grids, depth_left - 1);
            tree.nodes[here] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
            here
        }
        _ => {
            tree.nodes.push(Node::Leaf(mean));
            tree.nodes.len() - 1
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GbtParams {
    /// Training workload size (generated internally from the table).
    pub train_queries: usize,
    /// Sample rate used to relabel the regenerated workload during updates.
    pub update_sample_rate: f64,
    pub gbt: GbtConfig,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            train_queries: 10_000,
            update_sample_rate: 0.05,
            gbt: GbtConfig::default(),
        }
    }
}

/// Query-driven regression estimator: generates a training workload, labels
/// it against the table, and learns log-selectivity from query features.
/// Updates regenerate the workload on the new table and relabel it from a
/// uniform sample (approximate labels), then retrain.
#[derive(Clone, Serialize, Deserialize)]
pub struct GbtEstimator {
    extractor: FeatureExtractor,
    model: GbtModel,
    row_count: usize,
    params: GbtParams,
    seed: u64,
    updates: u64,
}

impl GbtEstimator {
    pub fn build(table: &Table, params: GbtParams, seed: u64) -> Result<Self> {
        if params.train_queries < 100 {
            return Err(Error::InvalidConfig(
                "gbt needs at least 100 training queries".into(),
            ));
        }
        let extractor = FeatureExtractor::build(table, 100)?;
        let wl = WorkloadConfig::new(params.train_queries, derive_seed(seed, 0xF1));
        let queries = gen_workload(table, &wl)?;
        let labeled = label(table, &queries);
        let model = Self::fit(&extractor, &labeled, params.gbt, table.row_count())?;
        Ok(GbtEstimator {
            extractor,
            model,
            row_count: table.row_count(),
            params,
            seed,
            updates: 0,
        })
    }

    /// Trains from an existing labeled workload instead of generating one.
    pub fn build_from_workload(
        table: &Table,
        labeled: &[LabeledQuery],
        params: GbtParams,
        seed: u64,
    ) -> Result<Self> {
        let extractor = FeatureExtractor::build(table, 100)?;
        let model = Self::fit(&extractor, labeled, params.gbt, table.row_count())?;
        Ok(GbtEstimator {
            extractor,
            model,
            row_count: table.row_count(),
            params,
            seed,
            updates: 0,
        })
    }

    fn fit(
        extractor: &FeatureExtractor,
        labeled: &[LabeledQuery],
        cfg: GbtConfig,
        row_count: usize,
    ) -> Result<GbtModel> {
        let floor = 1.0 / row_count.max(1) as f64;
        let features: Vec<Vec<f64>> = labeled
            .iter()
            .map(|lq| extractor.featurize(&lq.query).to_vec())
            .collect();
        let labels: Vec<f64> = labeled
            .iter()
            .map(|lq| lq.selectivity.max(floor).ln())
            .collect();
        GbtModel::train(&features, &labels, cfg)
    }

    pub fn model(&self) -> &GbtModel {
        &self.model
    }
}

impl Estimator for GbtEstimator {
    fn name(&self) -> &str {
        "gbt"
    }

    fn estimate(&self, query: &Query, _seed: u64) -> f64 {
        let x = self.extractor.featurize(query).to_vec();
        let sel = self.model.predict(&x).exp();
        (sel * self.row_count as f64).clamp(0.0, self.row_count as f64)
    }

    fn update(&mut self, new_table: &Table) -> Result<Duration> {
        let t0 = Instant::now();
        self.updates += 1;
        self.extractor = FeatureExtractor::build(new_table, 100)?;
        self.row_count = new_table.row_count();

        // Regenerate the training workload on the new table and label it
        // against a uniform sample (approximate labels), then retrain. All
        // three steps are part of the measured updating time.
        let wl = WorkloadConfig::new(
            self.params.train_queries,
            derive_seed(self.seed, 0xF1 ^ self.updates),
        );
        let queries = gen_workload(new_table, &wl)?;
        let sampler = crate::traditional::SampleEstimator::build_sample_a(
            new_table,
            self.params.update_sample_rate,
            derive_seed(self.seed, 0x5A ^ self.updates),
        )?;
        let labeled: Vec<LabeledQuery> = queries
            .into_iter()
            .map(|q| {
                let est = sampler.estimate(&q, 0);
                LabeledQuery {
                    cardinality: est.round() as u64,
                    selectivity: est / self.row_count.max(1) as f64,
                    query: q,
                }
            })
            .collect();
        self.model = Self::fit(&self.extractor, &labeled, self.params.gbt, self.row_count)?;
        Ok(t0.elapsed())
    }

    fn snapshot(&self) -> Box<dyn Estimator> {
        Box::new(self.clone())
    }

    fn size_bytes(&self) -> usize {
        // feature, threshold, children / leaf payload at 4 bytes per field
        self.model.n_nodes() * 16
    }
}
