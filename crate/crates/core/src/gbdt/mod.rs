//! Histogram-based gradient-boosted regression trees with leaf-wise
//! growth, a Poisson count objective, gradient-based one-side sampling and
//! exclusive feature bundling.

mod binning;
mod efb;
mod goss;
mod objective;
mod tree;

pub use binning::{accumulate_histogram, bin_feature, build_histograms, BinKind, BinnedFeature, HistBin};
pub use efb::{efb_bundle, singleton_bundles, Bundle};
pub use goss::goss_sample;
pub use objective::{poisson_grad_hess, Objective};
pub use tree::{best_split, grow_tree_leafwise, GrowParams, SplitCandidate, SplitCondition, TreeNode, LAMBDA};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureValue};

/// Training evaluation metric (the paper's study uses RMSE only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Rmse,
}

/// Boosting parameters. Defaults: Poisson objective, RMSE metric,
/// learning rate 0.001, 1000 iterations, bagging frequency 1 and
/// min_data_in_leaf 5, with 31 leaves, 255 bins, GOSS fractions
/// (0.2, 0.1) and a zero-conflict bundling budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbdtParams {
    pub objective: Objective,
    pub metric: Metric,
    pub learning_rate: f64,
    pub num_iterations: usize,
    /// GOSS resampling cadence: applied on every iteration divisible by
    /// this; 0 disables sampling entirely.
    pub bagging_frequency: usize,
    pub min_data_in_leaf: u32,
    pub max_leaves: usize,
    pub max_bins: u16,
    /// Fraction of rows always kept (largest absolute gradients).
    pub goss_a: f64,
    /// Fraction of remaining rows sampled with compensating weights.
    pub goss_b: f64,
    pub efb_max_conflict: usize,
    pub enable_efb: bool,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            objective: Objective::Poisson,
            metric: Metric::Rmse,
            learning_rate: 0.001,
            num_iterations: 1000,
            bagging_frequency: 1,
            min_data_in_leaf: 5,
            max_leaves: 31,
            max_bins: 255,
            goss_a: 0.2,
            goss_b: 0.1,
            efb_max_conflict: 0,
            enable_efb: true,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning_rate must be in (0, 1]"));
        }
        if self.goss_a < 0.0 || self.goss_b < 0.0 || self.goss_a + self.goss_b > 1.0 + 1e-12 {
            return Err(Error::invalid("GOSS fractions must satisfy a, b >= 0 and a + b <= 1"));
        }
        if self.max_leaves == 0 {
            return Err(Error::invalid("max_leaves must be >= 1"));
        }
        if self.min_data_in_leaf == 0 {
            return Err(Error::invalid("min_data_in_leaf must be >= 1"));
        }
        if self.max_bins < 2 {
            return Err(Error::invalid("max_bins must be >= 2"));
        }
        Ok(())
    }
}

/// Per-round training metrics: RMSE in prediction space and the mean
/// objective loss.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub rmse: Vec<f64>,
    pub loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub kind: BinKind,
}

/// A trained boosting ensemble. Predictions are
/// `inverse_link(base_score + sum of tree outputs)`; the Poisson inverse
/// link is exp, so its predictions are strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub version: u32,
    pub objective: Objective,
    pub base_score: f64,
    pub features: Vec<FeatureInfo>,
    pub trees: Vec<TreeNode>,
    pub history: TrainHistory,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Trains a boosting ensemble on the feature matrix.
pub fn train(matrix: &FeatureMatrix, params: &GbdtParams) -> Result<GbdtModel> {
    params.validate()?;
    let n = matrix.n_rows();
    if n == 0 {
        return Err(Error::invalid("cannot train on an empty feature matrix"));
    }
    if matrix.target.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("targets must be finite"));
    }
    if params.objective == Objective::Poisson && matrix.target.iter().any(|&y| y < 0.0) {
        return Err(Error::invalid("poisson targets must be non-negative"));
    }

    let features: Vec<BinnedFeature> = matrix
        .columns
        .par_iter()
        .map(|c| bin_feature(c, params.max_bins))
        .collect::<Result<_>>()?;
    let bundles = if params.enable_efb {
        efb_bundle(&features, params.efb_max_conflict)
    } else {
        singleton_bundles(&features)
    };

    let base_score = params.objective.base_score(&matrix.target);
    let mut scores = vec![base_score; n];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trees = Vec::with_capacity(params.num_iterations);
    let mut history = TrainHistory::default();

    let grow = GrowParams {
        max_leaves: params.max_leaves,
        min_data_in_leaf: params.min_data_in_leaf,
        learning_rate: params.learning_rate,
        cap_leaf_score: params.objective == Objective::Poisson,
    };

    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for iteration in 0..params.num_iterations {
        let objective = params.objective;
        grad.par_iter_mut()
            .zip(hess.par_iter_mut())
            .zip(scores.par_iter().zip(matrix.target.par_iter()))
            .for_each(|((g, h), (f, y))| {
                let (gi, hi) = objective.grad_hess(*f, *y);
                *g = gi;
                *h = hi;
            });

        let sample_round =
            params.bagging_frequency > 0 && iteration % params.bagging_frequency == 0;
        let tree = if sample_round && params.goss_a < 1.0 {
            let (rows, weights) = goss_sample(&grad, params.goss_a, params.goss_b, &mut rng);
            let mut grad_w = vec![0.0; n];
            let mut hess_w = vec![0.0; n];
            for (&r, &w) in rows.iter().zip(weights.iter()) {
                grad_w[r as usize] = grad[r as usize] * w;
                hess_w[r as usize] = hess[r as usize] * w;
            }
            grow_tree_leafwise(&features, &bundles, rows, &grad_w, &hess_w, &grow)
        } else {
            let rows: Vec<u32> = (0..n as u32).collect();
            grow_tree_leafwise(&features, &bundles, rows, &grad, &hess, &grow)
        };

        scores
            .par_iter_mut()
            .enumerate()
            .for_each(|(r, s)| *s += tree.score_code_row(&features, r));
        trees.push(tree);

        // Fixed-boundary chunk sums folded in order keep the recorded
        // metrics deterministic regardless of scheduling.
        let chunk_sums: Vec<(f64, f64)> = scores
            .par_chunks(8192)
            .zip(matrix.target.par_chunks(8192))
            .map(|(fs, ys)| {
                let mut sq = 0.0;
                let mut loss = 0.0;
                for (&f, &y) in fs.iter().zip(ys.iter()) {
                    let pred = objective.inverse_link(f);
                    sq += (pred - y) * (pred - y);
                    loss += objective.loss(f, y);
                }
                (sq, loss)
            })
            .collect();
        let (sq_sum, loss_sum) = chunk_sums
            .into_iter()
            .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        history.rmse.push((sq_sum / n as f64).sqrt());
        history.loss.push(loss_sum / n as f64);
    }

    Ok(GbdtModel {
        version: MODEL_FORMAT_VERSION,
        objective: params.objective,
        base_score,
        features: features
            .into_iter()
            .map(|f| FeatureInfo {
                name: f.name,
                kind: f.kind,
            })
            .collect(),
        trees,
        history,
    })
}

fn route_raw<'a>(condition: &SplitCondition, row: &[FeatureValue], model: &GbdtModel, unknown: &mut usize) -> bool {
    match condition {
        SplitCondition::Numeric {
            feature,
            threshold,
            missing_left,
            ..
        } => match row[*feature] {
            None => *missing_left,
            Some(v) => v <= *threshold,
        },
        SplitCondition::Categorical {
            feature,
            left_categories,
            missing_left,
        } => match row[*feature] {
            None => *missing_left,
            Some(v) => {
                let id = v as u32;
                let known = match &model.features[*feature].kind {
                    BinKind::Categorical { n_categories } => id < *n_categories && v >= 0.0,
                    BinKind::Numeric { .. } => false,
                };
                if !known {
                    // Unseen category: routed like a missing value.
                    *unknown += 1;
                    *missing_left
                } else {
                    left_categories.binary_search(&id).is_ok()
                }
            }
        },
    }
}

impl GbdtModel {
    /// Prediction-space output for one row whose values align with
    /// `features` order. Unknown categorical ids route as missing.
    pub fn predict_row(&self, row: &[FeatureValue]) -> f64 {
        let mut unknown = 0usize;
        let score = self.score_row(row, &mut unknown);
        self.objective.inverse_link(score)
    }

    fn score_row(&self, row: &[FeatureValue], unknown: &mut usize) -> f64 {
        let mut score = self.base_score;
        for tree in &self.trees {
            let mut node = tree;
            loop {
                match node {
                    TreeNode::Leaf { value, .. } => {
                        score += value;
                        break;
                    }
                    TreeNode::Internal {
                        condition,
                        left,
                        right,
                    } => {
                        node = if route_raw(condition, row, self, unknown) {
                            left
                        } else {
                            right
                        };
                    }
                }
            }
        }
        score
    }

    /// Predictions for a batch of rows. Unseen categorical ids are routed
    /// as missing and logged once per call.
    pub fn predict(&self, rows: &[Vec<FeatureValue>]) -> Vec<f64> {
        let mut unknown = 0usize;
        let out = rows
            .iter()
            .map(|row| {
                let score = self.score_row(row, &mut unknown);
                self.objective.inverse_link(score)
            })
            .collect();
        if unknown > 0 {
            log::warn!(
                "{} categorical lookups hit ids unseen in training; routed as missing",
                unknown
            );
        }
        out
    }

    /// Split-count feature importance: how many internal nodes test each
    /// feature, across all trees. The counts sum to the total number of
    /// internal nodes.
    pub fn feature_importance(&self) -> Vec<(String, u64)> {
        let mut counts = vec![0u64; self.features.len()];
        for tree in &self.trees {
            tree.for_each_internal(&mut |condition| {
                counts[condition.feature()] += 1;
            });
        }
        self.features
            .iter()
            .map(|f| f.name.clone())
            .zip(counts)
            .collect()
    }

    /// Versioned JSON serialization for reload and reproducibility checks.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let model: GbdtModel =
            serde_json::from_str(json).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format version {}",
                model.version
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let json = std::fs::read_to_string(path)?;
        Self::from_json(&json)
    }
}
