//! Histogram-based split finding and leaf-wise tree growth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::{BinKind, BinnedFeature, HistBin};
use super::efb::Bundle;

/// L2 regularizer in the gain and leaf-value formulas; stabilizes
/// near-empty histogram bins.
pub const LAMBDA: f64 = 1e-3;
/// Score-space cap on a single tree's leaf output under the Poisson
/// objective, applied before learning-rate scaling.
pub const MAX_POISSON_LEAF: f64 = 10.0;

/// Split predicate of an internal node, expressed over the original
/// feature (bundles decode to these before a split is recorded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitCondition {
    Numeric {
        feature: usize,
        /// Highest bin code routed left.
        bin: u16,
        /// Raw-value threshold equivalent to `bin` (left iff value <= this).
        threshold: f64,
        missing_left: bool,
    },
    Categorical {
        feature: usize,
        /// Category ids routed left, ascending.
        left_categories: Vec<u32>,
        missing_left: bool,
    },
}

impl SplitCondition {
    pub fn feature(&self) -> usize {
        match self {
            SplitCondition::Numeric { feature, .. } => *feature,
            SplitCondition::Categorical { feature, .. } => *feature,
        }
    }

    /// Routes a row by its binned code.
    pub fn goes_left_code(&self, features: &[BinnedFeature], row: usize) -> bool {
        match self {
            SplitCondition::Numeric {
                feature,
                bin,
                missing_left,
                ..
            } => {
                let code = features[*feature].codes[row];
                if code == 0 {
                    *missing_left
                } else {
                    code <= *bin
                }
            }
            SplitCondition::Categorical {
                feature,
                left_categories,
                missing_left,
            } => {
                let code = features[*feature].codes[row];
                if code == 0 {
                    *missing_left
                } else {
                    left_categories.binary_search(&(code as u32 - 1)).is_ok()
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitCandidate {
    pub condition: SplitCondition,
    pub gain: f64,
    pub left_count: u32,
    pub right_count: u32,
}

/// A fitted regression tree. Leaf values are final score-space
/// contributions (learning rate already applied); `count` is the training
/// population that reached the leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        condition: SplitCondition,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
        count: u32,
    },
}

impl TreeNode {
    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    pub fn for_each_internal<'a>(&'a self, f: &mut impl FnMut(&'a SplitCondition)) {
        if let TreeNode::Internal {
            condition,
            left,
            right,
        } = self
        {
            f(condition);
            left.for_each_internal(f);
            right.for_each_internal(f);
        }
    }

    pub fn for_each_leaf(&self, f: &mut impl FnMut(f64, u32)) {
        match self {
            TreeNode::Leaf { value, count } => f(*value, *count),
            TreeNode::Internal { left, right, .. } => {
                left.for_each_leaf(f);
                right.for_each_leaf(f);
            }
        }
    }

    /// Score contribution for a training row, routed by binned codes.
    pub fn score_code_row(&self, features: &[BinnedFeature], row: usize) -> f64 {
        match self {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::Internal {
                condition,
                left,
                right,
            } => {
                if condition.goes_left_code(features, row) {
                    left.score_code_row(features, row)
                } else {
                    right.score_code_row(features, row)
                }
            }
        }
    }
}

fn leaf_objective(g: f64, h: f64) -> f64 {
    g * g / (h + LAMBDA)
}

fn split_gain(left: HistBin, right: HistBin, total: HistBin) -> f64 {
    leaf_objective(left.grad, left.hess) + leaf_objective(right.grad, right.hess)
        - leaf_objective(total.grad, total.hess)
}

fn add(a: HistBin, b: HistBin) -> HistBin {
    HistBin {
        grad: a.grad + b.grad,
        hess: a.hess + b.hess,
        count: a.count + b.count,
    }
}

/// Best admissible split for one member feature given its reconstructed
/// histogram. Scans numeric thresholds in bin order and categorical
/// prefix partitions sorted by gradient/hessian ratio; both missing
/// directions are tried whenever missing rows exist. Strict gain
/// improvement keeps the earliest candidate on ties.
fn best_feature_split(
    feature_idx: usize,
    feature: &BinnedFeature,
    missing: HistBin,
    bins: &[HistBin],
    total: HistBin,
    min_data_in_leaf: u32,
) -> Option<SplitCandidate> {
    let mut best: Option<SplitCandidate> = None;
    let missing_directions: &[bool] = if missing.count > 0 {
        &[true, false]
    } else {
        &[true]
    };

    let mut consider = |condition: SplitCondition, left: HistBin, right: HistBin| {
        if left.count < min_data_in_leaf || right.count < min_data_in_leaf {
            return;
        }
        let gain = split_gain(left, right, total);
        if gain > 0.0 && best.as_ref().map_or(true, |b| gain > b.gain) {
            best = Some(SplitCandidate {
                condition,
                gain,
                left_count: left.count,
                right_count: right.count,
            });
        }
    };

    match &feature.kind {
        BinKind::Numeric { boundaries } => {
            let mut cum = HistBin::default();
            for b in 0..bins.len().saturating_sub(1) {
                cum = add(cum, bins[b]);
                for &missing_left in missing_directions {
                    let left = if missing_left { add(cum, missing) } else { cum };
                    let right = total.subtract(&left);
                    consider(
                        SplitCondition::Numeric {
                            feature: feature_idx,
                            bin: b as u16 + 1,
                            threshold: boundaries[b],
                            missing_left,
                        },
                        left,
                        right,
                    );
                }
            }
        }
        BinKind::Categorical { .. } => {
            // Categories ordered by gradient/hessian ratio; prefix
            // partitions of that order are scanned like numeric bins.
            let mut occupied: Vec<u16> = (0..bins.len() as u16)
                .filter(|&c| bins[c as usize].count > 0)
                .collect();
            occupied.sort_by(|&a, &b| {
                let ra = bins[a as usize].grad / (bins[a as usize].hess + LAMBDA);
                let rb = bins[b as usize].grad / (bins[b as usize].hess + LAMBDA);
                ra.partial_cmp(&rb)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let mut cum = HistBin::default();
            let mut prefix: Vec<u32> = Vec::new();
            for i in 0..occupied.len().saturating_sub(1) {
                cum = add(cum, bins[occupied[i] as usize]);
                prefix.push(occupied[i] as u32);
                let mut left_categories = prefix.clone();
                left_categories.sort_unstable();
                for &missing_left in missing_directions {
                    let left = if missing_left { add(cum, missing) } else { cum };
                    let right = total.subtract(&left);
                    consider(
                        SplitCondition::Categorical {
                            feature: feature_idx,
                            left_categories: left_categories.clone(),
                            missing_left,
                        },
                        left,
                        right,
                    );
                }
            }
        }
    }
    best
}

/// Best split over every bundle and member feature for a node described by
/// its per-bundle histograms. Bundles are scanned in parallel; the
/// reduction is sequential in bundle order so scheduling cannot change the
/// winner.
pub fn best_split(
    features: &[BinnedFeature],
    bundles: &[Bundle],
    hists: &[Vec<HistBin>],
    total: HistBin,
    min_data_in_leaf: u32,
) -> Option<SplitCandidate> {
    if total.count < 2 * min_data_in_leaf {
        return None;
    }
    let per_bundle: Vec<Option<SplitCandidate>> = bundles
        .par_iter()
        .zip(hists.par_iter())
        .map(|(bundle, hist)| {
            let mut best: Option<SplitCandidate> = None;
            for pos in 0..bundle.members.len() {
                let fi = bundle.members[pos];
                // A member's bins in a multi-feature bundle never include
                // real missing rows (eligibility excludes them).
                let (missing, bins) = bundle.member_histogram(pos, hist, total, features);
                let candidate = best_feature_split(
                    fi,
                    &features[fi],
                    missing,
                    &bins,
                    total,
                    min_data_in_leaf,
                );
                if let Some(c) = candidate {
                    if best.as_ref().map_or(true, |b| c.gain > b.gain) {
                        best = Some(c);
                    }
                }
            }
            best
        })
        .collect();
    let mut best: Option<SplitCandidate> = None;
    for candidate in per_bundle.into_iter().flatten() {
        if best.as_ref().map_or(true, |b| candidate.gain > b.gain) {
            best = Some(candidate);
        }
    }
    best
}

/// Per-tree growth parameters.
#[derive(Debug, Clone, Copy)]
pub struct GrowParams {
    pub max_leaves: usize,
    pub min_data_in_leaf: u32,
    pub learning_rate: f64,
    pub cap_leaf_score: bool,
}

enum ArenaNode {
    Pending,
    Leaf { value: f64, count: u32 },
    Internal {
        condition: SplitCondition,
        left: usize,
        right: usize,
    },
}

struct LeafState {
    node_id: usize,
    rows: Vec<u32>,
    hists: Vec<Vec<HistBin>>,
    total: HistBin,
    best: Option<SplitCandidate>,
}

fn node_histograms(
    features: &[BinnedFeature],
    bundles: &[Bundle],
    rows: &[u32],
    grad: &[f64],
    hess: &[f64],
) -> Vec<Vec<HistBin>> {
    bundles
        .par_iter()
        .map(|bundle| {
            super::binning::accumulate_histogram(
                bundle.codes(features),
                rows,
                grad,
                hess,
                bundle.n_slots,
            )
        })
        .collect()
}

fn totals_of(rows: &[u32], grad: &[f64], hess: &[f64]) -> HistBin {
    let mut t = HistBin::default();
    for &r in rows {
        t.grad += grad[r as usize];
        t.hess += hess[r as usize];
        t.count += 1;
    }
    t
}

/// Grows one tree leaf-wise: the frontier leaf with the largest
/// admissible gain splits next, until `max_leaves` is reached or no leaf
/// has a positive-gain split. Gradients/hessians are the (possibly
/// sample-weighted) dense per-row vectors; `rows` selects the rows this
/// tree trains on. Leaf values are computed from the raw row sums, capped
/// for the Poisson objective and scaled by the learning rate.
pub fn grow_tree_leafwise(
    features: &[BinnedFeature],
    bundles: &[Bundle],
    rows: Vec<u32>,
    grad: &[f64],
    hess: &[f64],
    params: &GrowParams,
) -> TreeNode {
    assert!(!rows.is_empty(), "cannot grow a tree on no rows");
    let mut arena: Vec<ArenaNode> = vec![ArenaNode::Pending];
    let mut leaves: Vec<Option<LeafState>> = Vec::new();

    let total = totals_of(&rows, grad, hess);
    let hists = node_histograms(features, bundles, &rows, grad, hess);
    let best = best_split(features, bundles, &hists, total, params.min_data_in_leaf);
    leaves.push(Some(LeafState {
        node_id: 0,
        rows,
        hists,
        total,
        best,
    }));
    let mut n_leaves = 1;

    while n_leaves < params.max_leaves {
        // Frontier leaf with the largest gain; earliest leaf wins ties.
        let mut chosen: Option<(usize, f64)> = None;
        for (i, leaf) in leaves.iter().enumerate() {
            if let Some(LeafState {
                best: Some(candidate),
                ..
            }) = leaf
            {
                if chosen.map_or(true, |(_, g)| candidate.gain > g) {
                    chosen = Some((i, candidate.gain));
                }
            }
        }
        let Some((leaf_idx, _)) = chosen else { break };
        let leaf = leaves[leaf_idx].take().unwrap();
        let candidate = leaf.best.unwrap();

        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = leaf
            .rows
            .iter()
            .partition(|&&r| candidate.condition.goes_left_code(features, r as usize));

        let left_total = totals_of(&left_rows, grad, hess);
        let right_total = leaf.total.subtract(&left_total);

        // Histogram subtraction: accumulate the smaller child, derive the
        // sibling from the parent.
        let (small_rows, small_total, big_total, small_is_left) =
            if left_rows.len() <= right_rows.len() {
                (&left_rows, left_total, right_total, true)
            } else {
                (&right_rows, right_total, left_total, false)
            };
        let small_hists = node_histograms(features, bundles, small_rows, grad, hess);
        let big_hists: Vec<Vec<HistBin>> = leaf
            .hists
            .iter()
            .zip(small_hists.iter())
            .map(|(parent, small)| {
                parent
                    .iter()
                    .zip(small.iter())
                    .map(|(p, s)| p.subtract(s))
                    .collect()
            })
            .collect();
        let (left_hists, right_hists) = if small_is_left {
            (small_hists, big_hists)
        } else {
            (big_hists, small_hists)
        };
        let _ = (small_total, big_total);

        let left_best = best_split(
            features,
            bundles,
            &left_hists,
            left_total,
            params.min_data_in_leaf,
        );
        let right_best = best_split(
            features,
            bundles,
            &right_hists,
            right_total,
            params.min_data_in_leaf,
        );

        let left_id = arena.len();
        arena.push(ArenaNode::Pending);
        let right_id = arena.len();
        arena.push(ArenaNode::Pending);
        arena[leaf.node_id] = ArenaNode::Internal {
            condition: candidate.condition,
            left: left_id,
            right: right_id,
        };
        leaves.push(Some(LeafState {
            node_id: left_id,
            rows: left_rows,
            hists: left_hists,
            total: left_total,
            best: left_best,
        }));
        leaves.push(Some(LeafState {
            node_id: right_id,
            rows: right_rows,
            hists: right_hists,
            total: right_total,
            best: right_best,
        }));
        n_leaves += 1;
    }

    // Leaf values from raw row sums in ascending row order.
    for leaf in leaves.into_iter().flatten() {
        let mut g = 0.0;
        let mut h = 0.0;
        for &r in &leaf.rows {
            g += grad[r as usize];
            h += hess[r as usize];
        }
        let mut value = -g / (h + LAMBDA);
        if params.cap_leaf_score {
            value = value.clamp(-MAX_POISSON_LEAF, MAX_POISSON_LEAF);
        }
        arena[leaf.node_id] = ArenaNode::Leaf {
            value: value * params.learning_rate,
            count: leaf.rows.len() as u32,
        };
    }

    materialize(&arena, 0)
}

fn materialize(arena: &[ArenaNode], id: usize) -> TreeNode {
    match &arena[id] {
        ArenaNode::Pending => unreachable!("arena node left pending"),
        ArenaNode::Leaf { value, count } => TreeNode::Leaf {
            value: *value,
            count: *count,
        },
        ArenaNode::Internal {
            condition,
            left,
            right,
        } => TreeNode::Internal {
            condition: condition.clone(),
            left: Box::new(materialize(arena, *left)),
            right: Box::new(materialize(arena, *right)),
        },
    }
}
