//! Exclusive feature bundling: merges rarely-co-nonzero sparse features
//! into one histogram column so each tree-growing pass scans fewer columns.
//!
//! Bundling is a histogram-construction optimization only. Split finding
//! decodes every bundle back into its member features' exact histograms (at
//! conflict budget 0 the decoding is lossless), so the grown trees are
//! identical to unbundled training.

use super::binning::{BinnedFeature, HistBin};

/// One histogram column: either a single feature used directly, or a merge
/// of mutually (near-)exclusive features with non-overlapping slot ranges.
#[derive(Debug, Clone)]
pub struct Bundle {
    /// Original feature indices, in join order.
    pub members: Vec<usize>,
    /// Per member, the slot offset of its code range.
    pub offsets: Vec<u32>,
    /// Total slot count (1 + sum of member bin counts).
    pub n_slots: usize,
    /// Merged per-row codes; `None` for a singleton, which uses the
    /// feature's own codes.
    merged_codes: Option<Vec<u16>>,
}

impl Bundle {
    pub fn is_singleton(&self) -> bool {
        self.merged_codes.is_none()
    }

    /// The code column this bundle accumulates histograms over.
    pub fn codes<'a>(&'a self, features: &'a [BinnedFeature]) -> &'a [u16] {
        match &self.merged_codes {
            Some(codes) => codes,
            None => &features[self.members[0]].codes,
        }
    }

    /// Reconstructs one member's (missing bin, bins 1..=n_bins) histogram
    /// from the bundle histogram. For a bundled member, rows where the
    /// member is zero are spread over the default slot and the other
    /// members' slots, so its zero bin is recovered as
    /// `node_total - sum(other bins)`; the member has no missing rows by
    /// bundling eligibility.
    pub fn member_histogram(
        &self,
        member_pos: usize,
        hist: &[HistBin],
        node_total: HistBin,
        features: &[BinnedFeature],
    ) -> (HistBin, Vec<HistBin>) {
        let feature = &features[self.members[member_pos]];
        let n_bins = feature.n_bins as usize;
        if self.is_singleton() {
            return (hist[0], hist[1..=n_bins].to_vec());
        }
        let offset = self.offsets[member_pos] as usize;
        let zero = feature
            .zero_code
            .expect("bundled members have a zero bin") as usize;
        let mut bins = hist[offset + 1..=offset + n_bins].to_vec();
        let mut others = node_total;
        for (c, bin) in bins.iter().enumerate() {
            if c + 1 != zero {
                others = others.subtract(bin);
            }
        }
        bins[zero - 1] = others;
        (HistBin::default(), bins)
    }
}

/// Greedy bundle assignment. Features eligible for bundling (no missing
/// rows, a pure zero bin) are taken in descending nonzero count; each joins
/// the first bundle where the added pairwise conflicts (rows where both
/// sides are nonzero) keep the bundle's running conflict total within
/// `max_conflict`, else it opens a new bundle. Ineligible features become
/// singletons. On conflict rows the earliest-joined member keeps the slot.
pub fn efb_bundle(features: &[BinnedFeature], max_conflict: usize) -> Vec<Bundle> {
    let n_rows = features.first().map_or(0, |f| f.codes.len());

    let mut eligible: Vec<usize> = (0..features.len())
        .filter(|&i| {
            let f = &features[i];
            !f.has_missing && f.zero_code.is_some() && f.zero_bin_pure
        })
        .collect();
    eligible.sort_by_key(|&i| (std::cmp::Reverse(features[i].nonzero_count), i));

    struct OpenBundle {
        members: Vec<usize>,
        occupied: Vec<bool>,
        conflicts: usize,
        total_bins: usize,
    }
    let mut open: Vec<OpenBundle> = Vec::new();
    for &fi in &eligible {
        let f = &features[fi];
        let zero = f.zero_code.unwrap();
        let nonzero_rows: Vec<u32> = (0..n_rows as u32)
            .filter(|&r| f.codes[r as usize] != zero)
            .collect();

        let mut placed = false;
        for bundle in open.iter_mut() {
            if bundle.total_bins + f.n_bins as usize + 1 > u16::MAX as usize {
                continue;
            }
            let added = nonzero_rows
                .iter()
                .filter(|&&r| bundle.occupied[r as usize])
                .count();
            if bundle.conflicts + added <= max_conflict {
                for &r in &nonzero_rows {
                    bundle.occupied[r as usize] = true;
                }
                bundle.conflicts += added;
                bundle.total_bins += f.n_bins as usize;
                bundle.members.push(fi);
                placed = true;
                break;
            }
        }
        if !placed {
            let mut occupied = vec![false; n_rows];
            for &r in &nonzero_rows {
                occupied[r as usize] = true;
            }
            open.push(OpenBundle {
                members: vec![fi],
                occupied,
                conflicts: 0,
                total_bins: f.n_bins as usize,
            });
        }
    }

    let mut bundles = Vec::new();
    for ob in open {
        if ob.members.len() == 1 {
            bundles.push(singleton(ob.members[0], features));
            continue;
        }
        let mut offsets = Vec::with_capacity(ob.members.len());
        let mut merged = vec![0u16; n_rows];
        let mut offset = 0u32;
        for &fi in &ob.members {
            let f = &features[fi];
            let zero = f.zero_code.unwrap();
            for (r, &code) in f.codes.iter().enumerate() {
                if code != zero && merged[r] == 0 {
                    merged[r] = offset as u16 + code;
                }
            }
            offsets.push(offset);
            offset += f.n_bins as u32;
        }
        bundles.push(Bundle {
            members: ob.members,
            offsets,
            n_slots: offset as usize + 1,
            merged_codes: Some(merged),
        });
    }
    // Ineligible features ride along as singletons, in feature order.
    for (i, f) in features.iter().enumerate() {
        if !(!f.has_missing && f.zero_code.is_some() && f.zero_bin_pure) {
            bundles.push(singleton(i, features));
        }
    }
    bundles
}

/// The trivially unbundled assignment: one singleton per feature.
pub fn singleton_bundles(features: &[BinnedFeature]) -> Vec<Bundle> {
    (0..features.len()).map(|i| singleton(i, features)).collect()
}

fn singleton(feature: usize, features: &[BinnedFeature]) -> Bundle {
    Bundle {
        members: vec![feature],
        offsets: vec![0],
        n_slots: features[feature].n_bins as usize + 1,
        merged_codes: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Column, ColumnKind, FeatureValue};
    use crate::gbdt::binning::{accumulate_histogram, bin_feature};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn numeric(name: &str, values: Vec<f64>) -> BinnedFeature {
        let col = Column {
            name: name.into(),
            kind: ColumnKind::Numeric,
            values: values.into_iter().map(Some).collect(),
            levels: None,
        };
        bin_feature(&col, 255).unwrap()
    }

    #[test]
    fn mutually_exclusive_one_hots_share_a_bundle() {
        let a = numeric("a", vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let b = numeric("b", vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let bundles = efb_bundle(&[a, b], 0);
        assert_eq!(bundles.len(), 1);
        assert_eq!(bundles[0].members, vec![0, 1]);
        assert!(!bundles[0].is_singleton());
    }

    #[test]
    fn dense_columns_stay_separate() {
        let a = numeric("a", vec![1.0, 2.0, 3.0, 4.0]);
        let b = numeric("b", vec![4.0, 3.0, 2.0, 1.0]);
        let bundles = efb_bundle(&[a, b], 0);
        assert_eq!(bundles.len(), 2);
        assert!(bundles.iter().all(|b| b.is_singleton()));
    }

    #[test]
    fn conflicting_sparse_columns_respect_budget() {
        // Overlap on one row: rejected at budget 0, bundled at budget 1.
        let a = numeric("a", vec![1.0, 1.0, 0.0, 0.0]);
        let b = numeric("b", vec![1.0, 0.0, 1.0, 0.0]);
        let zero_budget = efb_bundle(&[a.clone(), b.clone()], 0);
        assert_eq!(zero_budget.len(), 2);
        let one_budget = efb_bundle(&[a, b], 1);
        assert_eq!(one_budget.len(), 1);
    }

    #[test]
    fn greedy_matches_exhaustive_oracle_on_small_instances() {
        // Independent re-derivation of the greedy over explicit row sets.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _case in 0..50 {
            let n = 40;
            let cols: Vec<BinnedFeature> = (0..6)
                .map(|i| {
                    let values: Vec<f64> = (0..n)
                        .map(|_| {
                            if rng.random_bool(0.15) {
                                rng.random_range(1..4) as f64
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    numeric(&format!("c{}", i), values)
                })
                .collect();
            let budget = 2;
            let bundles = efb_bundle(&cols, budget);

            // Oracle: same ordering rule, explicit set arithmetic.
            let mut order: Vec<usize> = (0..6).collect();
            order.sort_by_key(|&i| (std::cmp::Reverse(cols[i].nonzero_count), i));
            let nz: Vec<std::collections::BTreeSet<usize>> = cols
                .iter()
                .map(|f| {
                    (0..n)
                        .filter(|&r| f.codes[r] != f.zero_code.unwrap())
                        .collect()
                })
                .collect();
            let mut oracle: Vec<(Vec<usize>, std::collections::BTreeSet<usize>, usize)> = Vec::new();
            for &fi in &order {
                let mut placed = false;
                for (members, occupied, conflicts) in oracle.iter_mut() {
                    let added = nz[fi].intersection(occupied).count();
                    if *conflicts + added <= budget {
                        members.push(fi);
                        occupied.extend(nz[fi].iter());
                        *conflicts += added;
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    oracle.push((vec![fi], nz[fi].clone(), 0));
                }
            }
            let got: Vec<Vec<usize>> = bundles.iter().map(|b| b.members.clone()).collect();
            let want: Vec<Vec<usize>> = oracle.into_iter().map(|o| o.0).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn bundle_histograms_decode_to_member_histograms() {
        // The reconstruction must equal the member's direct histogram at
        // conflict budget 0, including shared-zero-bin subtleties.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let n = 200;
        let mut a_vals = vec![0.0; n];
        let mut b_vals = vec![0.0; n];
        for r in 0..n {
            match r % 4 {
                0 => a_vals[r] = rng.random_range(1..5) as f64,
                1 => b_vals[r] = rng.random_range(1..3) as f64,
                _ => {}
            }
        }
        let features = vec![numeric("a", a_vals), numeric("b", b_vals)];
        let bundles = efb_bundle(&features, 0);
        assert_eq!(bundles.len(), 1);
        let bundle = &bundles[0];

        let grads: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let hess: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let rows: Vec<u32> = (0..n as u32).collect();
        let bundle_hist =
            accumulate_histogram(bundle.codes(&features), &rows, &grads, &hess, bundle.n_slots);
        let mut total = HistBin::default();
        for b in &bundle_hist {
            total.grad += b.grad;
            total.hess += b.hess;
            total.count += b.count;
        }

        for (pos, &fi) in bundle.members.iter().enumerate() {
            let f = &features[fi];
            let direct = accumulate_histogram(&f.codes, &rows, &grads, &hess, f.n_bins as usize + 1);
            let (missing, bins) = bundle.member_histogram(pos, &bundle_hist, total, &features);
            assert_eq!(missing.count, 0);
            for (c, bin) in bins.iter().enumerate() {
                let want = direct[c + 1];
                assert_eq!(bin.count, want.count, "feature {} bin {}", fi, c + 1);
                assert!((bin.grad - want.grad).abs() < 1e-9);
                assert!((bin.hess - want.hess).abs() < 1e-9);
            }
        }
    }
}
